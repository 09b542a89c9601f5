//! Scenario and experiment configuration, read from TOML.
//!
//! Every file starts with `version = 1`. Sections are optional unless a
//! command needs them; see `docs/config.md` for the full schema.

use std::path::Path;

use jumplab::fields::{InclusionScenario, LowerOrderTerms, PiecewiseCoefficient};
use jumplab::geometry::{InterfaceGraph, WeightConfig};
use jumplab::mat::Vec2;
use jumplab::sizeest::SizeMode;
use jumplab::solver::Domain;
use jumplab::{Error, Result};
use serde::{Deserialize, Serialize};

pub const CONFIG_VERSION: u32 = 1;

/// A Fourier mode `amplitude · cos(k · p + phase)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Mode {
    pub amplitude: f64,
    pub k: Vec2,
    pub phase: f64,
}

/// Dirichlet data `φ`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum BoundaryData {
    /// `c0 + c · p`
    Linear { c0: f64, c: Vec2 },
    /// `e^{k x} sin(k y)`, harmonic.
    ExpSin { k: f64 },
    /// `c0 + c · p + Σ modes`
    Trig {
        c0: f64,
        c: Vec2,
        #[serde(default)]
        modes: Vec<Mode>,
    },
}

impl BoundaryData {
    pub fn eval(&self, p: Vec2) -> f64 {
        match self {
            BoundaryData::Linear { c0, c } => c0 + c[0] * p[0] + c[1] * p[1],
            BoundaryData::ExpSin { k } => (k * p[0]).exp() * (k * p[1]).sin(),
            BoundaryData::Trig { c0, c, modes } => {
                c0 + c[0] * p[0]
                    + c[1] * p[1]
                    + modes
                        .iter()
                        .map(|m| m.amplitude * (m.k[0] * p[0] + m.k[1] * p[1] + m.phase).cos())
                        .sum::<f64>()
            }
        }
    }
}

fn default_h() -> f64 {
    1.0 / 32.0
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MeshConfig {
    #[serde(default = "default_h")]
    pub h: f64,
}

impl Default for MeshConfig {
    fn default() -> Self {
        MeshConfig { h: default_h() }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverConfig {
    #[serde(default)]
    pub tolerance: Option<f64>,
    #[serde(default)]
    pub max_iterations: Option<usize>,
}

/// What `solve` compares the discrete solution against.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Reference {
    /// The boundary data is itself an exact solution.
    BoundaryData,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolveConfig {
    #[serde(default)]
    pub reference: Option<Reference>,
    /// Largest acceptable nodal error against the reference.
    #[serde(default)]
    pub max_nodal_error: Option<f64>,
}

fn half() -> f64 {
    0.5
}
fn jump_range() -> [f64; 2] {
    [0.2, 5.0]
}
fn modes() -> usize {
    3
}
fn wavenumbers() -> [f64; 2] {
    [1.0, 4.0]
}
fn twenty() -> usize {
    20
}

/// Random smooth Dirichlet data and coefficient jumps for an ensemble.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EnsembleConfig {
    #[serde(default = "twenty")]
    pub size: usize,
    #[serde(default = "half")]
    pub fit_fraction: f64,
    /// Range of `A₊ / A₋`, sampled log-uniformly.
    #[serde(default = "jump_range")]
    pub jump_ratio: [f64; 2],
    /// Number of Fourier modes added to the affine part.
    #[serde(default = "modes")]
    pub modes: usize,
    #[serde(default = "wavenumbers")]
    pub wavenumber: [f64; 2],
}

impl Default for EnsembleConfig {
    fn default() -> Self {
        EnsembleConfig {
            size: twenty(),
            fit_fraction: half(),
            jump_ratio: jump_range(),
            modes: modes(),
            wavenumber: wavenumbers(),
        }
    }
}

fn one() -> f64 {
    1.0
}
fn eighth() -> f64 {
    0.125
}

/// `R1 = r1_fraction · R`, `R2 = r2_fraction · R`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RegionsConfig {
    #[serde(default = "one")]
    pub r1_fraction: f64,
    #[serde(default = "eighth")]
    pub r2_fraction: f64,
    /// `gradient` or `value`.
    #[serde(default = "gradient")]
    pub form: String,
}

fn gradient() -> String {
    "gradient".into()
}

impl Default for RegionsConfig {
    fn default() -> Self {
        RegionsConfig {
            r1_fraction: one(),
            r2_fraction: eighth(),
            form: gradient(),
        }
    }
}

fn theta() -> f64 {
    jumplab::verify::DEFAULT_THETA
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SphereConfig {
    pub center: Vec2,
    pub radii: [f64; 3],
    #[serde(default = "theta")]
    pub theta: f64,
}

fn rho() -> f64 {
    0.05
}
fn spacing() -> f64 {
    0.05
}
fn ten_percent() -> f64 {
    0.1
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PropagationConfig {
    #[serde(default = "rho")]
    pub rho: f64,
    /// Spacing of the grid of ball centers.
    #[serde(default = "spacing")]
    pub spacing: f64,
    /// Also solve at `h/2` and require the constant to move by at most
    /// `tolerance` (relative).
    #[serde(default)]
    pub refine_check: bool,
    #[serde(default = "ten_percent")]
    pub tolerance: f64,
}

impl Default for PropagationConfig {
    fn default() -> Self {
        PropagationConfig {
            rho: rho(),
            spacing: spacing(),
            refine_check: false,
            tolerance: ten_percent(),
        }
    }
}

fn tau_multiples() -> Vec<f64> {
    vec![1.0, 2.0, 4.0]
}
fn resolution() -> usize {
    32
}
fn twenty_percent() -> f64 {
    0.2
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CarlemanConfig {
    /// The `τ` grid as multiples of `τ₀`.
    #[serde(default = "tau_multiples")]
    pub tau_multiples: Vec<f64>,
    #[serde(default = "resolution")]
    pub resolution: usize,
    /// Largest relative change of the max ratio under 2× refinement.
    #[serde(default = "twenty_percent")]
    pub tolerance: f64,
    /// Test pairs; the built-in five when empty.
    #[serde(default)]
    pub pairs: Vec<jumplab::verify::TestPair>,
}

impl Default for CarlemanConfig {
    fn default() -> Self {
        CarlemanConfig {
            tau_multiples: tau_multiples(),
            resolution: resolution(),
            tolerance: twenty_percent(),
            pairs: Vec::new(),
        }
    }
}

fn fat() -> SizeMode {
    SizeMode::Fat
}
fn radii() -> [f64; 2] {
    [0.05, 0.2]
}
fn contrast() -> f64 {
    2.0
}
fn containment() -> f64 {
    0.9
}
fn archive() -> String {
    "size_calibration.json".into()
}
fn alpha() -> f64 {
    1.0
}

/// A family of disk inclusions inside `Ω₊` for the size constants.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SizeConfig {
    #[serde(default = "fat")]
    pub mode: SizeMode,
    #[serde(default = "twenty")]
    pub members: usize,
    #[serde(default = "half")]
    pub fit_fraction: f64,
    #[serde(default = "radii")]
    pub radii: [f64; 2],
    /// `Â = contrast · A₊`.
    #[serde(default = "contrast")]
    pub contrast: f64,
    pub eta: f64,
    pub zeta: f64,
    /// Clearance between each disk and `∂Ω₊`.
    pub d1: f64,
    /// Fatness parameter shared by the family.
    pub fat_h: f64,
    /// Minimum holdout containment for `calibrate` to succeed.
    #[serde(default = "containment")]
    pub containment: f64,
    /// Archive file name, relative to the output directory.
    #[serde(default = "archive")]
    pub archive: String,
    /// Outer boundary Hölder exponent for the boundary-data ratio.
    #[serde(default = "alpha")]
    pub alpha: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Config {
    pub version: u32,
    #[serde(default)]
    pub name: String,
    #[serde(default)]
    pub seed: Option<u64>,
    #[serde(default)]
    pub safety: Option<f64>,
    pub domain: Domain,
    #[serde(default)]
    pub interface: Option<InterfaceGraph>,
    pub coefficient: PiecewiseCoefficient,
    #[serde(default)]
    pub inclusion: Option<InclusionScenario>,
    #[serde(default)]
    pub lower_order: Option<LowerOrderTerms>,
    #[serde(default)]
    pub boundary: Option<BoundaryData>,
    #[serde(default)]
    pub mesh: MeshConfig,
    #[serde(default)]
    pub solver: SolverConfig,
    #[serde(default)]
    pub solve: SolveConfig,
    #[serde(default)]
    pub weight: Option<WeightConfig>,
    #[serde(default)]
    pub regions: RegionsConfig,
    #[serde(default)]
    pub ensemble: EnsembleConfig,
    #[serde(default)]
    pub sphere: Option<SphereConfig>,
    #[serde(default)]
    pub propagation: PropagationConfig,
    #[serde(default)]
    pub carleman: CarlemanConfig,
    #[serde(default)]
    pub size: Option<SizeConfig>,
}

impl Config {
    pub fn parse(text: &str) -> Result<Self> {
        let cfg: Config = toml::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::InvalidInput(format!("cannot read config {}: {e}", path.display())))?;
        Self::parse(&text)
    }

    pub fn validate(&self) -> Result<()> {
        if self.version != CONFIG_VERSION {
            return Err(Error::InvalidInput(format!(
                "unsupported config version {} (expected {CONFIG_VERSION})",
                self.version
            )));
        }
        if !(self.mesh.h > 0.0 && self.mesh.h.is_finite()) {
            return Err(Error::InvalidInput(format!("mesh h = {} must be positive", self.mesh.h)));
        }
        let r = self.domain.rect;
        if !(r.x1 > r.x0 && r.y1 > r.y0) {
            return Err(Error::InvalidInput("domain rectangle is empty".into()));
        }
        let e = &self.ensemble;
        if !(e.fit_fraction > 0.0 && e.fit_fraction < 1.0) {
            return Err(Error::InvalidInput(format!(
                "fit fraction {} must lie in (0, 1) so that fit and holdout fractions sum to 1",
                e.fit_fraction
            )));
        }
        if !(e.jump_ratio[0] > 0.0 && e.jump_ratio[0] <= e.jump_ratio[1]) {
            return Err(Error::InvalidInput("jump ratio range must be positive and ordered".into()));
        }
        if let Some(s) = self.safety {
            if !(s >= 1.0 && s.is_finite()) {
                return Err(Error::InvalidInput(format!("safety factor {s} must be at least 1")));
            }
        }
        if let Some(l) = &self.lower_order {
            l.validate(self.coefficient.lambda0)?;
        }
        if !matches!(self.regions.form.as_str(), "gradient" | "value") {
            return Err(Error::InvalidInput(format!(
                "regions.form must be \"gradient\" or \"value\", got {:?}",
                self.regions.form
            )));
        }
        Ok(())
    }

    pub fn boundary(&self) -> Result<&BoundaryData> {
        self.boundary
            .as_ref()
            .ok_or_else(|| Error::InvalidInput("config has no [boundary] data".into()))
    }

    pub fn weight(&self) -> Result<&WeightConfig> {
        self.weight
            .as_ref()
            .ok_or_else(|| Error::InvalidInput("config has no [weight] section".into()))
    }

    pub fn size(&self) -> Result<&SizeConfig> {
        self.size
            .as_ref()
            .ok_or_else(|| Error::InvalidInput("config has no [size] section".into()))
    }
}
