//! Interface- and inclusion-fitted triangulations of a rectangle.
//!
//! The outer boundary, the interface graph and the inclusion boundary enter
//! a constrained Delaunay triangulation as polylines, which is then refined
//! for angle and size. Refinement points that land on chords of curved
//! boundaries are projected back onto the curves.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use spade::{AngleLimit, ConstrainedDelaunayTriangulation, Point2, RefinementParameters, Triangulation};

use crate::fields::{distance_to_plus_boundary, InclusionContext, InclusionScenario, Rect, Shape};
use crate::geometry::InterfaceGraph;
use crate::mat::{dist, Vec2};

pub const MARK_BOTTOM: u8 = 1;
pub const MARK_RIGHT: u8 = 2;
pub const MARK_TOP: u8 = 4;
pub const MARK_LEFT: u8 = 8;
pub const MARK_INTERFACE: u8 = 16;
pub const MARK_INCLUSION: u8 = 32;
pub const MARK_OUTER: u8 = MARK_BOTTOM | MARK_RIGHT | MARK_TOP | MARK_LEFT;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RectSide {
    Bottom,
    Right,
    Top,
    Left,
}

impl RectSide {
    pub const ALL: [RectSide; 4] = [RectSide::Bottom, RectSide::Right, RectSide::Top, RectSide::Left];

    pub fn mark(self) -> u8 {
        match self {
            RectSide::Bottom => MARK_BOTTOM,
            RectSide::Right => MARK_RIGHT,
            RectSide::Top => MARK_TOP,
            RectSide::Left => MARK_LEFT,
        }
    }

    pub fn outward_normal(self) -> Vec2 {
        match self {
            RectSide::Bottom => [0.0, -1.0],
            RectSide::Right => [1.0, 0.0],
            RectSide::Top => [0.0, 1.0],
            RectSide::Left => [-1.0, 0.0],
        }
    }
}

/// Rectangular domain with a Dirichlet or natural (zero flux) condition on
/// each side.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Domain {
    pub rect: Rect,
    /// Sides carrying the natural condition; all others are Dirichlet.
    #[serde(default)]
    pub natural: Vec<RectSide>,
}

impl Domain {
    pub fn dirichlet(rect: Rect) -> Self {
        Domain { rect, natural: Vec::new() }
    }

    pub fn with_natural(rect: Rect, natural: &[RectSide]) -> Self {
        Domain {
            rect,
            natural: natural.to_vec(),
        }
    }

    pub fn is_dirichlet(&self, side: RectSide) -> bool {
        !self.natural.contains(&side)
    }

    pub fn dirichlet_mask(&self) -> u8 {
        RectSide::ALL
            .iter()
            .filter(|s| self.is_dirichlet(**s))
            .fold(0, |m, s| m | s.mark())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Tag {
    Plus,
    Minus,
    Inclusion,
}

impl Tag {
    fn as_str(self) -> &'static str {
        match self {
            Tag::Plus => "plus",
            Tag::Minus => "minus",
            Tag::Inclusion => "inclusion",
        }
    }

    fn parse(s: &str) -> Result<Tag> {
        match s {
            "plus" => Ok(Tag::Plus),
            "minus" => Ok(Tag::Minus),
            "inclusion" => Ok(Tag::Inclusion),
            other => Err(Error::Parse(format!("unknown triangle tag {other:?}"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Mesh {
    pub vertices: Vec<Vec2>,
    /// Counter-clockwise vertex triples.
    pub triangles: Vec<[usize; 3]>,
    pub tags: Vec<Tag>,
    /// Bit set of `MARK_*` flags per vertex.
    pub markers: Vec<u8>,
    pub domain: Domain,
    /// Target element size the mesh was built for.
    pub h: f64,
    pub interface_fitted: bool,
}

/// An interior edge whose two triangles carry different tags.
#[derive(Clone, Copy, Debug)]
pub struct TagEdge {
    pub a: usize,
    pub b: usize,
    pub first: usize,
    pub second: usize,
}

impl Mesh {
    pub fn n_vertices(&self) -> usize {
        self.vertices.len()
    }

    pub fn n_triangles(&self) -> usize {
        self.triangles.len()
    }

    pub fn corners(&self, t: usize) -> [Vec2; 3] {
        let [a, b, c] = self.triangles[t];
        [self.vertices[a], self.vertices[b], self.vertices[c]]
    }

    pub fn area(&self, t: usize) -> f64 {
        signed_area(self.corners(t))
    }

    pub fn centroid(&self, t: usize) -> Vec2 {
        let [a, b, c] = self.corners(t);
        [(a[0] + b[0] + c[0]) / 3.0, (a[1] + b[1] + c[1]) / 3.0]
    }

    pub fn min_angle_deg(&self) -> f64 {
        (0..self.n_triangles())
            .map(|t| min_angle(self.corners(t)))
            .fold(180.0, f64::min)
    }

    pub fn max_diameter(&self) -> f64 {
        (0..self.n_triangles())
            .map(|t| {
                let [a, b, c] = self.corners(t);
                dist(a, b).max(dist(b, c)).max(dist(c, a))
            })
            .fold(0.0, f64::max)
    }

    pub fn total_area(&self) -> f64 {
        (0..self.n_triangles()).map(|t| self.area(t)).sum()
    }

    pub fn is_dirichlet_node(&self, v: usize) -> bool {
        self.markers[v] & self.domain.dirichlet_mask() != 0
    }

    fn edge_map(&self) -> BTreeMap<(usize, usize), Vec<usize>> {
        let mut map: BTreeMap<(usize, usize), Vec<usize>> = BTreeMap::new();
        for (t, tri) in self.triangles.iter().enumerate() {
            for k in 0..3 {
                let (a, b) = (tri[k], tri[(k + 1) % 3]);
                map.entry((a.min(b), a.max(b))).or_default().push(t);
            }
        }
        map
    }

    /// Boundary edges `(a, b, triangle, side)`.
    pub fn boundary_edges(&self) -> Vec<(usize, usize, usize, RectSide)> {
        let mut out = Vec::new();
        for ((a, b), ts) in self.edge_map() {
            if ts.len() != 1 {
                continue;
            }
            let common = self.markers[a] & self.markers[b] & MARK_OUTER;
            if let Some(side) = RectSide::ALL.iter().find(|s| common & s.mark() != 0) {
                out.push((a, b, ts[0], *side));
            }
        }
        out
    }

    /// Interior edges separating triangles with different tags.
    pub fn tag_edges(&self) -> Vec<TagEdge> {
        self.edge_map()
            .into_iter()
            .filter_map(|((a, b), ts)| {
                (ts.len() == 2 && self.tags[ts[0]] != self.tags[ts[1]]).then(|| TagEdge {
                    a,
                    b,
                    first: ts[0],
                    second: ts[1],
                })
            })
            .collect()
    }

    /// Plain-text export; see the README for the format.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let r = self.domain.rect;
        let natural: Vec<&str> = self
            .domain
            .natural
            .iter()
            .map(|side| match side {
                RectSide::Bottom => "bottom",
                RectSide::Right => "right",
                RectSide::Top => "top",
                RectSide::Left => "left",
            })
            .collect();
        let _ = writeln!(s, "jumplab-mesh 1");
        let _ = writeln!(s, "domain {:e} {:e} {:e} {:e}", r.x0, r.x1, r.y0, r.y1);
        let _ = writeln!(s, "natural {}", if natural.is_empty() { "-".to_string() } else { natural.join(",") });
        let _ = writeln!(s, "h {:e}", self.h);
        let _ = writeln!(s, "fitted {}", u8::from(self.interface_fitted));
        let _ = writeln!(s, "vertices {}", self.vertices.len());
        for (v, m) in self.vertices.iter().zip(&self.markers) {
            let _ = writeln!(s, "{:e} {:e} {}", v[0], v[1], m);
        }
        let _ = writeln!(s, "triangles {}", self.triangles.len());
        for (t, tag) in self.triangles.iter().zip(&self.tags) {
            let _ = writeln!(s, "{} {} {} {}", t[0], t[1], t[2], tag.as_str());
        }
        s
    }

    pub fn from_text(text: &str) -> Result<Mesh> {
        let mut lines = text.lines().filter(|l| !l.trim().is_empty() && !l.starts_with('#'));
        let mut next = |what: &str| lines.next().ok_or_else(|| Error::Parse(format!("missing {what}")));
        let bad = |l: &str| Error::Parse(format!("malformed line {l:?}"));
        let num = |t: Option<&str>, l: &str| -> Result<f64> { t.and_then(|t| t.parse().ok()).ok_or_else(|| bad(l)) };

        let header = next("header")?;
        if header.trim() != "jumplab-mesh 1" {
            return Err(Error::Parse(format!("unsupported mesh header {header:?}")));
        }
        let l = next("domain")?;
        let mut it = l.split_whitespace();
        if it.next() != Some("domain") {
            return Err(bad(l));
        }
        let rect = Rect::new(num(it.next(), l)?, num(it.next(), l)?, num(it.next(), l)?, num(it.next(), l)?);
        let l = next("natural")?;
        let spec = l.strip_prefix("natural ").ok_or_else(|| bad(l))?.trim();
        let mut natural = Vec::new();
        if spec != "-" {
            for name in spec.split(',') {
                natural.push(match name {
                    "bottom" => RectSide::Bottom,
                    "right" => RectSide::Right,
                    "top" => RectSide::Top,
                    "left" => RectSide::Left,
                    _ => return Err(bad(l)),
                });
            }
        }
        let l = next("h")?;
        let h = num(l.strip_prefix("h "), l)?;
        let l = next("fitted")?;
        let fitted = l.trim() == "fitted 1";
        let l = next("vertex count")?;
        let nv: usize = l.strip_prefix("vertices ").and_then(|t| t.trim().parse().ok()).ok_or_else(|| bad(l))?;
        let mut vertices = Vec::with_capacity(nv);
        let mut markers = Vec::with_capacity(nv);
        for _ in 0..nv {
            let l = next("vertex")?;
            let mut it = l.split_whitespace();
            vertices.push([num(it.next(), l)?, num(it.next(), l)?]);
            markers.push(it.next().and_then(|t| t.parse().ok()).ok_or_else(|| bad(l))?);
        }
        let l = next("triangle count")?;
        let nt: usize = l.strip_prefix("triangles ").and_then(|t| t.trim().parse().ok()).ok_or_else(|| bad(l))?;
        let mut triangles = Vec::with_capacity(nt);
        let mut tags = Vec::with_capacity(nt);
        for _ in 0..nt {
            let l = next("triangle")?;
            let mut it = l.split_whitespace();
            let mut tri = [0usize; 3];
            for v in tri.iter_mut() {
                *v = it.next().and_then(|t| t.parse().ok()).ok_or_else(|| bad(l))?;
                if *v >= nv {
                    return Err(bad(l));
                }
            }
            triangles.push(tri);
            tags.push(Tag::parse(it.next().ok_or_else(|| bad(l))?)?);
        }
        Ok(Mesh {
            vertices,
            triangles,
            tags,
            markers,
            domain: Domain { rect, natural },
            h,
            interface_fitted: fitted,
        })
    }
}

fn signed_area([a, b, c]: [Vec2; 3]) -> f64 {
    0.5 * ((b[0] - a[0]) * (c[1] - a[1]) - (c[0] - a[0]) * (b[1] - a[1]))
}

fn min_angle(p: [Vec2; 3]) -> f64 {
    let mut m = 180.0f64;
    for k in 0..3 {
        let (a, b, c) = (p[k], p[(k + 1) % 3], p[(k + 2) % 3]);
        let u = [b[0] - a[0], b[1] - a[1]];
        let v = [c[0] - a[0], c[1] - a[1]];
        let cos = (u[0] * v[0] + u[1] * v[1]) / (u[0].hypot(u[1]) * v[0].hypot(v[1]));
        m = m.min(cos.clamp(-1.0, 1.0).acos().to_degrees());
    }
    m
}

/// Builds an interface- and inclusion-fitted triangulation with maximum
/// element diameter at most `1.5 h_target` and minimum angle at least 20°
/// (away from acute polygon corners, which are kept as given).
pub fn build_mesh(
    domain: &Domain,
    interface: Option<&InterfaceGraph>,
    inclusion: Option<&InclusionScenario>,
    h_target: f64,
) -> Result<Mesh> {
    let h = h_target;
    if !(h > 0.0 && h.is_finite()) {
        return Err(Error::InvalidInput(format!("mesh size {h} must be positive")));
    }
    let r = domain.rect;
    if !(r.width() > 0.0 && r.height() > 0.0) {
        return Err(Error::InvalidInput("empty domain rectangle".into()));
    }
    let nx = (r.width() / h - 1e-9).ceil().max(1.0) as usize;
    let ny = (r.height() / h - 1e-9).ceil().max(1.0) as usize;
    let xs: Vec<f64> = (0..=nx).map(|i| r.x0 + r.width() * i as f64 / nx as f64).collect();

    let interface_line: Option<Vec<Vec2>> = match interface {
        Some(g) => {
            let line: Vec<Vec2> = xs.iter().map(|&x| [x, g.height_at(x)]).collect();
            let lo = line.iter().map(|p| p[1]).fold(f64::INFINITY, f64::min);
            let hi = line.iter().map(|p| p[1]).fold(f64::NEG_INFINITY, f64::max);
            let clearance = (lo - r.y0).min(r.y1 - hi);
            if clearance <= 0.0 {
                return Err(Error::GeometryTooThin(format!("interface leaves the domain (clearance {clearance})")));
            }
            if g.d0 > 0.0 && g.d0 < 3.0 * h {
                return Err(Error::GeometryTooThin(format!("d0 = {} < 3 h = {}", g.d0, 3.0 * h)));
            }
            if clearance < g.d0 {
                return Err(Error::InvalidInput(format!(
                    "interface clearance {clearance} violates d0 = {}",
                    g.d0
                )));
            }
            Some(line)
        }
        None => None,
    };

    let inclusion_loop: Option<Vec<Vec2>> = match inclusion {
        Some(s) => Some(inclusion_boundary(s, domain, interface, h)?),
        None => None,
    };
    let geometry = Inputs {
        domain,
        interface,
        inclusion,
        xs: &xs,
        ny,
        interface_line: interface_line.as_deref(),
        inclusion_loop: inclusion_loop.as_deref(),
        h,
    };
    // lattice spacing and area cap, coarsest first
    let mut last = None;
    for (spacing, cap) in [(1.0, 0.45), (0.9, 0.36), (0.8, 0.28)] {
        let mesh = triangulate(&geometry, spacing * h, cap * h * h)?;
        if mesh.max_diameter() <= 1.5 * h {
            return Ok(mesh);
        }
        last = Some(mesh);
    }
    Ok(last.expect("at least one attempt"))
}

struct Inputs<'a> {
    domain: &'a Domain,
    interface: Option<&'a InterfaceGraph>,
    inclusion: Option<&'a InclusionScenario>,
    xs: &'a [f64],
    ny: usize,
    interface_line: Option<&'a [Vec2]>,
    inclusion_loop: Option<&'a [Vec2]>,
    h: f64,
}

fn triangulate(g: &Inputs<'_>, spacing: f64, max_area: f64) -> Result<Mesh> {
    let Inputs {
        domain,
        interface,
        inclusion,
        xs,
        ny,
        interface_line,
        inclusion_loop,
        h,
    } = *g;
    let r = domain.rect;
    let mut cdt = Cdt::new();
    let mut insert = |p: Vec2| {
        cdt.insert(Point2::new(p[0], p[1]))
            .map_err(|e| Error::InvalidInput(format!("cannot insert mesh vertex ({}, {}): {e}", p[0], p[1])))
    };
    let corners = [[r.x0, r.y0], [r.x1, r.y0], [r.x1, r.y1], [r.x0, r.y1]];
    let corner_handles: Vec<_> = corners.iter().map(|&c| insert(c)).collect::<Result<_>>()?;
    for &x in xs {
        insert([x, r.y0])?;
        insert([x, r.y1])?;
    }
    for j in 1..ny {
        let y = r.y0 + r.height() * j as f64 / ny as f64;
        insert([r.x0, y])?;
        insert([r.x1, y])?;
    }
    let interface_handles: Vec<_> = match interface_line {
        Some(line) => line.iter().map(|&p| insert(p)).collect::<Result<_>>()?,
        None => Vec::new(),
    };
    let inclusion_handles: Vec<_> = match inclusion_loop {
        Some(lp) => lp.iter().map(|&p| insert(p)).collect::<Result<_>>()?,
        None => Vec::new(),
    };
    // interior lattice, kept clear of the constraint curves
    let rows = (r.height() / (spacing * 0.75f64.sqrt())).floor() as usize;
    for j in 1..=rows {
        let y = r.y0 + j as f64 * spacing * 0.75f64.sqrt();
        let shift = if j % 2 == 0 { 0.0 } else { 0.5 * spacing };
        let mut x = r.x0 + shift + spacing;
        while x < r.x1 {
            let p = [x, y];
            let clear_outer = r.inner_distance(p) > 0.45 * h;
            let clear_interface = interface.is_none_or(|g| (y - g.height_at(x)).abs() > 0.45 * h);
            let clear_inclusion = inclusion.is_none_or(|s| s.shape.signed_distance(p).abs() > 0.45 * h);
            if clear_outer && clear_interface && clear_inclusion {
                insert(p)?;
            }
            x += spacing;
        }
    }

    for k in 0..4 {
        cdt.add_constraint(corner_handles[k], corner_handles[(k + 1) % 4]);
    }
    for w in interface_handles.windows(2) {
        if !cdt.can_add_constraint(w[0], w[1]) {
            return Err(Error::InvalidInput("interface polyline intersects another constraint".into()));
        }
        cdt.add_constraint(w[0], w[1]);
    }
    if let Some(lp) = inclusion_loop {
        let n = lp.len();
        for k in 0..n {
            let (a, b) = (lp[k], lp[(k + 1) % n]);
            if on_same_side(r, a, b) {
                continue;
            }
            let (ha, hb) = (inclusion_handles[k], inclusion_handles[(k + 1) % n]);
            if !cdt.can_add_constraint(ha, hb) {
                return Err(Error::InvalidInput("inclusion boundary intersects another constraint".into()));
            }
            cdt.add_constraint(ha, hb);
        }
    }

    let budget = 50 * ((r.area() / (h * h)).ceil() as usize) + 10_000;
    let params = RefinementParameters::<f64>::new()
        .with_angle_limit(AngleLimit::from_deg(28.0))
        .with_max_allowed_area(max_area)
        .with_max_additional_vertices(budget);
    if !cdt.refine(params).refinement_complete {
        return Err(Error::InvalidInput(format!("mesh refinement did not finish for h = {h}")));
    }

    let mut vertices: Vec<Vec2> = cdt.vertices().map(|v| [v.position().x, v.position().y]).collect();
    let mut triangles = Vec::with_capacity(cdt.num_inner_faces());
    let mut tags = Vec::with_capacity(cdt.num_inner_faces());
    for f in cdt.inner_faces() {
        let [a, b, c] = f.vertices().map(|v| v.fix().index());
        let mut tri = [a, b, c];
        if signed_area([vertices[a], vertices[b], vertices[c]]) < 0.0 {
            tri.swap(1, 2);
        }
        let p = [vertices[a], vertices[b], vertices[c]];
        let centroid = [(p[0][0] + p[1][0] + p[2][0]) / 3.0, (p[0][1] + p[1][1] + p[2][1]) / 3.0];
        let tag = if interface_line.is_some_and(|l| centroid[1] < polyline_height(l, centroid[0])) {
            Tag::Minus
        } else if inclusion_loop.is_some_and(|l| point_in_polygon(l, centroid)) {
            Tag::Inclusion
        } else {
            Tag::Plus
        };
        triangles.push(tri);
        tags.push(tag);
    }

    let mut markers = vec![0u8; vertices.len()];
    for (v, m) in vertices.iter().zip(markers.iter_mut()) {
        if v[0] == r.x0 {
            *m |= MARK_LEFT;
        }
        if v[0] == r.x1 {
            *m |= MARK_RIGHT;
        }
        if v[1] == r.y0 {
            *m |= MARK_BOTTOM;
        }
        if v[1] == r.y1 {
            *m |= MARK_TOP;
        }
    }
    let mut seen = vec![[false; 3]; vertices.len()];
    for (tri, tag) in triangles.iter().zip(&tags) {
        for &v in tri {
            seen[v][*tag as usize] = true;
        }
    }
    for (v, [plus, minus, inc]) in seen.iter().enumerate() {
        if *minus && (*plus || *inc) {
            markers[v] |= MARK_INTERFACE;
        }
        if *inc && (*plus || *minus) {
            markers[v] |= MARK_INCLUSION;
        }
    }
    // points that refinement placed on chords of curved boundaries go back
    // onto the curves
    for v in 0..vertices.len() {
        if markers[v] & MARK_OUTER != 0 {
            continue;
        }
        if markers[v] & MARK_INTERFACE != 0 {
            if let Some(g) = interface {
                vertices[v][1] = g.height_at(vertices[v][0]);
            }
        } else if markers[v] & MARK_INCLUSION != 0 {
            if let Some(s) = inclusion {
                if !matches!(s.shape, Shape::Polygon { .. }) {
                    vertices[v] = s.shape.project(vertices[v]);
                }
            }
        }
    }

    let mut mesh = Mesh {
        vertices,
        triangles,
        tags,
        markers,
        domain: domain.clone(),
        h,
        interface_fitted: true,
    };
    if let Some(t) = (0..mesh.n_triangles()).find(|&t| mesh.area(t) <= 0.0) {
        let c = mesh.centroid(t);
        return Err(Error::GeometryTooThin(format!(
            "degenerate element near ({}, {}) after boundary projection",
            c[0], c[1]
        )));
    }
    renumber_rcm(&mut mesh);
    Ok(mesh)
}

type Cdt = ConstrainedDelaunayTriangulation<Point2<f64>>;

/// Closed boundary polyline of the inclusion, after the separation checks.
fn inclusion_boundary(
    s: &InclusionScenario,
    domain: &Domain,
    interface: Option<&InterfaceGraph>,
    h: f64,
) -> Result<Vec<Vec2>> {
    s.shape.validate()?;
    let r = domain.rect;
    let lp = s.shape.boundary_samples(0.75 * h);
    let tol = 1e-12 * (r.width() + r.height());
    for p in &lp {
        if p[0] < r.x0 - tol || p[0] > r.x1 + tol || p[1] < r.y0 - tol || p[1] > r.y1 + tol {
            return Err(Error::RegionOutsideDomain(format!(
                "inclusion point ({}, {}) lies outside the domain",
                p[0], p[1]
            )));
        }
        if let Some(g) = interface {
            if p[1] < g.height_at(p[0]) + tol {
                return Err(Error::InvalidInput("inclusion is not contained in the plus subdomain".into()));
            }
        }
    }
    if let Some(d1) = s.d1 {
        if d1 < 3.0 * h {
            return Err(Error::GeometryTooThin(format!("d1 = {d1} < 3 h = {}", 3.0 * h)));
        }
        let ctx = InclusionContext {
            domain: r,
            interface,
        };
        let actual = distance_to_plus_boundary(&s.shape, &ctx);
        if actual < d1 * (1.0 - 1e-9) {
            return Err(Error::InvalidInput(format!("dist(D, ∂Ω₊) = {actual} violates d1 = {d1}")));
        }
    }
    Ok(lp)
}

fn on_same_side(r: Rect, a: Vec2, b: Vec2) -> bool {
    (a[0] == r.x0 && b[0] == r.x0)
        || (a[0] == r.x1 && b[0] == r.x1)
        || (a[1] == r.y0 && b[1] == r.y0)
        || (a[1] == r.y1 && b[1] == r.y1)
}

fn polyline_height(line: &[Vec2], x: f64) -> f64 {
    let k = line.partition_point(|p| p[0] <= x).clamp(1, line.len() - 1);
    let (a, b) = (line[k - 1], line[k]);
    a[1] + (b[1] - a[1]) * (x - a[0]) / (b[0] - a[0])
}

fn point_in_polygon(poly: &[Vec2], p: Vec2) -> bool {
    let mut inside = false;
    let n = poly.len();
    for k in 0..n {
        let (a, b) = (poly[k], poly[(k + 1) % n]);
        if (a[1] > p[1]) != (b[1] > p[1]) {
            let x = a[0] + (p[1] - a[1]) * (b[0] - a[0]) / (b[1] - a[1]);
            if p[0] < x {
                inside = !inside;
            }
        }
    }
    inside
}

/// Reverse Cuthill-McKee renumbering, which keeps the stiffness matrix
/// bandwidth proportional to the number of nodes across the domain.
fn renumber_rcm(mesh: &mut Mesh) {
    let n = mesh.n_vertices();
    let mut adj = vec![Vec::new(); n];
    for tri in &mesh.triangles {
        for k in 0..3 {
            let (a, b) = (tri[k], tri[(k + 1) % 3]);
            adj[a].push(b);
            adj[b].push(a);
        }
    }
    for a in adj.iter_mut() {
        a.sort_unstable();
        a.dedup();
    }
    let mut order = Vec::with_capacity(n);
    let mut visited = vec![false; n];
    while order.len() < n {
        // start each component at its lowest-left vertex
        let start = (0..n)
            .filter(|&v| !visited[v])
            .min_by(|&a, &b| {
                let (pa, pb) = (mesh.vertices[a], mesh.vertices[b]);
                (pa[0] + pa[1]).total_cmp(&(pb[0] + pb[1])).then(a.cmp(&b))
            })
            .expect("unvisited vertex exists");
        visited[start] = true;
        let mut head = order.len();
        order.push(start);
        while head < order.len() {
            let v = order[head];
            head += 1;
            let mut next: Vec<usize> = adj[v].iter().copied().filter(|&u| !visited[u]).collect();
            next.sort_by_key(|&u| (adj[u].len(), u));
            for u in next {
                visited[u] = true;
                order.push(u);
            }
        }
    }
    order.reverse();
    let mut new_index = vec![0usize; n];
    for (new, &old) in order.iter().enumerate() {
        new_index[old] = new;
    }
    mesh.vertices = order.iter().map(|&v| mesh.vertices[v]).collect();
    mesh.markers = order.iter().map(|&v| mesh.markers[v]).collect();
    for tri in mesh.triangles.iter_mut() {
        *tri = tri.map(|v| new_index[v]);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fields::{InclusionCoefficient, JumpType};
    use crate::geometry::InterfaceShape;

    fn disk_scenario(center: Vec2, radius: f64) -> InclusionScenario {
        InclusionScenario {
            shape: Shape::Disk { center, radius },
            a_hat: InclusionCoefficient::Scaled { factor: 2.0 },
            eta: 0.5,
            zeta: 2.0,
            jump: JumpType::Raise,
            d1: None,
            h: None,
        }
    }

    #[test]
    fn flat_interface_mesh_has_no_straddling_triangles() {
        let g = InterfaceGraph::flat([0.0, 0.5], 2.0);
        let m = build_mesh(&Domain::dirichlet(Rect::unit()), Some(&g), None, 0.25).unwrap();
        for t in 0..m.n_triangles() {
            let side: Vec<f64> = m.triangles[t].iter().map(|&v| m.vertices[v][1] - 0.5).collect();
            match m.tags[t] {
                Tag::Plus => assert!(side.iter().all(|&s| s >= 0.0)),
                Tag::Minus => assert!(side.iter().all(|&s| s <= 0.0)),
                Tag::Inclusion => unreachable!(),
            }
        }
        assert!((m.total_area() - 1.0).abs() < 1e-14);
    }

    #[test]
    fn refinement_halves_diameter() {
        let g = InterfaceGraph::flat([0.5, 0.5], 1.0).with_shape(InterfaceShape::Sine {
            amplitude: 0.05,
            wavenumber: 4.0,
        });
        let d = Domain::dirichlet(Rect::unit());
        let a = build_mesh(&d, Some(&g), None, 1.0 / 16.0).unwrap();
        let b = build_mesh(&d, Some(&g), None, 1.0 / 32.0).unwrap();
        assert!(a.max_diameter() <= 1.5 / 16.0);
        let ratio = a.max_diameter() / b.max_diameter();
        assert!(ratio > 2.0 / 1.5 && ratio < 2.0 * 1.5, "{ratio}");
        assert!((b.total_area() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn curved_interface_nodes_lie_on_graph() {
        let g = InterfaceGraph::flat([0.5, 0.5], 1.0).with_shape(InterfaceShape::Parabola { curvature: 0.3 });
        let m = build_mesh(&Domain::dirichlet(Rect::unit()), Some(&g), None, 1.0 / 20.0).unwrap();
        let on: Vec<usize> = (0..m.n_vertices()).filter(|&v| m.markers[v] & MARK_INTERFACE != 0).collect();
        assert!(on.len() >= 21);
        for v in on {
            assert!(g.side_offset(m.vertices[v]).abs() < 1e-15);
        }
        assert!(m.min_angle_deg() >= 20.0);
        assert!(m.max_diameter() <= 1.5 / 20.0);
    }

    #[test]
    fn build_is_deterministic_and_bandwidth_is_moderate() {
        let g = InterfaceGraph::flat([0.5, 0.4], 1.0);
        let s = disk_scenario([0.5, 0.7], 0.12);
        let d = Domain::dirichlet(Rect::unit());
        let a = build_mesh(&d, Some(&g), Some(&s), 1.0 / 40.0).unwrap();
        let b = build_mesh(&d, Some(&g), Some(&s), 1.0 / 40.0).unwrap();
        assert_eq!(a, b);
        let band = a
            .triangles
            .iter()
            .map(|t| t.iter().max().unwrap() - t.iter().min().unwrap())
            .max()
            .unwrap();
        assert!(band < 6 * 40, "bandwidth {band}");
    }

    #[test]
    fn strip_touching_the_walls_is_fitted() {
        let s = InclusionScenario {
            shape: Shape::Polygon {
                vertices: vec![[0.0, 0.25], [1.0, 0.25], [1.0, 0.75], [0.0, 0.75]],
            },
            ..disk_scenario([0.0, 0.0], 1.0)
        };
        let d = Domain::with_natural(Rect::unit(), &[RectSide::Left, RectSide::Right]);
        let m = build_mesh(&d, None, Some(&s), 1.0 / 16.0).unwrap();
        let inc: f64 = (0..m.n_triangles()).filter(|&t| m.tags[t] == Tag::Inclusion).map(|t| m.area(t)).sum();
        assert!((inc - 0.5).abs() < 1e-13);
        assert!(m.min_angle_deg() >= 20.0);
    }

    #[test]
    fn disk_inclusion_is_fitted_within_sagitta_bound() {
        let rho = 0.1;
        let h = 0.05;
        let s = disk_scenario([0.5, 0.5], rho);
        let m = build_mesh(&Domain::dirichlet(Rect::unit()), None, Some(&s), h).unwrap();
        let edges = m.tag_edges();
        assert!(!edges.is_empty());
        let mut hausdorff = 0.0f64;
        for e in &edges {
            let (a, b) = (m.vertices[e.a], m.vertices[e.b]);
            assert!((dist(a, [0.5, 0.5]) - rho).abs() < 1e-12);
            assert!((dist(b, [0.5, 0.5]) - rho).abs() < 1e-12);
            let mid = [(a[0] + b[0]) / 2.0, (a[1] + b[1]) / 2.0];
            hausdorff = hausdorff.max(rho - dist(mid, [0.5, 0.5]));
        }
        assert!(hausdorff <= 0.5 * h * h / rho, "{hausdorff}");
        assert!((m.total_area() - 1.0).abs() < 1e-12);
        let inc_area: f64 = (0..m.n_triangles()).filter(|&t| m.tags[t] == Tag::Inclusion).map(|t| m.area(t)).sum();
        // inscribed polygon: area defect at most perimeter times sagitta
        let defect = std::f64::consts::PI * rho * rho - inc_area;
        assert!(defect >= 0.0 && defect <= std::f64::consts::PI * h * h, "{defect}");
    }

    #[test]
    fn inclusion_meshes_keep_quality() {
        for (k, rho) in [0.03, 0.05, 0.08, 0.11, 0.137, 0.2, 0.3].into_iter().enumerate() {
            let h = 1.0 / 64.0;
            let c = [0.45 + 0.02 * k as f64, 0.55 - 0.01 * k as f64];
            let m = build_mesh(&Domain::dirichlet(Rect::unit()), None, Some(&disk_scenario(c, rho)), h).unwrap();
            let angle = m.min_angle_deg();
            let diam = m.max_diameter();
            assert!(angle >= 20.0, "rho {rho}: min angle {angle}");
            assert!(diam <= 1.5 * h, "rho {rho}: diameter {} h", diam / h);
            for t in 0..m.n_triangles() {
                assert!(m.area(t) > 0.0);
            }
        }
    }

    #[test]
    fn thin_separation_rejected() {
        let mut s = disk_scenario([0.5, 0.5], 0.1);
        s.d1 = Some(0.02);
        let err = build_mesh(&Domain::dirichlet(Rect::unit()), None, Some(&s), 0.01).unwrap_err();
        assert!(matches!(err, Error::GeometryTooThin(_)));
        let mut g = InterfaceGraph::flat([0.0, 0.02], 2.0);
        g.d0 = 0.02;
        let err = build_mesh(&Domain::dirichlet(Rect::unit()), Some(&g), None, 0.01).unwrap_err();
        assert!(matches!(err, Error::GeometryTooThin(_)));
        let g = InterfaceGraph::flat([0.0, 0.5], 2.0);
        let s = disk_scenario([0.5, 0.5], 0.1);
        let err = build_mesh(&Domain::dirichlet(Rect::unit()), Some(&g), Some(&s), 0.05).unwrap_err();
        assert!(matches!(err, Error::InvalidInput(_)));
    }

    #[test]
    fn polygon_corners_are_mesh_nodes() {
        let s = InclusionScenario {
            shape: Shape::Polygon {
                vertices: vec![[0.31, 0.33], [0.68, 0.36], [0.52, 0.71]],
            },
            ..disk_scenario([0.0, 0.0], 1.0)
        };
        let m = build_mesh(&Domain::dirichlet(Rect::unit()), None, Some(&s), 1.0 / 32.0).unwrap();
        assert!(m.min_angle_deg() >= 20.0);
        if let Shape::Polygon { vertices } = &s.shape {
            for c in vertices {
                assert!(m.vertices.iter().any(|v| dist(*v, *c) < 1e-14));
            }
        }
        let inc_area: f64 = (0..m.n_triangles()).filter(|&t| m.tags[t] == Tag::Inclusion).map(|t| m.area(t)).sum();
        assert!((inc_area - s.shape.area()).abs() < 1e-12, "{inc_area} vs {}", s.shape.area());
    }

    #[test]
    fn text_round_trip() {
        let g = InterfaceGraph::flat([0.5, 0.5], 1.0).with_shape(InterfaceShape::Sine {
            amplitude: 0.03,
            wavenumber: 5.0,
        });
        let s = disk_scenario([0.5, 0.75], 0.1);
        let d = Domain::with_natural(Rect::unit(), &[RectSide::Left, RectSide::Right]);
        let m = build_mesh(&d, Some(&g), Some(&s), 1.0 / 16.0).unwrap();
        let back = Mesh::from_text(&m.to_text()).unwrap();
        assert_eq!(back, m);
        assert!(Mesh::from_text("garbage").is_err());
    }
}
