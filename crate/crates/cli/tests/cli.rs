use std::path::{Path, PathBuf};
use std::process::Command;

use jumplab_cli::{run, EXIT_CHECK_FAILED, EXIT_INVALID, EXIT_NONCONVERGENCE, EXIT_OK};
use serde_json::Value;

const SQUARE: &str = r#"
version = 1
name = "square"
[domain]
rect = { x0 = 0.0, x1 = 1.0, y0 = 0.0, y1 = 1.0 }
[coefficient]
plus = { kind = "isotropic", value = 1.0 }
minus = { kind = "isotropic", value = 1.0 }
lambda0 = 1.0
m0 = 0.0
[mesh]
h = 0.03125
"#;

const LAYERED: &str = r#"
version = 1
[domain]
rect = { x0 = -1.25, x1 = 1.25, y0 = -0.5, y1 = 0.5 }
[interface]
shape = { kind = "flat" }
patch_radius = 1.25
k0 = 1.0
d0 = 0.5
[coefficient]
plus = { kind = "isotropic", value = 1.0 }
minus = { kind = "isotropic", value = 1.0 }
lambda0 = 1.0
m0 = 0.0
[mesh]
h = 0.0625
[weight]
alpha_plus = 4.2
alpha_minus = 1.0
beta = 0.1
delta = 10.0
delta0 = 10.0
[ensemble]
size = 10
[sphere]
center = [0.0, 0.25]
radii = [0.05, 0.1, 0.2]
"#;

const DISKS: &str = r#"
version = 1
[domain]
rect = { x0 = 0.0, x1 = 1.0, y0 = -0.25, y1 = 1.0 }
[interface]
shape = { kind = "flat" }
anchor = [0.5, 0.0]
patch_radius = 0.5
k0 = 1.0
d0 = 0.25
[coefficient]
plus = { kind = "isotropic", value = 1.0 }
minus = { kind = "isotropic", value = 2.0 }
lambda0 = 1.0
m0 = 0.0
[boundary]
kind = "linear"
c0 = 0.0
c = [1.0, 0.5]
[mesh]
h = 0.03125
[size]
members = 10
eta = 0.5
zeta = 2.0
d1 = 0.1
fat_h = 0.0125
[inclusion]
shape = { kind = "disk", center = [0.5, 0.5], radius = 0.1 }
a_hat = { kind = "scaled", factor = 2.0 }
eta = 0.5
zeta = 2.0
jump = "raise"
"#;

fn write_config(dir: &Path, name: &str, text: &str) -> PathBuf {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p
}

fn jl(args: &[&str]) -> i32 {
    let mut all = vec!["jumplab"];
    all.extend_from_slice(args);
    run(all)
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn read_json(p: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(p).unwrap()).unwrap()
}

#[test]
fn solve_reproduces_linear_data() {
    let dir = tempfile::tempdir().unwrap();
    let text = format!(
        "{SQUARE}[boundary]\nkind = \"linear\"\nc0 = 0.0\nc = [1.0, 0.0]\n[solve]\nreference = \"boundary_data\"\nmax_nodal_error = 1e-10\n"
    );
    let cfg = write_config(dir.path(), "c.toml", &text);
    let out = dir.path().join("out");
    assert_eq!(jl(&["solve", "--config", s(&cfg), "--out", s(&out)]), EXIT_OK);
    let summary = read_json(&out.join("solve.json"));
    let err: f64 = summary["max_nodal_error"].as_f64().unwrap();
    assert!(err <= 1e-10, "{err}");
    let nodes = std::fs::read_to_string(out.join("nodes.csv")).unwrap();
    assert_eq!(nodes.lines().count() - 1, summary["vertices"].as_u64().unwrap() as usize);
    assert!(out.join("elements.csv").exists() && out.join("mesh.txt").exists());
}

#[test]
fn failed_check_exits_one() {
    let dir = tempfile::tempdir().unwrap();
    // e^{kx} sin(ky) is harmonic but not reproduced exactly by P1 elements
    let text = format!(
        "{SQUARE}[boundary]\nkind = \"exp_sin\"\nk = 3.0\n[solve]\nreference = \"boundary_data\"\nmax_nodal_error = 1e-12\n"
    );
    let cfg = write_config(dir.path(), "c.toml", &text);
    let out = dir.path().join("out");
    assert_eq!(jl(&["solve", "--config", s(&cfg), "--out", s(&out)]), EXIT_CHECK_FAILED);
}

#[test]
fn invalid_input_exits_two() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    let bad = write_config(dir.path(), "bad.toml", &SQUARE.replace("version = 1", "version = 9"));
    assert_eq!(jl(&["solve", "--config", s(&bad), "--out", s(&out)]), EXIT_INVALID);
    let missing = dir.path().join("none.toml");
    assert_eq!(jl(&["solve", "--config", s(&missing), "--out", s(&out)]), EXIT_INVALID);
    assert_eq!(jl(&["no-such-command"]), EXIT_INVALID);
    let cfg = write_config(dir.path(), "ok.toml", SQUARE);
    assert_eq!(jl(&["solve", "--config", s(&cfg), "--mesh-h=-1", "--out", s(&out)]), EXIT_INVALID);
    assert_eq!(jl(&["solve", "--config", s(&cfg), "--safety", "0.5", "--out", s(&out)]), EXIT_INVALID);
    // no boundary data
    assert_eq!(jl(&["solve", "--config", s(&cfg), "--out", s(&out)]), EXIT_INVALID);
}

#[test]
fn nonconvergence_exits_three() {
    let dir = tempfile::tempdir().unwrap();
    let text = format!("{SQUARE}[boundary]\nkind = \"exp_sin\"\nk = 1.0\n[solver]\ntolerance = 1e-300\n");
    let cfg = write_config(dir.path(), "c.toml", &text);
    let out = dir.path().join("out");
    assert_eq!(jl(&["solve", "--config", s(&cfg), "--out", s(&out)]), EXIT_NONCONVERGENCE);
}

#[test]
fn ensemble_commands_need_a_seed() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "l.toml", LAYERED);
    let out = dir.path().join("out");
    assert_eq!(jl(&["verify-three-region", "--config", s(&cfg), "--out", s(&out)]), EXIT_INVALID);
}

#[test]
fn three_region_is_deterministic_and_reportable() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "l.toml", LAYERED);
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    let code = jl(&["verify-three-region", "--config", s(&cfg), "--seed", "11", "--out", s(&a)]);
    assert!(code == EXIT_OK || code == EXIT_CHECK_FAILED, "{code}");
    assert_eq!(jl(&["verify-three-region", "--config", s(&cfg), "--seed", "11", "--out", s(&b)]), code);
    let ledger = "three_region.reports.jsonl";
    assert_eq!(std::fs::read(a.join(ledger)).unwrap(), std::fs::read(b.join(ledger)).unwrap());
    assert_eq!(std::fs::read(a.join("summary.csv")).unwrap(), std::fs::read(b.join("summary.csv")).unwrap());

    let code = jl(&["verify-three-sphere", "--config", s(&cfg), "--seed", "11", "--out", s(&a)]);
    assert!(code == EXIT_OK || code == EXIT_CHECK_FAILED, "{code}");
    let summary = std::fs::read_to_string(a.join("summary.csv")).unwrap();
    let rows: Vec<&str> = summary.lines().collect();
    assert_eq!(rows.len(), 3, "{summary}");
    assert!(rows[0].starts_with("inequality,n_fit"));

    assert_eq!(jl(&["report", s(&a), "--out", s(&a)]), EXIT_OK);
    check_report_against_raw(&a);
}

/// Recomputes the report table straight from the raw JSON lines.
fn check_report_against_raw(dir: &Path) {
    let mut raw: std::collections::BTreeMap<String, Vec<(f64, Option<bool>)>> = Default::default();
    for f in ["three_region.reports.jsonl", "three_sphere.reports.jsonl"] {
        for line in std::fs::read_to_string(dir.join(f)).unwrap().lines() {
            let v: Value = serde_json::from_str(line).unwrap();
            let ratio = match &v["ratio"] {
                Value::String(s) if s == "inf" => f64::INFINITY,
                x => x.as_f64().unwrap(),
            };
            raw.entry(v["inequality"].as_str().unwrap().to_string())
                .or_default()
                .push((ratio, v["pass"].as_bool()));
        }
    }
    let csv = std::fs::read_to_string(dir.join("report.csv")).unwrap();
    let rows: Vec<Vec<&str>> = csv.lines().skip(1).map(|l| l.split(',').collect()).collect();
    assert_eq!(rows.len(), raw.len());
    for (row, (name, items)) in rows.iter().zip(&raw) {
        let mut r: Vec<f64> = items.iter().map(|x| x.0).collect();
        r.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let passed = items.iter().filter(|x| x.1 == Some(true)).count();
        assert_eq!(row[0], name);
        assert_eq!(row[1].parse::<usize>().unwrap(), items.len());
        assert_eq!(row[3].parse::<usize>().unwrap(), passed);
        assert_eq!(row[5].parse::<f64>().unwrap(), r[0]);
        assert_eq!(row[6].parse::<f64>().unwrap(), r[(r.len() - 1) / 2]);
        assert_eq!(row[7].parse::<f64>().unwrap(), r[r.len() - 1]);
    }
}

#[test]
fn report_on_empty_ledgers_exits_two() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    assert_eq!(jl(&["report", s(dir.path()), "--out", s(&out)]), EXIT_INVALID);
    let f = write_config(dir.path(), "x.reports.jsonl", "{broken\n");
    assert_eq!(jl(&["report", s(&f), "--out", s(&out)]), EXIT_INVALID);
    assert_eq!(jl(&["report", s(&dir.path().join("missing")), "--out", s(&out)]), EXIT_INVALID);
}

#[test]
fn size_estimate_without_archive_names_it() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "d.toml", DISKS);
    let out = dir.path().join("out");
    let o = Command::new(env!("CARGO_BIN_EXE_jumplab"))
        .args(["size-estimate", "--config", s(&cfg), "--out", s(&out)])
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(EXIT_INVALID));
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("size_calibration.json"), "{err}");
}

#[test]
fn calibrate_then_estimate() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "d.toml", DISKS);
    let out = dir.path().join("out");
    let code = jl(&["calibrate", "--config", s(&cfg), "--seed", "3", "--out", s(&out)]);
    assert!(code == EXIT_OK || code == EXIT_CHECK_FAILED, "{code}");
    assert!(out.join("size_calibration.json").exists());
    let lines = std::fs::read_to_string(out.join("energy_lemma.jsonl")).unwrap();
    assert_eq!(lines.lines().count(), 20);

    assert_eq!(jl(&["size-estimate", "--config", s(&cfg), "--out", s(&out)]), EXIT_OK);
    let est = read_json(&out.join("size_estimate.json"));
    for key in ["W0", "W", "gap", "lower", "upper", "mode", "p"] {
        assert!(est.get(key).is_some(), "missing {key}");
    }
    let (lo, hi) = (est["lower"].as_f64().unwrap(), est["upper"].as_f64().unwrap());
    assert!(0.0 <= lo && lo <= hi);
    assert_eq!(est["mode"], "fat");
    assert_eq!(est["p"].as_f64(), Some(1.0));

    // a different family must not reuse the archive
    let other = write_config(dir.path(), "e.toml", &DISKS.replace("value = 2.0", "value = 3.0"));
    assert_eq!(jl(&["size-estimate", "--config", s(&other), "--out", s(&out)]), EXIT_INVALID);
}

#[test]
fn carleman_pairs_pass_on_default_grid() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "l.toml", LAYERED);
    let out = dir.path().join("out");
    assert_eq!(jl(&["verify-carleman", "--config", s(&cfg), "--out", s(&out)]), EXIT_OK);
    let n = std::fs::read_to_string(out.join("carleman.jsonl")).unwrap().lines().count();
    assert_eq!(n, 5);
}

#[test]
fn help_exits_zero() {
    assert_eq!(jl(&["--help"]), EXIT_OK);
}
