//! Aggregation of verification report ledgers.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use jumplab::verify::VerificationReport;
use jumplab::{Error, Result};
use serde::Serialize;

use crate::output::text_table;

/// File suffix picked up when a directory is given.
pub const LEDGER_SUFFIX: &str = ".reports.jsonl";

pub const CSV_HEADER: &str = "inequality,count,judged,passed,pass_rate,min_ratio,median_ratio,max_ratio";

#[derive(Clone, Debug, Default)]
pub struct Ledger {
    pub reports: Vec<VerificationReport>,
    /// Lines that did not parse as a report.
    pub corrupt: usize,
    pub files: Vec<PathBuf>,
}

/// Reads the given files, and every `*.reports.jsonl` in the given
/// directories, in sorted order.
pub fn read_ledgers(paths: &[PathBuf]) -> Result<Ledger> {
    let mut files = Vec::new();
    for p in paths {
        if p.is_dir() {
            let mut found: Vec<PathBuf> = std::fs::read_dir(p)?
                .filter_map(|e| e.ok().map(|e| e.path()))
                .filter(|f| f.to_string_lossy().ends_with(LEDGER_SUFFIX))
                .collect();
            found.sort();
            files.extend(found);
        } else if p.exists() {
            files.push(p.clone());
        } else {
            return Err(Error::InvalidInput(format!("no ledger at {}", p.display())));
        }
    }
    let mut ledger = Ledger {
        files: files.clone(),
        ..Default::default()
    };
    for f in &files {
        read_file(f, &mut ledger)?;
    }
    Ok(ledger)
}

fn read_file(path: &Path, ledger: &mut Ledger) -> Result<()> {
    let text = std::fs::read_to_string(path)?;
    for line in text.lines().filter(|l| !l.trim().is_empty()) {
        match serde_json::from_str::<VerificationReport>(line) {
            Ok(r) => ledger.reports.push(r),
            Err(_) => ledger.corrupt += 1,
        }
    }
    Ok(())
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct InequalityStats {
    pub inequality: String,
    pub count: usize,
    /// Reports carrying a pass/fail verdict.
    pub judged: usize,
    pub passed: usize,
    /// `passed / judged`, NaN when nothing was judged.
    pub pass_rate: f64,
    pub min_ratio: f64,
    pub median_ratio: f64,
    pub max_ratio: f64,
}

/// Lower median for even counts, so the value is always an actual ratio.
fn median(sorted: &[f64]) -> f64 {
    sorted[(sorted.len() - 1) / 2]
}

pub fn aggregate(reports: &[VerificationReport]) -> Vec<InequalityStats> {
    let mut groups: BTreeMap<&str, Vec<&VerificationReport>> = BTreeMap::new();
    for r in reports {
        groups.entry(&r.inequality).or_default().push(r);
    }
    groups
        .into_iter()
        .map(|(name, rs)| {
            let mut ratios: Vec<f64> = rs.iter().map(|r| r.ratio).collect();
            ratios.sort_by(f64::total_cmp);
            let judged = rs.iter().filter(|r| r.pass.is_some()).count();
            let passed = rs.iter().filter(|r| r.pass == Some(true)).count();
            InequalityStats {
                inequality: name.to_string(),
                count: rs.len(),
                judged,
                passed,
                pass_rate: if judged > 0 { passed as f64 / judged as f64 } else { f64::NAN },
                min_ratio: ratios[0],
                median_ratio: median(&ratios),
                max_ratio: ratios[ratios.len() - 1],
            }
        })
        .collect()
}

pub fn to_csv(stats: &[InequalityStats]) -> String {
    let mut s = format!("{CSV_HEADER}\n");
    for r in stats {
        let _ = writeln!(
            s,
            "{},{},{},{},{:.16e},{:.16e},{:.16e},{:.16e}",
            r.inequality, r.count, r.judged, r.passed, r.pass_rate, r.min_ratio, r.median_ratio, r.max_ratio
        );
    }
    s
}

pub fn to_table(stats: &[InequalityStats], corrupt: usize) -> String {
    let rows: Vec<Vec<String>> = stats
        .iter()
        .map(|r| {
            vec![
                r.inequality.clone(),
                r.count.to_string(),
                format!("{}/{}", r.passed, r.judged),
                format!("{:.4e}", r.min_ratio),
                format!("{:.4e}", r.median_ratio),
                format!("{:.4e}", r.max_ratio),
            ]
        })
        .collect();
    let mut t = text_table(&["inequality", "n", "passed", "min", "median", "max"], &rows);
    let _ = writeln!(t, "corrupt lines skipped: {corrupt}");
    t
}

#[cfg(test)]
mod tests {
    use super::*;
    use jumplab::verify::Provenance;

    fn rep(id: &str, lhs: f64, pass: Option<bool>) -> VerificationReport {
        let mut r = VerificationReport::new(id, "three_sphere", lhs, 1.0, 1.0, 0.5, 0.5, Provenance::new(0.1));
        r.pass = pass;
        r
    }

    #[test]
    fn single_report_has_equal_order_statistics() {
        let s = aggregate(&[rep("a", 2.0, Some(true))]);
        assert_eq!(s.len(), 1);
        assert_eq!(s[0].min_ratio, 2.0);
        assert_eq!(s[0].median_ratio, 2.0);
        assert_eq!(s[0].max_ratio, 2.0);
        assert_eq!(s[0].pass_rate, 1.0);
    }

    #[test]
    fn statistics_by_hand() {
        let rs = vec![
            rep("a", 3.0, Some(true)),
            rep("b", 1.0, Some(false)),
            rep("c", 2.0, None),
            rep("d", 4.0, Some(true)),
        ];
        let s = &aggregate(&rs)[0];
        assert_eq!((s.count, s.judged, s.passed), (4, 3, 2));
        assert_eq!((s.min_ratio, s.median_ratio, s.max_ratio), (1.0, 2.0, 4.0));
        assert!((s.pass_rate - 2.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn corrupt_lines_are_counted() {
        let dir = tempfile::tempdir().unwrap();
        let f = dir.path().join(format!("x{LEDGER_SUFFIX}"));
        let good = jumplab::json::to_line(&rep("a", 1.0, None)).unwrap();
        std::fs::write(&f, format!("{good}\n{{not json\n\n{{\"a\":1}}\n")).unwrap();
        std::fs::write(dir.path().join("other.jsonl"), "garbage\n").unwrap();
        let l = read_ledgers(&[dir.path().to_path_buf()]).unwrap();
        assert_eq!(l.reports.len(), 1);
        assert_eq!(l.corrupt, 2);
        assert_eq!(l.files.len(), 1);
    }
}
