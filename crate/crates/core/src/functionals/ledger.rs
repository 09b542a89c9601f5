//! Append-only CSV record of functional evaluations.

use std::fmt::Write as _;
use std::io::Write as _;
use std::path::Path;

use serde::Serialize;

use crate::error::Result;

pub const LEDGER_HEADER: &str = "experiment,functional,region,value,mesh_h";

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct LedgerRow {
    pub experiment: String,
    pub functional: String,
    pub region: String,
    pub value: f64,
    pub mesh_h: f64,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct FunctionalLedger {
    pub rows: Vec<LedgerRow>,
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

impl FunctionalLedger {
    pub fn record(&mut self, experiment: &str, functional: &str, region: &str, value: f64, mesh_h: f64) {
        self.rows.push(LedgerRow {
            experiment: experiment.into(),
            functional: functional.into(),
            region: region.into(),
            value,
            mesh_h,
        });
    }

    /// Rows without the header.
    pub fn body(&self) -> String {
        let mut s = String::new();
        for r in &self.rows {
            let _ = writeln!(
                s,
                "{},{},{},{:e},{:e}",
                csv_field(&r.experiment),
                csv_field(&r.functional),
                csv_field(&r.region),
                r.value,
                r.mesh_h
            );
        }
        s
    }

    pub fn to_csv(&self) -> String {
        format!("{LEDGER_HEADER}\n{}", self.body())
    }

    /// Appends to `path`, writing the header first if the file is new.
    pub fn append_to(&self, path: &Path) -> Result<()> {
        let fresh = !path.exists() || std::fs::metadata(path)?.len() == 0;
        let mut file = std::fs::OpenOptions::new().create(true).append(true).open(path)?;
        if fresh {
            writeln!(file, "{LEDGER_HEADER}")?;
        }
        file.write_all(self.body().as_bytes())?;
        Ok(())
    }
}
