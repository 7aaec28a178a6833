//! Versioned experiment reports. Everything that decides an exit code is a
//! [`Check`] carrying its tolerance and sample size. Wall-clock and host data
//! go to a separate sidecar so the report itself is reproducible byte for byte.

use crate::error::{HarnessError, Result};
use crate::stats::LinearFit;
use serde::{Deserialize, Serialize};
use std::path::{Path, PathBuf};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Series {
    pub name: String,
    pub columns: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

impl Series {
    pub fn new(name: impl Into<String>, columns: &[&str]) -> Self {
        Series { name: name.into(), columns: columns.iter().map(|c| c.to_string()).collect(), rows: Vec::new() }
    }

    pub fn push(&mut self, row: Vec<f64>) {
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Fit {
    pub name: String,
    pub slope: f64,
    pub intercept: f64,
    pub slope_se: f64,
    pub se_method: String,
    pub n: usize,
}

impl Fit {
    pub fn new(name: impl Into<String>, fit: LinearFit, slope_se: f64, se_method: &str) -> Self {
        Fit {
            name: name.into(),
            slope: fit.slope,
            intercept: fit.intercept,
            slope_se,
            se_method: se_method.into(),
            n: fit.n,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub value: f64,
    /// Human-readable acceptance rule, e.g. `in [-2.3, -1.7]`.
    pub tolerance: String,
    pub sample_size: usize,
    pub detail: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Event {
    pub kind: String,
    pub member: u64,
    pub t: f64,
    pub detail: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub schema_version: u32,
    pub experiment: String,
    pub seed: u64,
    /// The full configuration the run used, in its file form.
    pub config: String,
    pub series: Vec<Series>,
    pub fits: Vec<Fit>,
    pub checks: Vec<Check>,
    pub events: Vec<Event>,
    /// Blow-ups in runs where none is expected.
    pub unexpected_blowups: usize,
    pub notes: Vec<String>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Format {
    Json,
    Csv,
}

impl Report {
    pub fn new(experiment: &str, seed: u64, config: String) -> Self {
        Report {
            schema_version: SCHEMA_VERSION,
            experiment: experiment.into(),
            seed,
            config,
            series: Vec::new(),
            fits: Vec::new(),
            checks: Vec::new(),
            events: Vec::new(),
            unexpected_blowups: 0,
            notes: Vec::new(),
        }
    }

    pub fn check(&mut self, name: impl Into<String>, passed: bool, value: f64, tolerance: impl Into<String>, n: usize) -> bool {
        self.check_with(name, passed, value, tolerance, n, String::new())
    }

    pub fn check_with(
        &mut self,
        name: impl Into<String>,
        passed: bool,
        value: f64,
        tolerance: impl Into<String>,
        n: usize,
        detail: impl Into<String>,
    ) -> bool {
        let c = Check {
            name: name.into(),
            passed,
            value,
            tolerance: tolerance.into(),
            sample_size: n,
            detail: detail.into(),
        };
        log::info!("check {}: {} (value {:.6e}, {})", c.name, if passed { "pass" } else { "FAIL" }, value, c.tolerance);
        self.checks.push(c);
        passed
    }

    pub fn get_check(&self, name: &str) -> Option<&Check> {
        self.checks.iter().find(|c| c.name == name)
    }

    pub fn get_series(&self, name: &str) -> Option<&Series> {
        self.series.iter().find(|s| s.name == name)
    }

    pub fn get_fit(&self, name: &str) -> Option<&Fit> {
        self.fits.iter().find(|f| f.name == name)
    }

    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report is serializable") + "\n"
    }

    /// Writes the report into `dir` and returns the created paths.
    pub fn write(&self, dir: &Path, format: Format) -> Result<Vec<PathBuf>> {
        std::fs::create_dir_all(dir).map_err(|e| HarnessError::io(dir, e))?;
        match format {
            Format::Json => {
                let path = dir.join(format!("{}.json", self.experiment));
                std::fs::write(&path, self.to_json()).map_err(|e| HarnessError::io(&path, e))?;
                Ok(vec![path])
            }
            Format::Csv => self.write_csv(dir),
        }
    }

    fn write_csv(&self, dir: &Path) -> Result<Vec<PathBuf>> {
        let mut paths = Vec::new();
        let mut table = |suffix: &str, header: Vec<String>, rows: Vec<Vec<String>>| -> Result<()> {
            let path = dir.join(format!("{}_{suffix}.csv", self.experiment));
            let mut w = csv::Writer::from_path(&path).map_err(|e| HarnessError::Serialize(e.to_string()))?;
            w.write_record(&header).map_err(|e| HarnessError::Serialize(e.to_string()))?;
            for r in rows {
                w.write_record(&r).map_err(|e| HarnessError::Serialize(e.to_string()))?;
            }
            w.flush().map_err(|e| HarnessError::io(&path, e))?;
            paths.push(path);
            Ok(())
        };
        let cols = |c: &[&str]| c.iter().map(|s| s.to_string()).collect::<Vec<_>>();
        table(
            "checks",
            cols(&["name", "passed", "value", "tolerance", "sample_size", "detail"]),
            self.checks
                .iter()
                .map(|c| {
                    vec![c.name.clone(), c.passed.to_string(), c.value.to_string(), c.tolerance.clone(), c.sample_size.to_string(), c.detail.clone()]
                })
                .collect(),
        )?;
        table(
            "fits",
            cols(&["name", "slope", "intercept", "slope_se", "se_method", "n"]),
            self.fits
                .iter()
                .map(|f| {
                    vec![f.name.clone(), f.slope.to_string(), f.intercept.to_string(), f.slope_se.to_string(), f.se_method.clone(), f.n.to_string()]
                })
                .collect(),
        )?;
        table(
            "events",
            cols(&["kind", "member", "t", "detail"]),
            self.events.iter().map(|e| vec![e.kind.clone(), e.member.to_string(), e.t.to_string(), e.detail.clone()]).collect(),
        )?;
        for s in &self.series {
            table(
                &format!("series_{}", s.name),
                s.columns.clone(),
                s.rows.iter().map(|r| r.iter().map(|v| v.to_string()).collect()).collect(),
            )?;
        }
        Ok(paths)
    }
}

/// Non-reproducible run metadata, written next to the report.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RunMeta {
    pub experiment: String,
    pub wall_clock_seconds: f64,
    pub threads: usize,
    pub package_version: String,
    pub os: String,
    pub arch: String,
}

impl RunMeta {
    pub fn new(experiment: &str, wall_clock_seconds: f64, threads: usize) -> Self {
        RunMeta {
            experiment: experiment.into(),
            wall_clock_seconds,
            threads,
            package_version: env!("CARGO_PKG_VERSION").into(),
            os: std::env::consts::OS.into(),
            arch: std::env::consts::ARCH.into(),
        }
    }

    pub fn write(&self, dir: &Path) -> Result<PathBuf> {
        let path = dir.join(format!("{}.meta.json", self.experiment));
        let text = serde_json::to_string_pretty(self).map_err(|e| HarnessError::Serialize(e.to_string()))?;
        std::fs::write(&path, text + "\n").map_err(|e| HarnessError::io(&path, e))?;
        Ok(path)
    }
}
