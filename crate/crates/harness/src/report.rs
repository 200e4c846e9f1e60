//! Study reports and their on-disk layout.

use crate::config::StudyConfig;
use crate::error::Result;
use crate::stats::LinearFit;
use enkf_lab_core::rng::{self, GAUSSIAN_TAG, GENERATOR_TAG};
use serde::Serialize;
use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

pub const TOOL_NAME: &str = "enkf-lab";
pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");

/// One pass/fail decision with the statistic it was based on.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Verdict {
    pub name: String,
    pub passed: bool,
    pub observed: f64,
    pub criterion: String,
}

impl Verdict {
    pub fn new(name: impl Into<String>, passed: bool, observed: f64, criterion: impl Into<String>) -> Self {
        Self { name: name.into(), passed, observed, criterion: criterion.into() }
    }
}

/// A fitted log-log slope with the per-size points behind it.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SlopeRecord {
    pub label: String,
    pub ensemble_sizes: Vec<usize>,
    pub values: Vec<f64>,
    pub std_errors: Vec<f64>,
    pub fit: LinearFit,
}

/// A statistic along the time axis for one ensemble size.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Series {
    pub label: String,
    pub ensemble_size: usize,
    pub steps: Vec<usize>,
    pub values: Vec<f64>,
    pub std_errors: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TestRecord {
    pub label: String,
    pub statistic: f64,
    pub p_value: f64,
    pub level: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Manifest {
    pub tool: String,
    pub version: String,
    pub generator: String,
    pub gaussian_transform: String,
    pub master_seed: u64,
    pub config_sha256: String,
    pub backend: String,
}

impl Manifest {
    pub fn for_config(cfg: &StudyConfig) -> Result<Self> {
        Ok(Self {
            tool: TOOL_NAME.into(),
            version: TOOL_VERSION.into(),
            generator: GENERATOR_TAG.into(),
            gaussian_transform: GAUSSIAN_TAG.into(),
            master_seed: cfg.seed,
            config_sha256: rng::sha256_hex(serde_json::to_string(cfg)?.as_bytes()),
            backend: cfg.backend().tag().into(),
        })
    }
}

/// Per-replica rows written to `raw.csv`.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct RawTable {
    pub header: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

impl RawTable {
    pub fn new(header: &[&str]) -> Self {
        Self { header: header.iter().map(|s| s.to_string()).collect(), rows: Vec::new() }
    }

    pub fn push(&mut self, row: Vec<f64>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }

    pub fn to_csv(&self) -> String {
        let mut out = self.header.join(",");
        out.push('\n');
        for row in &self.rows {
            for (i, v) in row.iter().enumerate() {
                if i > 0 {
                    out.push(',');
                }
                if v.fract() == 0.0 && v.abs() < 1e15 {
                    let _ = write!(out, "{}", *v as i64);
                } else {
                    let _ = write!(out, "{v:.16e}");
                }
            }
            out.push('\n');
        }
        out
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct StudyReport {
    pub study: String,
    pub passed: bool,
    pub verdicts: Vec<Verdict>,
    pub slopes: Vec<SlopeRecord>,
    pub series: Vec<Series>,
    pub tests: Vec<TestRecord>,
    /// Empirical constants, labelled as estimates.
    pub estimates: BTreeMap<String, f64>,
    pub manifest: Manifest,
    #[serde(skip)]
    pub raw: RawTable,
}

impl StudyReport {
    pub fn new(cfg: &StudyConfig) -> Result<Self> {
        Ok(Self {
            study: cfg.study.name().into(),
            passed: true,
            verdicts: Vec::new(),
            slopes: Vec::new(),
            series: Vec::new(),
            tests: Vec::new(),
            estimates: BTreeMap::new(),
            manifest: Manifest::for_config(cfg)?,
            raw: RawTable::default(),
        })
    }

    pub fn verdict(&mut self, v: Verdict) {
        self.passed &= v.passed;
        self.verdicts.push(v);
    }

    pub fn check(&mut self, name: impl Into<String>, passed: bool, observed: f64, criterion: impl Into<String>) {
        self.verdict(Verdict::new(name, passed, observed, criterion));
    }

    pub fn find_verdict(&self, name: &str) -> Option<&Verdict> {
        self.verdicts.iter().find(|v| v.name == name)
    }

    pub fn find_slope(&self, label: &str) -> Option<&SlopeRecord> {
        self.slopes.iter().find(|s| s.label == label)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    /// Writes `report.json`, `raw.csv` and `config.json` into `dir`.
    pub fn write(&self, dir: &Path, cfg: &StudyConfig) -> Result<Vec<PathBuf>> {
        std::fs::create_dir_all(dir)?;
        let files = [
            (dir.join("report.json"), self.to_json()?),
            (dir.join("raw.csv"), self.raw.to_csv()),
            (dir.join("config.json"), config_echo(cfg)?),
        ];
        let mut paths = Vec::new();
        for (path, body) in files {
            std::fs::write(&path, body)?;
            paths.push(path);
        }
        Ok(paths)
    }
}

#[derive(Serialize)]
struct ConfigEcho<'a> {
    #[serde(flatten)]
    config: &'a StudyConfig,
    effective_backend: &'static str,
    generator: &'static str,
    gaussian_transform: &'static str,
    version: &'static str,
}

fn config_echo(cfg: &StudyConfig) -> Result<String> {
    let echo = ConfigEcho {
        config: cfg,
        effective_backend: cfg.backend().tag(),
        generator: GENERATOR_TAG,
        gaussian_transform: GAUSSIAN_TAG,
        version: TOOL_VERSION,
    };
    Ok(serde_json::to_string_pretty(&echo)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::StudyKind;
    use enkf_lab_core::ModelParams;

    #[test]
    fn failed_verdict_fails_report() {
        let cfg = StudyConfig::new(StudyKind::Bias, ModelParams::golden().to_spec());
        let mut rep = StudyReport::new(&cfg).unwrap();
        rep.check("a", true, 1.0, "x");
        assert!(rep.passed);
        rep.check("b", false, 2.0, "y");
        assert!(!rep.passed);
        assert!(rep.find_verdict("b").is_some());
    }

    #[test]
    fn raw_csv_layout() {
        let mut t = RawTable::new(&["n", "value"]);
        t.push(vec![3.0, 0.25]);
        assert_eq!(t.to_csv(), "n,value\n3,2.5000000000000000e-1\n");
    }
}
