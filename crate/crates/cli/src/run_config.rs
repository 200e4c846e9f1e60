//! The single JSON document describing a run, and flag overrides.

use enkf_lab_core::{Backend, ModelSpec};
use enkf_lab_harness::{HarnessError, Result, StudyConfig, StudyKind, StudyOptions};
use serde::{Deserialize, Serialize};
use std::path::Path;

pub const DEFAULT_STEPS: usize = 100;
pub const DEFAULT_ENSEMBLE_SIZE: usize = 32;
pub const SEED_ENV: &str = "ENKF_LAB_SEED";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub model: ModelSpec,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    /// Number of assimilation steps for simulate, kalman and enkf.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub steps: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ensemble_size: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub backend: Option<Backend>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub study: Option<StudyKind>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ensemble_sizes: Option<Vec<usize>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub horizon: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub replicas: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub options: Option<StudyOptions>,
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| HarnessError::Config(format!("cannot read config {}: {e}", path.display())))?;
        Self::parse(&text).map_err(|e| match e {
            HarnessError::Json(j) => HarnessError::Config(format!("malformed config {}: {j}", path.display())),
            other => other,
        })
    }

    pub fn parse(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn steps(&self) -> usize {
        self.steps.unwrap_or(DEFAULT_STEPS)
    }

    pub fn ensemble_size(&self) -> usize {
        self.ensemble_size.unwrap_or(DEFAULT_ENSEMBLE_SIZE)
    }

    pub fn backend(&self) -> Backend {
        self.backend.unwrap_or_default()
    }

    pub fn seed(&self) -> u64 {
        self.seed.unwrap_or(0)
    }

    pub fn to_study(&self) -> Result<StudyConfig> {
        let kind = self
            .study
            .ok_or_else(|| HarnessError::Config("no study selected: pass --study or set \"study\" in the config".into()))?;
        let mut cfg = StudyConfig::new(kind, self.model.clone());
        if let Some(v) = &self.ensemble_sizes {
            cfg.ensemble_sizes = v.clone();
        }
        if let Some(v) = self.horizon {
            cfg.horizon = v;
        }
        if let Some(v) = self.replicas {
            cfg.replicas = v;
        }
        if let Some(v) = &self.options {
            cfg.options = v.clone();
        }
        cfg.seed = self.seed();
        cfg.backend = self.backend;
        Ok(cfg)
    }
}

/// Command-line values that take precedence over the config document.
#[derive(Clone, Debug, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub steps: Option<usize>,
    pub ensemble_size: Option<usize>,
    pub backend: Option<Backend>,
    pub study: Option<StudyKind>,
}

impl Overrides {
    /// Applies flags, then falls back to the seed environment variable when
    /// neither flag nor config sets a seed. Returns the overridden fields.
    pub fn apply(&self, cfg: &mut RunConfig, env_seed: Option<&str>) -> Result<Vec<String>> {
        let mut applied = Vec::new();
        if let Some(s) = self.seed {
            cfg.seed = Some(s);
            applied.push("seed".to_string());
        } else if cfg.seed.is_none() {
            if let Some(text) = env_seed {
                let s = text
                    .trim()
                    .parse()
                    .map_err(|_| HarnessError::Config(format!("{SEED_ENV} must be an unsigned integer, got '{text}'")))?;
                cfg.seed = Some(s);
                applied.push(format!("seed (from {SEED_ENV})"));
            }
        }
        if let Some(v) = self.steps {
            cfg.steps = Some(v);
            applied.push("steps".into());
        }
        if let Some(v) = self.ensemble_size {
            cfg.ensemble_size = Some(v);
            applied.push("ensemble_size".into());
        }
        if let Some(v) = self.backend {
            cfg.backend = Some(v);
            applied.push("backend".into());
        }
        if let Some(v) = self.study {
            cfg.study = Some(v);
            applied.push("study".into());
        }
        Ok(applied)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const SCALAR: &str = r#"{"model":{"a":[[1]],"b":[[1]],"r":[[1]],"r0":[[1]],"p0":[[1]]},"seed":5}"#;

    #[test]
    fn flags_override_config_and_env_is_fallback() {
        let mut cfg = RunConfig::parse(SCALAR).unwrap();
        let applied = Overrides::default().apply(&mut cfg, Some("9")).unwrap();
        assert_eq!(cfg.seed, Some(5));
        assert!(applied.is_empty());
        let o = Overrides { seed: Some(11), steps: Some(3), ..Default::default() };
        let applied = o.apply(&mut cfg, Some("9")).unwrap();
        assert_eq!((cfg.seed, cfg.steps), (Some(11), Some(3)));
        assert_eq!(applied, vec!["seed", "steps"]);
        let mut bare = RunConfig::parse(SCALAR).unwrap();
        bare.seed = None;
        Overrides::default().apply(&mut bare, Some("9")).unwrap();
        assert_eq!(bare.seed, Some(9));
        assert!(Overrides::default().apply(&mut RunConfig { seed: None, ..bare }, Some("x")).is_err());
    }

    #[test]
    fn malformed_json_reports_position() {
        let err = RunConfig::parse("{\"model\": [1, }").unwrap_err();
        assert!(err.to_string().contains("line 1"));
        assert_eq!(err.exit_code(), 2);
    }
}
