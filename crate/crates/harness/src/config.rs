//! Study configuration.

use crate::error::{HarnessError, Result};
use enkf_lab_core::{Backend, ModelParams, ModelSpec};
use serde::{Deserialize, Serialize};
use std::fmt;
use std::str::FromStr;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum StudyKind {
    Bias,
    Fluctuation,
    Gain,
    Lyapunov,
    Ergodicity,
    Clt,
    StateError,
}

impl StudyKind {
    pub const ALL: [StudyKind; 7] = [
        StudyKind::Bias,
        StudyKind::Fluctuation,
        StudyKind::Gain,
        StudyKind::Lyapunov,
        StudyKind::Ergodicity,
        StudyKind::Clt,
        StudyKind::StateError,
    ];

    pub fn name(self) -> &'static str {
        match self {
            StudyKind::Bias => "bias",
            StudyKind::Fluctuation => "fluctuation",
            StudyKind::Gain => "gain",
            StudyKind::Lyapunov => "lyapunov",
            StudyKind::Ergodicity => "ergodicity",
            StudyKind::Clt => "clt",
            StudyKind::StateError => "state-error",
        }
    }

    /// Covariance studies run the covariance chain directly; the state study
    /// needs sample means.
    pub fn default_backend(self) -> Backend {
        match self {
            StudyKind::StateError => Backend::Perturbation,
            _ => Backend::WishartChain,
        }
    }

    fn needs_scaling_fit(self) -> bool {
        matches!(self, StudyKind::Bias | StudyKind::Fluctuation | StudyKind::Gain | StudyKind::StateError)
    }

    fn needs_inverse_moments(self) -> bool {
        matches!(self, StudyKind::Lyapunov | StudyKind::Ergodicity)
    }
}

impl fmt::Display for StudyKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for StudyKind {
    type Err = HarnessError;

    fn from_str(s: &str) -> Result<Self> {
        let norm = s.replace('_', "-");
        StudyKind::ALL
            .into_iter()
            .find(|k| k.name() == norm)
            .ok_or_else(|| HarnessError::Config(format!("unknown study '{s}'")))
    }
}

fn default_sizes() -> Vec<usize> {
    vec![8, 16, 32, 64, 128, 256, 512]
}

fn default_horizon() -> usize {
    200
}

fn default_replicas() -> usize {
    10_000
}

/// Study-specific knobs. Unset fields take per-study defaults.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct StudyOptions {
    /// Step at which fixed-time statistics are taken (bias slope, CLT).
    pub eval_step: Option<usize>,
    /// First step of the post-transient window for flatness checks.
    pub flat_from: usize,
    /// Multipliers of `P0` for dispersed initial laws.
    pub init_scales: Vec<f64>,
    /// Draws from the limiting law in the CLT study.
    pub limit_draws: usize,
    /// One-step transitions per visited state in the drift regression.
    pub inner_transitions: usize,
    /// Family-wise level of distributional tests.
    pub alpha: f64,
    /// Standard-error multiplier for within-CI checks.
    pub ci_sigmas: f64,
}

impl Default for StudyOptions {
    fn default() -> Self {
        Self {
            eval_step: None,
            flat_from: 20,
            init_scales: vec![0.01, 100.0],
            limit_draws: 100_000,
            inner_transitions: 32,
            alpha: 0.01,
            ci_sigmas: 4.0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StudyConfig {
    pub study: StudyKind,
    pub model: ModelSpec,
    #[serde(default = "default_sizes")]
    pub ensemble_sizes: Vec<usize>,
    #[serde(default = "default_horizon")]
    pub horizon: usize,
    #[serde(default = "default_replicas")]
    pub replicas: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub backend: Option<Backend>,
    #[serde(default)]
    pub options: StudyOptions,
}

pub const MIN_REPLICAS: usize = 100;

impl StudyConfig {
    pub fn new(study: StudyKind, model: ModelSpec) -> Self {
        Self {
            study,
            model,
            ensemble_sizes: default_sizes(),
            horizon: default_horizon(),
            replicas: default_replicas(),
            seed: 0,
            backend: None,
            options: StudyOptions::default(),
        }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn backend(&self) -> Backend {
        self.backend.unwrap_or(self.study.default_backend())
    }

    pub fn eval_step(&self) -> usize {
        self.options.eval_step.unwrap_or(match self.study {
            StudyKind::Clt => 10,
            _ => 30.min(self.horizon),
        })
    }

    /// Parses the model and checks study-specific floors.
    pub fn validate(&self) -> Result<ModelParams> {
        let params = self.model.clone().into_params()?;
        let d = params.state_dim();
        if self.replicas < MIN_REPLICAS {
            return Err(HarnessError::Config(format!("replicas must be at least {MIN_REPLICAS}, got {}", self.replicas)));
        }
        if self.ensemble_sizes.is_empty() {
            return Err(HarnessError::Config("ensemble_sizes is empty".into()));
        }
        if self.horizon == 0 {
            return Err(HarnessError::Config("horizon must be positive".into()));
        }
        for &n in &self.ensemble_sizes {
            if n == 0 || n < d {
                return Err(enkf_lab_core::Error::EnsembleTooSmall { n, d }.into());
            }
            if self.study.needs_inverse_moments() && n < 2 * d + 1 {
                return Err(HarnessError::Config(format!(
                    "{} study needs N >= 2d+1 = {} (got N={n})",
                    self.study,
                    2 * d + 1
                )));
            }
        }
        let mut sorted = self.ensemble_sizes.clone();
        sorted.sort_unstable();
        sorted.dedup();
        if sorted != self.ensemble_sizes {
            return Err(HarnessError::Config("ensemble_sizes must be strictly increasing".into()));
        }
        if self.study.needs_scaling_fit() && self.ensemble_sizes.len() < 5 {
            return Err(HarnessError::InsufficientData(format!(
                "{} study fits a scaling law and needs at least 5 ensemble sizes, got {}",
                self.study,
                self.ensemble_sizes.len()
            )));
        }
        if matches!(self.study, StudyKind::Fluctuation | StudyKind::StateError) && self.options.flat_from >= self.horizon {
            return Err(HarnessError::Config(format!(
                "flat_from ({}) must be below the horizon ({})",
                self.options.flat_from, self.horizon
            )));
        }
        if matches!(self.study, StudyKind::Bias | StudyKind::Clt) && self.eval_step() > self.horizon {
            return Err(HarnessError::Config(format!("eval_step {} exceeds horizon {}", self.eval_step(), self.horizon)));
        }
        if self.study.needs_inverse_moments() {
            let scales = &self.options.init_scales;
            if scales.len() < 2 || scales.iter().any(|&c| !(c.is_finite() && c > 0.0)) {
                return Err(HarnessError::Config("init_scales needs at least two positive values".into()));
            }
        }
        if self.study == StudyKind::Lyapunov && self.options.inner_transitions < 2 {
            return Err(HarnessError::Config("inner_transitions must be at least 2".into()));
        }
        if self.study == StudyKind::Clt && self.options.limit_draws < MIN_REPLICAS {
            return Err(HarnessError::Config(format!("limit_draws must be at least {MIN_REPLICAS}")));
        }
        if !(self.options.alpha > 0.0 && self.options.alpha < 1.0) {
            return Err(HarnessError::Config("alpha must lie in (0, 1)".into()));
        }
        if !(self.options.ci_sigmas > 0.0) {
            return Err(HarnessError::Config("ci_sigmas must be positive".into()));
        }
        if self.study == StudyKind::StateError && !self.backend().tracks_mean() {
            return Err(HarnessError::Config("state-error study needs a backend with sample means".into()));
        }
        Ok(params)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn golden_spec() -> ModelSpec {
        ModelParams::golden().to_spec()
    }

    #[test]
    fn round_trip_and_defaults() {
        let text = r#"{"study":"fluctuation","model":{"a":[[1]],"b":[[1]],"r":[[1]],"r0":[[1]],"p0":[[1]]}}"#;
        let cfg = StudyConfig::from_json(text).unwrap();
        assert_eq!(cfg.study, StudyKind::Fluctuation);
        assert_eq!(cfg.ensemble_sizes, default_sizes());
        assert_eq!(cfg.backend(), Backend::WishartChain);
        let back = StudyConfig::from_json(&cfg.to_json().unwrap()).unwrap();
        assert_eq!(back, cfg);
    }

    #[test]
    fn unknown_fields_rejected() {
        let text = r#"{"study":"bias","model":{"a":[[1]],"b":[[1]],"r":[[1]],"r0":[[1]],"p0":[[1]]},"replica":5}"#;
        assert!(StudyConfig::from_json(text).is_err());
    }

    #[test]
    fn floors() {
        let mut cfg = StudyConfig::new(StudyKind::Bias, golden_spec());
        cfg.replicas = 50;
        assert_eq!(cfg.validate().unwrap_err().exit_code(), 2);
        cfg.replicas = 100;
        cfg.ensemble_sizes = vec![8, 16, 32];
        assert!(matches!(cfg.validate(), Err(HarnessError::InsufficientData(_))));
        let mut cfg = StudyConfig::new(StudyKind::Ergodicity, golden_spec());
        cfg.ensemble_sizes = vec![2];
        assert!(cfg.validate().is_err());
        cfg.ensemble_sizes = vec![4];
        assert!(cfg.validate().is_ok());
    }

    #[test]
    fn study_names_parse() {
        for k in StudyKind::ALL {
            assert_eq!(k.name().parse::<StudyKind>().unwrap(), k);
        }
        assert!("nope".parse::<StudyKind>().is_err());
    }
}
