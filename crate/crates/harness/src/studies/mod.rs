//! The Monte Carlo studies.

mod bias;
mod clt;
mod common;
mod ergodicity;
mod fluctuation;
mod gain;
mod lyapunov;
mod state_error;

pub use ergodicity::functionals as chain_functionals;
pub use gain::gain_lipschitz_constant;
pub use lyapunov::lyapunov_value;
pub use state_error::{check_contraction, contraction_norm};

use crate::config::{StudyConfig, StudyKind};
use crate::error::Result;
use crate::report::StudyReport;
use crate::runner::Runner;
use common::Ctx;
use enkf_lab_core::rng::SeedTree;

/// Validates `cfg` and runs the configured study.
pub fn run_study(cfg: &StudyConfig, runner: Runner) -> Result<StudyReport> {
    let params = cfg.validate()?;
    if cfg.study == StudyKind::StateError {
        check_contraction(&params)?;
    }
    let ctx = Ctx { cfg, params, tree: SeedTree::new(cfg.seed), runner };
    let mut report = StudyReport::new(cfg)?;
    match cfg.study {
        StudyKind::Bias => bias::run(&ctx, &mut report)?,
        StudyKind::Fluctuation => fluctuation::run(&ctx, &mut report)?,
        StudyKind::Gain => gain::run(&ctx, &mut report)?,
        StudyKind::Lyapunov => lyapunov::run(&ctx, &mut report)?,
        StudyKind::Ergodicity => ergodicity::run(&ctx, &mut report)?,
        StudyKind::Clt => clt::run(&ctx, &mut report)?,
        StudyKind::StateError => state_error::run(&ctx, &mut report)?,
    }
    Ok(report)
}
