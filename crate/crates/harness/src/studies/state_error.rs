//! Time-uniform `1/√N` errors of the sample mean against the Kalman filter.

use super::common::{self, Ctx, NormProfile};
use crate::error::{HarnessError, Result};
use crate::report::{RawTable, StudyReport};
use enkf_lab_core::kalman::{self, CovarianceForm};
use enkf_lab_core::linalg;
use enkf_lab_core::model::simulate_path_with;
use enkf_lab_core::{FilterRun, ModelParams};

/// `‖S^{1/2} A S^{−1/2}‖₂`, or an error when `S` is singular.
pub fn contraction_norm(params: &ModelParams) -> Result<f64> {
    let s = params.s().matrix();
    let (lo, hi) = linalg::eigen_range(s)?;
    if lo <= linalg::pd_tolerance(hi) {
        return Err(HarnessError::Hypothesis("S = B' R0^-1 B is singular, so the contraction condition cannot hold".into()));
    }
    let root = params.s_sqrt();
    let root_inv = linalg::spd_inverse(root)?;
    Ok(linalg::spectral(&(root * params.a() * root_inv)))
}

pub fn check_contraction(params: &ModelParams) -> Result<f64> {
    let c = contraction_norm(params)?;
    if c >= 1.0 {
        return Err(HarnessError::Hypothesis(format!(
            "state-error study requires |S^1/2 A S^-1/2|_2 < 1, got {c:.6}"
        )));
    }
    Ok(c)
}

pub(crate) fn run(ctx: &Ctx, report: &mut StudyReport) -> Result<()> {
    let cfg = ctx.cfg;
    let params = &ctx.params;
    let contraction = check_contraction(params)?;
    report.estimates.insert("contraction_norm".into(), contraction);
    let horizon = cfg.horizon;
    let backend = cfg.backend();
    let sizes = &cfg.ensemble_sizes;

    let init = || -> (Vec<NormProfile>, Vec<NormProfile>, Vec<Vec<f64>>) {
        (vec![NormProfile::new(horizon + 1); sizes.len()], vec![NormProfile::new(horizon); sizes.len()], Vec::new())
    };
    let (pred, upd, rows) = ctx.runner.fold(
        cfg.replicas,
        init,
        |(pred, upd, rows), rep| {
            let mut path_rng = ctx.stream("state-error/path", &[rep as u64]);
            let path = simulate_path_with(params, horizon, &mut path_rng, cfg.seed);
            let exact = kalman::kf_run(params, &path.observations[..horizon], CovarianceForm::Standard)?;
            for (i, &n_ens) in sizes.iter().enumerate() {
                let mut rng = ctx.stream("state-error/filter", &[n_ens as u64, rep as u64]);
                let mut run = FilterRun::init(backend, params, n_ens, &mut rng)?;
                let mut sup: f64 = 0.0;
                for k in 0..=horizon {
                    let state = &exact.states[k];
                    let e = (run.mean().expect("backend tracks the mean") - &state.pred_mean).norm();
                    sup = sup.max(e);
                    pred[i].push(k, e);
                    if k == horizon {
                        break;
                    }
                    run.step(params, &path.observations[k], &mut rng)?;
                    let upd_mean = state.upd_mean.as_ref().expect("updated before the last step");
                    upd[i].push(k, (run.upd_mean().expect("backend tracks the mean") - upd_mean).norm());
                }
                rows.push(vec![n_ens as f64, rep as f64, sup]);
            }
            Ok(())
        },
        |a, b| {
            for (x, y) in a.0.iter_mut().zip(&b.0) {
                x.merge(y);
            }
            for (x, y) in a.1.iter_mut().zip(&b.1) {
                x.merge(y);
            }
            a.2.extend(b.2);
        },
    )?;
    let mut raw = RawTable::new(&["ensemble_size", "replica", "sup_predicted_mean_error"]);
    for row in rows {
        raw.push(row);
    }
    report.raw = raw;
    let flat_from = cfg.options.flat_from;
    common::uniform_error_checks(report, "predicted_mean_error", sizes, &pred, flat_from)?;
    common::uniform_error_checks(report, "updated_mean_error", sizes, &upd, flat_from.min(horizon - 1))
}
