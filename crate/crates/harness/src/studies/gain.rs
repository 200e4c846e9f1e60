//! Updated covariance and sample gain errors.

use super::common::{self, Ctx, NormProfile, Reference};
use crate::error::Result;
use crate::report::{RawTable, StudyReport};
use enkf_lab_core::kalman;
use enkf_lab_core::linalg;
use enkf_lab_core::ModelParams;

/// Constant `c` with `‖K(p) − K(P)‖_F ≤ c ‖p − P‖_F` for all covariances,
/// available when `S` and `BB'` are invertible.
pub fn gain_lipschitz_constant(params: &ModelParams) -> Option<f64> {
    let s = params.s().matrix();
    let s_inv = linalg::spd_inverse(s).ok()?;
    let (_, s_max) = linalg::eigen_range(s).ok()?;
    let bbt = params.b() * params.b().transpose();
    let (bb_min, bb_max) = linalg::eigen_range(&bbt).ok()?;
    if bb_min <= linalg::pd_tolerance(bb_max) {
        return None;
    }
    Some(s_max * s.trace() * linalg::frobenius(&s_inv) / bb_min.sqrt())
}

pub(crate) fn run(ctx: &Ctx, report: &mut StudyReport) -> Result<()> {
    let cfg = ctx.cfg;
    let params = &ctx.params;
    let horizon = cfg.horizon;
    let backend = cfg.backend();
    let reference = Reference::new(params, horizon)?;
    let lipschitz = gain_lipschitz_constant(params);
    let mut raw = RawTable::new(&["ensemble_size", "replica", "sup_updated_error", "sup_gain_error", "max_gain_norm"]);
    let mut upd_profiles = Vec::new();
    let mut gain_profiles = Vec::new();
    let mut violations = 0usize;
    let mut worst_ratio: f64 = 0.0;
    let mut max_gain: f64 = 0.0;

    for &n_ens in &cfg.ensemble_sizes {
        let (upd, gain, rows, bad, ratio) = ctx.runner.fold(
            cfg.replicas,
            || (NormProfile::new(horizon), NormProfile::new(horizon), Vec::new(), 0usize, 0.0f64),
            |(upd, gain, rows, bad, ratio), rep| {
                let mut rng = ctx.stream("gain/filter", &[n_ens as u64, rep as u64]);
                let path = common::cov_path(params, backend, n_ens, horizon, &mut rng)?;
                let (mut sup_u, mut sup_g, mut gmax): (f64, f64, f64) = (0.0, 0.0, 0.0);
                for k in 0..horizon {
                    let eu = linalg::frobenius(&(&path.upd[k] - &reference.upd[k]));
                    let k_sample = kalman::gain(params, &path.pred[k])?;
                    let eg = linalg::frobenius(&(&k_sample - &reference.gain[k]));
                    upd.push(k, eu);
                    gain.push(k, eg);
                    sup_u = sup_u.max(eu);
                    sup_g = sup_g.max(eg);
                    gmax = gmax.max(linalg::frobenius(&k_sample));
                    if let Some(c) = lipschitz {
                        let bound = c * linalg::frobenius(&(&path.pred[k] - &reference.pred[k]));
                        if eg > bound * (1.0 + 1e-10) + 1e-14 {
                            *bad += 1;
                        }
                        if bound > 0.0 {
                            *ratio = ratio.max(eg / bound);
                        }
                    }
                }
                rows.push([n_ens as f64, rep as f64, sup_u, sup_g, gmax]);
                Ok(())
            },
            |a, b| {
                a.0.merge(&b.0);
                a.1.merge(&b.1);
                a.2.extend(b.2);
                a.3 += b.3;
                a.4 = a.4.max(b.4);
            },
        )?;
        for row in &rows {
            max_gain = max_gain.max(row[4]);
            raw.push(row.to_vec());
        }
        violations += bad;
        worst_ratio = worst_ratio.max(ratio);
        upd_profiles.push(upd);
        gain_profiles.push(gain);
    }
    report.raw = raw;

    if params.is_unobserved() {
        report.check("gain_identically_zero", max_gain == 0.0, max_gain, "sample gain is exactly zero without observations");
        return Ok(());
    }
    if let Some(c) = lipschitz {
        report.estimates.insert("gain_lipschitz_constant".into(), c);
        report.check(
            "gain_lipschitz_per_draw",
            violations == 0,
            worst_ratio,
            format!("|K(p_n) - K(P_n)|_F <= {c:.6e} |p_n - P_n|_F on every draw (observed: largest ratio to the bound)"),
        );
    }
    let flat_from = cfg.options.flat_from.min(horizon.saturating_sub(1));
    common::uniform_error_checks(report, "updated_covariance_error", &cfg.ensemble_sizes, &upd_profiles, flat_from)?;
    common::uniform_error_checks(report, "gain_error", &cfg.ensemble_sizes, &gain_profiles, flat_from)
}
