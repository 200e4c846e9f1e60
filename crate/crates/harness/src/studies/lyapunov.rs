//! Drift of `𝒰(p) = 1 + Tr(p) + Tr(p⁻¹)` under the covariance chain.

use super::common::{self, Ctx};
use crate::error::{HarnessError, Result};
use crate::report::{RawTable, StudyReport};
use crate::stats::{self, Moments};
use enkf_lab_core::enkf;
use enkf_lab_core::linalg::{self, Matrix};

pub fn lyapunov_value(p: &Matrix) -> Result<f64> {
    Ok(1.0 + p.trace() + linalg::spd_inverse(p)?.trace())
}

struct Acc {
    pairs: Vec<(f64, f64)>,
    cov: Vec<Moments>,
    inv: Vec<Moments>,
}

pub(crate) fn run(ctx: &Ctx, report: &mut StudyReport) -> Result<()> {
    let cfg = ctx.cfg;
    let params = &ctx.params;
    let d = params.state_dim();
    let horizon = cfg.horizon;
    let inner = cfg.options.inner_transitions;
    let z = ctx.sigmas();
    let r = params.r().matrix();
    let r_inv = linalg::spd_inverse(r)?;
    let upper = common::upper_envelope(params);
    let mut raw = RawTable::new(&["ensemble_size", "init_scale", "replica", "step", "lyapunov", "mean_next_lyapunov"]);

    for &n_ens in &cfg.ensemble_sizes {
        let inv_factor = 1.0 / (1.0 - (2 * d + 1) as f64 / n_ens as f64);
        let inv_bound = &r_inv * inv_factor;
        let mut xs = Vec::new();
        let mut ys = Vec::new();
        let mut lower_margin = f64::INFINITY;
        let mut upper_margin = f64::INFINITY;
        let mut inv_margin = f64::INFINITY;
        for (ci, &scale) in cfg.options.init_scales.iter().enumerate() {
            let start = params.with_p0(params.p0().matrix() * scale)?;
            let acc = ctx.runner.fold(
                cfg.replicas,
                || Acc { pairs: Vec::new(), cov: vec![Moments::new(d * d); horizon + 1], inv: vec![Moments::new(d * d); horizon + 1] },
                |acc, rep| {
                    let key = [n_ens as u64, ci as u64, rep as u64];
                    let mut rng = ctx.stream("lyapunov/chain", &key);
                    let mut p = enkf::wishart_chain_init(&start, n_ens, &mut rng)?.into_inner();
                    for step in 0..=horizon {
                        let p_inv = linalg::spd_inverse(&p)?;
                        acc.cov[step].push(p.as_slice());
                        acc.inv[step].push(p_inv.as_slice());
                        if step == horizon {
                            break;
                        }
                        let u = 1.0 + p.trace() + p_inv.trace();
                        let mut inner_rng = ctx.stream("lyapunov/inner", &[key[0], key[1], key[2], step as u64]);
                        let mut total = 0.0;
                        for _ in 0..inner {
                            let (_, next) = enkf::wishart_chain_step(params, &p, n_ens, &mut inner_rng)?;
                            total += lyapunov_value(next.matrix())?;
                        }
                        acc.pairs.push((u, total / inner as f64));
                        p = enkf::wishart_chain_step(params, &p, n_ens, &mut rng)?.1.into_inner();
                    }
                    Ok(())
                },
                |a, b| {
                    a.pairs.extend(b.pairs);
                    for (x, y) in a.cov.iter_mut().zip(&b.cov) {
                        x.merge(y);
                    }
                    for (x, y) in a.inv.iter_mut().zip(&b.inv) {
                        x.merge(y);
                    }
                },
            )?;
            for (i, &(x, y)) in acc.pairs.iter().enumerate() {
                let (rep, step) = (i / horizon, i % horizon);
                raw.push(vec![n_ens as f64, scale, rep as f64, step as f64, x, y]);
                xs.push(x);
                ys.push(y);
            }
            let mut trace_series = Vec::new();
            let mut trace_se = Vec::new();
            for step in 1..=horizon {
                let (mean, se) = common::mean_and_se(&acc.cov[step], d);
                let (inv_mean, inv_se) = common::mean_and_se(&acc.inv[step], d);
                trace_series.push(mean.trace());
                trace_se.push(se.diagonal().norm());
                lower_margin = lower_margin.min(common::psd_margin(&(&mean - r), &se, z)?);
                if let Some(up) = &upper {
                    upper_margin = upper_margin.min(common::psd_margin(&(up - &mean), &se, z)?);
                }
                inv_margin = inv_margin.min(common::psd_margin(&(&inv_bound - inv_mean), &inv_se, z)?);
            }
            report.series.push(common::series(&format!("mean_trace_init_{scale}"), n_ens, 1, trace_series, trace_se));
        }

        let (lo, hi) = xs.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &x| (lo.min(x), hi.max(x)));
        if !(hi > 2.0 * lo) {
            return Err(HarnessError::InsufficientData(format!(
                "visited states cover too narrow a range of the Lyapunov function ([{lo:.3}, {hi:.3}]); widen init_scales"
            )));
        }
        let fit = stats::fit_linear(&xs, &ys, 0.95)?;
        report.estimates.insert(format!("drift_epsilon_n{n_ens}"), fit.slope);
        report.estimates.insert(format!("drift_constant_n{n_ens}"), fit.intercept);
        report.estimates.insert(format!("drift_epsilon_upper95_n{n_ens}"), fit.ci_high);
        report.check(
            format!("drift_contraction_n{n_ens}"),
            fit.ci_high < 1.0,
            fit.slope,
            format!("upper 95% bound of the drift slope ({:.4}) below 1", fit.ci_high),
        );
        report.check(
            format!("lower_envelope_n{n_ens}"),
            lower_margin >= 0.0,
            lower_margin,
            format!("mean(p_n) - R positive semidefinite within {z} SE for n >= 1"),
        );
        if upper.is_some() {
            report.check(
                format!("upper_envelope_n{n_ens}"),
                upper_margin >= 0.0,
                upper_margin,
                format!("A S^-1 A' + R - mean(p_n) positive semidefinite within {z} SE for n >= 1"),
            );
        }
        report.check(
            format!("inverse_moment_envelope_n{n_ens}"),
            inv_margin >= 0.0,
            inv_margin,
            format!("R^-1 / (1 - (2d+1)/N) - mean(p_n^-1) positive semidefinite within {z} SE for n >= 1"),
        );
    }
    report.raw = raw;
    Ok(())
}
