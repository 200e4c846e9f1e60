//! Under-bias of the sample covariance and its `1/N` rate.

use super::common::{self, Ctx, Reference};
use crate::error::Result;
use crate::report::{RawTable, StudyReport};
use crate::stats::Moments;
use enkf_lab_core::expansion;
use enkf_lab_core::linalg;

struct Acc {
    err: Vec<Moments>,
    cv: Moments,
    rows: Vec<[f64; 4]>,
}

pub(crate) fn run(ctx: &Ctx, report: &mut StudyReport) -> Result<()> {
    let cfg = ctx.cfg;
    let params = &ctx.params;
    let d = params.state_dim();
    let horizon = cfg.horizon;
    let eval = cfg.eval_step();
    let z = ctx.sigmas();
    let backend = cfg.backend();
    let reference = Reference::new(params, horizon)?;
    let unobserved = params.is_unobserved();
    let upper = common::upper_envelope(params);
    let r = params.r().matrix();

    let mut raw = RawTable::new(&["ensemble_size", "replica", "trace_bias_plain", "trace_bias_cv"]);
    let mut cv_values = Vec::new();
    let mut cv_errors = Vec::new();
    let mut cv_means = Vec::new();
    let mut plain_margin = f64::INFINITY;
    let mut lower_margin = f64::INFINITY;
    let mut cv_margin = f64::INFINITY;
    let mut unbiased_worst: f64 = 0.0;
    let mut iota: f64 = 0.0;

    for &n_ens in &cfg.ensemble_sizes {
        let acc = ctx.runner.fold(
            cfg.replicas,
            || Acc { err: vec![Moments::new(d * d); horizon + 1], cv: Moments::new(d * d), rows: Vec::new() },
            |acc, rep| {
                let mut rng = ctx.stream("bias/filter", &[n_ens as u64, rep as u64]);
                let path = common::cov_path(params, backend, n_ens, horizon, &mut rng)?;
                for (k, p) in path.pred.iter().enumerate() {
                    acc.err[k].push((&reference.pred[k] - p).as_slice());
                }
                let plain = &reference.pred[eval] - &path.pred[eval];
                let first = expansion::first_order_term(params, &path.pred[..=eval])?;
                let cv = &plain + first;
                acc.cv.push(cv.as_slice());
                acc.rows.push([n_ens as f64, rep as f64, plain.trace(), cv.trace()]);
                Ok(())
            },
            |a, b| {
                for (x, y) in a.err.iter_mut().zip(&b.err) {
                    x.merge(y);
                }
                a.cv.merge(&b.cv);
                a.rows.extend(b.rows);
            },
        )?;
        for row in &acc.rows {
            raw.push(row.to_vec());
        }

        let mut trace_mean = Vec::with_capacity(horizon + 1);
        let mut trace_se = Vec::with_capacity(horizon + 1);
        for (k, m) in acc.err.iter().enumerate() {
            let (mean, se) = common::mean_and_se(m, d);
            trace_mean.push(mean.trace());
            trace_se.push(se.diagonal().norm());
            if unobserved {
                for (v, s) in mean.iter().zip(se.iter()) {
                    unbiased_worst = unbiased_worst.max(v.abs() - z * s);
                }
                continue;
            }
            plain_margin = plain_margin.min(common::psd_margin(&mean, &se, z)?);
            if k >= 1 {
                let sample_mean = &reference.pred[k] - &mean;
                lower_margin = lower_margin.min(common::psd_margin(&(sample_mean - r), &se, z)?);
            }
        }
        report.series.push(common::series("trace_bias", n_ens, 0, trace_mean, trace_se));

        let (cv_mean, cv_se) = common::mean_and_se(&acc.cv, d);
        if !unobserved {
            cv_margin = cv_margin.min(common::psd_margin(&cv_mean, &cv_se, z)?);
            iota = iota.max(n_ens as f64 * linalg::eigen_range(&cv_mean)?.1);
        }
        cv_values.push(linalg::frobenius(&cv_mean));
        cv_errors.push(linalg::frobenius(&cv_se));
        cv_means.push((cv_mean, cv_se));
    }
    report.raw = raw;

    if unobserved {
        report.check(
            "unbiased_without_observations",
            unbiased_worst <= 0.0,
            unbiased_worst,
            format!("every entry of the mean bias within {z} standard errors of zero"),
        );
        return Ok(());
    }

    report.check(
        "under_bias_psd",
        plain_margin >= 0.0,
        plain_margin,
        format!("P_n - mean(p_n) positive semidefinite within {z} SE for all n <= {horizon}"),
    );
    report.check(
        "lower_envelope",
        lower_margin >= 0.0,
        lower_margin,
        format!("mean(p_n) - R positive semidefinite within {z} SE for 1 <= n <= {horizon}"),
    );
    if let Some(up) = upper {
        let mut margin = f64::INFINITY;
        for p in &reference.pred[1..] {
            margin = margin.min(linalg::eigen_range(&linalg::sym_part(&(&up - p))?)?.0);
        }
        report.check("upper_envelope", margin >= -1e-9, margin, "A S^-1 A' + R - P_n positive semidefinite for n >= 1");
    }
    report.check(
        "control_variate_bias_psd",
        cv_margin >= 0.0,
        cv_margin,
        format!("control-variate bias at n = {eval} positive semidefinite within {z} SE"),
    );
    common::record_slope(report, "bias_norm", &cfg.ensemble_sizes, &cv_values, &cv_errors, -1.0, 0.2, true)?;

    let last = cv_means.len() - 1;
    if last >= 1 {
        let (n1, n2) = (cfg.ensemble_sizes[last - 1] as f64, cfg.ensemble_sizes[last] as f64);
        let (b1, s1) = &cv_means[last - 1];
        let (b2, s2) = &cv_means[last];
        let gap = linalg::frobenius(&(b1 * n1 - b2 * n2));
        let band = z * ((n1 * linalg::frobenius(s1)).powi(2) + (n2 * linalg::frobenius(s2)).powi(2)).sqrt();
        report.check(
            "scaled_bias_stabilizes",
            gap <= band,
            gap,
            format!("|N1 b1 - N2 b2|_F within {z} combined SE ({band:.3e}) for the two largest N"),
        );
        report.estimates.insert("scaled_bias_trace_largest_n".into(), (b2 * n2).trace());
    }
    report.estimates.insert("iota_estimate".into(), iota);
    Ok(())
}
