//! Gaussian fluctuations of `√N (p_n − P_n)` against the limit sampler.

use super::common::{self, Ctx};
use crate::error::Result;
use crate::report::{RawTable, StudyReport, TestRecord};
use crate::stats;
use enkf_lab_core::enkf::LimitSampler;
use enkf_lab_core::linalg::{self, Matrix};

const FUNCTIONALS: [&str; 3] = ["trace", "lambda_max", "frobenius"];

fn functionals(m: &Matrix) -> Result<[f64; 3]> {
    let (_, hi) = linalg::eigen_range(m)?;
    Ok([m.trace(), hi, linalg::frobenius(m)])
}

/// Upper-triangular entries, row by row.
fn upper_entries(m: &Matrix) -> Vec<f64> {
    let d = m.nrows();
    (0..d).flat_map(|i| (i..d).map(move |j| (i, j))).map(|(i, j)| m[(i, j)]).collect()
}

pub(crate) fn run(ctx: &Ctx, report: &mut StudyReport) -> Result<()> {
    let cfg = ctx.cfg;
    let params = &ctx.params;
    let step = cfg.eval_step();
    let z = ctx.sigmas();
    let backend = cfg.backend();
    let sampler = LimitSampler::new(params, step)?;
    let exact = sampler.predicted()[step].clone();
    let propagators = sampler.propagators(step)?;

    let limit = ctx.runner.map(cfg.options.limit_draws, |i| {
        let mut rng = ctx.stream("clt/limit", &[i as u64]);
        Ok(sampler.clt_draw(&propagators, &mut rng)?)
    })?;
    let limit_entries: Vec<Vec<f64>> = limit.iter().map(upper_entries).collect();
    let limit_funcs = limit.iter().map(functionals).collect::<Result<Vec<_>>>()?;
    let level = stats::bonferroni(cfg.options.alpha, FUNCTIONALS.len());

    let mut raw = RawTable::new(&["ensemble_size", "replica", "trace", "lambda_max", "frobenius"]);
    for &n_ens in &cfg.ensemble_sizes {
        let root_n = (n_ens as f64).sqrt();
        let scaled = ctx.runner.map(cfg.replicas, |rep| {
            let mut rng = ctx.stream("clt/filter", &[n_ens as u64, rep as u64]);
            let path = common::cov_path(params, backend, n_ens, step, &mut rng)?;
            Ok((&path.pred[step] - &exact) * root_n)
        })?;
        let funcs = scaled.iter().map(functionals).collect::<Result<Vec<_>>>()?;
        for (rep, f) in funcs.iter().enumerate() {
            raw.push(vec![n_ens as f64, rep as f64, f[0], f[1], f[2]]);
        }
        let entries: Vec<Vec<f64>> = scaled.iter().map(upper_entries).collect();

        let mut worst_mean: f64 = 0.0;
        let mut worst_var: f64 = 0.0;
        for e in 0..entries[0].len() {
            let xs: Vec<f64> = entries.iter().map(|v| v[e]).collect();
            let ls: Vec<f64> = limit_entries.iter().map(|v| v[e]).collect();
            let (mx, sx) = stats::mean_se(&xs);
            let (ml, sl) = stats::mean_se(&ls);
            worst_mean = worst_mean.max((mx - ml).abs() / (sx * sx + sl * sl).sqrt());
            let (_, vx) = stats::mean_var(&xs);
            let (_, vl) = stats::mean_var(&ls);
            let se = (stats::variance_se(&xs).powi(2) + stats::variance_se(&ls).powi(2)).sqrt();
            worst_var = worst_var.max((vx - vl).abs() / se);
            report.estimates.insert(format!("n{n_ens}_entry{e}_mean"), mx);
            report.estimates.insert(format!("n{n_ens}_entry{e}_variance"), vx);
            report.estimates.insert(format!("limit_entry{e}_variance"), vl);
        }
        report.check(
            format!("mean_match_n{n_ens}"),
            worst_mean <= z,
            worst_mean,
            format!("entrywise mean difference within {z} combined standard errors"),
        );
        report.check(
            format!("variance_match_n{n_ens}"),
            worst_var <= z,
            worst_var,
            format!("entrywise variance difference within {z} combined standard errors"),
        );
        let mut smallest_p = f64::INFINITY;
        for (j, name) in FUNCTIONALS.iter().enumerate() {
            let a: Vec<f64> = funcs.iter().map(|f| f[j]).collect();
            let b: Vec<f64> = limit_funcs.iter().map(|f| f[j]).collect();
            let res = stats::ks_two_sample(&a, &b)?;
            report.tests.push(TestRecord { label: format!("n{n_ens}_{name}"), statistic: res.statistic, p_value: res.p_value, level });
            smallest_p = smallest_p.min(res.p_value);
        }
        report.check(
            format!("limit_law_n{n_ens}"),
            smallest_p >= level,
            smallest_p,
            format!("smallest KS p-value over trace, lambda_max, Frobenius at least {level:.4} (Bonferroni)"),
        );
    }
    report.raw = raw;
    Ok(())
}
