//! Forgetting of the initial law by the covariance chain.

use super::common::{self, Ctx};
use crate::error::{HarnessError, Result};
use crate::report::{RawTable, StudyReport, TestRecord};
use crate::stats::{self, KsResult};
use enkf_lab_core::enkf;
use enkf_lab_core::linalg::{self, Matrix};
use rand::Rng;

pub const BOOTSTRAP_DRAWS: usize = 200;
const FUNCTIONALS: [&str; 3] = ["trace", "log_det", "lambda_max"];

/// Trace, log-determinant and largest eigenvalue.
pub fn functionals(p: &Matrix) -> Result<[f64; 3]> {
    let ev = linalg::sorted_eigenvalues(p)?;
    let log_det = ev.iter().map(|v| v.ln()).sum();
    Ok([ev.sum(), log_det, ev[ev.len() - 1]])
}

struct Chain {
    traces: Vec<f64>,
    last: [f64; 3],
    pushed: [f64; 3],
}

fn ks_distance(a: &[f64], b: &[f64]) -> f64 {
    let mut a = a.to_vec();
    let mut b = b.to_vec();
    a.sort_by(f64::total_cmp);
    b.sort_by(f64::total_cmp);
    stats::ks_distance_sorted(&a, &b)
}

pub(crate) fn run(ctx: &Ctx, report: &mut StudyReport) -> Result<()> {
    let cfg = ctx.cfg;
    let params = &ctx.params;
    let horizon = cfg.horizon;
    let n_ens = cfg.ensemble_sizes[0];
    let reps = cfg.replicas;
    let scales = &cfg.options.init_scales;
    let pair = [scales[0], scales[scales.len() - 1]];

    let mut chains = Vec::new();
    for (ci, &scale) in pair.iter().enumerate() {
        let start = params.with_p0(params.p0().matrix() * scale)?;
        let runs = ctx.runner.map(reps, |rep| {
            let mut rng = ctx.stream("ergodicity/chain", &[ci as u64, rep as u64]);
            let mut p = enkf::wishart_chain_init(&start, n_ens, &mut rng)?.into_inner();
            let mut traces = Vec::with_capacity(horizon + 1);
            traces.push(p.trace());
            for _ in 0..horizon {
                p = enkf::wishart_chain_step(params, &p, n_ens, &mut rng)?.1.into_inner();
                traces.push(p.trace());
            }
            let last = functionals(&p)?;
            let next = enkf::wishart_chain_step(params, &p, n_ens, &mut rng)?.1;
            Ok(Chain { traces, last, pushed: functionals(next.matrix())? })
        })?;
        chains.push(runs);
    }
    let (first, second) = (&chains[0], &chains[1]);

    let mut raw = RawTable::new(&["chain", "replica", "trace", "log_det", "lambda_max", "pushed_trace", "pushed_log_det", "pushed_lambda_max"]);
    for (ci, runs) in chains.iter().enumerate() {
        for (rep, c) in runs.iter().enumerate() {
            let mut row = vec![ci as f64, rep as f64];
            row.extend(c.last);
            row.extend(c.pushed);
            raw.push(row);
        }
    }
    report.raw = raw;

    let by_step = |runs: &[Chain], k: usize| -> Vec<f64> { runs.iter().map(|c| c.traces[k]).collect() };
    let distances: Vec<f64> = (0..=horizon).map(|k| ks_distance(&by_step(first, k), &by_step(second, k))).collect();
    report.series.push(common::series("trace_ks_distance", n_ens, 0, distances.clone(), vec![0.0; horizon + 1]));

    let floor = stats::ks_critical(0.05, reps, reps);
    let tail_len = (horizon.div_ceil(10)).max(5).min(horizon + 1);
    let mut tail: Vec<f64> = distances[horizon + 1 - tail_len..].to_vec();
    tail.sort_by(f64::total_cmp);
    let tail_median = stats::quantile_sorted(&tail, 0.5);
    if tail_median > floor {
        return Err(HarnessError::Config(format!(
            "horizon too short: median distance over the last {tail_len} steps is {tail_median:.4}, above the sampling floor {floor:.4}"
        )));
    }
    let window = distances.iter().take_while(|&&v| v > floor).count();
    if window < 2 {
        return Err(HarnessError::Config(format!(
            "initial laws are not dispersed: the chains are within sampling noise after {window} steps"
        )));
    }

    let log_floor = 1.0 / reps as f64;
    let steps: Vec<f64> = (0..window).map(|k| k as f64).collect();
    let logs: Vec<f64> = distances[..window].iter().map(|v| v.max(log_floor).ln()).collect();
    let slope = stats::ols_slope(&steps, &logs);
    let window_a: Vec<Vec<f64>> = (0..window).map(|k| by_step(first, k)).collect();
    let window_b: Vec<Vec<f64>> = (0..window).map(|k| by_step(second, k)).collect();
    let mut boot = ctx.runner.map(BOOTSTRAP_DRAWS, |b| {
        let mut rng = ctx.stream("ergodicity/bootstrap", &[b as u64]);
        let ia: Vec<usize> = (0..reps).map(|_| rng.random_range(0..reps)).collect();
        let ib: Vec<usize> = (0..reps).map(|_| rng.random_range(0..reps)).collect();
        let ys: Vec<f64> = (0..window)
            .map(|k| {
                let a: Vec<f64> = ia.iter().map(|&i| window_a[k][i]).collect();
                let b: Vec<f64> = ib.iter().map(|&i| window_b[k][i]).collect();
                ks_distance(&a, &b).max(log_floor).ln()
            })
            .collect();
        Ok(stats::ols_slope(&steps, &ys))
    })?;
    boot.sort_by(f64::total_cmp);
    let (lo, hi) = (stats::quantile_sorted(&boot, 0.025), stats::quantile_sorted(&boot, 0.975));
    report.estimates.insert("log_distance_slope".into(), slope);
    report.estimates.insert("log_distance_slope_ci_low".into(), lo);
    report.estimates.insert("log_distance_slope_ci_high".into(), hi);
    report.estimates.insert("decay_window_steps".into(), window as f64);
    report.estimates.insert("mixing_rate_estimate".into(), -slope);

    let final_distance = distances[horizon];
    report.check("final_trace_distance", final_distance < 0.02, final_distance, format!("KS distance of Tr(p_n) at n = {horizon} below 0.02"));
    report.check(
        "exponential_decay",
        hi < 0.0,
        slope,
        format!("log distance slope over the first {window} steps negative; bootstrap 95% interval [{lo:.4}, {hi:.4}]"),
    );

    let level = stats::bonferroni(cfg.options.alpha, FUNCTIONALS.len());
    let ks_check = |report: &mut StudyReport, name: &str, a: Vec<f64>, b: Vec<f64>| -> Result<KsResult> {
        let res = stats::ks_two_sample(&a, &b)?;
        report.tests.push(TestRecord { label: name.into(), statistic: res.statistic, p_value: res.p_value, level });
        Ok(res)
    };
    let mut final_p = f64::INFINITY;
    let mut push_p = f64::INFINITY;
    for (j, name) in FUNCTIONALS.iter().enumerate() {
        let a: Vec<f64> = first.iter().map(|c| c.last[j]).collect();
        let b: Vec<f64> = second.iter().map(|c| c.last[j]).collect();
        let pushed: Vec<f64> = second.iter().map(|c| c.pushed[j]).collect();
        final_p = final_p.min(ks_check(report, &format!("final_{name}"), a.clone(), b)?.p_value);
        push_p = push_p.min(ks_check(report, &format!("push_forward_{name}"), a, pushed)?.p_value);
    }
    report.check(
        "final_two_sample",
        final_p >= level,
        final_p,
        format!("smallest KS p-value over trace, log-det, lambda_max at least {level:.4} (Bonferroni)"),
    );
    report.check(
        "stationarity",
        push_p >= level,
        push_p,
        format!("one-step push-forward indistinguishable from the final law: smallest p-value at least {level:.4}"),
    );
    Ok(())
}
