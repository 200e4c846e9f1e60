//! Time-uniform `1/√N` fluctuations of the sample covariance.

use super::common::{self, Ctx, NormProfile, Reference};
use crate::error::Result;
use crate::report::{RawTable, StudyReport};
use enkf_lab_core::linalg;

pub(crate) fn run(ctx: &Ctx, report: &mut StudyReport) -> Result<()> {
    let cfg = ctx.cfg;
    let params = &ctx.params;
    let horizon = cfg.horizon;
    let backend = cfg.backend();
    let reference = Reference::new(params, horizon)?;
    let mut raw = RawTable::new(&["ensemble_size", "replica", "sup_error", "final_error"]);
    let mut profiles = Vec::new();

    for &n_ens in &cfg.ensemble_sizes {
        let (prof, rows) = ctx.runner.fold(
            cfg.replicas,
            || (NormProfile::new(horizon + 1), Vec::new()),
            |(prof, rows), rep| {
                let mut rng = ctx.stream("fluctuation/filter", &[n_ens as u64, rep as u64]);
                let path = common::cov_path(params, backend, n_ens, horizon, &mut rng)?;
                let mut sup: f64 = 0.0;
                let mut last = 0.0;
                for (k, p) in path.pred.iter().enumerate() {
                    last = linalg::frobenius(&(p - &reference.pred[k]));
                    sup = sup.max(last);
                    prof.push(k, last);
                }
                rows.push([n_ens as f64, rep as f64, sup, last]);
                Ok(())
            },
            |a, b| {
                a.0.merge(&b.0);
                a.1.extend(b.1);
            },
        )?;
        for row in rows {
            raw.push(row.to_vec());
        }
        profiles.push(prof);
    }
    report.raw = raw;
    common::uniform_error_checks(report, "covariance_error", &cfg.ensemble_sizes, &profiles, cfg.options.flat_from)
}
