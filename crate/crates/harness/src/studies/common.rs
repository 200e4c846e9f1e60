use crate::config::StudyConfig;
use crate::error::Result;
use crate::report::{Series, SlopeRecord, StudyReport};
use crate::runner::Runner;
use crate::stats::{self, Moments};
use enkf_lab_core::kalman::{self, CovarianceForm};
use enkf_lab_core::linalg::{self, Matrix, Vector};
use enkf_lab_core::rng::{SeedTree, Stream};
use enkf_lab_core::{riccati, Backend, FilterRun, ModelParams};

pub(crate) struct Ctx<'a> {
    pub cfg: &'a StudyConfig,
    pub params: ModelParams,
    pub tree: SeedTree,
    pub runner: Runner,
}

impl Ctx<'_> {
    pub fn stream(&self, purpose: &str, path: &[u64]) -> Stream {
        self.tree.stream(purpose, path)
    }

    pub fn sigmas(&self) -> f64 {
        self.cfg.options.ci_sigmas
    }
}

/// Sample covariance path `p_0..p_H` and updated covariances `p̂_0..p̂_{H−1}`.
pub(crate) struct CovPath {
    pub pred: Vec<Matrix>,
    pub upd: Vec<Matrix>,
}

/// Runs one filter replica. Covariance dynamics do not depend on the
/// observations, so a zero observation sequence is fed.
pub(crate) fn cov_path(params: &ModelParams, backend: Backend, n: usize, horizon: usize, rng: &mut Stream) -> Result<CovPath> {
    let mut run = FilterRun::init(backend, params, n, rng)?;
    let y = Vector::zeros(params.obs_dim());
    let mut pred = Vec::with_capacity(horizon + 1);
    let mut upd = Vec::with_capacity(horizon);
    pred.push(run.cov().matrix().clone());
    for _ in 0..horizon {
        run.step(params, &y, rng)?;
        upd.push(run.upd_cov().expect("updated after step").matrix().clone());
        pred.push(run.cov().matrix().clone());
    }
    Ok(CovPath { pred, upd })
}

/// Exact Riccati orbit with updated covariances and gains.
pub(crate) struct Reference {
    pub pred: Vec<Matrix>,
    pub upd: Vec<Matrix>,
    pub gain: Vec<Matrix>,
}

impl Reference {
    pub fn new(params: &ModelParams, horizon: usize) -> Result<Self> {
        let pred = riccati::orbit(params, params.p0(), horizon)?;
        let mut upd = Vec::with_capacity(horizon + 1);
        let mut gain = Vec::with_capacity(horizon + 1);
        for p in &pred {
            let k = kalman::gain(params, p)?;
            upd.push(kalman::updated_cov_from_gain(params, p, &k, CovarianceForm::Standard));
            gain.push(k);
        }
        Ok(Self { pred, upd, gain })
    }
}

pub(crate) fn to_matrix(v: &[f64], d: usize) -> Matrix {
    Matrix::from_column_slice(d, d, v)
}

/// Smallest eigenvalue of `m + sigmas ‖se‖_F 𝕀`; non-negative means `m` is
/// positive semidefinite within the confidence band.
pub(crate) fn psd_margin(m: &Matrix, se: &Matrix, sigmas: f64) -> Result<f64> {
    let (lo, _) = linalg::eigen_range(&linalg::sym_part(m)?)?;
    Ok(lo + sigmas * linalg::frobenius(se))
}

pub(crate) fn mean_and_se(m: &Moments, d: usize) -> (Matrix, Matrix) {
    (to_matrix(&m.mean(), d), to_matrix(&m.std_error(), d))
}

/// `AS⁻¹A' + R`, when `S` is invertible.
pub(crate) fn upper_envelope(params: &ModelParams) -> Option<Matrix> {
    let s_inv = linalg::spd_inverse(params.s().matrix()).ok()?;
    let a = params.a();
    Some(a * s_inv * a.transpose() + params.r().matrix())
}

/// Fits and records a slope; returns whether it lands in `target ± tol`.
pub(crate) fn record_slope(
    report: &mut StudyReport,
    label: &str,
    sizes: &[usize],
    values: &[f64],
    std_errors: &[f64],
    target: f64,
    tol: f64,
    verdict: bool,
) -> Result<f64> {
    let points: Vec<(f64, f64)> = sizes.iter().zip(values).map(|(&n, &v)| (n as f64, v)).collect();
    let fit = stats::fit_loglog_slope(&points)?;
    let slope = fit.slope;
    report.slopes.push(SlopeRecord {
        label: label.into(),
        ensemble_sizes: sizes.to_vec(),
        values: values.to_vec(),
        std_errors: std_errors.to_vec(),
        fit,
    });
    if verdict {
        report.check(
            format!("{label}_slope"),
            (slope - target).abs() <= tol,
            slope,
            format!("log-log slope in [{:.2}, {:.2}]", target - tol, target + tol),
        );
    }
    Ok(slope)
}

pub(crate) fn series(label: &str, n: usize, first_step: usize, values: Vec<f64>, std_errors: Vec<f64>) -> Series {
    let steps = (first_step..first_step + values.len()).collect();
    Series { label: label.into(), ensemble_size: n, steps, values, std_errors }
}

/// Ratio of the largest value over `[from, end]` to the value at `from`.
pub(crate) fn flatness(values: &[f64], from: usize) -> f64 {
    let base = values[from];
    values[from..].iter().cloned().fold(f64::NEG_INFINITY, f64::max) / base
}

pub(crate) const FLAT_BAND: (f64, f64) = (0.8, 1.25);

pub(crate) const ORDERS: [i32; 3] = [1, 2, 4];

/// Per-step moments of an error norm `x`: `x`, `x²` and `x⁴`.
#[derive(Clone, Debug)]
pub(crate) struct NormProfile {
    pub steps: Vec<Moments>,
}

impl NormProfile {
    pub fn new(len: usize) -> Self {
        Self { steps: vec![Moments::new(3); len] }
    }

    pub fn push(&mut self, step: usize, x: f64) {
        let x2 = x * x;
        self.steps[step].push(&[x, x2, x2 * x2]);
    }

    pub fn merge(&mut self, other: &NormProfile) {
        for (a, b) in self.steps.iter_mut().zip(&other.steps) {
            a.merge(b);
        }
    }

    /// `(Ê x^r)^{1/r}` per step with delta-method standard errors.
    pub fn stat(&self, order: i32) -> (Vec<f64>, Vec<f64>) {
        let idx = match order {
            1 => 0,
            2 => 1,
            4 => 2,
            _ => panic!("unsupported moment order {order}"),
        };
        let r = f64::from(order);
        self.steps
            .iter()
            .map(|m| {
                let mean = m.mean()[idx];
                let se = m.std_error()[idx];
                let v = mean.powf(1.0 / r);
                (v, se * v / (r * mean))
            })
            .unzip()
    }
}

/// Largest value over the steps and its standard error.
pub(crate) fn sup_with_se(values: &[f64], std_errors: &[f64]) -> (f64, f64) {
    let (i, v) = values
        .iter()
        .enumerate()
        .fold((0, f64::NEG_INFINITY), |(bi, bv), (i, &v)| if v > bv { (i, v) } else { (bi, bv) });
    (v, std_errors[i])
}

/// Scaling and time-uniformity checks shared by the mean-error studies.
/// `profiles[i]` belongs to `sizes[i]`.
pub(crate) fn uniform_error_checks(
    report: &mut StudyReport,
    label: &str,
    sizes: &[usize],
    profiles: &[NormProfile],
    flat_from: usize,
) -> Result<()> {
    let mut sups = vec![Vec::new(); ORDERS.len()];
    let mut ses = vec![Vec::new(); ORDERS.len()];
    let mut worst_flat: f64 = 0.0;
    let mut ordered = true;
    for (&n, prof) in sizes.iter().zip(profiles) {
        let mut at_sup = Vec::new();
        for (j, &order) in ORDERS.iter().enumerate() {
            let (vals, errs) = prof.stat(order);
            let (s, e) = sup_with_se(&vals, &errs);
            sups[j].push(s);
            ses[j].push(e);
            at_sup.push(s);
            if order == 1 {
                worst_flat = worst_flat.max(flatness(&vals, flat_from));
                report.series.push(series(&format!("{label}_mean"), n, 0, vals, errs));
            }
        }
        ordered &= at_sup.windows(2).all(|w| w[0] <= w[1] * (1.0 + 1e-12));
    }
    for (j, &order) in ORDERS.iter().enumerate() {
        record_slope(report, &format!("{label}_r{order}"), sizes, &sups[j], &ses[j], -0.5, 0.1, true)?;
    }
    report.check(
        format!("{label}_time_flatness"),
        (FLAT_BAND.0..=FLAT_BAND.1).contains(&worst_flat),
        worst_flat,
        format!("max over n >= {flat_from} of the mean error divided by its value at n = {flat_from}, worst over N, in [{}, {}]", FLAT_BAND.0, FLAT_BAND.1),
    );
    report.check(format!("{label}_moment_ordering"), ordered, f64::from(u8::from(ordered)), "r = 1, 2, 4 moment estimates ordered for every N");
    Ok(())
}
