//! Summary statistics, two-sample tests and scaling fits.

use crate::error::{HarnessError, Result};
use statrs::distribution::{ContinuousCDF, StudentsT};

/// Running entrywise first and second moments of fixed-length vectors.
#[derive(Clone, Debug, PartialEq)]
pub struct Moments {
    count: usize,
    sum: Vec<f64>,
    sumsq: Vec<f64>,
}

impl Moments {
    pub fn new(len: usize) -> Self {
        Self { count: 0, sum: vec![0.0; len], sumsq: vec![0.0; len] }
    }

    pub fn len(&self) -> usize {
        self.sum.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sum.is_empty()
    }

    pub fn count(&self) -> usize {
        self.count
    }

    pub fn push(&mut self, x: &[f64]) {
        debug_assert_eq!(x.len(), self.sum.len());
        self.count += 1;
        for ((s, q), v) in self.sum.iter_mut().zip(self.sumsq.iter_mut()).zip(x) {
            *s += v;
            *q += v * v;
        }
    }

    pub fn merge(&mut self, other: &Moments) {
        self.count += other.count;
        for (s, o) in self.sum.iter_mut().zip(&other.sum) {
            *s += o;
        }
        for (s, o) in self.sumsq.iter_mut().zip(&other.sumsq) {
            *s += o;
        }
    }

    pub fn mean(&self) -> Vec<f64> {
        let n = self.count.max(1) as f64;
        self.sum.iter().map(|s| s / n).collect()
    }

    /// Unbiased sample variance per entry.
    pub fn variance(&self) -> Vec<f64> {
        if self.count < 2 {
            return vec![f64::NAN; self.sum.len()];
        }
        let n = self.count as f64;
        self.sum
            .iter()
            .zip(&self.sumsq)
            .map(|(s, q)| ((q - s * s / n) / (n - 1.0)).max(0.0))
            .collect()
    }

    /// Standard error of the mean per entry.
    pub fn std_error(&self) -> Vec<f64> {
        let n = self.count as f64;
        self.variance().into_iter().map(|v| (v / n).sqrt()).collect()
    }
}

/// Sample mean and standard error of the mean.
pub fn mean_se(xs: &[f64]) -> (f64, f64) {
    let mut m = Moments::new(1);
    for &x in xs {
        m.push(&[x]);
    }
    (m.mean()[0], m.std_error()[0])
}

/// Sample mean and unbiased variance.
pub fn mean_var(xs: &[f64]) -> (f64, f64) {
    let mut m = Moments::new(1);
    for &x in xs {
        m.push(&[x]);
    }
    (m.mean()[0], m.variance()[0])
}

/// Standard error of the sample variance, from the fourth central moment.
pub fn variance_se(xs: &[f64]) -> f64 {
    let n = xs.len() as f64;
    if xs.len() < 4 {
        return f64::NAN;
    }
    let (mean, var) = mean_var(xs);
    let m4 = xs.iter().map(|x| (x - mean).powi(4)).sum::<f64>() / n;
    ((m4 - var * var).max(0.0) / n).sqrt()
}

#[derive(Clone, Copy, Debug, PartialEq, serde::Serialize)]
pub struct KsResult {
    pub statistic: f64,
    pub p_value: f64,
}

/// Kolmogorov survival function `Q(λ) = 2 Σ (−1)^{j−1} exp(−2 j² λ²)`.
pub fn kolmogorov_q(lambda: f64) -> f64 {
    if lambda < 1e-3 {
        return 1.0;
    }
    let mut sum = 0.0;
    let mut sign = 1.0;
    for j in 1..=200 {
        let jf = j as f64;
        let term = (-2.0 * jf * jf * lambda * lambda).exp();
        sum += sign * term;
        if term < 1e-16 {
            break;
        }
        sign = -sign;
    }
    (2.0 * sum).clamp(0.0, 1.0)
}

/// Sup-distance between the empirical distribution functions of two sorted
/// samples. Ties are handled by advancing both samples past equal values.
pub fn ks_distance_sorted(a: &[f64], b: &[f64]) -> f64 {
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let (mut i, mut j) = (0, 0);
    let mut d: f64 = 0.0;
    while i < a.len() && j < b.len() {
        let x = a[i].min(b[j]);
        while i < a.len() && a[i] <= x {
            i += 1;
        }
        while j < b.len() && b[j] <= x {
            j += 1;
        }
        d = d.max((i as f64 / na - j as f64 / nb).abs());
    }
    d
}

fn sorted(xs: &[f64]) -> Vec<f64> {
    let mut v = xs.to_vec();
    v.sort_by(f64::total_cmp);
    v
}

/// Two-sample Kolmogorov–Smirnov test with the Stephens-corrected asymptotic
/// p-value.
pub fn ks_two_sample(a: &[f64], b: &[f64]) -> Result<KsResult> {
    if a.is_empty() || b.is_empty() {
        return Err(HarnessError::InsufficientData("empty sample in two-sample test".into()));
    }
    let statistic = ks_distance_sorted(&sorted(a), &sorted(b));
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let en = (na * nb / (na + nb)).sqrt();
    let p_value = kolmogorov_q((en + 0.12 + 0.11 / en) * statistic);
    Ok(KsResult { statistic, p_value })
}

/// Asymptotic critical value of the two-sample distance at level `alpha`.
pub fn ks_critical(alpha: f64, na: usize, nb: usize) -> f64 {
    let c = (-0.5 * (alpha / 2.0).ln()).sqrt();
    c * ((na + nb) as f64 / (na as f64 * nb as f64)).sqrt()
}

/// Per-test level under a Bonferroni correction.
pub fn bonferroni(alpha: f64, tests: usize) -> f64 {
    alpha / tests.max(1) as f64
}

/// Ordinary least squares fit `y = intercept + slope x` with a two-sided
/// Student-t interval for the slope.
#[derive(Clone, Debug, PartialEq, serde::Serialize)]
pub struct LinearFit {
    pub slope: f64,
    pub intercept: f64,
    pub slope_se: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    pub level: f64,
    pub points: usize,
}

impl LinearFit {
    pub fn contains(&self, value: f64) -> bool {
        self.ci_low <= value && value <= self.ci_high
    }
}

pub fn fit_linear(xs: &[f64], ys: &[f64], level: f64) -> Result<LinearFit> {
    let n = xs.len();
    if n != ys.len() {
        return Err(HarnessError::InsufficientData("abscissa and ordinate lengths differ".into()));
    }
    if n < 3 {
        return Err(HarnessError::InsufficientData(format!("linear fit needs at least 3 points, got {n}")));
    }
    if xs.iter().chain(ys).any(|v| !v.is_finite()) {
        return Err(HarnessError::InsufficientData("non-finite value in fit".into()));
    }
    let nf = n as f64;
    let mx = xs.iter().sum::<f64>() / nf;
    let my = ys.iter().sum::<f64>() / nf;
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    if sxx <= 0.0 {
        return Err(HarnessError::InsufficientData("abscissae are all equal".into()));
    }
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let rss: f64 = xs.iter().zip(ys).map(|(x, y)| (y - intercept - slope * x).powi(2)).sum();
    let slope_se = (rss / (nf - 2.0) / sxx).sqrt();
    let t = StudentsT::new(0.0, 1.0, nf - 2.0)
        .map_err(|e| HarnessError::InsufficientData(e.to_string()))?
        .inverse_cdf(0.5 + level / 2.0);
    Ok(LinearFit { slope, intercept, slope_se, ci_low: slope - t * slope_se, ci_high: slope + t * slope_se, level, points: n })
}

/// Least squares slope through at least two points.
pub fn ols_slope(xs: &[f64], ys: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    sxy / sxx
}

/// Empirical quantile by linear interpolation on a sorted sample.
pub fn quantile_sorted(sorted: &[f64], q: f64) -> f64 {
    let pos = q.clamp(0.0, 1.0) * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (pos - lo as f64) * (sorted[hi] - sorted[lo])
}

/// Least squares slope of `log value` against `log size`, with a 95%
/// interval. Needs at least five strictly positive points.
pub fn fit_loglog_slope(points: &[(f64, f64)]) -> Result<LinearFit> {
    if points.len() < 5 {
        return Err(HarnessError::InsufficientData(format!(
            "scaling fit needs at least 5 ensemble sizes, got {}",
            points.len()
        )));
    }
    if points.iter().any(|&(x, y)| x <= 0.0 || y <= 0.0 || !y.is_finite()) {
        return Err(HarnessError::InsufficientData("scaling fit needs positive finite values".into()));
    }
    let xs: Vec<f64> = points.iter().map(|p| p.0.ln()).collect();
    let ys: Vec<f64> = points.iter().map(|p| p.1.ln()).collect();
    fit_linear(&xs, &ys, 0.95)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn moments_match_direct() {
        let xs = [1.0, 2.0, 4.0, 7.0];
        let (m, v) = mean_var(&xs);
        assert!((m - 3.5).abs() < 1e-15);
        assert!((v - 7.0).abs() < 1e-12);
        let mut a = Moments::new(1);
        let mut b = Moments::new(1);
        a.push(&[1.0]);
        a.push(&[2.0]);
        b.push(&[4.0]);
        b.push(&[7.0]);
        a.merge(&b);
        assert_eq!(a.count(), 4);
        assert!((a.variance()[0] - 7.0).abs() < 1e-12);
    }

    #[test]
    fn ks_identical_and_disjoint() {
        let a: Vec<f64> = (0..100).map(f64::from).collect();
        let r = ks_two_sample(&a, &a).unwrap();
        assert_eq!(r.statistic, 0.0);
        assert!((r.p_value - 1.0).abs() < 1e-12);
        let b: Vec<f64> = (200..300).map(f64::from).collect();
        let r = ks_two_sample(&a, &b).unwrap();
        assert_eq!(r.statistic, 1.0);
        assert!(r.p_value < 1e-20);
    }

    #[test]
    fn kolmogorov_tail_values() {
        assert!((kolmogorov_q(1.358) - 0.05).abs() < 1e-3);
        assert!((kolmogorov_q(1.628) - 0.01).abs() < 1e-3);
    }

    #[test]
    fn exact_power_law_has_zero_width() {
        let pts: Vec<(f64, f64)> = [8.0, 16.0, 32.0, 64.0, 128.0].iter().map(|&n: &f64| (n, 3.0 * n.powf(-0.5))).collect();
        let fit = fit_loglog_slope(&pts).unwrap();
        assert!((fit.slope + 0.5).abs() < 1e-12);
        assert!(fit.ci_high - fit.ci_low < 1e-10);
    }

    #[test]
    fn too_few_points() {
        let pts = [(1.0, 1.0), (2.0, 0.5), (4.0, 0.25), (8.0, 0.125)];
        assert!(matches!(fit_loglog_slope(&pts), Err(HarnessError::InsufficientData(_))));
    }
}
