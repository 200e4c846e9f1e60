//! The linear-Gaussian signal/observation model
//!
//! ```text
//! X_{n+1} = A X_n + W_n,   W_n ~ N(0, R)
//! Y_n     = B X_n + V_n,   V_n ~ N(0, R0)
//! ```
//!
//! with `X_0 ~ N(x0_mean, P0)` and derived `S = B' R0⁻¹ B`.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{self, Matrix, SpdMatrix, Vector};
use crate::rng::{self, SeedTree};

/// Serialized form: every matrix is a row-major array of rows.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSpec {
    pub a: Vec<Vec<f64>>,
    pub b: Vec<Vec<f64>>,
    pub r: Vec<Vec<f64>>,
    pub r0: Vec<Vec<f64>>,
    pub p0: Vec<Vec<f64>>,
    #[serde(default)]
    pub x0_mean: Option<Vec<f64>>,
}

fn rows_to_matrix(name: &str, rows: &[Vec<f64>]) -> Result<Matrix> {
    let nr = rows.len();
    let nc = rows.first().map_or(0, Vec::len);
    if nr == 0 || nc == 0 {
        return Err(Error::Dimension(format!("{name}: empty matrix")));
    }
    if let Some(bad) = rows.iter().position(|r| r.len() != nc) {
        return Err(Error::Dimension(format!(
            "{name}: row {bad} has {} entries, expected {nc}",
            rows[bad].len()
        )));
    }
    if rows.iter().flatten().any(|x| !x.is_finite()) {
        return Err(Error::InvalidArgument(format!("{name}: non-finite entry")));
    }
    Ok(Matrix::from_fn(nr, nc, |i, j| rows[i][j]))
}

pub fn matrix_to_rows(m: &Matrix) -> Vec<Vec<f64>> {
    (0..m.nrows()).map(|i| m.row(i).iter().copied().collect()).collect()
}

impl ModelSpec {
    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn into_params(self) -> Result<ModelParams> {
        let a = rows_to_matrix("a", &self.a)?;
        let b = rows_to_matrix("b", &self.b)?;
        let r = rows_to_matrix("r", &self.r)?;
        let r0 = rows_to_matrix("r0", &self.r0)?;
        let p0 = rows_to_matrix("p0", &self.p0)?;
        let x0 = match self.x0_mean {
            Some(v) => Vector::from_vec(v),
            None => Vector::zeros(a.nrows()),
        };
        ModelParams::new(a, b, r, r0, p0, x0)
    }
}

/// Validated model with the derived quantities every filter needs.
#[derive(Clone, Debug)]
pub struct ModelParams {
    a: Matrix,
    b: Matrix,
    r: SpdMatrix,
    r0: SpdMatrix,
    p0: SpdMatrix,
    x0_mean: Vector,
    s: SpdMatrix,
    r_sqrt: Matrix,
    r0_sqrt: Matrix,
    p0_sqrt: Matrix,
    s_sqrt: Matrix,
}

fn named_pd(name: &str, m: Matrix) -> Result<SpdMatrix> {
    SpdMatrix::positive_definite(m).map_err(|e| match e {
        Error::NotPd { min_eig, .. } | Error::NotPsd { min_eig, .. } => Error::InvalidArgument(format!(
            "{name} must be symmetric positive definite (smallest eigenvalue {min_eig:e})"
        )),
        Error::Dimension(msg) => Error::Dimension(format!("{name}: {msg}")),
        other => other,
    })
}

impl ModelParams {
    /// Dimension-checks, definiteness-checks and derives `S`.
    pub fn new(a: Matrix, b: Matrix, r: Matrix, r0: Matrix, p0: Matrix, x0_mean: Vector) -> Result<Self> {
        let d = a.nrows();
        if !a.is_square() {
            return Err(Error::Dimension(format!("a must be square, got {}x{}", a.nrows(), a.ncols())));
        }
        let d0 = b.nrows();
        if b.ncols() != d {
            return Err(Error::Dimension(format!("b is {d0}x{} but the state dimension is {d}", b.ncols())));
        }
        if r.shape() != (d, d) || p0.shape() != (d, d) {
            return Err(Error::Dimension(format!("r and p0 must be {d}x{d}")));
        }
        if r0.shape() != (d0, d0) {
            return Err(Error::Dimension(format!("r0 must be {d0}x{d0}")));
        }
        if x0_mean.len() != d {
            return Err(Error::Dimension(format!("x0_mean has length {}, expected {d}", x0_mean.len())));
        }
        let r = named_pd("r", r)?;
        let r0 = named_pd("r0", r0)?;
        let p0 = named_pd("p0", p0)?;
        let r0_inv = r0.inverse()?;
        let s = SpdMatrix::classify(b.transpose() * r0_inv.matrix() * &b)?;
        let r_sqrt = linalg::psd_sqrt(&r)?;
        let r0_sqrt = linalg::psd_sqrt(&r0)?;
        let p0_sqrt = linalg::psd_sqrt(&p0)?;
        let s_sqrt = linalg::psd_sqrt(&s)?;
        Ok(Self { a, b, r, r0, p0, x0_mean, s, r_sqrt, r0_sqrt, p0_sqrt, s_sqrt })
    }

    /// One-dimensional model with zero initial mean.
    pub fn scalar(a: f64, b: f64, r: f64, r0: f64, p0: f64) -> Result<Self> {
        let m = |x: f64| Matrix::from_element(1, 1, x);
        Self::new(m(a), m(b), m(r), m(r0), m(p0), Vector::zeros(1))
    }

    /// `A = B = R = R0 = P0 = 1`: the Riccati fixed point is the golden ratio.
    pub fn golden() -> Self {
        Self::scalar(1.0, 1.0, 1.0, 1.0, 1.0).expect("golden model is valid")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        ModelSpec::from_json(text)?.into_params()
    }

    pub fn to_spec(&self) -> ModelSpec {
        ModelSpec {
            a: matrix_to_rows(&self.a),
            b: matrix_to_rows(&self.b),
            r: matrix_to_rows(&self.r),
            r0: matrix_to_rows(&self.r0),
            p0: matrix_to_rows(&self.p0),
            x0_mean: Some(self.x0_mean.iter().copied().collect()),
        }
    }

    pub fn with_a(&self, a: Matrix) -> Result<Self> {
        Self::new(a, self.b.clone(), self.r.matrix().clone(), self.r0.matrix().clone(), self.p0.matrix().clone(), self.x0_mean.clone())
    }

    pub fn with_p0(&self, p0: Matrix) -> Result<Self> {
        Self::new(self.a.clone(), self.b.clone(), self.r.matrix().clone(), self.r0.matrix().clone(), p0, self.x0_mean.clone())
    }

    pub fn state_dim(&self) -> usize {
        self.a.nrows()
    }

    pub fn obs_dim(&self) -> usize {
        self.b.nrows()
    }

    pub fn a(&self) -> &Matrix {
        &self.a
    }

    pub fn b(&self) -> &Matrix {
        &self.b
    }

    pub fn r(&self) -> &SpdMatrix {
        &self.r
    }

    pub fn r0(&self) -> &SpdMatrix {
        &self.r0
    }

    pub fn p0(&self) -> &SpdMatrix {
        &self.p0
    }

    pub fn x0_mean(&self) -> &Vector {
        &self.x0_mean
    }

    /// `S = B' R0⁻¹ B`.
    pub fn s(&self) -> &SpdMatrix {
        &self.s
    }

    pub fn r_sqrt(&self) -> &Matrix {
        &self.r_sqrt
    }

    pub fn r0_sqrt(&self) -> &Matrix {
        &self.r0_sqrt
    }

    pub fn p0_sqrt(&self) -> &Matrix {
        &self.p0_sqrt
    }

    pub fn s_sqrt(&self) -> &Matrix {
        &self.s_sqrt
    }

    /// `true` when `B` is identically zero (no information in observations).
    pub fn is_unobserved(&self) -> bool {
        self.b.iter().all(|&x| x == 0.0)
    }
}

/// A simulated ground-truth trajectory `X_0..X_n` with observations `Y_0..Y_n`.
#[derive(Clone, Debug, PartialEq)]
pub struct PathSample {
    pub states: Vec<Vector>,
    pub observations: Vec<Vector>,
    pub seed: u64,
}

/// Draws a signal path and its observations from the model.
pub fn simulate_path(params: &ModelParams, n: usize, seed: u64) -> PathSample {
    let mut rng = SeedTree::new(seed).stream("simulate-path", &[]);
    simulate_path_with(params, n, &mut rng, seed)
}

/// As [`simulate_path`] but on a caller-supplied stream.
pub fn simulate_path_with<R: Rng + ?Sized>(params: &ModelParams, n: usize, rng: &mut R, seed: u64) -> PathSample {
    let d = params.state_dim();
    let d0 = params.obs_dim();
    let mut states = Vec::with_capacity(n + 1);
    let mut observations = Vec::with_capacity(n + 1);
    let mut x = params.x0_mean() + params.p0_sqrt() * rng::standard_normal_vector(rng, d);
    for k in 0..=n {
        observations.push(params.b() * &x + params.r0_sqrt() * rng::standard_normal_vector(rng, d0));
        if k < n {
            let next = params.a() * &x + params.r_sqrt() * rng::standard_normal_vector(rng, d);
            states.push(std::mem::replace(&mut x, next));
        }
    }
    states.push(x);
    PathSample { states, observations, seed }
}

/// `rows × cols` block whose columns are i.i.d. `N(0, cov)`.
pub fn sample_gaussian_matrix<R: Rng + ?Sized>(rows: usize, cols: usize, cov: &SpdMatrix, rng: &mut R) -> Result<Matrix> {
    if cov.dim() != rows {
        return Err(Error::Dimension(format!("covariance is {0}x{0}, expected {rows}x{rows}", cov.dim())));
    }
    if cols == 0 {
        return Ok(Matrix::zeros(rows, 0));
    }
    let root = linalg::psd_sqrt(cov)?;
    Ok(root * rng::standard_normal_matrix(rng, rows, cols))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn scalar_validation() {
        let p = ModelParams::scalar(1.0, 1.0, 1.0, 1.0, 1.0).unwrap();
        assert_eq!(p.s()[(0, 0)], 1.0);
        let p = ModelParams::scalar(0.5, 2.0, 1.0, 4.0, 1.0).unwrap();
        assert!((p.s()[(0, 0)] - 1.0).abs() < 1e-15);
    }

    #[test]
    fn rejects_indefinite_noise() {
        let r = Matrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, -1.0]);
        let i = Matrix::identity(2, 2);
        let err = ModelParams::new(i.clone(), i.clone(), r, i.clone(), i, Vector::zeros(2)).unwrap_err();
        assert!(matches!(err, Error::InvalidArgument(_)));
    }

    #[test]
    fn rejects_nonconformal_b() {
        let i4 = Matrix::identity(4, 4);
        let b = Matrix::zeros(2, 3);
        let err = ModelParams::new(i4.clone(), b, i4.clone(), Matrix::identity(2, 2), i4, Vector::zeros(4)).unwrap_err();
        assert!(matches!(err, Error::Dimension(_)));
    }

    #[test]
    fn s_recomputes() {
        let a = Matrix::from_row_slice(2, 2, &[1.0, 0.5, 0.0, 0.9]);
        let b = Matrix::from_row_slice(1, 2, &[1.0, -2.0]);
        let r0 = Matrix::from_element(1, 1, 0.5);
        let p = ModelParams::new(a, b.clone(), Matrix::identity(2, 2), r0, Matrix::identity(2, 2), Vector::zeros(2)).unwrap();
        let s = b.transpose() * &b * 2.0;
        assert!((p.s().matrix() - s).norm() < 1e-12);
    }

    #[test]
    fn json_roundtrip() {
        let text = r#"{"a":[[1.0]],"b":[[1.0]],"r":[[1.0]],"r0":[[1.0]],"p0":[[1.0]],"x0_mean":[0.0]}"#;
        let p = ModelParams::from_json(text).unwrap();
        let again = ModelParams::from_json(&serde_json::to_string(&p.to_spec()).unwrap()).unwrap();
        assert_eq!(p.a(), again.a());
        assert!(matches!(ModelParams::from_json("{\"a\": [[1.0]"), Err(Error::Json(_))));
    }

    #[test]
    fn simulate_is_deterministic() {
        let p = ModelParams::scalar(1.0, 1.0, 1.0, 1.0, 1.0).unwrap();
        let a = simulate_path(&p, 20, 9);
        let b = simulate_path(&p, 20, 9);
        assert_eq!(a, b);
        assert_eq!(a.states.len(), 21);
        assert_eq!(a.observations.len(), 21);
        assert_ne!(a, simulate_path(&p, 20, 10));
    }

    #[test]
    fn a_zero_states_have_variance_r() {
        let p = ModelParams::scalar(0.0, 1.0, 2.0, 1.0, 1.0).unwrap();
        let reps = 100_000;
        let mut sum = 0.0;
        let mut sq = 0.0;
        for i in 0..reps {
            let path = simulate_path(&p, 1, i);
            let x = path.states[1][0];
            sum += x;
            sq += x * x;
        }
        let n = reps as f64;
        let var = sq / n - (sum / n).powi(2);
        // Var of the sample variance of N(0, R) is 2R²/n.
        assert!((var - 2.0).abs() < 3.0 * (2.0 * 4.0 / n).sqrt());
    }

    #[test]
    fn unobserved_outputs_are_noise() {
        let p = ModelParams::scalar(0.7, 0.0, 1.0, 3.0, 1.0).unwrap();
        let path = simulate_path(&p, 100_000, 3);
        let n = path.observations.len() as f64;
        let var = path.observations.iter().map(|y| y[0] * y[0]).sum::<f64>() / n;
        assert!((var - 3.0).abs() < 3.0 * (2.0 * 9.0 / n).sqrt());
    }

    #[test]
    fn gaussian_matrix_moments() {
        let mut rng = SeedTree::new(5).stream("g", &[]);
        let cov = SpdMatrix::from_diagonal(&[4.0]).unwrap();
        let z = sample_gaussian_matrix(1, 200_000, &cov, &mut rng).unwrap();
        let var = z.iter().map(|x| x * x).sum::<f64>() / 200_000.0;
        assert!((var - 4.0).abs() < 3.0 * (2.0 * 16.0 / 200_000f64).sqrt());
        let empty = sample_gaussian_matrix(1, 0, &cov, &mut rng).unwrap();
        assert_eq!(empty.ncols(), 0);
    }

    #[test]
    fn gaussian_matrix_identity_covariance() {
        let mut rng = SeedTree::new(6).stream("g", &[]);
        let n = 1_000_000;
        let z = sample_gaussian_matrix(2, n, &SpdMatrix::identity(2), &mut rng).unwrap();
        let c = &z * z.transpose() / n as f64;
        let se_diag = (2.0 / n as f64).sqrt();
        let se_off = (1.0 / n as f64).sqrt();
        assert!((c[(0, 0)] - 1.0).abs() < 3.0 * se_diag);
        assert!((c[(1, 1)] - 1.0).abs() < 3.0 * se_diag);
        assert!(c[(0, 1)].abs() < 3.0 * se_off);
    }
}
