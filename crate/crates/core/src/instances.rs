//! Random problem instances for property tests and identity suites.

use rand::Rng;

use crate::linalg::{Matrix, Vector};
use crate::model::ModelParams;
use crate::rng;

/// Dense matrix with i.i.d. `N(0, scale²)` entries.
pub fn random_matrix<R: Rng + ?Sized>(rng: &mut R, rows: usize, cols: usize, scale: f64) -> Matrix {
    rng::standard_normal_matrix(rng, rows, cols) * scale
}

/// `G G' / d + floor · I` with Gaussian `G`; eigenvalues are at least `floor`.
pub fn random_spd<R: Rng + ?Sized>(rng: &mut R, d: usize, floor: f64) -> Matrix {
    let g = rng::standard_normal_matrix(rng, d, d);
    let mut m = &g * g.transpose() / d as f64 + Matrix::identity(d, d) * floor;
    crate::linalg::symmetrize(&mut m);
    m
}

/// PSD matrix of the given rank.
pub fn random_psd_rank<R: Rng + ?Sized>(rng: &mut R, d: usize, rank: usize) -> Matrix {
    let g = rng::standard_normal_matrix(rng, d, rank);
    let mut m = &g * g.transpose();
    crate::linalg::symmetrize(&mut m);
    m
}

/// Generic model of state dimension `d` and observation dimension `d0`.
/// Noise covariances have eigenvalues at least 0.2; the signal matrix has
/// entries of order `1/√d`, so it may be unstable.
pub fn random_model<R: Rng + ?Sized>(rng: &mut R, d: usize, d0: usize) -> ModelParams {
    let a = random_matrix(rng, d, d, 1.0 / (d as f64).sqrt());
    let b = random_matrix(rng, d0, d, 1.0);
    let r = random_spd(rng, d, 0.2);
    let r0 = random_spd(rng, d0, 0.2);
    let p0 = random_spd(rng, d, 0.2);
    let x0 = rng::standard_normal_vector(rng, d);
    ModelParams::new(a, b, r, r0, p0, x0).expect("random model is valid by construction")
}

/// Random model with a full-rank `B` (`d0 = d`), so `S` is invertible.
pub fn random_observed_model<R: Rng + ?Sized>(rng: &mut R, d: usize) -> ModelParams {
    random_model(rng, d, d)
}

pub fn random_vector<R: Rng + ?Sized>(rng: &mut R, d: usize) -> Vector {
    rng::standard_normal_vector(rng, d)
}
