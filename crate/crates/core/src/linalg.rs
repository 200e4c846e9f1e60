//! Symmetric-matrix kernel: Löwner order, principal square roots, norms,
//! spectra and the Sherman–Morrison–Woodbury inverse.
//!
//! Every covariance-valued quantity in the crate is an [`SpdMatrix`]. The
//! constructor symmetrizes its input and certifies the eigenvalue bound
//! `λ_min ≥ -tol_pd` (semidefinite) or `λ_min > tol_pd` (definite), where
//! `tol_pd = 1e-10 · (1 + λ_max)`.

use std::ops::Deref;

use nalgebra::{Cholesky, DMatrix, DVector, Dyn, Schur, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type Matrix = DMatrix<f64>;
pub type Vector = DVector<f64>;

const EIGEN_EPS: f64 = 1e-15;
const EIGEN_MAX_ITER: usize = 10_000;

/// Relative tolerance used to separate round-off from genuine indefiniteness.
pub fn pd_tolerance(max_eig: f64) -> f64 {
    1e-10 * (1.0 + max_eig.abs())
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Definiteness {
    PositiveDefinite,
    PositiveSemidefinite,
}

/// A symmetric positive (semi-)definite matrix with certified invariants.
#[derive(Clone, Debug, PartialEq)]
pub struct SpdMatrix {
    inner: Matrix,
    tag: Definiteness,
}

impl SpdMatrix {
    /// Symmetrizes `m` and checks the definiteness requested by `tag`.
    pub fn new(m: Matrix, tag: Definiteness) -> Result<Self> {
        let m = sym_part(&m)?;
        let (lo, hi) = eigen_range(&m)?;
        let tol = pd_tolerance(hi);
        match tag {
            Definiteness::PositiveDefinite if lo <= tol => Err(Error::NotPd { min_eig: lo, tol }),
            Definiteness::PositiveSemidefinite if lo < -tol => {
                Err(Error::NotPsd { min_eig: lo, tol })
            }
            _ => Ok(Self { inner: m, tag }),
        }
    }

    pub fn positive_definite(m: Matrix) -> Result<Self> {
        Self::new(m, Definiteness::PositiveDefinite)
    }

    pub fn semidefinite(m: Matrix) -> Result<Self> {
        Self::new(m, Definiteness::PositiveSemidefinite)
    }

    /// Semidefinite if possible, upgraded to definite when the spectrum allows.
    pub fn classify(m: Matrix) -> Result<Self> {
        let m = sym_part(&m)?;
        let (lo, hi) = eigen_range(&m)?;
        let tol = pd_tolerance(hi);
        if lo > tol {
            Ok(Self { inner: m, tag: Definiteness::PositiveDefinite })
        } else if lo >= -tol {
            Ok(Self { inner: m, tag: Definiteness::PositiveSemidefinite })
        } else {
            Err(Error::NotPsd { min_eig: lo, tol })
        }
    }

    pub fn identity(d: usize) -> Self {
        Self { inner: Matrix::identity(d, d), tag: Definiteness::PositiveDefinite }
    }

    pub fn zeros(d: usize) -> Self {
        Self { inner: Matrix::zeros(d, d), tag: Definiteness::PositiveSemidefinite }
    }

    pub fn from_diagonal(diag: &[f64]) -> Result<Self> {
        Self::classify(Matrix::from_diagonal(&Vector::from_column_slice(diag)))
    }

    /// Wraps a matrix that is symmetric by construction. The caller vouches
    /// for semidefiniteness; used on hot paths where the algebra guarantees it.
    pub(crate) fn from_symmetric_unchecked(m: Matrix) -> Self {
        debug_assert!(m.is_square());
        Self { inner: m, tag: Definiteness::PositiveSemidefinite }
    }

    pub fn dim(&self) -> usize {
        self.inner.nrows()
    }

    pub fn tag(&self) -> Definiteness {
        self.tag
    }

    pub fn matrix(&self) -> &Matrix {
        &self.inner
    }

    pub fn into_inner(self) -> Matrix {
        self.inner
    }

    /// Eigenvalues in ascending order.
    pub fn eigenvalues(&self) -> Result<Vector> {
        sorted_eigenvalues(&self.inner)
    }

    pub fn min_eigenvalue(&self) -> Result<f64> {
        Ok(eigen_range(&self.inner)?.0)
    }

    pub fn max_eigenvalue(&self) -> Result<f64> {
        Ok(eigen_range(&self.inner)?.1)
    }

    /// Inverse through a Cholesky factorization.
    pub fn inverse(&self) -> Result<SpdMatrix> {
        Ok(Self { inner: spd_inverse(&self.inner)?, tag: Definiteness::PositiveDefinite })
    }

    pub fn sqrt(&self) -> Result<SpdMatrix> {
        principal_sqrt(self)
    }
}

impl Deref for SpdMatrix {
    type Target = Matrix;

    fn deref(&self) -> &Matrix {
        &self.inner
    }
}

impl From<SpdMatrix> for Matrix {
    fn from(s: SpdMatrix) -> Matrix {
        s.inner
    }
}

fn require_square(a: &Matrix, what: &str) -> Result<()> {
    if a.is_square() {
        Ok(())
    } else {
        Err(Error::Dimension(format!("{what}: expected a square matrix, got {}x{}", a.nrows(), a.ncols())))
    }
}

/// `(A + A')/2`, exactly symmetric.
pub fn sym_part(a: &Matrix) -> Result<Matrix> {
    require_square(a, "sym_part")?;
    let n = a.nrows();
    Ok(Matrix::from_fn(n, n, |i, j| 0.5 * (a[(i, j)] + a[(j, i)])))
}

/// In-place symmetrization for matrices already known to be square.
pub(crate) fn symmetrize(a: &mut Matrix) {
    let n = a.nrows();
    for i in 0..n {
        for j in (i + 1)..n {
            let v = 0.5 * (a[(i, j)] + a[(j, i)]);
            a[(i, j)] = v;
            a[(j, i)] = v;
        }
    }
}

pub(crate) fn sym_eigen(a: &Matrix) -> Result<SymmetricEigen<f64, Dyn>> {
    SymmetricEigen::try_new(a.clone(), EIGEN_EPS, EIGEN_MAX_ITER).ok_or(Error::NoConvergence)
}

/// Smallest and largest eigenvalue of a symmetric matrix.
pub fn eigen_range(a: &Matrix) -> Result<(f64, f64)> {
    if a.nrows() == 0 {
        return Ok((0.0, 0.0));
    }
    let ev = sym_eigen(a)?.eigenvalues;
    Ok((ev.min(), ev.max()))
}

pub fn sorted_eigenvalues(a: &Matrix) -> Result<Vector> {
    let mut ev: Vec<f64> = sym_eigen(a)?.eigenvalues.iter().copied().collect();
    ev.sort_by(f64::total_cmp);
    Ok(Vector::from_vec(ev))
}

/// Square root of a symmetric PSD matrix given as a raw array. Eigenvalues in
/// `[-tol_pd, 0)` are clamped to zero; anything below is an error.
pub fn psd_sqrt(a: &Matrix) -> Result<Matrix> {
    require_square(a, "psd_sqrt")?;
    let n = a.nrows();
    if n == 0 {
        return Ok(a.clone());
    }
    if n == 1 {
        let v = a[(0, 0)];
        let tol = pd_tolerance(v);
        if v < -tol {
            return Err(Error::NotPsd { min_eig: v, tol });
        }
        return Ok(Matrix::from_element(1, 1, v.max(0.0).sqrt()));
    }
    let eig = sym_eigen(a)?;
    let hi = eig.eigenvalues.max();
    let lo = eig.eigenvalues.min();
    let tol = pd_tolerance(hi);
    if lo < -tol {
        return Err(Error::NotPsd { min_eig: lo, tol });
    }
    let roots = eig.eigenvalues.map(|l| l.max(0.0).sqrt());
    let v = &eig.eigenvectors;
    let mut out = v * Matrix::from_diagonal(&roots) * v.transpose();
    symmetrize(&mut out);
    Ok(out)
}

/// Principal (unique PSD) symmetric square root.
pub fn principal_sqrt(s: &SpdMatrix) -> Result<SpdMatrix> {
    let root = psd_sqrt(s.matrix())?;
    Ok(SpdMatrix { inner: root, tag: s.tag })
}

/// Clamps tiny negative eigenvalues of an evolving covariance. Eigenvalues
/// above `-rel_tol · trace` are treated as round-off; below that the
/// covariance has genuinely collapsed.
pub fn clamp_psd(a: &Matrix, rel_tol: f64) -> Result<Matrix> {
    let n = a.nrows();
    let eig = sym_eigen(a)?;
    let lo = eig.eigenvalues.min();
    if lo >= 0.0 {
        return Ok(a.clone());
    }
    let scale = a.trace().abs().max(f64::MIN_POSITIVE);
    if lo < -rel_tol * scale {
        return Err(Error::Collapse { min_eig: lo });
    }
    let clamped = eig.eigenvalues.map(|l| l.max(0.0));
    let v = &eig.eigenvectors;
    let mut out = v * Matrix::from_diagonal(&clamped) * v.transpose();
    symmetrize(&mut out);
    debug_assert_eq!(out.nrows(), n);
    Ok(out)
}

/// `true` iff `S1 ≤ S2` in the Löwner order, up to `tol`.
pub fn loewner_leq(s1: &Matrix, s2: &Matrix, tol: f64) -> Result<bool> {
    if s1.shape() != s2.shape() {
        return Err(Error::Dimension(format!(
            "loewner_leq: {}x{} vs {}x{}",
            s1.nrows(),
            s1.ncols(),
            s2.nrows(),
            s2.ncols()
        )));
    }
    let diff = sym_part(&(s2 - s1))?;
    Ok(eigen_range(&diff)?.0 >= -tol)
}

/// Maximum modulus over the (possibly complex) spectrum.
pub fn spectral_radius(a: &Matrix) -> Result<f64> {
    require_square(a, "spectral_radius")?;
    if a.nrows() == 0 {
        return Ok(0.0);
    }
    let schur = Schur::try_new(a.clone(), EIGEN_EPS, EIGEN_MAX_ITER).ok_or(Error::NoConvergence)?;
    Ok(schur.complex_eigenvalues().iter().map(|z| z.norm()).fold(0.0, f64::max))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NormKind {
    Spectral,
    Frobenius,
}

pub fn matrix_norm(a: &Matrix, kind: NormKind) -> f64 {
    match kind {
        NormKind::Frobenius => a.norm(),
        NormKind::Spectral => {
            if a.is_empty() {
                return 0.0;
            }
            let gram = if a.nrows() <= a.ncols() { a * a.transpose() } else { a.transpose() * a };
            SymmetricEigen::new(gram).eigenvalues.max().max(0.0).sqrt()
        }
    }
}

pub fn frobenius(a: &Matrix) -> f64 {
    a.norm()
}

pub fn spectral(a: &Matrix) -> f64 {
    matrix_norm(a, NormKind::Spectral)
}

/// Cholesky factor of a symmetric positive definite matrix.
pub fn cholesky(a: &Matrix) -> Result<Cholesky<f64, Dyn>> {
    Cholesky::new(a.clone()).ok_or_else(|| {
        let lo = eigen_range(a).map(|r| r.0).unwrap_or(f64::NAN);
        Error::NotPd { min_eig: lo, tol: 0.0 }
    })
}

/// Inverse of an SPD matrix through triangular solves.
pub fn spd_inverse(a: &Matrix) -> Result<Matrix> {
    let mut inv = cholesky(a)?.inverse();
    symmetrize(&mut inv);
    Ok(inv)
}

/// General inverse by LU; reserved for non-symmetric matrices.
pub fn lu_inverse(a: &Matrix, what: &str) -> Result<Matrix> {
    require_square(a, what)?;
    a.clone().lu().try_inverse().ok_or_else(|| Error::Singular(what.to_string()))
}

/// Solves `A X = B` for a general square `A`.
pub fn lu_solve(a: &Matrix, b: &Matrix, what: &str) -> Result<Matrix> {
    require_square(a, what)?;
    a.clone().lu().solve(b).ok_or_else(|| Error::Singular(what.to_string()))
}

/// `(M + U N V)⁻¹` through the Sherman–Morrison–Woodbury identity
/// `M⁻¹ − M⁻¹U(N⁻¹ + V M⁻¹ U)⁻¹ V M⁻¹`.
pub fn woodbury_inverse(m: &Matrix, u: &Matrix, n: &Matrix, v: &Matrix) -> Result<Matrix> {
    let k = m.nrows();
    let j = n.nrows();
    if !m.is_square() || !n.is_square() || u.shape() != (k, j) || v.shape() != (j, k) {
        return Err(Error::Dimension(format!(
            "woodbury_inverse: M {:?}, U {:?}, N {:?}, V {:?}",
            m.shape(),
            u.shape(),
            n.shape(),
            v.shape()
        )));
    }
    let m_inv = lu_inverse(m, "woodbury_inverse: M")?;
    let n_inv = lu_inverse(n, "woodbury_inverse: N")?;
    let core = n_inv + v * &m_inv * u;
    let core_inv = lu_inverse(&core, "woodbury_inverse: N⁻¹ + V M⁻¹ U")?;
    Ok(&m_inv - &m_inv * u * core_inv * v * &m_inv)
}

/// Relative Frobenius distance `‖a − b‖ / (1 + ‖b‖)`.
pub fn rel_diff(a: &Matrix, b: &Matrix) -> f64 {
    (a - b).norm() / (1.0 + b.norm())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn spd_from(seed: &[f64], d: usize, shift: f64) -> Matrix {
        let g = Matrix::from_fn(d, d, |i, j| seed[(i * d + j) % seed.len()]);
        &g * g.transpose() + Matrix::identity(d, d) * shift
    }

    #[test]
    fn sym_part_examples() {
        let i = Matrix::identity(3, 3);
        assert_eq!(sym_part(&i).unwrap(), i);
        let a = Matrix::from_row_slice(2, 2, &[0.0, 1.0, 0.0, 0.0]);
        assert_eq!(sym_part(&a).unwrap(), Matrix::from_row_slice(2, 2, &[0.0, 0.5, 0.5, 0.0]));
        assert!(sym_part(&Matrix::zeros(2, 3)).is_err());
    }

    #[test]
    fn sqrt_examples() {
        let i = SpdMatrix::identity(3);
        assert!(rel_diff(principal_sqrt(&i).unwrap().matrix(), &Matrix::identity(3, 3)) < 1e-15);
        let d = SpdMatrix::from_diagonal(&[4.0, 9.0]).unwrap();
        let r = principal_sqrt(&d).unwrap();
        assert!((r[(0, 0)] - 2.0).abs() < 1e-14 && (r[(1, 1)] - 3.0).abs() < 1e-14);
        assert!(r[(0, 1)].abs() < 1e-14);
    }

    #[test]
    fn sqrt_rejects_indefinite() {
        let m = Matrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, -1.0]);
        assert!(matches!(psd_sqrt(&m), Err(Error::NotPsd { .. })));
        assert!(SpdMatrix::semidefinite(m).is_err());
    }

    #[test]
    fn loewner_examples() {
        let z = Matrix::zeros(2, 2);
        let i = Matrix::identity(2, 2);
        assert!(loewner_leq(&z, &i, 0.0).unwrap());
        assert!(!loewner_leq(&i, &z, 0.0).unwrap());
        assert!(loewner_leq(&i, &Matrix::identity(3, 3), 0.0).is_err());
    }

    #[test]
    fn spectral_radius_examples() {
        assert!((spectral_radius(&Matrix::identity(3, 3)).unwrap() - 1.0).abs() < 1e-14);
        let nil = Matrix::from_row_slice(2, 2, &[0.0, 1.0, 0.0, 0.0]);
        assert!(spectral_radius(&nil).unwrap().abs() < 1e-14);
        let th = 0.7_f64;
        let rot = Matrix::from_row_slice(2, 2, &[th.cos(), -th.sin(), th.sin(), th.cos()]) * 0.9;
        assert!((spectral_radius(&rot).unwrap() - 0.9).abs() < 1e-12);
    }

    #[test]
    fn norm_examples() {
        let i = Matrix::identity(3, 3);
        assert!((matrix_norm(&i, NormKind::Frobenius) - 3f64.sqrt()).abs() < 1e-15);
        let d = Matrix::from_row_slice(2, 2, &[3.0, 0.0, 0.0, 4.0]);
        assert!((matrix_norm(&d, NormKind::Spectral) - 4.0).abs() < 1e-14);
        let a = Matrix::from_row_slice(2, 3, &[1.0, -2.0, 0.5, 3.0, 0.0, -1.0]);
        let brute: f64 = a.iter().map(|x| x * x).sum::<f64>().sqrt();
        assert!((matrix_norm(&a, NormKind::Frobenius) - brute).abs() < 1e-14);
    }

    #[test]
    fn woodbury_examples() {
        let m = Matrix::from_row_slice(2, 2, &[2.0, 0.3, 0.1, 1.5]);
        let u = Matrix::zeros(2, 1);
        let n = Matrix::identity(1, 1);
        let v = Matrix::zeros(1, 2);
        let w = woodbury_inverse(&m, &u, &n, &v).unwrap();
        assert!(rel_diff(&w, &m.clone().try_inverse().unwrap()) < 1e-14);
        let one = Matrix::identity(1, 1);
        let w = woodbury_inverse(&one, &one, &one, &one).unwrap();
        assert!((w[(0, 0)] - 0.5).abs() < 1e-15);
        let sing = Matrix::zeros(1, 1);
        assert!(matches!(woodbury_inverse(&sing, &one, &one, &one), Err(Error::Singular(_))));
    }

    #[test]
    fn clamp_distinguishes_roundoff_from_collapse() {
        let tiny = Matrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, -1e-13]);
        let c = clamp_psd(&tiny, 1e-10).unwrap();
        assert!(eigen_range(&c).unwrap().0 >= 0.0);
        let bad = Matrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, -1e-3]);
        assert!(matches!(clamp_psd(&bad, 1e-10), Err(Error::Collapse { .. })));
    }

    fn spd_strategy(d: usize) -> impl Strategy<Value = Matrix> {
        prop::collection::vec(-1.0f64..1.0, d * d).prop_map(move |v| spd_from(&v, d, 0.1))
    }

    proptest! {
        #[test]
        fn sqrt_of_square_roundtrips(t in (1usize..6).prop_flat_map(spd_strategy)) {
            let sq = &t * &t;
            let root = psd_sqrt(&sq).unwrap();
            prop_assert!((&root - &t).norm() <= 1e-8 * (1.0 + t.norm()));
            let back = &root * &root;
            prop_assert!((&back - &sq).norm() <= 1e-10 * (1.0 + sq.norm()));
        }

        #[test]
        fn radius_below_spectral_norm(v in prop::collection::vec(-2.0f64..2.0, 16)) {
            let a = Matrix::from_row_slice(4, 4, &v);
            prop_assert!(spectral_radius(&a).unwrap() <= spectral(&a) * (1.0 + 1e-12) + 1e-12);
        }

        #[test]
        fn ando_hemmen(p in spd_strategy(3), q in spd_strategy(3)) {
            let lhs = (psd_sqrt(&p).unwrap() - psd_sqrt(&q).unwrap()).norm();
            let lp = eigen_range(&p).unwrap().0;
            let lq = eigen_range(&q).unwrap().0;
            let rhs = (&p - &q).norm() / (lp.sqrt() + lq.sqrt());
            prop_assert!(lhs <= rhs * (1.0 + 1e-9) + 1e-12);
        }

        #[test]
        fn trace_inequalities(p in spd_strategy(4), q in spd_strategy(4)) {
            let tr = (&p * &q).trace();
            prop_assert!(tr.abs() <= p.norm() * q.norm() * (1.0 + 1e-12));
            let (lo, hi) = eigen_range(&p).unwrap();
            let tq = q.trace();
            prop_assert!(lo * tq <= tr * (1.0 + 1e-12) + 1e-12);
            prop_assert!(tr <= hi * tq * (1.0 + 1e-12) + 1e-12);
        }
    }
}
