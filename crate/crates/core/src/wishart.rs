//! Gaussian matrices and non-central Wishart laws.
//!
//! For a `d × N` matrix `z` with `z z' / N = q` and columns `Z^i ~ N(0, R)`,
//! the normalized sum `q(z + Z) = (1/N) Σ (z^i + Z^i)(z^i + Z^i)'` has the
//! non-central Wishart law `(1/N) W(N, N q, R)`. Writing `ℍ^N = (Z Z' − N I)/√N`
//! for a standard block and `𝔾` for its first `d` columns,
//!
//! ```text
//! q(z + Z) = q + R + Δ / √N,   Δ = R^{1/2} ℍ^N R^{1/2} + 2 sym(R^{1/2} 𝔾 q^{1/2}).
//! ```

use rand::Rng;
use rand_distr::{ChiSquared, Distribution};

use crate::error::{Error, Result};
use crate::linalg::{self, Matrix, SpdMatrix, Vector};
use crate::rng;

/// Parameters `(N, N q, R)` of a non-central Wishart law, with `q` given by
/// its symmetric square root.
#[derive(Clone, Debug)]
pub struct WishartParams {
    dof: usize,
    scale: SpdMatrix,
    scale_sqrt: Matrix,
    noncentrality_sqrt: SpdMatrix,
    noncentrality: Matrix,
}

impl WishartParams {
    pub fn new(dof: usize, scale: SpdMatrix, noncentrality_sqrt: SpdMatrix) -> Result<Self> {
        if dof == 0 {
            return Err(Error::InvalidArgument("Wishart degrees of freedom must be at least 1".into()));
        }
        if scale.dim() != noncentrality_sqrt.dim() {
            return Err(Error::Dimension(format!(
                "scale is {0}x{0} but non-centrality is {1}x{1}",
                scale.dim(),
                noncentrality_sqrt.dim()
            )));
        }
        let scale_sqrt = linalg::psd_sqrt(&scale)?;
        let mut noncentrality = noncentrality_sqrt.matrix() * noncentrality_sqrt.matrix();
        linalg::symmetrize(&mut noncentrality);
        Ok(Self { dof, scale, scale_sqrt, noncentrality_sqrt, noncentrality })
    }

    /// Same as [`WishartParams::new`] but from `q` itself.
    pub fn from_noncentrality(dof: usize, scale: SpdMatrix, noncentrality: &Matrix) -> Result<Self> {
        let root = SpdMatrix::semidefinite(linalg::psd_sqrt(noncentrality)?)?;
        Self::new(dof, scale, root)
    }

    pub fn central(dof: usize, scale: SpdMatrix) -> Result<Self> {
        let d = scale.dim();
        Self::new(dof, scale, SpdMatrix::zeros(d))
    }

    pub fn dim(&self) -> usize {
        self.scale.dim()
    }

    pub fn dof(&self) -> usize {
        self.dof
    }

    pub fn scale(&self) -> &SpdMatrix {
        &self.scale
    }

    pub fn scale_sqrt(&self) -> &Matrix {
        &self.scale_sqrt
    }

    pub fn noncentrality_sqrt(&self) -> &SpdMatrix {
        &self.noncentrality_sqrt
    }

    /// `q(z)`.
    pub fn noncentrality(&self) -> &Matrix {
        &self.noncentrality
    }

    /// `E q(z + Z) = q(z) + R`.
    pub fn mean(&self) -> Matrix {
        &self.noncentrality + self.scale.matrix()
    }
}

/// `d × N` block of independent standard normals.
pub fn standard_block<R: Rng + ?Sized>(rng: &mut R, d: usize, n: usize) -> Matrix {
    rng::standard_normal_matrix(rng, d, n)
}

/// `ℍ^N = (Z Z' − N I) / √N` for a `d × N` block `Z`.
pub fn h_matrix(z: &Matrix) -> Result<Matrix> {
    let n = z.ncols();
    if n == 0 {
        return Err(Error::InvalidArgument("h_matrix needs at least one column".into()));
    }
    Ok(h_from_gram(z * z.transpose(), n))
}

fn h_from_gram(mut gram: Matrix, n: usize) -> Matrix {
    let nf = n as f64;
    for i in 0..gram.nrows() {
        gram[(i, i)] -= nf;
    }
    gram /= nf.sqrt();
    linalg::symmetrize(&mut gram);
    gram
}

/// `W ~ Wishart(dof, I_d)` via the Bartlett decomposition when `dof ≥ d`,
/// and by an explicit `d × dof` block otherwise.
pub fn sample_standard_wishart<R: Rng + ?Sized>(rng: &mut R, d: usize, dof: usize) -> Matrix {
    if dof < d {
        let t = standard_block(rng, d, dof);
        let mut w = &t * t.transpose();
        linalg::symmetrize(&mut w);
        return w;
    }
    let mut l = Matrix::zeros(d, d);
    for i in 0..d {
        let chi = ChiSquared::new((dof - i) as f64).expect("positive degrees of freedom");
        l[(i, i)] = chi.sample(rng).sqrt();
        for j in 0..i {
            l[(i, j)] = rng::standard_normal(rng);
        }
    }
    let mut w = &l * l.transpose();
    linalg::symmetrize(&mut w);
    w
}

/// `(ℍ^N, 𝔾)` in law: `𝔾` is a `d × d` standard block and the remaining
/// `N − d` columns enter only through their Gram matrix, drawn directly.
/// Requires `N ≥ d`.
pub fn sample_h_and_g<R: Rng + ?Sized>(rng: &mut R, d: usize, n: usize) -> Result<(Matrix, Matrix)> {
    if n < d {
        return Err(Error::InvalidArgument(format!("need N ≥ d (N={n}, d={d})")));
    }
    let g = standard_block(rng, d, d);
    let tail = sample_standard_wishart(rng, d, n - d);
    Ok((h_from_gram(&g * g.transpose() + tail, n), g))
}

/// `R^{1/2} ℍ R^{1/2} + 2 sym(R^{1/2} 𝔾 q^{1/2})`.
pub fn fluctuation(scale_sqrt: &Matrix, noncentrality_sqrt: &Matrix, h: &Matrix, g: &Matrix) -> Matrix {
    let mixed = scale_sqrt * g * noncentrality_sqrt;
    let mut delta = scale_sqrt * h * scale_sqrt + &mixed + mixed.transpose();
    linalg::symmetrize(&mut delta);
    delta
}

/// A `d × N` matrix `z` with `z z' / N = q`: `√N [q^{1/2} | 0]` when `N ≥ d`,
/// and the leading eigen-directions of `q` otherwise (which requires
/// `rank q ≤ N`).
fn center_block(wp: &WishartParams) -> Result<Matrix> {
    let d = wp.dim();
    let n = wp.dof();
    let sn = (n as f64).sqrt();
    let mut z = Matrix::zeros(d, n);
    if n >= d {
        z.columns_mut(0, d).copy_from(&(wp.noncentrality_sqrt.matrix() * sn));
        return Ok(z);
    }
    let eig = linalg::sym_eigen(wp.noncentrality())?;
    let mut order: Vec<usize> = (0..d).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    let top = eig.eigenvalues[order[0]].max(0.0);
    for &k in &order[n..] {
        if eig.eigenvalues[k] > linalg::pd_tolerance(top) {
            return Err(Error::InvalidArgument(format!(
                "non-centrality of rank above N={n} cannot be realized with N columns"
            )));
        }
    }
    for (col, &k) in order[..n].iter().enumerate() {
        let lam = eig.eigenvalues[k].max(0.0);
        z.column_mut(col).copy_from(&(eig.eigenvectors.column(k) * (lam.sqrt() * sn)));
    }
    Ok(z)
}

/// `q(z + R^{1/2} Z)` for an explicit center `z` (`d × N`).
pub fn sample_with_center<R: Rng + ?Sized>(z: &Matrix, scale_sqrt: &Matrix, rng: &mut R) -> Matrix {
    let n = z.ncols();
    let x = z + scale_sqrt * standard_block(rng, z.nrows(), n);
    let mut q = &x * x.transpose() / n as f64;
    linalg::symmetrize(&mut q);
    q
}

/// Draw from `(1/N) W(N, N q(z), R)` by summing `N` explicit outer products.
pub fn sample_noncentral_wishart<R: Rng + ?Sized>(wp: &WishartParams, rng: &mut R) -> Result<SpdMatrix> {
    let z = center_block(wp)?;
    Ok(SpdMatrix::from_symmetric_unchecked(sample_with_center(&z, &wp.scale_sqrt, rng)))
}

/// Same law as [`sample_noncentral_wishart`] in `O(d³)` operations:
/// `(q^{1/2} + R^{1/2} 𝔾/√N)(⋯)' + R^{1/2} W_{N−d} R^{1/2} / N` with a
/// Bartlett draw for `W_{N−d}`. Falls back to the explicit sampler when
/// `N < d`.
pub fn sample_noncentral_wishart_reduced<R: Rng + ?Sized>(wp: &WishartParams, rng: &mut R) -> Result<SpdMatrix> {
    let d = wp.dim();
    let n = wp.dof();
    if n < d {
        return sample_noncentral_wishart(wp, rng);
    }
    let nf = n as f64;
    let g = standard_block(rng, d, d);
    let head = wp.noncentrality_sqrt.matrix() + &wp.scale_sqrt * g / nf.sqrt();
    let tail = sample_standard_wishart(rng, d, n - d);
    let mut out = &head * head.transpose() + &wp.scale_sqrt * tail * &wp.scale_sqrt / nf;
    linalg::symmetrize(&mut out);
    Ok(SpdMatrix::from_symmetric_unchecked(out))
}

/// `ℍ^N`, its first `d` columns `𝔾`, the tail fluctuation `ℍ^{(N−d)}_{−d}`
/// and the assembled `Δ`, all from one standard block.
#[derive(Clone, Debug)]
pub struct FluctuationDraw {
    pub h_matrix: Matrix,
    pub g_block: Matrix,
    pub h_tail: Matrix,
    pub delta: Matrix,
}

impl FluctuationDraw {
    /// `q(z) + R + Δ/√N`: the non-central Wishart draw this fluctuation represents.
    pub fn wishart_sample(&self, wp: &WishartParams) -> Matrix {
        let mut out = wp.mean() + &self.delta / (wp.dof() as f64).sqrt();
        linalg::symmetrize(&mut out);
        out
    }
}

pub fn delta_decomposition<R: Rng + ?Sized>(wp: &WishartParams, rng: &mut R) -> Result<FluctuationDraw> {
    let d = wp.dim();
    let n = wp.dof();
    if n < d {
        return Err(Error::InvalidArgument(format!("delta decomposition needs N ≥ d (N={n}, d={d})")));
    }
    let z = standard_block(rng, d, n);
    let h = h_matrix(&z)?;
    let g = z.columns(0, d).into_owned();
    let h_tail = if n > d { h_matrix(&z.columns(d, n - d).into_owned())? } else { Matrix::zeros(d, d) };
    let delta = fluctuation(&wp.scale_sqrt, wp.noncentrality_sqrt.matrix(), &h, &g);
    Ok(FluctuationDraw { h_matrix: h, g_block: g, h_tail, delta })
}

/// `E(Δ²) = R² + Tr(R) R + q R + R q + Tr(R) q + Tr(q) R`.
pub fn delta_variance(wp: &WishartParams) -> Matrix {
    let r = wp.scale.matrix();
    let q = &wp.noncentrality;
    let tr_r = r.trace();
    let tr_q = q.trace();
    let mut v = r * r + r * tr_r + q * r + r * q + q * tr_r + r * tr_q;
    linalg::symmetrize(&mut v);
    v
}

/// Splits `ℍ^N = ℍ^{(N−d)}_{−d} + √(d/N) ℍ^{(N,d)}` for a `d × N` block,
/// returning `(ℍ^{(N−d)}_{−d}, ℍ^{(N,d)})`.
pub fn h_split(z: &Matrix) -> Result<(Matrix, Matrix)> {
    let d = z.nrows();
    let n = z.ncols();
    if n <= d {
        return Err(Error::InvalidArgument(format!("h_split needs N > d (N={n}, d={d})")));
    }
    let tail = h_matrix(&z.columns(d, n - d).into_owned())?;
    let head = h_matrix(&z.columns(0, d).into_owned())?;
    let ratio = n as f64 / d as f64;
    let mix = head - &tail / ((ratio - 1.0).sqrt() + ratio.sqrt());
    Ok((tail, mix))
}

/// `((q + R)⁻¹, R⁻¹ / (1 − (2d+1)/N))`, bracketing `E q(z+Z)⁻¹`.
pub fn inverse_moment_bounds(wp: &WishartParams) -> Result<(SpdMatrix, SpdMatrix)> {
    let d = wp.dim();
    let n = wp.dof();
    if n <= 2 * d + 1 {
        return Err(Error::InvalidArgument(format!("inverse moment bounds need N > 2d+1 (N={n}, d={d})")));
    }
    let lower = SpdMatrix::positive_definite(wp.mean())?.inverse()?;
    let r_inv = wp.scale.inverse()?;
    let factor = 1.0 / (1.0 - (2 * d + 1) as f64 / n as f64);
    let upper = SpdMatrix::from_symmetric_unchecked(r_inv.into_inner() * factor);
    Ok((lower, upper))
}

/// `E q(Z)⁻¹ = R⁻¹ / (1 − (d+1)/N)` in the central case.
pub fn central_inverse_mean(scale: &SpdMatrix, dof: usize) -> Result<Matrix> {
    let d = scale.dim();
    if dof <= d + 1 {
        return Err(Error::InvalidArgument(format!("central inverse mean needs N > d+1 (N={dof}, d={d})")));
    }
    Ok(scale.inverse()?.into_inner() / (1.0 - (d + 1) as f64 / dof as f64))
}

/// Helmert matrix of order `n`: first row `1'/√n`, row `i ≥ 2` equal to
/// `(1, …, 1, −(i−1), 0, …, 0) / √(i(i−1))`.
pub fn helmert(n: usize) -> Result<Matrix> {
    if n < 2 {
        return Err(Error::InvalidArgument("Helmert matrix needs n ≥ 2".into()));
    }
    let mut h = Matrix::zeros(n, n);
    let first = 1.0 / (n as f64).sqrt();
    for j in 0..n {
        h[(0, j)] = first;
    }
    for row in 1..n {
        let i = (row + 1) as f64;
        let c = 1.0 / (i * (i - 1.0)).sqrt();
        for j in 0..row {
            h[(row, j)] = c;
        }
        h[(row, row)] = -(i - 1.0) * c;
    }
    Ok(h)
}

/// `(√n · m(x), x 𝕆̄')` for a `d × n` block, in `O(d n)` operations; `𝕆̄` is
/// the Helmert matrix without its first row.
pub fn helmert_rotate(x: &Matrix) -> Result<(Vector, Matrix)> {
    let n = x.ncols();
    if n < 2 {
        return Err(Error::InvalidArgument("Helmert rotation needs at least two columns".into()));
    }
    let d = x.nrows();
    let mut out = Matrix::zeros(d, n - 1);
    let mut cum = x.column(0).into_owned();
    for row in 1..n {
        let i = (row + 1) as f64;
        let c = 1.0 / (i * (i - 1.0)).sqrt();
        let col = (&cum - x.column(row) * (i - 1.0)) * c;
        out.column_mut(row - 1).copy_from(&col);
        cum += x.column(row);
    }
    Ok((cum / (n as f64).sqrt(), out))
}

/// Sample mean and normalized sample covariance `(1/N)(x − m)(x − m)'` of a
/// `d × (N+1)` block.
pub fn mean_and_cov(x: &Matrix) -> (Vector, Matrix) {
    let n1 = x.ncols();
    let mean = x.column_mean();
    let mut centered = x.clone();
    for mut c in centered.column_iter_mut() {
        c -= &mean;
    }
    let mut cov = &centered * centered.transpose() / (n1 as f64 - 1.0);
    linalg::symmetrize(&mut cov);
    (mean, cov)
}

/// Law of `(m(x + 𝒵), p(x + 𝒵))` for `𝒵` with i.i.d. `N(0, R)` columns:
/// `m(x) + R^{1/2} ℤ⁰/√(N+1)` and a `(1/N) W(N, N p(x), R)` draw realized on
/// the Helmert-rotated block `x 𝕆̄'`.
pub fn mean_cov_pair<R: Rng + ?Sized>(x: &Matrix, scale: &SpdMatrix, rng: &mut R) -> Result<(Vector, SpdMatrix)> {
    let d = x.nrows();
    if scale.dim() != d {
        return Err(Error::Dimension(format!("scale is {0}x{0}, block has {d} rows", scale.dim())));
    }
    let (head, rotated) = helmert_rotate(x)?;
    let n1 = x.ncols() as f64;
    let root = linalg::psd_sqrt(scale)?;
    let mean = head / n1.sqrt() + &root * rng::standard_normal_vector(rng, d) / n1.sqrt();
    let cov = sample_with_center(&rotated, &root, rng);
    Ok((mean, SpdMatrix::from_symmetric_unchecked(cov)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::instances;
    use crate::rng::SeedTree;
    use proptest::prelude::*;

    fn stream(tag: &str) -> crate::rng::Stream {
        SeedTree::new(11).stream(tag, &[])
    }

    #[test]
    fn h_of_zero_block() {
        let h = h_matrix(&Matrix::zeros(3, 16)).unwrap();
        assert!(linalg::rel_diff(&h, &(Matrix::identity(3, 3) * -4.0)) < 1e-15);
    }

    #[test]
    fn h_scalar_variance_is_two() {
        let mut rng = stream("h1");
        let reps = 100_000;
        let vals: Vec<f64> = (0..reps).map(|_| h_matrix(&standard_block(&mut rng, 1, 20)).unwrap()[(0, 0)]).collect();
        let mean = vals.iter().sum::<f64>() / reps as f64;
        let var = vals.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (reps - 1) as f64;
        assert!(mean.abs() < 3.0 * (2.0 / reps as f64).sqrt());
        // Var of a sample variance ≈ (μ4 − σ⁴)/n with μ4 = 12 + 48/N for (χ²_N − N)/√N.
        let se = ((12.0 + 48.0 / 20.0 - 4.0) / reps as f64).sqrt();
        assert!((var - 2.0).abs() < 4.0 * se, "var {var}");
    }

    #[test]
    fn variance_formula_examples() {
        let wp = WishartParams::central(5, SpdMatrix::identity(1)).unwrap();
        assert!((delta_variance(&wp)[(0, 0)] - 2.0).abs() < 1e-15);
        let wp = WishartParams::central(5, SpdMatrix::identity(2)).unwrap();
        assert!(linalg::rel_diff(&delta_variance(&wp), &(Matrix::identity(2, 2) * 3.0)) < 1e-15);
    }

    #[test]
    fn inverse_bounds_example() {
        let wp = WishartParams::central(10, SpdMatrix::identity(1)).unwrap();
        let (lo, hi) = inverse_moment_bounds(&wp).unwrap();
        assert!((lo[(0, 0)] - 1.0).abs() < 1e-15);
        assert!((hi[(0, 0)] - 1.0 / 0.7).abs() < 1e-12);
        let small = WishartParams::central(3, SpdMatrix::identity(1)).unwrap();
        assert!(inverse_moment_bounds(&small).is_err());
    }

    #[test]
    fn helmert_examples() {
        let h2 = helmert(2).unwrap();
        let s = 1.0 / 2f64.sqrt();
        assert!(linalg::rel_diff(&h2, &Matrix::from_row_slice(2, 2, &[s, s, s, -s])) < 1e-15);
        let h3 = helmert(3).unwrap();
        let t = 1.0 / 6f64.sqrt();
        assert!((h3[(2, 0)] - t).abs() < 1e-15 && (h3[(2, 1)] - t).abs() < 1e-15);
        assert!((h3[(2, 2)] + 2.0 * t).abs() < 1e-15);
        assert!(helmert(1).is_err());
        for n in [2, 5, 17] {
            let h = helmert(n).unwrap();
            let i = Matrix::identity(n, n);
            assert!((&h * h.transpose() - &i).norm() < 1e-12);
            assert!((h.transpose() * &h - &i).norm() < 1e-12);
            let lower = h.rows(1, n - 1).into_owned();
            let eps = lower.transpose() * lower + Matrix::from_element(n, n, 1.0 / n as f64);
            assert!((eps - &i).norm() < 1e-12);
        }
    }

    #[test]
    fn rotation_matches_matrix_product() {
        let mut rng = stream("rot");
        let x = standard_block(&mut rng, 3, 9);
        let h = helmert(9).unwrap();
        let (head, rot) = helmert_rotate(&x).unwrap();
        let full = &x * h.transpose();
        assert!((full.column(0) - &head).norm() < 1e-12);
        assert!((full.columns(1, 8) - &rot).norm() < 1e-12);
        // p(x) = q(x 𝕆̄')
        let (_, p) = mean_and_cov(&x);
        let q = &rot * rot.transpose() / 8.0;
        assert!(linalg::rel_diff(&p, &q) < 1e-12);
    }

    #[test]
    fn rank_deficient_when_dof_below_dim() {
        let mut rng = stream("rank");
        let wp = WishartParams::central(2, SpdMatrix::identity(4)).unwrap();
        let w = sample_noncentral_wishart(&wp, &mut rng).unwrap();
        let ev = w.eigenvalues().unwrap();
        assert!(ev[0].abs() < 1e-12 && ev[1].abs() < 1e-12 && ev[3] > 1e-6);
    }

    #[test]
    fn decomposition_reproduces_explicit_sample() {
        let mut rng = stream("dec");
        let q = instances::random_spd(&mut rng, 3, 0.1);
        let r = SpdMatrix::positive_definite(instances::random_spd(&mut rng, 3, 0.1)).unwrap();
        let wp = WishartParams::from_noncentrality(12, r, &q).unwrap();
        let mut a = stream("same");
        let mut b = stream("same");
        let explicit = sample_noncentral_wishart(&wp, &mut a).unwrap();
        let draw = delta_decomposition(&wp, &mut b).unwrap();
        assert!(linalg::rel_diff(&draw.wishart_sample(&wp), &explicit) < 1e-12);
        let central = WishartParams::central(12, wp.scale().clone()).unwrap();
        let d0 = delta_decomposition(&central, &mut stream("c")).unwrap();
        let rs = central.scale_sqrt();
        assert!(linalg::rel_diff(&d0.delta, &(rs * &d0.h_matrix * rs)) < 1e-14);
    }

    #[test]
    fn central_scalar_chi_square_moments() {
        let mut rng = stream("chi");
        let n = 8;
        let wp = WishartParams::central(n, SpdMatrix::identity(1)).unwrap();
        let reps = 100_000;
        let v: Vec<f64> = (0..reps).map(|_| sample_noncentral_wishart_reduced(&wp, &mut rng).unwrap()[(0, 0)]).collect();
        let mean = v.iter().sum::<f64>() / reps as f64;
        let var = v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (reps - 1) as f64;
        let target = 2.0 / n as f64;
        assert!((mean - 1.0).abs() < 3.0 * (target / reps as f64).sqrt());
        assert!((var / target - 1.0).abs() < 0.05);
    }

    #[test]
    fn h_split_reconstructs() {
        let mut rng = stream("split");
        for (d, n) in [(1, 2), (2, 7), (3, 40)] {
            let z = standard_block(&mut rng, d, n);
            let (tail, mix) = h_split(&z).unwrap();
            let h = h_matrix(&z).unwrap();
            let rebuilt = &tail + mix * (d as f64 / n as f64).sqrt();
            assert!((h - rebuilt).norm() < 1e-12);
        }
        assert!(h_split(&Matrix::zeros(3, 3)).is_err());
    }

    #[test]
    fn mean_cov_pair_centered_case() {
        let mut rng = stream("pair");
        let x = Matrix::from_element(2, 6, 1.5);
        let (m, p) = mean_cov_pair(&x, &SpdMatrix::identity(2), &mut rng).unwrap();
        assert_eq!(m.len(), 2);
        assert!(p.min_eigenvalue().unwrap() > 0.0);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]

        #[test]
        fn reduced_sampler_is_psd(seed in any::<u64>(), d in 1usize..4, extra in 0usize..6) {
            let mut rng = SeedTree::new(seed).stream("psd", &[]);
            let q = instances::random_psd_rank(&mut rng, d, 1);
            let r = SpdMatrix::positive_definite(instances::random_spd(&mut rng, d, 0.1)).unwrap();
            let wp = WishartParams::from_noncentrality(d + extra, r, &q).unwrap();
            let w = sample_noncentral_wishart_reduced(&wp, &mut rng).unwrap();
            prop_assert!(w.min_eigenvalue().unwrap() > -1e-12);
        }
    }
}
