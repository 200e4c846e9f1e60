//! Riccati difference equation: the map `Φ`, its semigroup, fixed points,
//! directed products `ℰ_n`, Grammians and the Floquet-type factorization
//! `ℰ_n(P) = ℰ(P_∞)^n ℒ_n(P)⁻¹`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{self, Matrix, NormKind, SpdMatrix};
use crate::model::{matrix_to_rows, ModelParams};

pub const DEFAULT_TOL: f64 = 1e-12;
pub const DEFAULT_MAX_ITER: usize = 100_000;
/// Above this condition number of `𝒢_n`, `ℒ_n(P)` is inverted directly.
const GRAMMIAN_COND_LIMIT: f64 = 1e4;

fn eye(d: usize) -> Matrix {
    Matrix::identity(d, d)
}

/// `(I + P S)⁻¹ P`, symmetrized.
fn a_hat_p(s: &Matrix, p: &Matrix) -> Result<Matrix> {
    let d = p.nrows();
    let mut x = linalg::lu_solve(&(eye(d) + p * s), p, "I + P S")?;
    linalg::symmetrize(&mut x);
    Ok(x)
}

/// Generic Riccati map `P ↦ A (I + P S)⁻¹ P A' + R` for arbitrary `(A, R, S)`.
/// The dual map is `riccati_map(A', S, R, ·)`.
pub fn riccati_map(a: &Matrix, r: &Matrix, s: &Matrix, p: &Matrix) -> Result<Matrix> {
    let mut out = a * a_hat_p(s, p)? * a.transpose() + r;
    linalg::symmetrize(&mut out);
    Ok(out)
}

/// `Φ(P)`.
pub fn phi(params: &ModelParams, p: &Matrix) -> Result<SpdMatrix> {
    let m = riccati_map(params.a(), params.r(), params.s(), p)?;
    Ok(SpdMatrix::from_symmetric_unchecked(m))
}

/// `Φ_n(P)`, with `Φ_0` the identity.
pub fn phi_n(params: &ModelParams, p: &Matrix, n: usize) -> Result<SpdMatrix> {
    let mut cur = p.clone();
    for _ in 0..n {
        cur = riccati_map(params.a(), params.r(), params.s(), &cur)?;
    }
    Ok(SpdMatrix::from_symmetric_unchecked(cur))
}

/// Orbit `P, Φ(P), …, Φ_n(P)` (`n + 1` entries).
pub fn orbit(params: &ModelParams, p: &Matrix, n: usize) -> Result<Vec<Matrix>> {
    let mut out = Vec::with_capacity(n + 1);
    out.push(p.clone());
    for k in 0..n {
        let next = riccati_map(params.a(), params.r(), params.s(), &out[k])?;
        out.push(next);
    }
    Ok(out)
}

/// `ℰ(P) = A (I + P S)⁻¹`.
pub fn e_map(params: &ModelParams, p: &Matrix) -> Result<Matrix> {
    e_map_generic(params.a(), params.s(), p)
}

fn e_map_generic(a: &Matrix, s: &Matrix, p: &Matrix) -> Result<Matrix> {
    let d = p.nrows();
    // A (I + P S)⁻¹ = ((I + S P)⁻¹ A')'
    Ok(linalg::lu_solve(&(eye(d) + s * p), &a.transpose(), "I + S P")?.transpose())
}

/// `ℱ(P) = S^{1/2} (I + S^{1/2} P S^{1/2})⁻¹ S^{1/2}`.
pub fn f_map(params: &ModelParams, p: &Matrix) -> Result<SpdMatrix> {
    let root = params.s_sqrt();
    let d = p.nrows();
    let inner = eye(d) + root * p * root;
    let mut m = root * linalg::spd_inverse(&inner)? * root;
    linalg::symmetrize(&mut m);
    Ok(SpdMatrix::from_symmetric_unchecked(m))
}

/// `α₋(P) = (1 + λ_max(P) λ_max(S))⁻¹`.
pub fn alpha_minus(params: &ModelParams, p: &Matrix) -> Result<f64> {
    let lp = linalg::eigen_range(p)?.1;
    let ls = linalg::eigen_range(params.s())?.1;
    Ok(1.0 / (1.0 + lp * ls))
}

/// `α₊(P) = (1 + λ_min(P) λ_min(S))⁻¹`.
pub fn alpha_plus(params: &ModelParams, p: &Matrix) -> Result<f64> {
    let lp = linalg::eigen_range(p)?.0.max(0.0);
    let ls = linalg::eigen_range(params.s())?.0.max(0.0);
    Ok(1.0 / (1.0 + lp * ls))
}

/// Directed product `ℰ(P_{n-1}) ⋯ ℰ(P_0)` along the orbit of `P_0 = p`.
pub fn e_n_product(params: &ModelParams, p: &Matrix, n: usize) -> Result<Matrix> {
    let d = p.nrows();
    let mut acc = eye(d);
    let mut cur = p.clone();
    for k in 0..n {
        acc = e_map(params, &cur)? * acc;
        if k + 1 < n {
            cur = riccati_map(params.a(), params.r(), params.s(), &cur)?;
        }
    }
    Ok(acc)
}

fn iterate_to_fixed_point(a: &Matrix, r: &Matrix, s: &Matrix, tol: f64, max_iter: usize) -> Result<(Matrix, usize)> {
    let d = a.nrows();
    let mut p = Matrix::zeros(d, d);
    // Once the relative test passes, keep iterating until the increment
    // stops shrinking so the residual reaches round-off level.
    let mut settled: Option<f64> = None;
    for it in 1..=max_iter {
        let next = riccati_map(a, r, s, &p)?;
        if next.iter().any(|x| !x.is_finite()) {
            let rho = linalg::spectral_radius(&e_map_generic(a, s, &p)?)?;
            return Err(Error::NotStabilizable(rho));
        }
        let step = (&next - &p).norm();
        let scale = next.norm();
        if scale == 0.0 || step == 0.0 {
            return Ok((next, it));
        }
        match settled {
            Some(prev) if step >= prev => return Ok((p, it - 1)),
            Some(_) => settled = Some(step),
            None if step <= tol * scale => settled = Some(step),
            None => {}
        }
        p = next;
    }
    if settled.is_some() {
        return Ok((p, max_iter));
    }
    Err(Error::MaxIterations(max_iter))
}

/// Riccati fixed points and the constants derived from them.
#[derive(Clone, Debug)]
pub struct RiccatiContext {
    params: ModelParams,
    p_inf: SpdMatrix,
    p_inf_dual: SpdMatrix,
    closed_loop: Matrix,
    rho: f64,
    g_limit: SpdMatrix,
    f_inf: SpdMatrix,
    iterations: usize,
}

/// JSON dump of a [`RiccatiContext`].
#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct RiccatiSummary {
    pub p_inf: Vec<Vec<f64>>,
    pub p_inf_dual: Vec<Vec<f64>>,
    pub closed_loop: Vec<Vec<f64>>,
    pub g_limit: Vec<Vec<f64>>,
    pub rho: f64,
    pub iterations: usize,
}

impl RiccatiContext {
    pub fn new(params: &ModelParams) -> Result<Self> {
        Self::fixed_point(params, DEFAULT_TOL, DEFAULT_MAX_ITER)
    }

    /// Monotone iteration of `Φ` from `0` until the relative Frobenius
    /// increment drops below `tol`; the dual fixed point is obtained the same
    /// way with `(A, R, S)` replaced by `(A', S, R)`.
    pub fn fixed_point(params: &ModelParams, tol: f64, max_iter: usize) -> Result<Self> {
        if !(tol > 0.0) || max_iter == 0 {
            return Err(Error::InvalidArgument("fixed_point needs tol > 0 and max_iter ≥ 1".into()));
        }
        let (p_inf, iterations) = iterate_to_fixed_point(params.a(), params.r(), params.s(), tol, max_iter)?;
        let closed_loop = e_map(params, &p_inf)?;
        let rho = linalg::spectral_radius(&closed_loop)?;
        if rho >= 1.0 {
            return Err(Error::NotStabilizable(rho));
        }
        let at = params.a().transpose();
        let (p_dual, _) = iterate_to_fixed_point(&at, params.s(), params.r(), tol, max_iter)?;
        let d = params.state_dim();
        let mut g = linalg::lu_solve(&(&p_dual * &p_inf + eye(d)), &p_dual, "P̄∞ P∞ + I")?;
        linalg::symmetrize(&mut g);
        let f_inf = f_map(params, &p_inf)?;
        Ok(Self {
            params: params.clone(),
            p_inf: SpdMatrix::from_symmetric_unchecked(p_inf),
            p_inf_dual: SpdMatrix::from_symmetric_unchecked(p_dual),
            closed_loop,
            rho,
            g_limit: SpdMatrix::from_symmetric_unchecked(g),
            f_inf,
            iterations,
        })
    }

    pub fn params(&self) -> &ModelParams {
        &self.params
    }

    pub fn p_inf(&self) -> &SpdMatrix {
        &self.p_inf
    }

    pub fn p_inf_dual(&self) -> &SpdMatrix {
        &self.p_inf_dual
    }

    /// `ℰ(P_∞)`.
    pub fn closed_loop(&self) -> &Matrix {
        &self.closed_loop
    }

    pub fn rho(&self) -> f64 {
        self.rho
    }

    /// `𝒢 = lim 𝒢_n`.
    pub fn g_limit(&self) -> &SpdMatrix {
        &self.g_limit
    }

    pub fn iterations(&self) -> usize {
        self.iterations
    }

    pub fn closed_loop_pow(&self, n: usize) -> Matrix {
        self.closed_loop.pow(n as u32)
    }

    pub fn e_n_product(&self, p: &Matrix, n: usize) -> Result<Matrix> {
        e_n_product(&self.params, p, n)
    }

    /// `𝒢_n = Σ_{k<n} (ℰ(P_∞)^k)' ℱ(P_∞) ℰ(P_∞)^k`.
    pub fn grammian(&self, n: usize) -> Result<SpdMatrix> {
        if n == 0 {
            return Err(Error::InvalidArgument("grammian needs n ≥ 1".into()));
        }
        let d = self.params.state_dim();
        let mut pow = eye(d);
        let mut acc = Matrix::zeros(d, d);
        for _ in 0..n {
            acc += pow.transpose() * self.f_inf.matrix() * &pow;
            pow = &self.closed_loop * pow;
        }
        linalg::symmetrize(&mut acc);
        Ok(SpdMatrix::from_symmetric_unchecked(acc))
    }

    /// `ℒ_n(P) = I + (P − P_∞) 𝒢_n`.
    pub fn l_map(&self, p: &Matrix, n: usize) -> Result<Matrix> {
        let g = self.grammian(n)?;
        Ok(self.l_map_with(p, g.matrix()))
    }

    fn l_map_with(&self, p: &Matrix, g: &Matrix) -> Matrix {
        eye(p.nrows()) + (p - self.p_inf.matrix()) * g
    }

    /// `ℒ_n(P)⁻¹`, through `𝒢_n⁻¹ (P + 𝒢_n⁻¹ − P_∞)⁻¹` when `𝒢_n` is
    /// well conditioned and by a direct LU inverse otherwise.
    pub fn l_inv(&self, p: &Matrix, n: usize) -> Result<Matrix> {
        let g = self.grammian(n)?;
        self.l_inv_with(p, g.matrix())
    }

    fn l_inv_with(&self, p: &Matrix, g: &Matrix) -> Result<Matrix> {
        let factorized = linalg::cholesky(g).ok().and_then(|chol| {
            let g_inv = chol.inverse();
            let cond = linalg::eigen_range(g).ok().map(|(lo, hi)| hi / lo)?;
            if cond > GRAMMIAN_COND_LIMIT {
                return None;
            }
            let inner = p + &g_inv - self.p_inf.matrix();
            let inner_inv = linalg::spd_inverse(&inner).ok()?;
            Some(g_inv * inner_inv)
        });
        match factorized {
            Some(inv) => Ok(inv),
            None => linalg::lu_inverse(&self.l_map_with(p, g), "L_n(P)"),
        }
    }

    /// `ℰ(P_∞)^n ℒ_n(P)⁻¹`.
    pub fn e_n_via_floquet(&self, p: &Matrix, n: usize) -> Result<Matrix> {
        if n == 0 {
            return Ok(eye(p.nrows()));
        }
        Ok(self.closed_loop_pow(n) * self.l_inv(p, n)?)
    }

    /// First and second order terms of `ℰ_n(Q) − ℰ_n(P)` in `Q − P`:
    /// `first = −ℰ_n(P)(Q−P)𝒢_n ℒ_n(P)⁻¹` and
    /// `remainder = ℰ_n(Q)(Q−P)𝒢_n ℒ_n(P)⁻¹ (Q−P)𝒢_n ℒ_n(P)⁻¹`, which sum
    /// to the difference exactly.
    pub fn e_n_first_second_order(&self, p: &Matrix, q: &Matrix, n: usize) -> Result<(Matrix, Matrix)> {
        if n == 0 {
            let z = Matrix::zeros(p.nrows(), p.nrows());
            return Ok((z.clone(), z));
        }
        let g = self.grammian(n)?;
        let l_inv = self.l_inv_with(p, g.matrix())?;
        let kernel = (q - p) * g.matrix() * &l_inv;
        let e_p = self.closed_loop_pow(n) * &l_inv;
        let e_q = self.e_n_via_floquet(q, n)?;
        let first = -(&e_p * &kernel);
        let remainder = e_q * &kernel * &kernel;
        Ok((first, remainder))
    }

    /// Sampled `sup ‖ℒ_n(P)⁻¹‖₂` over the given matrices and `1 ≤ n ≤ n_max`.
    /// An estimate only; no bound is certified.
    pub fn iota_estimate(&self, samples: &[Matrix], n_max: usize) -> Result<f64> {
        let mut best: f64 = 0.0;
        for n in 1..=n_max {
            let g = self.grammian(n)?;
            for p in samples {
                let inv = self.l_inv_with(p, g.matrix())?;
                best = best.max(linalg::matrix_norm(&inv, NormKind::Spectral));
            }
        }
        Ok(best)
    }

    pub fn summary(&self) -> RiccatiSummary {
        RiccatiSummary {
            p_inf: matrix_to_rows(&self.p_inf),
            p_inf_dual: matrix_to_rows(&self.p_inf_dual),
            closed_loop: matrix_to_rows(&self.closed_loop),
            g_limit: matrix_to_rows(&self.g_limit),
            rho: self.rho,
            iterations: self.iterations,
        }
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(&self.summary())?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::instances;
    use crate::rng::SeedTree;
    use proptest::prelude::*;

    const PHI: f64 = 1.618_033_988_749_894_8;

    fn m1(x: f64) -> Matrix {
        Matrix::from_element(1, 1, x)
    }

    #[test]
    fn phi_examples() {
        let g = ModelParams::golden();
        assert_eq!(phi(&g, &m1(0.0)).unwrap()[(0, 0)], 1.0);
        assert!((phi(&g, &m1(1.0)).unwrap()[(0, 0)] - 1.5).abs() < 1e-15);
        assert_eq!(phi_n(&g, &m1(3.0), 0).unwrap()[(0, 0)], 3.0);
        assert_eq!(phi_n(&g, &m1(3.0), 1).unwrap(), phi(&g, &m1(3.0)).unwrap());
    }

    #[test]
    fn golden_fixed_point() {
        let ctx = RiccatiContext::new(&ModelParams::golden()).unwrap();
        assert!((ctx.p_inf()[(0, 0)] - PHI).abs() < 1e-9);
        assert!((ctx.rho() - (2.0 - PHI)).abs() < 1e-9);
        assert!((ctx.closed_loop()[(0, 0)] - 1.0 / (1.0 + PHI)).abs() < 1e-12);
        // 𝒢 < P∞⁻¹
        assert!(ctx.g_limit()[(0, 0)] < 1.0 / PHI);
    }

    #[test]
    fn a_zero_fixed_point_is_r() {
        let p = ModelParams::scalar(0.0, 1.0, 0.3, 1.0, 1.0).unwrap();
        let ctx = RiccatiContext::new(&p).unwrap();
        assert_eq!(ctx.p_inf()[(0, 0)], 0.3);
        assert!(ctx.iterations() <= 2);
    }

    #[test]
    fn unstable_unobserved_is_rejected() {
        let p = ModelParams::scalar(1.2, 0.0, 1.0, 1.0, 1.0).unwrap();
        assert!(matches!(RiccatiContext::new(&p), Err(Error::NotStabilizable(_)) | Err(Error::MaxIterations(_))));
    }

    #[test]
    fn grammian_examples() {
        let ctx = RiccatiContext::new(&ModelParams::golden()).unwrap();
        let g1 = ctx.grammian(1).unwrap()[(0, 0)];
        assert!((g1 - 1.0 / (1.0 + PHI)).abs() < 1e-12);
        let g2 = ctx.grammian(2).unwrap()[(0, 0)];
        assert!((g2 - g1 * (1.0 + ctx.rho().powi(2))).abs() < 1e-12);
        let n = (1..).find(|&n| ctx.rho().powi(2 * n) < 1e-10).unwrap() as usize;
        assert!((ctx.grammian(n).unwrap()[(0, 0)] - ctx.g_limit()[(0, 0)]).abs() < 1e-8);
        assert!(ctx.grammian(0).is_err());
    }

    #[test]
    fn floquet_scalar_example() {
        let ctx = RiccatiContext::new(&ModelParams::golden()).unwrap();
        let p = m1(3.0);
        let a = ctx.e_n_product(&p, 5).unwrap();
        let b = ctx.e_n_via_floquet(&p, 5).unwrap();
        assert!((a[(0, 0)] - b[(0, 0)]).abs() < 1e-10);
        let at_inf = ctx.e_n_via_floquet(ctx.p_inf(), 4).unwrap();
        assert!((at_inf[(0, 0)] - ctx.rho().powi(4)).abs() < 1e-12);
        let l = ctx.l_map(ctx.p_inf(), 3).unwrap();
        assert!((l[(0, 0)] - 1.0).abs() < 1e-15);
    }

    #[test]
    fn decomposition_examples() {
        let ctx = RiccatiContext::new(&ModelParams::golden()).unwrap();
        let p = m1(2.0);
        let (f, r) = ctx.e_n_first_second_order(&p, &p, 6).unwrap();
        assert_eq!(f[(0, 0)], 0.0);
        assert_eq!(r[(0, 0)], 0.0);
        let q = m1(2.7);
        let (f, r) = ctx.e_n_first_second_order(&p, &q, 6).unwrap();
        let diff = ctx.e_n_product(&q, 6).unwrap() - ctx.e_n_product(&p, 6).unwrap();
        assert!((diff[(0, 0)] - f[(0, 0)] - r[(0, 0)]).abs() < 1e-12);
        let (_, r_full) = ctx.e_n_first_second_order(&p, &m1(2.1), 6).unwrap();
        let (_, r_half) = ctx.e_n_first_second_order(&p, &m1(2.05), 6).unwrap();
        let ratio = r_full[(0, 0)].abs() / r_half[(0, 0)].abs();
        assert!((ratio / 4.0 - 1.0).abs() < 0.1, "ratio {ratio}");
    }

    #[test]
    fn gelfand_decay() {
        let mut rng = SeedTree::new(3).stream("gelfand", &[]);
        let model = instances::random_observed_model(&mut rng, 3);
        let ctx = RiccatiContext::new(&model).unwrap();
        let mut prev = f64::INFINITY;
        for k in [1u32, 2, 4, 8, 16, 32, 64] {
            let v = linalg::spectral(&ctx.closed_loop().pow(k)).powf(1.0 / k as f64);
            assert!(v <= prev * (1.0 + 1e-9));
            assert!(v >= ctx.rho() * (1.0 - 1e-9));
            prev = v;
        }
    }

    #[test]
    fn dump_is_json() {
        let ctx = RiccatiContext::new(&ModelParams::golden()).unwrap();
        let v: serde_json::Value = serde_json::from_str(&ctx.to_json().unwrap()).unwrap();
        assert!(v["rho"].as_f64().unwrap() < 1.0);
        assert!(v["iterations"].as_u64().unwrap() > 0);
    }

    fn instance(seed: u64, d: usize) -> (ModelParams, Matrix, Matrix) {
        let mut rng = SeedTree::new(seed).stream("riccati-prop", &[d as u64]);
        let model = instances::random_observed_model(&mut rng, d);
        let p = instances::random_spd(&mut rng, d, 0.05);
        let q = instances::random_spd(&mut rng, d, 0.05);
        (model, p, q)
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(48))]

        #[test]
        fn sandwich_and_alphas(seed in any::<u64>(), d in 1usize..5) {
            let (model, p, _) = instance(seed, d);
            let ph = phi(&model, &p).unwrap();
            let tol = 1e-9 * (1.0 + ph.norm());
            prop_assert!(linalg::loewner_leq(model.r(), &ph, tol).unwrap());
            let s_inv = linalg::spd_inverse(model.s()).unwrap();
            let upper = model.a() * s_inv * model.a().transpose() + model.r().matrix();
            prop_assert!(linalg::loewner_leq(&ph, &upper, 1e-8 * (1.0 + upper.norm())).unwrap());
            let f = f_map(&model, &p).unwrap();
            let s = model.s().matrix();
            let ftol = 1e-9 * (1.0 + s.norm());
            prop_assert!(linalg::loewner_leq(&(s * alpha_minus(&model, &p).unwrap()), &f, ftol).unwrap());
            prop_assert!(linalg::loewner_leq(&f, &(s * alpha_plus(&model, &p).unwrap()), ftol).unwrap());
            prop_assert!(linalg::eigen_range(&ph).unwrap().0 > 0.0);
        }

        #[test]
        fn e_map_identity(seed in any::<u64>(), d in 1usize..5) {
            let (model, p, q) = instance(seed, d);
            let eq = e_map(&model, &q).unwrap();
            let ep = e_map(&model, &p).unwrap();
            let rhs = &ep * (Matrix::identity(d, d) + (&p - &q) * f_map(&model, &q).unwrap().matrix());
            prop_assert!(linalg::rel_diff(&eq, &rhs) < 1e-10);
            let lhs = phi(&model, &p).unwrap().into_inner() - phi(&model, &q).unwrap().into_inner();
            let rhs = &ep * (&p - &q) * eq.transpose();
            prop_assert!((&lhs - &rhs).norm() < 1e-9 * (1.0 + p.norm() + q.norm()));
        }

        #[test]
        fn semigroup_difference(seed in any::<u64>(), d in 1usize..4) {
            let (model, p, q) = instance(seed, d);
            let n = 7;
            let lhs = phi_n(&model, &p, n).unwrap().into_inner() - phi_n(&model, &q, n).unwrap().into_inner();
            let rhs = e_n_product(&model, &p, n).unwrap() * (&p - &q) * e_n_product(&model, &q, n).unwrap().transpose();
            prop_assert!((&lhs - &rhs).norm() <= 1e-8 * (1.0 + lhs.norm()));
        }

        #[test]
        fn monotone_semigroup(seed in any::<u64>(), d in 1usize..4) {
            let (model, q, extra) = instance(seed, d);
            let p = &q + &extra;
            for n in [1, 3, 6] {
                let hi = phi_n(&model, &p, n).unwrap();
                let lo = phi_n(&model, &q, n).unwrap();
                prop_assert!(linalg::loewner_leq(&lo, &hi, 1e-9 * (1.0 + hi.norm())).unwrap());
            }
        }

        #[test]
        fn context_invariants(seed in any::<u64>(), d in 1usize..5) {
            let (model, p, _) = instance(seed, d);
            let Ok(ctx) = RiccatiContext::new(&model) else { return Ok(()); };
            let pinf = ctx.p_inf().matrix();
            let res = phi(&model, pinf).unwrap().into_inner() - pinf;
            prop_assert!(res.norm() < 1e-10 * (1.0 + pinf.norm()));
            prop_assert!(ctx.rho() < 1.0);
            let pinf_inv = linalg::spd_inverse(pinf).unwrap();
            prop_assert!(linalg::loewner_leq(ctx.g_limit(), &pinf_inv, 0.0).unwrap());
            let mut prev = Matrix::zeros(d, d);
            let lo = ctx.params().s().matrix() * alpha_minus(&model, pinf).unwrap();
            for n in 1..12 {
                let g = ctx.grammian(n).unwrap().into_inner();
                prop_assert!(linalg::loewner_leq(&prev, &g, 1e-12).unwrap());
                prop_assert!(linalg::loewner_leq(&lo, &g, 1e-10).unwrap());
                prop_assert!(linalg::loewner_leq(&g, ctx.g_limit(), 1e-9).unwrap());
                prev = g;
            }
            // fixed-point difference formula
            let n = 9;
            let pn = phi_n(&model, &p, n).unwrap().into_inner();
            let rhs = e_n_product(&model, &p, n).unwrap() * (&p - pinf) * ctx.closed_loop_pow(n).transpose();
            prop_assert!(((&pn - pinf) - rhs).norm() < 1e-8 * (1.0 + pn.norm()));
            // ℒ·ℒ⁻¹ = I and ℰ(P∞) ℒ₁(P)⁻¹ = ℰ(P)
            let l = ctx.l_map(&p, 4).unwrap();
            let li = ctx.l_inv(&p, 4).unwrap();
            prop_assert!(linalg::rel_diff(&(l * li), &Matrix::identity(d, d)) < 1e-10);
            let e1 = ctx.closed_loop() * ctx.l_inv(&p, 1).unwrap();
            prop_assert!(linalg::rel_diff(&e1, &e_map(&model, &p).unwrap()) < 1e-10);
            let (s_lo, s_hi) = linalg::eigen_range(model.s()).unwrap();
            prop_assume!(s_hi / s_lo < 1e6);
            let s_inv = linalg::spd_inverse(model.s()).unwrap();
            let alt = (&s_inv + pinf) * linalg::spd_inverse(&(&p + &s_inv)).unwrap();
            prop_assert!(linalg::rel_diff(&ctx.l_inv(&p, 1).unwrap(), &alt) < 1e-9);
        }
    }
}
