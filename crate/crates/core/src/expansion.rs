//! Pathwise expansions of `p_n − P_n` along a realized covariance path
//! `p_0, …, p_n`, with the convention `Φ(p_{−1}) = P0`.

use crate::error::{Error, Result};
use crate::linalg::{self, Matrix};
use crate::model::ModelParams;
use crate::riccati::{self, RiccatiContext};

/// `Φ(p_{k−1})` for `k = 0..=n`, i.e. `[P0, Φ(p_0), …, Φ(p_{n−1})]`.
pub fn predecessors(params: &ModelParams, path: &[Matrix]) -> Result<Vec<Matrix>> {
    if path.is_empty() {
        return Err(Error::InvalidArgument("empty covariance path".into()));
    }
    let mut out = Vec::with_capacity(path.len());
    out.push(params.p0().matrix().clone());
    for p in &path[..path.len() - 1] {
        out.push(riccati::phi(params, p)?.into_inner());
    }
    Ok(out)
}

/// Terms `ℰ_{n−k}(p_k) (p_k − Φ(p_{k−1})) ℰ_{n−k}(Φ(p_{k−1}))'`, which sum to
/// `p_n − P_n` exactly.
pub fn interpolation_terms(params: &ModelParams, path: &[Matrix]) -> Result<Vec<Matrix>> {
    let prev = predecessors(params, path)?;
    let n = path.len() - 1;
    path.iter()
        .zip(&prev)
        .enumerate()
        .map(|(k, (p, q))| {
            let left = riccati::e_n_product(params, p, n - k)?;
            let right = riccati::e_n_product(params, q, n - k)?;
            Ok(left * (p - q) * right.transpose())
        })
        .collect()
}

/// `Σ_k ℰ_{n−k}(Φ(p_{k−1})) (p_k − Φ(p_{k−1})) ℰ_{n−k}(Φ(p_{k−1}))'`.
///
/// Each summand is a martingale increment, so the sum has mean zero; it is
/// the first-order part of `p_n − P_n`.
pub fn first_order_term(params: &ModelParams, path: &[Matrix]) -> Result<Matrix> {
    let prev = predecessors(params, path)?;
    let n = path.len() - 1;
    let d = params.state_dim();
    let mut acc = Matrix::zeros(d, d);
    for (k, (p, q)) in path.iter().zip(&prev).enumerate() {
        let e = riccati::e_n_product(params, q, n - k)?;
        acc += &e * (p - q) * e.transpose();
    }
    linalg::symmetrize(&mut acc);
    Ok(acc)
}

/// Splits `Φ_m(P) − Φ_m(Q)` into the first-order term
/// `ℰ_m(Q) (P−Q) ℰ_m(Q)'` and the second-order term
/// `−ℰ_m(P) (P−Q) 𝒢_m ℒ_m(Q)⁻¹ (P−Q) ℰ_m(Q)'`.
pub fn second_order_split(ctx: &RiccatiContext, p: &Matrix, q: &Matrix, m: usize) -> Result<(Matrix, Matrix)> {
    let params = ctx.params();
    let diff = p - q;
    let e_q = riccati::e_n_product(params, q, m)?;
    let first = &e_q * &diff * e_q.transpose();
    if m == 0 {
        return Ok((first, Matrix::zeros(p.nrows(), p.nrows())));
    }
    let e_p = riccati::e_n_product(params, p, m)?;
    let g = ctx.grammian(m)?;
    let l_inv = ctx.l_inv(q, m)?;
    let second = -(e_p * &diff * g.matrix() * l_inv * &diff * e_q.transpose());
    Ok((first, second))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::enkf;
    use crate::linalg::Vector;
    use crate::rng::SeedTree;

    fn model2() -> ModelParams {
        let a = Matrix::from_row_slice(2, 2, &[1.0, 0.5, 0.0, 0.9]);
        ModelParams::new(a, Matrix::identity(2, 2), Matrix::identity(2, 2) * 0.5, Matrix::identity(2, 2), Matrix::identity(2, 2), Vector::zeros(2)).unwrap()
    }

    fn perturbation_path(params: &ModelParams, n_ens: usize, steps: usize, seed: u64) -> (Vec<Matrix>, Vec<Matrix>) {
        let mut rng = SeedTree::new(seed).stream("path", &[]);
        let mut st = enkf::perturbation_init(params, n_ens, &mut rng).unwrap();
        let mut covs = vec![st.cov.matrix().clone()];
        let mut lams = vec![st.last_lambda.clone()];
        for _ in 0..steps {
            st = enkf::perturbation_step(params, &st, &Vector::zeros(params.obs_dim()), &mut rng).unwrap();
            covs.push(st.cov.matrix().clone());
            lams.push(st.last_lambda.clone());
        }
        (covs, lams)
    }

    #[test]
    fn interpolation_formula_is_exact() {
        let p = model2();
        let n_ens = 12;
        let (covs, lams) = perturbation_path(&p, n_ens, 25, 1);
        let prev = predecessors(&p, &covs).unwrap();
        for (k, lam) in lams.iter().enumerate() {
            let inc = &covs[k] - &prev[k];
            assert!((inc - lam / (n_ens as f64).sqrt()).norm() < 1e-10);
        }
        let terms = interpolation_terms(&p, &covs).unwrap();
        let sum = terms.iter().fold(Matrix::zeros(2, 2), |acc, t| acc + t);
        let exact = riccati::phi_n(&p, p.p0(), 25).unwrap().into_inner();
        let lhs = &covs[25] - exact;
        assert!((lhs - sum).norm() < 1e-8);
    }

    #[test]
    fn second_order_identity_is_exact() {
        let p = model2();
        let ctx = RiccatiContext::new(&p).unwrap();
        let (covs, _) = perturbation_path(&p, 6, 12, 2);
        let prev = predecessors(&p, &covs).unwrap();
        for k in 0..covs.len() {
            let m = covs.len() - 1 - k;
            let (first, second) = second_order_split(&ctx, &covs[k], &prev[k], m).unwrap();
            let exact = riccati::phi_n(&p, &covs[k], m).unwrap().into_inner() - riccati::phi_n(&p, &prev[k], m).unwrap().into_inner();
            assert!((exact - first - second).norm() < 1e-8, "k={k}");
        }
    }

    #[test]
    fn noiseless_first_order_vanishes() {
        let p = model2();
        let covs = riccati::orbit(&p, p.p0(), 8).unwrap();
        let f = first_order_term(&p, &covs).unwrap();
        assert!(f.norm() < 1e-12);
    }
}
