//! Ensemble Kalman filter and its equivalent-in-law representations.
//!
//! Three backends produce the same law for the sample mean and covariance:
//!
//! * `Particle`: the `N+1` particle system with perturbed observations;
//! * `Perturbation`: the mean/covariance recursion driven by Gaussian
//!   fluctuation matrices, `p_{n+1} = Φ(p_n) + Λ_n / √N`;
//! * `WishartChain`: the covariance Markov chain of non-central Wishart draws
//!   (no mean).

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kalman::{self, Innovation};
use crate::linalg::{self, Matrix, SpdMatrix, Vector};
use crate::model::ModelParams;
use crate::rng;
use crate::wishart;

/// Relative tolerance separating round-off from genuine loss of definiteness.
pub const COLLAPSE_TOL: f64 = 1e-10;

fn check_ensemble_size(params: &ModelParams, n: usize) -> Result<()> {
    let d = params.state_dim();
    if n == 0 || n + 1 <= d {
        return Err(Error::EnsembleTooSmall { n, d });
    }
    Ok(())
}

/// `d × (N+1)` particle block with cached sample statistics.
#[derive(Clone, Debug)]
pub struct Ensemble {
    particles: Matrix,
    step: usize,
    mean: Vector,
    cov: SpdMatrix,
    updated: bool,
}

impl Ensemble {
    pub fn from_particles(particles: Matrix, step: usize, updated: bool) -> Result<Self> {
        if particles.ncols() < 2 {
            return Err(Error::InvalidArgument("an ensemble needs at least two particles".into()));
        }
        let (mean, cov) = wishart::mean_and_cov(&particles);
        Ok(Self { particles, step, mean, cov: SpdMatrix::from_symmetric_unchecked(cov), updated })
    }

    pub fn particles(&self) -> &Matrix {
        &self.particles
    }

    /// Ensemble size parameter `N` (there are `N + 1` particles).
    pub fn size(&self) -> usize {
        self.particles.ncols() - 1
    }

    pub fn step(&self) -> usize {
        self.step
    }

    pub fn mean(&self) -> &Vector {
        &self.mean
    }

    /// `(1/N) Σ (ξ^i − m)(ξ^i − m)'`.
    pub fn cov(&self) -> &SpdMatrix {
        &self.cov
    }

    pub fn is_updated(&self) -> bool {
        self.updated
    }
}

/// `N + 1` i.i.d. draws from `N(x0_mean, P0)`.
pub fn init_ensemble<R: Rng + ?Sized>(params: &ModelParams, n: usize, rng: &mut R) -> Result<Ensemble> {
    check_ensemble_size(params, n)?;
    let d = params.state_dim();
    let mut x = params.p0_sqrt() * rng::standard_normal_matrix(rng, d, n + 1);
    for mut c in x.column_iter_mut() {
        c += params.x0_mean();
    }
    Ensemble::from_particles(x, 0, false)
}

/// `ξ̂^i = ξ^i + K(p)(y − (B ξ^i + V^i))` for a given `d0 × (N+1)` block of
/// observation perturbations, in matrix form.
pub fn enkf_update_with_noise(params: &ModelParams, ens: &Ensemble, y: &Vector, noise: &Matrix) -> Result<Ensemble> {
    let k = update_gain(params, ens, y, noise)?;
    let mut innov = -(params.b() * &ens.particles + noise);
    for mut c in innov.column_iter_mut() {
        c += y;
    }
    Ensemble::from_particles(&ens.particles + k * innov, ens.step, true)
}

/// Same arithmetic as [`enkf_update_with_noise`], one particle at a time.
pub fn enkf_update_per_particle(params: &ModelParams, ens: &Ensemble, y: &Vector, noise: &Matrix) -> Result<Ensemble> {
    let k = update_gain(params, ens, y, noise)?;
    let mut out = ens.particles.clone();
    for i in 0..out.ncols() {
        let xi = ens.particles.column(i);
        let innov = y - (params.b() * xi + noise.column(i));
        out.column_mut(i).copy_from(&(xi + &k * innov));
    }
    Ensemble::from_particles(out, ens.step, true)
}

fn update_gain(params: &ModelParams, ens: &Ensemble, y: &Vector, noise: &Matrix) -> Result<Matrix> {
    if ens.updated {
        return Err(Error::InvalidArgument("ensemble has already been updated at this step".into()));
    }
    if y.len() != params.obs_dim() || noise.shape() != (params.obs_dim(), ens.particles.ncols()) {
        return Err(Error::Dimension("observation or perturbation block does not match the model".into()));
    }
    kalman::gain(params, ens.cov.matrix())
}

/// Updating step with fresh `V^i ~ N(0, R0)`.
pub fn enkf_update<R: Rng + ?Sized>(params: &ModelParams, ens: &Ensemble, y: &Vector, rng: &mut R) -> Result<Ensemble> {
    let noise = params.r0_sqrt() * rng::standard_normal_matrix(rng, params.obs_dim(), ens.particles.ncols());
    enkf_update_with_noise(params, ens, y, &noise)
}

/// Prediction step `ξ^i_{n+1} = A ξ̂^i + W^i`, `W^i ~ N(0, R)`.
pub fn enkf_predict<R: Rng + ?Sized>(params: &ModelParams, ens: &Ensemble, rng: &mut R) -> Result<Ensemble> {
    if !ens.updated {
        return Err(Error::InvalidArgument("prediction requires an updated ensemble".into()));
    }
    let d = params.state_dim();
    let next = params.a() * &ens.particles + params.r_sqrt() * rng::standard_normal_matrix(rng, d, ens.particles.ncols());
    Ensemble::from_particles(next, ens.step + 1, false)
}

fn guard(m: Matrix) -> Result<Matrix> {
    linalg::clamp_psd(&m, COLLAPSE_TOL)
}

/// Driving noise of one perturbation step: the mean shocks `ẑ⁰`, `ℤ⁰` and the
/// `(ℍ, 𝔾)` pairs behind `Δ̂` and `Δ`.
#[derive(Clone, Debug)]
pub struct PerturbationDraws {
    pub z_hat0: Vector,
    pub h_hat: Matrix,
    pub g_hat: Matrix,
    pub z0: Vector,
    pub h: Matrix,
    pub g: Matrix,
}

impl PerturbationDraws {
    pub fn sample<R: Rng + ?Sized>(params: &ModelParams, n: usize, rng: &mut R) -> Result<Self> {
        let d = params.state_dim();
        let z_hat0 = rng::standard_normal_vector(rng, params.obs_dim());
        let (h_hat, g_hat) = wishart::sample_h_and_g(rng, d, n)?;
        let z0 = rng::standard_normal_vector(rng, d);
        let (h, g) = wishart::sample_h_and_g(rng, d, n)?;
        Ok(Self { z_hat0, h_hat, g_hat, z0, h, g })
    }

    /// All-zero draws: the recursion collapses to the exact Kalman filter.
    pub fn zero(params: &ModelParams) -> Self {
        let d = params.state_dim();
        Self {
            z_hat0: Vector::zeros(params.obs_dim()),
            h_hat: Matrix::zeros(d, d),
            g_hat: Matrix::zeros(d, d),
            z0: Vector::zeros(d),
            h: Matrix::zeros(d, d),
            g: Matrix::zeros(d, d),
        }
    }
}

/// Sample mean/covariance pair of the perturbation representation.
#[derive(Clone, Debug)]
pub struct PerturbationState {
    pub step: usize,
    pub ensemble_size: usize,
    pub mean: Vector,
    pub cov: SpdMatrix,
    pub upd_mean: Option<Vector>,
    pub upd_cov: Option<SpdMatrix>,
    /// `Λ_n = A Δ̂_{n−1} A' + Δ_n` (`Λ_0 = Δ_0`).
    pub last_lambda: Matrix,
    pub last_delta: Matrix,
    pub last_delta_hat: Matrix,
}

/// `m_0 = x0 + P0^{1/2} ℤ⁰/√(N+1)`, `p_0 = P0 + P0^{1/2} ℍ P0^{1/2}/√N`.
pub fn perturbation_init<R: Rng + ?Sized>(params: &ModelParams, n: usize, rng: &mut R) -> Result<PerturbationState> {
    check_ensemble_size(params, n)?;
    let d = params.state_dim();
    let z0 = rng::standard_normal_vector(rng, d);
    let (h, _) = wishart::sample_h_and_g(rng, d, n)?;
    perturbation_init_with(params, n, &z0, &h)
}

pub fn perturbation_init_with(params: &ModelParams, n: usize, z0: &Vector, h: &Matrix) -> Result<PerturbationState> {
    let root = params.p0_sqrt();
    let delta = {
        let mut m = root * h * root;
        linalg::symmetrize(&mut m);
        m
    };
    let nf = n as f64;
    let mean = params.x0_mean() + root * z0 / (nf + 1.0).sqrt();
    let cov = guard(params.p0().matrix() + &delta / nf.sqrt())?;
    let d = params.state_dim();
    Ok(PerturbationState {
        step: 0,
        ensemble_size: n,
        mean,
        cov: SpdMatrix::from_symmetric_unchecked(cov),
        upd_mean: None,
        upd_cov: None,
        last_lambda: delta.clone(),
        last_delta: delta,
        last_delta_hat: Matrix::zeros(d, d),
    })
}

/// One updating–prediction transition of the perturbation representation.
pub fn perturbation_step<R: Rng + ?Sized>(params: &ModelParams, state: &PerturbationState, y: &Vector, rng: &mut R) -> Result<PerturbationState> {
    let draws = PerturbationDraws::sample(params, state.ensemble_size, rng)?;
    perturbation_step_with(params, state, y, &draws)
}

pub fn perturbation_step_with(params: &ModelParams, state: &PerturbationState, y: &Vector, draws: &PerturbationDraws) -> Result<PerturbationState> {
    let nf = state.ensemble_size as f64;
    let sn = nf.sqrt();
    let sn1 = (nf + 1.0).sqrt();
    let p = state.cov.matrix();
    let inn = Innovation::new(params, p)?;
    let k = inn.gain();
    let a_hat = Matrix::identity(p.nrows(), p.nrows()) - k * params.b();

    let innovation = y - params.b() * &state.mean;
    let upd_mean = &state.mean + k * innovation + k * (params.r0_sqrt() * &draws.z_hat0) / sn1;

    let r_hat = kalman::r_hat_from_gain(params, k);
    let mut center = &a_hat * p * a_hat.transpose();
    linalg::symmetrize(&mut center);
    let delta_hat = wishart::fluctuation(
        &linalg::psd_sqrt(&r_hat)?,
        &linalg::psd_sqrt(&center)?,
        &draws.h_hat,
        &draws.g_hat,
    );
    let a_hat_p = kalman::updated_cov_from_gain(params, p, k, kalman::CovarianceForm::Standard);
    let upd_cov = guard(a_hat_p + &delta_hat / sn)?;

    let a = params.a();
    let mean = a * &upd_mean + params.r_sqrt() * &draws.z0 / sn1;
    let mut pushed = a * &upd_cov * a.transpose();
    linalg::symmetrize(&mut pushed);
    let delta = wishart::fluctuation(params.r_sqrt(), &linalg::psd_sqrt(&pushed)?, &draws.h, &draws.g);
    let cov = guard(pushed + params.r().matrix() + &delta / sn)?;
    let mut lambda = a * &delta_hat * a.transpose() + &delta;
    linalg::symmetrize(&mut lambda);

    Ok(PerturbationState {
        step: state.step + 1,
        ensemble_size: state.ensemble_size,
        mean,
        cov: SpdMatrix::from_symmetric_unchecked(cov),
        upd_mean: Some(upd_mean),
        upd_cov: Some(SpdMatrix::from_symmetric_unchecked(upd_cov)),
        last_lambda: lambda,
        last_delta: delta,
        last_delta_hat: delta_hat,
    })
}

/// `q(z + Z)` in law for `q(z)^{1/2} = center_sqrt` and scale root
/// `scale_sqrt`, by the reduced sampler.
fn reduced_draw<R: Rng + ?Sized>(center_sqrt: &Matrix, scale_sqrt: &Matrix, n: usize, rng: &mut R) -> Matrix {
    let d = center_sqrt.nrows();
    let nf = n as f64;
    let g = rng::standard_normal_matrix(rng, d, d);
    let head = center_sqrt + scale_sqrt * g / nf.sqrt();
    let tail = wishart::sample_standard_wishart(rng, d, n - d);
    let mut out = &head * head.transpose() + scale_sqrt * tail * scale_sqrt / nf;
    linalg::symmetrize(&mut out);
    out
}

/// Initial law of the covariance chain: `p_0 ~ (1/N) W(N, 0, P0)`.
pub fn wishart_chain_init<R: Rng + ?Sized>(params: &ModelParams, n: usize, rng: &mut R) -> Result<SpdMatrix> {
    check_ensemble_size(params, n)?;
    let d = params.state_dim();
    let p = reduced_draw(&Matrix::zeros(d, d), params.p0_sqrt(), n, rng);
    Ok(SpdMatrix::from_symmetric_unchecked(p))
}

/// One transition of the covariance chain: `p̂ ~ (1/N) W(N, N Â p Â', R̂(p))`
/// then `p⁺ ~ (1/N) W(N, N A p̂ A', R)`. Returns `(p̂, p⁺)`.
pub fn wishart_chain_step<R: Rng + ?Sized>(params: &ModelParams, p: &Matrix, n: usize, rng: &mut R) -> Result<(SpdMatrix, SpdMatrix)> {
    check_ensemble_size(params, n)?;
    let inn = Innovation::new(params, p)?;
    let k = inn.gain();
    let a_hat = Matrix::identity(p.nrows(), p.nrows()) - k * params.b();
    let mut center = &a_hat * p * a_hat.transpose();
    linalg::symmetrize(&mut center);
    let r_hat = kalman::r_hat_from_gain(params, k);
    let upd = guard(reduced_draw(&linalg::psd_sqrt(&center)?, &linalg::psd_sqrt(&r_hat)?, n, rng))?;
    let a = params.a();
    let mut pushed = a * &upd * a.transpose();
    linalg::symmetrize(&mut pushed);
    let next = guard(reduced_draw(&linalg::psd_sqrt(&pushed)?, params.r_sqrt(), n, rng))?;
    Ok((SpdMatrix::from_symmetric_unchecked(upd), SpdMatrix::from_symmetric_unchecked(next)))
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Backend {
    #[default]
    Particle,
    Perturbation,
    WishartChain,
}

impl Backend {
    pub fn tag(self) -> &'static str {
        match self {
            Backend::Particle => "particle",
            Backend::Perturbation => "perturbation",
            Backend::WishartChain => "wishart-chain",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "particle" => Some(Backend::Particle),
            "perturbation" => Some(Backend::Perturbation),
            "wishart-chain" | "wishart_chain" | "chain" => Some(Backend::WishartChain),
            _ => None,
        }
    }

    /// Whether the backend carries a sample mean.
    pub fn tracks_mean(self) -> bool {
        !matches!(self, Backend::WishartChain)
    }
}

#[derive(Clone, Debug)]
enum Inner {
    Particle { ens: Ensemble, last_update: Option<(Vector, SpdMatrix)> },
    Perturbation(PerturbationState),
    Chain { step: usize, cov: SpdMatrix, upd_cov: Option<SpdMatrix> },
}

/// Common stepping interface over the three backends. Each [`FilterRun::step`]
/// assimilates the observation of the current step and predicts the next.
#[derive(Clone, Debug)]
pub struct FilterRun {
    backend: Backend,
    ensemble_size: usize,
    inner: Inner,
}

impl FilterRun {
    pub fn init<R: Rng + ?Sized>(backend: Backend, params: &ModelParams, n: usize, rng: &mut R) -> Result<Self> {
        let inner = match backend {
            Backend::Particle => Inner::Particle { ens: init_ensemble(params, n, rng)?, last_update: None },
            Backend::Perturbation => Inner::Perturbation(perturbation_init(params, n, rng)?),
            Backend::WishartChain => Inner::Chain { step: 0, cov: wishart_chain_init(params, n, rng)?, upd_cov: None },
        };
        Ok(Self { backend, ensemble_size: n, inner })
    }

    pub fn step<R: Rng + ?Sized>(&mut self, params: &ModelParams, y: &Vector, rng: &mut R) -> Result<()> {
        let n = self.ensemble_size;
        match &mut self.inner {
            Inner::Particle { ens, last_update } => {
                let upd = enkf_update(params, ens, y, rng)?;
                let next = enkf_predict(params, &upd, rng)?;
                *last_update = Some((upd.mean, upd.cov));
                *ens = next;
            }
            Inner::Perturbation(state) => {
                *state = perturbation_step(params, state, y, rng)?;
            }
            Inner::Chain { step, cov, upd_cov } => {
                let (upd, next) = wishart_chain_step(params, cov, n, rng)?;
                *upd_cov = Some(upd);
                *cov = next;
                *step += 1;
            }
        }
        Ok(())
    }

    pub fn backend(&self) -> Backend {
        self.backend
    }

    pub fn ensemble_size(&self) -> usize {
        self.ensemble_size
    }

    pub fn step_index(&self) -> usize {
        match &self.inner {
            Inner::Particle { ens, .. } => ens.step(),
            Inner::Perturbation(s) => s.step,
            Inner::Chain { step, .. } => *step,
        }
    }

    /// Predicted sample mean `m_n` (absent for the covariance chain).
    pub fn mean(&self) -> Option<&Vector> {
        match &self.inner {
            Inner::Particle { ens, .. } => Some(ens.mean()),
            Inner::Perturbation(s) => Some(&s.mean),
            Inner::Chain { .. } => None,
        }
    }

    /// Predicted sample covariance `p_n`.
    pub fn cov(&self) -> &SpdMatrix {
        match &self.inner {
            Inner::Particle { ens, .. } => ens.cov(),
            Inner::Perturbation(s) => &s.cov,
            Inner::Chain { cov, .. } => cov,
        }
    }

    /// Updated mean `m̂_{n−1}` from the last step.
    pub fn upd_mean(&self) -> Option<&Vector> {
        match &self.inner {
            Inner::Particle { last_update, .. } => last_update.as_ref().map(|u| &u.0),
            Inner::Perturbation(s) => s.upd_mean.as_ref(),
            Inner::Chain { .. } => None,
        }
    }

    /// Updated covariance `p̂_{n−1}` from the last step.
    pub fn upd_cov(&self) -> Option<&SpdMatrix> {
        match &self.inner {
            Inner::Particle { last_update, .. } => last_update.as_ref().map(|u| &u.1),
            Inner::Perturbation(s) => s.upd_cov.as_ref(),
            Inner::Chain { upd_cov, .. } => upd_cov.as_ref(),
        }
    }

    pub fn particles(&self) -> Option<&Matrix> {
        match &self.inner {
            Inner::Particle { ens, .. } => Some(ens.particles()),
            _ => None,
        }
    }
}

/// Per-step fixed factors of the limiting fluctuation `Λ_k`.
#[derive(Clone, Debug)]
struct LimitFactors {
    scale_sqrt: Matrix,
    center_sqrt: Matrix,
    upd_scale_sqrt: Matrix,
    upd_center_sqrt: Matrix,
}

/// Sampler for the Gaussian limits `Λ_k = A Γ̂_{k−1} A' + Γ_k` of the
/// covariance fluctuations, and of the limit law of `√N (p_n − P_n)`.
#[derive(Clone, Debug)]
pub struct LimitSampler {
    params: ModelParams,
    factors: Vec<LimitFactors>,
    pred: Vec<Matrix>,
}

/// `(G + G')/√2` for a `d × d` standard block: diagonal variance 2,
/// off-diagonal variance 1.
pub fn goe<R: Rng + ?Sized>(rng: &mut R, d: usize) -> Matrix {
    let g = rng::standard_normal_matrix(rng, d, d);
    (&g + g.transpose()) / std::f64::consts::SQRT_2
}

impl LimitSampler {
    /// Factors for steps `0..=horizon` along the exact Riccati orbit.
    pub fn new(params: &ModelParams, horizon: usize) -> Result<Self> {
        let pred = crate::riccati::orbit(params, params.p0(), horizon)?;
        let a = params.a();
        let mut factors = Vec::with_capacity(horizon + 1);
        let mut prev_upd: Option<Matrix> = None;
        for (k, p) in pred.iter().enumerate() {
            let scale_sqrt = if k == 0 { params.p0_sqrt().clone() } else { params.r_sqrt().clone() };
            let center_sqrt = match &prev_upd {
                Some(u) => {
                    let mut c = a * u * a.transpose();
                    linalg::symmetrize(&mut c);
                    linalg::psd_sqrt(&c)?
                }
                None => Matrix::zeros(p.nrows(), p.nrows()),
            };
            let k_gain = kalman::gain(params, p)?;
            let a_hat = Matrix::identity(p.nrows(), p.nrows()) - &k_gain * params.b();
            let mut c = &a_hat * p * a_hat.transpose();
            linalg::symmetrize(&mut c);
            let upd_center_sqrt = linalg::psd_sqrt(&c)?;
            let upd_scale_sqrt = linalg::psd_sqrt(&kalman::r_hat_from_gain(params, &k_gain))?;
            prev_upd = Some(kalman::updated_cov_from_gain(params, p, &k_gain, kalman::CovarianceForm::Standard));
            factors.push(LimitFactors { scale_sqrt, center_sqrt, upd_scale_sqrt, upd_center_sqrt });
        }
        Ok(Self { params: params.clone(), factors, pred })
    }

    pub fn horizon(&self) -> usize {
        self.factors.len() - 1
    }

    /// `P_0, …, P_horizon`.
    pub fn predicted(&self) -> &[Matrix] {
        &self.pred
    }

    fn gamma<R: Rng + ?Sized>(&self, k: usize, rng: &mut R) -> Matrix {
        let f = &self.factors[k];
        let d = f.scale_sqrt.nrows();
        let h = goe(rng, d);
        let g = rng::standard_normal_matrix(rng, d, d);
        wishart::fluctuation(&f.scale_sqrt, &f.center_sqrt, &h, &g)
    }

    fn gamma_hat<R: Rng + ?Sized>(&self, k: usize, rng: &mut R) -> Matrix {
        let f = &self.factors[k];
        let d = f.scale_sqrt.nrows();
        let h = goe(rng, d);
        let g = rng::standard_normal_matrix(rng, d, d);
        wishart::fluctuation(&f.upd_scale_sqrt, &f.upd_center_sqrt, &h, &g)
    }

    /// Draws `(Λ_0, …, Λ_n)` jointly.
    pub fn lambdas<R: Rng + ?Sized>(&self, n: usize, rng: &mut R) -> Result<Vec<Matrix>> {
        if n > self.horizon() {
            return Err(Error::InvalidArgument(format!("step {n} beyond sampler horizon {}", self.horizon())));
        }
        let a = self.params.a();
        let mut out = Vec::with_capacity(n + 1);
        let mut prev_hat: Option<Matrix> = None;
        for k in 0..=n {
            let mut lam = self.gamma(k, rng);
            if let Some(gh) = &prev_hat {
                lam += a * gh * a.transpose();
            }
            linalg::symmetrize(&mut lam);
            out.push(lam);
            if k < n {
                prev_hat = Some(self.gamma_hat(k, rng));
            }
        }
        Ok(out)
    }

    /// One draw of `Σ_{k≤n} ℰ_{n−k}(P_k) Λ_k ℰ_{n−k}(P_k)'`.
    pub fn clt_draw<R: Rng + ?Sized>(&self, propagators: &[Matrix], rng: &mut R) -> Result<Matrix> {
        let n = propagators.len() - 1;
        let lams = self.lambdas(n, rng)?;
        let d = self.params.state_dim();
        let mut acc = Matrix::zeros(d, d);
        for (k, lam) in lams.iter().enumerate() {
            let e = &propagators[k];
            acc += e * lam * e.transpose();
        }
        linalg::symmetrize(&mut acc);
        Ok(acc)
    }

    /// `ℰ_{n−k}(P_k)` for `k = 0..=n`.
    pub fn propagators(&self, n: usize) -> Result<Vec<Matrix>> {
        (0..=n).map(|k| crate::riccati::e_n_product(&self.params, &self.pred[k], n - k)).collect()
    }
}

/// A single draw of the limiting `Λ_n`.
pub fn lambda_limit_draw<R: Rng + ?Sized>(sampler: &LimitSampler, n: usize, rng: &mut R) -> Result<Matrix> {
    Ok(sampler.lambdas(n, rng)?.pop().expect("at least one term"))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::SeedTree;

    fn model2() -> ModelParams {
        let a = Matrix::from_row_slice(2, 2, &[1.0, 0.5, 0.0, 0.9]);
        ModelParams::new(a, Matrix::identity(2, 2), Matrix::identity(2, 2) * 0.5, Matrix::identity(2, 2), Matrix::identity(2, 2), Vector::zeros(2)).unwrap()
    }

    #[test]
    fn ensemble_too_small() {
        let p = model2();
        let mut rng = SeedTree::new(1).stream("t", &[]);
        let err = init_ensemble(&p, 1, &mut rng).unwrap_err();
        assert!(err.to_string().contains("N+1 > d required"));
        assert!(FilterRun::init(Backend::WishartChain, &p, 1, &mut rng).is_err());
        assert!(init_ensemble(&p, 2, &mut rng).is_ok());
    }

    #[test]
    fn stats_are_normalized_by_n() {
        let mut rng = SeedTree::new(2).stream("t", &[]);
        let ens = init_ensemble(&model2(), 5, &mut rng).unwrap();
        let x = ens.particles();
        let m = x.column_mean();
        let mut c = Matrix::zeros(2, 2);
        for col in x.column_iter() {
            let v = col - &m;
            c += &v * v.transpose();
        }
        assert!(linalg::rel_diff(ens.cov(), &(c.clone() / 5.0)) < 1e-12);
        // (1 + 1/N) times the empirical-measure covariance
        assert!(linalg::rel_diff(ens.cov(), &(c / 6.0 * (1.0 + 1.0 / 5.0))) < 1e-12);
        assert!(ens.cov().min_eigenvalue().unwrap() > 0.0);
    }

    #[test]
    fn deterministic_replay() {
        let p = model2();
        let a = init_ensemble(&p, 7, &mut SeedTree::new(3).stream("t", &[])).unwrap();
        let b = init_ensemble(&p, 7, &mut SeedTree::new(3).stream("t", &[])).unwrap();
        assert_eq!(a.particles(), b.particles());
    }

    #[test]
    fn matrix_and_particle_forms_agree() {
        let p = model2();
        let mut rng = SeedTree::new(4).stream("t", &[]);
        let ens = init_ensemble(&p, 9, &mut rng).unwrap();
        let noise = p.r0_sqrt() * rng::standard_normal_matrix(&mut rng, 2, 10);
        let y = Vector::from_vec(vec![0.3, -1.0]);
        let a = enkf_update_with_noise(&p, &ens, &y, &noise).unwrap();
        let b = enkf_update_per_particle(&p, &ens, &y, &noise).unwrap();
        assert!((a.particles() - b.particles()).norm() < 1e-12);
        assert!(enkf_update_with_noise(&p, &a, &y, &noise).is_err());
        assert!(enkf_predict(&p, &ens, &mut rng).is_err());
    }

    #[test]
    fn unobserved_update_is_identity() {
        let p = ModelParams::scalar(0.9, 0.0, 1.0, 1.0, 1.0).unwrap();
        let mut rng = SeedTree::new(5).stream("t", &[]);
        let ens = init_ensemble(&p, 6, &mut rng).unwrap();
        let up = enkf_update(&p, &ens, &Vector::from_element(1, 3.0), &mut rng).unwrap();
        assert_eq!(up.particles(), ens.particles());
    }

    #[test]
    fn noiseless_perturbation_is_kalman() {
        let p = model2();
        let ys: Vec<Vector> = (0..15).map(|k| Vector::from_vec(vec![k as f64 * 0.1, 1.0 - k as f64 * 0.05])).collect();
        let kf = kalman::kf_run(&p, &ys, kalman::CovarianceForm::Standard).unwrap();
        let mut st = perturbation_init_with(&p, 10, &Vector::zeros(2), &Matrix::zeros(2, 2)).unwrap();
        let zero = PerturbationDraws::zero(&p);
        for (k, y) in ys.iter().enumerate() {
            assert!(linalg::rel_diff(&st.cov, &kf.states[k].pred_cov) < 1e-12);
            assert!((&st.mean - &kf.states[k].pred_mean).norm() < 1e-12);
            st = perturbation_step_with(&p, &st, y, &zero).unwrap();
            let upd = kf.states[k].upd_cov.as_ref().unwrap();
            assert!(linalg::rel_diff(st.upd_cov.as_ref().unwrap(), upd) < 1e-12);
        }
    }

    #[test]
    fn lambda_assembly() {
        let p = model2();
        let mut rng = SeedTree::new(6).stream("t", &[]);
        let st = perturbation_init(&p, 16, &mut rng).unwrap();
        let next = perturbation_step(&p, &st, &Vector::zeros(2), &mut rng).unwrap();
        let a = p.a();
        let lam = a * &next.last_delta_hat * a.transpose() + &next.last_delta;
        assert!((lam - &next.last_lambda).norm() < 1e-12);
        // p⁺ = Φ(p) + Λ/√N
        let phi = crate::riccati::phi(&p, &st.cov).unwrap();
        let rebuilt = phi.into_inner() + &next.last_lambda / 4.0;
        assert!(linalg::rel_diff(&next.cov, &rebuilt) < 1e-10);
    }

    #[test]
    fn backends_step_uniformly() {
        let p = model2();
        for b in [Backend::Particle, Backend::Perturbation, Backend::WishartChain] {
            let mut rng = SeedTree::new(7).stream(b.tag(), &[]);
            let mut run = FilterRun::init(b, &p, 8, &mut rng).unwrap();
            assert_eq!(run.mean().is_some(), b.tracks_mean());
            for _ in 0..5 {
                run.step(&p, &Vector::zeros(2), &mut rng).unwrap();
            }
            assert_eq!(run.step_index(), 5);
            assert!(run.cov().min_eigenvalue().unwrap() > 0.0);
            assert!(run.upd_cov().is_some());
            assert_eq!(Backend::parse(b.tag()), Some(b));
        }
    }

    #[test]
    fn limit_sampler_initial_term() {
        let p = model2();
        let s = LimitSampler::new(&p, 3).unwrap();
        let mut rng = SeedTree::new(8).stream("t", &[]);
        let reps = 20_000;
        let mut acc = Matrix::zeros(2, 2);
        for _ in 0..reps {
            let l = lambda_limit_draw(&s, 0, &mut rng).unwrap();
            acc += l.component_mul(&l);
        }
        acc /= reps as f64;
        // P0 = I: Λ_0 = ℍ, entry variances 2 (diagonal) and 1.
        assert!((acc[(0, 0)] - 2.0).abs() < 0.1);
        assert!((acc[(0, 1)] - 1.0).abs() < 0.06);
    }
}
