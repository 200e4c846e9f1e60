//! Exact Kalman filter: gain, updating and prediction steps.

use std::fmt::Write as _;

use nalgebra::{Cholesky, Dyn};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{self, Matrix, SpdMatrix, Vector};
use crate::csv;
use crate::model::ModelParams;

/// Largest acceptable condition number of the innovation covariance.
pub const MAX_INNOVATION_CONDITION: f64 = 1e14;

/// Factorized innovation covariance `B P B' + R0`, shared by the gain,
/// update and `r_hat` computations of a step.
#[derive(Clone, Debug)]
pub struct Innovation {
    chol: Cholesky<f64, Dyn>,
    gain: Matrix,
}

impl Innovation {
    pub fn new(params: &ModelParams, p: &Matrix) -> Result<Self> {
        let b = params.b();
        let bp = b * p;
        let mut cov = &bp * b.transpose() + params.r0().matrix();
        linalg::symmetrize(&mut cov);
        let (lo, hi) = linalg::eigen_range(&cov)?;
        if lo <= 0.0 || hi / lo > MAX_INNOVATION_CONDITION {
            return Err(Error::IllConditioned(if lo > 0.0 { hi / lo } else { f64::INFINITY }));
        }
        let chol = Cholesky::new(cov).ok_or(Error::IllConditioned(f64::INFINITY))?;
        // (BPB' + R0) K' = B P, using the symmetry of P.
        let gain = chol.solve(&bp).transpose();
        Ok(Self { chol, gain })
    }

    pub fn gain(&self) -> &Matrix {
        &self.gain
    }

    /// `(B P B' + R0)⁻¹ v`.
    pub fn solve(&self, v: &Matrix) -> Matrix {
        self.chol.solve(v)
    }
}

/// `K(P) = P B' (B P B' + R0)⁻¹`.
pub fn gain(params: &ModelParams, p: &Matrix) -> Result<Matrix> {
    Ok(Innovation::new(params, p)?.gain)
}

/// `Â(P) = (I + P S)⁻¹`.
pub fn a_hat(params: &ModelParams, p: &Matrix) -> Result<Matrix> {
    Innovation::new(params, p)?;
    let d = params.state_dim();
    let m = Matrix::identity(d, d) + p * params.s().matrix();
    linalg::lu_inverse(&m, "I + P S")
}

/// `R̂(P) = K(P) R0 K(P)'`.
pub fn r_hat(params: &ModelParams, p: &Matrix) -> Result<SpdMatrix> {
    let k = gain(params, p)?;
    Ok(r_hat_from_gain(params, &k))
}

pub(crate) fn r_hat_from_gain(params: &ModelParams, k: &Matrix) -> SpdMatrix {
    let mut m = k * params.r0().matrix() * k.transpose();
    linalg::symmetrize(&mut m);
    SpdMatrix::from_symmetric_unchecked(m)
}

/// How the updated covariance is assembled.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CovarianceForm {
    /// `Â(P) P`, symmetrized.
    #[default]
    Standard,
    /// `Â(P) P Â(P)' + R̂(P)`.
    Joseph,
}

/// Updated covariance `Â(P) P` given the gain `K(P)`.
pub fn updated_cov_from_gain(params: &ModelParams, p: &Matrix, k: &Matrix, form: CovarianceForm) -> Matrix {
    let d = params.state_dim();
    let a_hat = Matrix::identity(d, d) - k * params.b();
    let mut m = match form {
        CovarianceForm::Standard => &a_hat * p,
        CovarianceForm::Joseph => &a_hat * p * a_hat.transpose() + k * params.r0().matrix() * k.transpose(),
    };
    linalg::symmetrize(&mut m);
    m
}

pub fn updated_cov(params: &ModelParams, p: &Matrix, form: CovarianceForm) -> Result<Matrix> {
    let k = gain(params, p)?;
    Ok(updated_cov_from_gain(params, p, &k, form))
}

/// One step of the exact filter. Update fields are absent until the
/// observation of this step has been assimilated.
#[derive(Clone, Debug, PartialEq)]
pub struct KalmanState {
    pub step: usize,
    pub pred_mean: Vector,
    pub pred_cov: SpdMatrix,
    pub upd_mean: Option<Vector>,
    pub upd_cov: Option<SpdMatrix>,
}

impl KalmanState {
    pub fn initial(params: &ModelParams) -> Self {
        Self {
            step: 0,
            pred_mean: params.x0_mean().clone(),
            pred_cov: params.p0().clone(),
            upd_mean: None,
            upd_cov: None,
        }
    }
}

pub fn kf_update(params: &ModelParams, state: &KalmanState, y: &Vector, form: CovarianceForm) -> Result<KalmanState> {
    if y.len() != params.obs_dim() {
        return Err(Error::Dimension(format!("observation has length {}, expected {}", y.len(), params.obs_dim())));
    }
    let p = state.pred_cov.matrix();
    let inn = Innovation::new(params, p)?;
    let k = inn.gain();
    let innovation = y - params.b() * &state.pred_mean;
    let upd_mean = &state.pred_mean + k * innovation;
    let upd_cov = updated_cov_from_gain(params, p, k, form);
    Ok(KalmanState {
        upd_mean: Some(upd_mean),
        upd_cov: Some(SpdMatrix::from_symmetric_unchecked(upd_cov)),
        ..state.clone()
    })
}

pub fn kf_predict(params: &ModelParams, state: &KalmanState) -> Result<KalmanState> {
    let (Some(m), Some(p)) = (&state.upd_mean, &state.upd_cov) else {
        return Err(Error::InvalidArgument("prediction requires an updated state".into()));
    };
    let a = params.a();
    let mut cov = a * p.matrix() * a.transpose() + params.r().matrix();
    linalg::symmetrize(&mut cov);
    Ok(KalmanState {
        step: state.step + 1,
        pred_mean: a * m,
        pred_cov: SpdMatrix::from_symmetric_unchecked(cov),
        upd_mean: None,
        upd_cov: None,
    })
}

#[derive(Clone, Debug, PartialEq)]
pub struct KalmanTrajectory {
    pub states: Vec<KalmanState>,
    /// `K(P_n)` for every state, including the last (not yet updated) one.
    pub gains: Vec<Matrix>,
}

/// Runs the filter over `observations`: each observation updates the
/// current state and predicts the next, so `m` observations give `m + 1`
/// states, the last one predicted only.
pub fn kf_run(params: &ModelParams, observations: &[Vector], form: CovarianceForm) -> Result<KalmanTrajectory> {
    let mut states = Vec::with_capacity(observations.len() + 1);
    let mut gains = Vec::with_capacity(observations.len() + 1);
    let mut state = KalmanState::initial(params);
    for y in observations {
        gains.push(gain(params, state.pred_cov.matrix())?);
        let updated = kf_update(params, &state, y, form)?;
        state = kf_predict(params, &updated)?;
        states.push(updated);
    }
    gains.push(gain(params, state.pred_cov.matrix())?);
    states.push(state);
    Ok(KalmanTrajectory { states, gains })
}

impl KalmanTrajectory {
    /// CSV with one row per step: `step, pred_mean[*], pred_cov[*,*],
    /// upd_mean[*], upd_cov[*,*], gain[*,*]`. Missing update fields are blank.
    pub fn to_csv(&self) -> String {
        let d = self.states.first().map_or(0, |s| s.pred_mean.len());
        let (gr, gc) = self.gains.first().map_or((0, 0), Matrix::shape);
        let mut out = String::from("step");
        csv::vector_header(&mut out, "pred_mean", d);
        csv::matrix_header(&mut out, "pred_cov", d, d);
        csv::vector_header(&mut out, "upd_mean", d);
        csv::matrix_header(&mut out, "upd_cov", d, d);
        csv::matrix_header(&mut out, "gain", gr, gc);
        out.push('\n');
        for (s, k) in self.states.iter().zip(&self.gains) {
            let _ = write!(out, "{}", s.step);
            csv::push_entries(&mut out, s.pred_mean.iter().copied());
            csv::push_entries(&mut out, csv::row_major(s.pred_cov.matrix()));
            match &s.upd_mean {
                Some(m) => csv::push_entries(&mut out, m.iter().copied()),
                None => csv::push_blanks(&mut out, d),
            }
            match &s.upd_cov {
                Some(p) => csv::push_entries(&mut out, csv::row_major(p.matrix())),
                None => csv::push_blanks(&mut out, d * d),
            }
            csv::push_entries(&mut out, csv::row_major(k));
            out.push('\n');
        }
        out
    }
}
