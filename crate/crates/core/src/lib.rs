//! Numerical core of enkf-lab: exact Kalman/Riccati reference solutions,
//! non-central Wishart machinery and the ensemble Kalman filter with its
//! equivalent-in-law stochastic representations.

pub mod csv;
pub mod enkf;
pub mod error;
pub mod expansion;
pub mod instances;
pub mod kalman;
pub mod linalg;
pub mod model;
pub mod riccati;
pub mod rng;
pub mod wishart;

pub use error::{Error, Result};
pub use linalg::{Definiteness, Matrix, NormKind, SpdMatrix, Vector};
pub use model::{ModelParams, ModelSpec, PathSample};
pub use riccati::RiccatiContext;
pub use enkf::{Backend, Ensemble, FilterRun};
