//! Monte Carlo verification studies for the ensemble Kalman filter: bias and
//! fluctuation rates, gain errors, Lyapunov drift, ergodicity, central limit
//! behaviour and state errors.

pub mod config;
pub mod error;
pub mod report;
pub mod runner;
pub mod stats;
pub mod studies;

pub use config::{StudyConfig, StudyKind, StudyOptions};
pub use error::{HarnessError, Result};
pub use report::{StudyReport, Verdict};
pub use runner::Runner;
pub use studies::run_study;
