//! Desk-scale simulator and estimator library for Gaussian-process
//! log-marginal-likelihood training driven by phase-estimation sampling.
//!
//! The crate is organized in layers:
//!
//! * [`numerics`] — dense symmetric matrices, spectral decomposition, and
//!   the exact Cholesky oracles everything is validated against;
//! * [`kernels`] — synthetic datasets and covariance construction;
//! * [`qsim`] — the phase-estimation outcome model (analytic distribution,
//!   sampler, and a brute-force statevector cross-check);
//! * [`estimators`] — the sampling-based log-determinant, data-fit, and
//!   assembled log-marginal-likelihood estimators;
//! * [`baselines`] — classical stochastic trace estimators run under
//!   matched sample budgets;
//! * [`trainer`] — hyperparameter search driven by noisy objective
//!   evaluations, plus the relative-variance study.
//!
//! All randomness flows through [`rng`]: one `u64` seed plus a stream
//! discipline gives bit-reproducible runs at any sample count.

pub mod baselines;
pub mod error;
pub mod estimators;
pub mod kernels;
pub mod numerics;
pub mod qsim;
pub mod rng;
pub mod trainer;

pub use error::{Error, Result};
