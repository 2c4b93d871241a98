//! Robust marginal integration for additive nonparametric regression.
//!
//! The crate fits additive models `Y = mu + g_1(X_1) + ... + g_d(X_d) + error`
//! where some responses may be missing at random. Each component is obtained
//! by integrating a local polynomial M-fit (polynomial only in the direction
//! of interest) over a fixed product measure on the nuisance coordinates.
//!
//! Module map:
//!
//! * [`data`]: datasets with missing-response indicators and CSV I/O.
//! * [`kernels`]: compact-support kernels and their moment matrices.
//! * [`losses`]: least squares, Huber and Tukey losses with scores and IRLS weights.
//! * [`scale`]: MAD, local medians and the preliminary residual scale.
//! * [`localfit`]: the local polynomial M-fit solved by IRLS.
//! * [`integration`]: marginal integration, derivatives, location and prediction.
//! * [`bandwidth`]: K-fold cross-validation (classical and robust) and rate checks.
//! * [`asymptotics`]: closed-form asymptotic bias and variance.
//! * [`simulate`]: the Monte Carlo designs, contaminations and ISE summaries.

pub mod asymptotics;
pub mod bandwidth;
pub mod data;
mod error;
pub mod integration;
pub mod kernels;
pub mod localfit;
pub mod losses;
pub mod quadrature;
pub mod rng;
pub mod scale;
pub mod simulate;

pub use error::{Error, ErrorKind, Result};
