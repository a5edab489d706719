//! Deep Q-learning on small MDPs with exactly enumerable kernels, plus the
//! diagnostics of its stochastic-approximation analysis: occupation
//! measures on the `Σγ` time axis, Martingale noise traces, the
//! interpolated trajectory and frozen-measure ODE, stationarity gaps and
//! undertraining scans.
//!
//! Modules build on each other bottom-up: [`envs`] → [`network`] →
//! [`trainer`] → [`measure`] → [`diagnostics`].

pub mod diagnostics;
pub mod envs;
pub mod error;
pub mod measure;
pub mod network;
pub mod trainer;

pub use error::{Error, Result};
