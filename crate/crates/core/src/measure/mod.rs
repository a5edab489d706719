//! Occupation measures on the `Σγ` time axis: `μ(t)`, tail estimates of
//! its limit, state marginals, kernel pushforwards and stationarity gaps.
//! Distances between measures are total variation over `S × A`.

mod occupation;
mod process;
mod stationarity;

pub use occupation::{measure_distance, pushforward, MarginalHistogram, OccupationMeasure};
pub(crate) use process::step_atoms;
pub use process::{measure_at, step_measure, tail_estimate, window_average, TimeAxis, Window};
pub use stationarity::{frozen_kernel, marginal_gap, stationarity_gap, stationarity_report, StationarityReport};
