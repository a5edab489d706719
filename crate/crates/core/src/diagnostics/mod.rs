//! Executable forms of the convergence argument: the noise Martingale
//! `M_n` and test-function traces `ξ_n`, the interpolated trajectory `θ̄`,
//! frozen-measure ODE paths with their tracking error, the averaged
//! gradient field, and the undertraining scan.
//!
//! Everything here is a pure function of a finished run. Iterates are
//! regenerated from checkpoints through [`ThetaReplay`](crate::trainer::ThetaReplay)
//! rather than stored per step.

mod gradient;
mod martingale;
mod report;
mod trajectory;
mod undertraining;

pub use gradient::{averaged_gradient, GradientFieldEstimate};
pub use martingale::{
    martingale_trace, psi_from_targets, psi_term, psi_with_conditional_mean, test_function_trace, MartingaleTrace,
    TestFunction, TraceKind, TraceSummary,
};
pub use report::{
    diagnose, series_csv, Check, DiagnoseOptions, Diagnostics, DiagnosticsReport, GradientReport, NamedSummary,
    Thresholds,
};
pub use trajectory::{
    integrate_frozen_ode, interpolate_trajectory, mean_field, tracking_error, InterpolatedTrajectory, OdePath,
    TrackingReport, ODE_DIVERGENCE_GUARD,
};
pub use undertraining::{undertraining_scan, RegionReport, UndertrainingReport};
