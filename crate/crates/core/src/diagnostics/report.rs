use serde::{Deserialize, Serialize};

use super::gradient::averaged_gradient;
use super::martingale::{martingale_trace, test_function_trace, MartingaleTrace, TestFunction, TraceSummary};
use super::trajectory::{tracking_error, TrackingReport};
use super::undertraining::{undertraining_scan, UndertrainingReport};
use crate::envs::{value_iteration, Mdp};
use crate::error::{Error, Result};
use crate::measure::{stationarity_report, window_average, StationarityReport, TimeAxis, Window};
use crate::network::{Checkpoint, Topology};
use crate::trainer::{PolicyConfig, ThetaReplay, TrainRecord};

/// Pass thresholds. Every check passes when its threshold is `+∞`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Thresholds {
    /// Upper bound on the stationarity gap of the tail marginal.
    pub stationarity_gap: f64,
    /// Upper bound on tail fluctuation over range for every Martingale trace.
    pub martingale_ratio: f64,
    /// Upper bound on `‖∇̃ℓ(θ_final)‖ / ‖∇̃ℓ(θ_init)‖` (inclusive).
    pub gradient_ratio: f64,
    /// Upper bound on the ratio of consecutive tracking sup-distances.
    pub tracking_ratio: f64,
    /// Step-halving tolerance, relative to `1 + ‖θ_n‖`.
    pub halving_tolerance: f64,
    /// Upper bound on the number of trapped regions (inclusive).
    pub trapped_regions: f64,
    /// Upper bound on the tail mass of any state whose greedy action is not optimal.
    pub mismatch_mass: f64,
}

impl Default for Thresholds {
    fn default() -> Self {
        Self {
            stationarity_gap: 0.05,
            martingale_ratio: 0.1,
            gradient_ratio: 0.1,
            tracking_ratio: 1.0,
            halving_tolerance: 1e-3,
            trapped_regions: 0.0,
            mismatch_mass: 0.01,
        }
    }
}

impl Thresholds {
    /// Every threshold set to `+∞`.
    pub fn vacuous() -> Self {
        let inf = f64::INFINITY;
        Self {
            stationarity_gap: inf,
            martingale_ratio: inf,
            gradient_ratio: inf,
            tracking_ratio: inf,
            halving_tolerance: inf,
            trapped_regions: inf,
            mismatch_mass: inf,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let fields = [
            ("thresholds.stationarity_gap", self.stationarity_gap),
            ("thresholds.martingale_ratio", self.martingale_ratio),
            ("thresholds.gradient_ratio", self.gradient_ratio),
            ("thresholds.tracking_ratio", self.tracking_ratio),
            ("thresholds.halving_tolerance", self.halving_tolerance),
            ("thresholds.trapped_regions", self.trapped_regions),
            ("thresholds.mismatch_mass", self.mismatch_mass),
        ];
        for (field, v) in fields {
            if v.is_nan() || v < 0.0 {
                return Err(Error::validation(field, format!("must be a nonnegative number, got {v}")));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DiagnoseOptions {
    pub window: f64,
    pub anchors: Vec<u64>,
    pub horizon: f64,
    pub substeps: usize,
    /// Run the test-function bank in addition to the noise trace.
    pub test_functions: bool,
    pub thresholds: Thresholds,
}

impl Default for DiagnoseOptions {
    fn default() -> Self {
        Self {
            window: 0.2,
            anchors: vec![1_000, 10_000, 100_000],
            horizon: 1.0,
            substeps: 4,
            test_functions: true,
            thresholds: Thresholds::default(),
        }
    }
}

impl DiagnoseOptions {
    pub fn validate(&self) -> Result<()> {
        if !(self.window > 0.0 && self.window <= 1.0) {
            return Err(Error::validation("diagnose.window", format!("must lie in (0, 1], got {}", self.window)));
        }
        if !(self.horizon >= 0.0 && self.horizon.is_finite()) {
            return Err(Error::validation("diagnose.horizon", "must be finite and nonnegative"));
        }
        if self.substeps == 0 {
            return Err(Error::validation("diagnose.substeps", "must be at least 1"));
        }
        if self.anchors.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::validation("diagnose.anchors", "must be strictly increasing"));
        }
        self.thresholds.validate()
    }
}

/// One thresholded property with its measured value.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub value: f64,
    pub threshold: f64,
    pub passed: bool,
    pub detail: String,
}

impl Check {
    fn new(name: &str, value: f64, threshold: f64, inclusive: bool, detail: String) -> Self {
        let passed = threshold == f64::INFINITY || if inclusive { value <= threshold } else { value < threshold };
        Self {
            name: name.to_string(),
            value,
            threshold,
            passed,
            detail,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NamedSummary {
    pub id: String,
    pub summary: TraceSummary,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GradientReport {
    pub initial_step: u64,
    pub final_step: u64,
    pub initial_norm: f64,
    pub final_norm: f64,
    pub ratio: f64,
    /// `(checkpoint step, ‖∇̃ℓ(θ_step, tail)‖₂)`.
    pub per_checkpoint: Vec<(u64, f64)>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiagnosticsReport {
    pub steps: usize,
    pub window: Window,
    pub stationarity: StationarityReport,
    pub noise: TraceSummary,
    pub test_functions: Vec<NamedSummary>,
    pub tracking: Vec<TrackingReport>,
    /// Anchors whose horizon runs past the end of the record.
    pub skipped_anchors: Vec<u64>,
    pub gradient: GradientReport,
    pub undertraining: UndertrainingReport,
    pub checks: Vec<Check>,
}

impl DiagnosticsReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn failures(&self) -> Vec<&Check> {
        self.checks.iter().filter(|c| !c.passed).collect()
    }
}

/// Full diagnostics plus the traces behind the Martingale summaries.
#[derive(Debug, Clone)]
pub struct Diagnostics {
    pub report: DiagnosticsReport,
    pub axis: TimeAxis,
    pub noise: MartingaleTrace,
    pub test_functions: Vec<MartingaleTrace>,
}

fn ratio(num: f64, den: f64) -> f64 {
    match (num == 0.0, den == 0.0) {
        (true, _) => 0.0,
        (false, true) => f64::INFINITY,
        _ => num / den,
    }
}

/// Runs every diagnostic on a finished run. `checkpoints` must start at
/// step 0 and end at the final step.
pub fn diagnose(
    topology: &Topology,
    mdp: &Mdp,
    policy: &PolicyConfig,
    record: &TrainRecord,
    checkpoints: &[Checkpoint],
    options: &DiagnoseOptions,
) -> Result<Diagnostics> {
    options.validate()?;
    let (first, last) = match (checkpoints.first(), checkpoints.last()) {
        (Some(f), Some(l)) => (f, l),
        _ => return Err(Error::Precondition("diagnostics need checkpoints".into())),
    };
    if first.step != 0 || last.step != record.len() as u64 {
        return Err(Error::Precondition(format!(
            "checkpoints span steps {}..={}, the run has {} steps",
            first.step,
            last.step,
            record.len()
        )));
    }
    let th = options.thresholds;
    let regen = ThetaReplay::new(topology, mdp, record, checkpoints)?;
    let axis = TimeAxis::from_record(record)?;
    let window = Window::new(&axis, options.window)?;
    let tail = window_average(record, &axis, mdp, &window)?;
    let mut checks = Vec::new();

    let stationarity = stationarity_report(record, checkpoints, topology, mdp, policy, options.window)?;
    checks.push(Check::new(
        "stationarity_gap",
        stationarity.gap,
        th.stationarity_gap,
        false,
        format!("θ from checkpoint {}, ε = {}", stationarity.checkpoint_step, stationarity.epsilon),
    ));

    let noise = martingale_trace(&regen)?;
    checks.push(Check::new(
        "martingale.noise",
        noise.summary.ratio,
        th.martingale_ratio,
        false,
        format!("tail fluctuation {} over range {}", noise.summary.tail_fluctuation, noise.summary.range),
    ));
    let mut traces = Vec::new();
    if options.test_functions {
        for f in TestFunction::bank(mdp) {
            let tr = test_function_trace(record, mdp, &f)?;
            checks.push(Check::new(
                &format!("martingale.{}", f.id),
                tr.summary.ratio,
                th.martingale_ratio,
                false,
                format!("tail fluctuation {} over range {}", tr.summary.tail_fluctuation, tr.summary.range),
            ));
            traces.push(tr);
        }
    }

    let (usable, skipped): (Vec<u64>, Vec<u64>) = options.anchors.iter().partition(|&&n| {
        (n as usize) <= axis.steps() && axis.t(n as usize) + options.horizon <= axis.end()
    });
    let tracking = tracking_error(&regen, &usable, options.horizon, options.substeps)?;
    if tracking.len() >= 2 {
        let worst = tracking
            .windows(2)
            .map(|w| ratio(w[1].sup_distance, w[0].sup_distance))
            .fold(0.0, f64::max);
        checks.push(Check::new(
            "tracking.decrease",
            worst,
            th.tracking_ratio,
            false,
            format!(
                "sup-distances {:?} at anchors {:?}",
                tracking.iter().map(|r| r.sup_distance).collect::<Vec<_>>(),
                usable
            ),
        ));
    }
    for r in &tracking {
        checks.push(Check::new(
            &format!("tracking.halving.{}", r.anchor),
            r.halving_change / (1.0 + r.theta_norm),
            th.halving_tolerance,
            false,
            format!("endpoint change {} with ‖θ_n‖ = {}", r.halving_change, r.theta_norm),
        ));
    }

    let per_checkpoint = checkpoints
        .iter()
        .map(|c| Ok((c.step, averaged_gradient(topology, &c.theta, &tail, mdp)?.norm)))
        .collect::<Result<Vec<_>>>()?;
    let (initial_norm, final_norm) = (per_checkpoint[0].1, per_checkpoint[per_checkpoint.len() - 1].1);
    let gradient = GradientReport {
        initial_step: first.step,
        final_step: last.step,
        initial_norm,
        final_norm,
        ratio: ratio(final_norm, initial_norm),
        per_checkpoint,
    };
    checks.push(Check::new(
        "averaged_gradient",
        gradient.ratio,
        th.gradient_ratio,
        true,
        format!("‖∇̃ℓ‖ {} at step {} vs {} at step 0", final_norm, last.step, initial_norm),
    ));

    let oracle = value_iteration(mdp, 1e-10, 1_000_000)?;
    let undertraining = undertraining_scan(topology, &last.theta, &tail, mdp, &oracle)?;
    let trapped = undertraining.trapped_regions();
    checks.push(Check::new(
        "undertraining.trapped_regions",
        trapped.len() as f64,
        th.trapped_regions,
        true,
        if trapped.is_empty() {
            "no trapped region".into()
        } else {
            trapped
                .iter()
                .map(|r| format!("S({}) = {:?} visited with mass {} but action {} never", r.action, r.states, r.region_mass, r.action))
                .collect::<Vec<_>>()
                .join("; ")
        },
    ));
    let mismatched: Vec<usize> = (0..mdp.num_states()).filter(|&x| undertraining.mismatch[x]).collect();
    checks.push(Check::new(
        "undertraining.greedy_mismatch",
        undertraining.max_mismatch_mass(),
        th.mismatch_mass,
        false,
        format!("greedy differs from the optimal policy on states {mismatched:?}"),
    ));

    let report = DiagnosticsReport {
        steps: record.len(),
        window,
        stationarity,
        noise: noise.summary,
        test_functions: traces
            .iter()
            .map(|t| NamedSummary {
                id: match &t.kind {
                    super::TraceKind::TestFunction { id } => id.clone(),
                    super::TraceKind::Noise => "noise".into(),
                },
                summary: t.summary,
            })
            .collect(),
        tracking,
        skipped_anchors: skipped,
        gradient,
        undertraining,
        checks,
    };
    Ok(Diagnostics {
        report,
        axis,
        noise,
        test_functions: traces,
    })
}

/// `t,value` rows of `(times[i], values[i])`, thinned to about `max_rows`
/// evenly spaced rows; the final row is always kept.
pub fn series_csv(times: &[f64], values: &[f64], max_rows: usize) -> String {
    let n = times.len().min(values.len());
    let stride = n.div_ceil(max_rows.max(1)).max(1);
    let mut s = String::from("t,value\n");
    for i in (0..n).filter(|i| i % stride == 0 || i + 1 == n) {
        s.push_str(&format!("{},{}\n", times[i], values[i]));
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn checks_pass_at_infinity() {
        assert!(Check::new("x", f64::INFINITY, f64::INFINITY, false, String::new()).passed);
        assert!(!Check::new("x", 0.1, 0.1, false, String::new()).passed);
        assert!(Check::new("x", 0.1, 0.1, true, String::new()).passed);
    }

    #[test]
    fn series_keeps_first_and_last_rows() {
        let t: Vec<f64> = (0..10).map(f64::from).collect();
        let csv = series_csv(&t, &t, 3);
        assert_eq!(csv, "t,value\n0,0\n4,4\n8,8\n9,9\n");
        assert_eq!(series_csv(&t[..2], &t[..2], 100), "t,value\n0,0\n1,1\n");
    }

    #[test]
    fn zero_over_zero_is_zero() {
        assert_eq!(ratio(0.0, 0.0), 0.0);
        assert_eq!(ratio(1.0, 0.0), f64::INFINITY);
    }

    #[test]
    fn options_validation_names_fields() {
        let mut o = DiagnoseOptions::default();
        o.anchors = vec![10, 5];
        assert!(o.validate().unwrap_err().to_string().contains("diagnose.anchors"));
        let mut o = DiagnoseOptions::default();
        o.thresholds.gradient_ratio = -1.0;
        assert!(o.validate().unwrap_err().to_string().contains("thresholds.gradient_ratio"));
    }
}
