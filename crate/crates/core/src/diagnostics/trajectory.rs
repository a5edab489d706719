use serde::{Deserialize, Serialize};

use crate::envs::Mdp;
use crate::error::{Error, Result};
use crate::measure::{step_atoms, TimeAxis};
use crate::network::{l2_norm, Topology};
use crate::trainer::{expected_direction, ThetaReplay, TrainRecord};

/// Parameters beyond this norm stop an ODE integration.
pub const ODE_DIVERGENCE_GUARD: f64 = 1e6;

/// Piecewise-linear `θ̄(t)` through the iterates `θ_from, …, θ_to` placed at
/// `t_from, …, t_to`.
#[derive(Debug, Clone, PartialEq)]
pub struct InterpolatedTrajectory {
    first_step: u64,
    times: Vec<f64>,
    thetas: Vec<Vec<f64>>,
}

impl InterpolatedTrajectory {
    pub fn new(first_step: u64, times: Vec<f64>, thetas: Vec<Vec<f64>>) -> Result<Self> {
        if times.is_empty() || times.len() != thetas.len() {
            return Err(Error::Input(format!(
                "{} knot times for {} parameter vectors",
                times.len(),
                thetas.len()
            )));
        }
        if times.windows(2).any(|w| !(w[1] >= w[0])) {
            return Err(Error::Input("knot times must be nondecreasing".into()));
        }
        Ok(Self {
            first_step,
            times,
            thetas,
        })
    }

    pub fn first_step(&self) -> u64 {
        self.first_step
    }

    pub fn start(&self) -> f64 {
        self.times[0]
    }

    pub fn end(&self) -> f64 {
        self.times[self.times.len() - 1]
    }

    pub fn knots(&self) -> impl Iterator<Item = (f64, &[f64])> {
        self.times.iter().copied().zip(self.thetas.iter().map(|v| v.as_slice()))
    }

    /// `θ̄(t)`; exact at knot times.
    pub fn eval(&self, t: f64) -> Result<Vec<f64>> {
        if !(t >= self.start() && t <= self.end()) {
            return Err(Error::Input(format!(
                "time {t} outside the interpolated range [{}, {}]",
                self.start(),
                self.end()
            )));
        }
        let m = self.times.partition_point(|&tm| tm <= t) - 1;
        if m + 1 == self.times.len() {
            return Ok(self.thetas[m].clone());
        }
        let (t0, t1) = (self.times[m], self.times[m + 1]);
        if t == t0 || t1 <= t0 {
            return Ok(self.thetas[m].clone());
        }
        let s = (t - t0) / (t1 - t0);
        Ok(self.thetas[m]
            .iter()
            .zip(&self.thetas[m + 1])
            .map(|(a, b)| a + s * (b - a))
            .collect())
    }
}

/// Interpolation of the iterates `θ_from..=θ_to` of a finished run.
pub fn interpolate_trajectory(regen: &ThetaReplay<'_>, from: u64, to: u64) -> Result<InterpolatedTrajectory> {
    let axis = TimeAxis::from_record(regen.record())?;
    let thetas = regen.thetas(from, to)?;
    let times = (from..=to).map(|n| axis.t(n as usize)).collect();
    InterpolatedTrajectory::new(from, times, thetas)
}

/// Pairs that drive the update of step `n`. Replay warm-up steps move
/// nothing, so they drive nothing.
fn drift_atoms(record: &TrainRecord, n: u64) -> Result<Vec<(usize, usize, f64)>> {
    let row = record.row(n)?;
    if record.mode.replay_batch.is_some() && row.batch.is_none() {
        return Ok(Vec::new());
    }
    step_atoms(record, n)
}

/// `h̄(θ, μ) = ∫ (r + α max Q(y) − Q(x, a)) ∇Q(x, a) p(dy|x,a) μ(dx, da)`.
pub fn mean_field(topology: &Topology, theta: &[f64], mdp: &Mdp, atoms: &[(usize, usize, f64)]) -> Result<Vec<f64>> {
    let mut out = vec![0.0; theta.len()];
    for &(x, a, w) in atoms {
        let d = expected_direction(topology, theta, mdp, x, a)?;
        for (o, v) in out.iter_mut().zip(&d) {
            *o += w * v;
        }
    }
    Ok(out)
}

/// Euler path of `dθ/dt = h̄(θ, μ(t))`, with `μ(t)` frozen to the recorded
/// occupation process.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OdePath {
    pub anchor: u64,
    pub horizon: f64,
    pub substeps: usize,
    pub times: Vec<f64>,
    pub thetas: Vec<Vec<f64>>,
}

impl OdePath {
    pub fn endpoint(&self) -> &[f64] {
        &self.thetas[self.thetas.len() - 1]
    }

    pub fn integrator_steps(&self) -> usize {
        self.thetas.len() - 1
    }
}

/// Integrates from `θ(t_anchor) = theta` over `[t_anchor, t_anchor + horizon]`.
/// Each recorded step interval inside the horizon is split into
/// `substeps` equal Euler steps, so `μ` is constant on every Euler step.
#[allow(clippy::too_many_arguments)]
pub fn integrate_frozen_ode(
    topology: &Topology,
    mdp: &Mdp,
    record: &TrainRecord,
    axis: &TimeAxis,
    anchor: u64,
    theta: &[f64],
    horizon: f64,
    substeps: usize,
) -> Result<OdePath> {
    if substeps == 0 {
        return Err(Error::Input("substeps must be at least 1".into()));
    }
    if !(horizon >= 0.0 && horizon.is_finite()) {
        return Err(Error::Input(format!("horizon {horizon} is not a finite nonnegative number")));
    }
    topology.check_theta(theta)?;
    let start = anchor as usize;
    if start > axis.steps() {
        return Err(Error::Input(format!("anchor {anchor} beyond the run of {} steps", axis.steps())));
    }
    let t0 = axis.t(start);
    let t_end = t0 + horizon;
    if t_end > axis.end() {
        return Err(Error::Input(format!(
            "horizon ends at t = {t_end}, beyond the recorded t_N = {}",
            axis.end()
        )));
    }
    let mut times = vec![t0];
    let mut thetas = vec![theta.to_vec()];
    let mut current = theta.to_vec();
    let mut m = start;
    while m < axis.steps() && axis.t(m) < t_end {
        let h = axis.t(m + 1).min(t_end) - axis.t(m);
        let atoms = drift_atoms(record, m as u64)?;
        let dt = h / substeps as f64;
        for k in 0..substeps {
            let drift = mean_field(topology, &current, mdp, &atoms)?;
            for (c, d) in current.iter_mut().zip(&drift) {
                *c += dt * d;
            }
            let norm = l2_norm(&current);
            if !norm.is_finite() || norm > ODE_DIVERGENCE_GUARD {
                return Err(Error::Numerical(format!(
                    "ODE from anchor {anchor} left the guard ‖θ‖ ≤ {ODE_DIVERGENCE_GUARD} near t = {}",
                    axis.t(m) + (k + 1) as f64 * dt
                )));
            }
            times.push(if k + 1 == substeps {
                axis.t(m) + h
            } else {
                axis.t(m) + (k + 1) as f64 * dt
            });
            thetas.push(current.clone());
        }
        m += 1;
    }
    Ok(OdePath {
        anchor,
        horizon,
        substeps,
        times,
        thetas,
    })
}

/// `sup_{t ∈ [t_n, t_n + T]} ‖θ̄(t) − θ^n(t)‖₂` for one anchor `n`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrackingReport {
    pub anchor: u64,
    pub anchor_time: f64,
    pub horizon: f64,
    pub substeps: usize,
    pub integrator_steps: usize,
    pub sup_distance: f64,
    /// `‖θ^n_end(substeps) − θ^n_end(2 · substeps)‖₂`.
    pub halving_change: f64,
    /// `‖θ_n‖₂`, the scale for the halving tolerance.
    pub theta_norm: f64,
    /// `(t, ‖θ̄(t) − θ^n(t)‖₂)` at the coarse Euler nodes; kept out of JSON.
    #[serde(skip)]
    pub series: Vec<(f64, f64)>,
}

impl TrackingReport {
    /// Whether step halving moves the endpoint by less than `tol (1 + ‖θ‖)`.
    pub fn resolved(&self, tol: f64) -> bool {
        self.halving_change < tol * (1.0 + self.theta_norm)
    }
}

/// Tracking error of the recorded iterates against the frozen-measure ODE,
/// measured at every Euler node and every iterate inside the horizon.
pub fn tracking_error(regen: &ThetaReplay<'_>, anchors: &[u64], horizon: f64, substeps: usize) -> Result<Vec<TrackingReport>> {
    let record = regen.record();
    let axis = TimeAxis::from_record(record)?;
    let (topology, mdp) = (regen.topology(), regen.mdp());
    anchors
        .iter()
        .map(|&n| {
            let start = n as usize;
            if start > axis.steps() || axis.t(start) + horizon > axis.end() {
                return Err(Error::Input(format!(
                    "anchor {n} with horizon {horizon} extends beyond the recorded t_N = {}",
                    axis.end()
                )));
            }
            let t_end = axis.t(start) + horizon;
            let mut last = start;
            while last < axis.steps() && axis.t(last) < t_end {
                last += 1;
            }
            let traj = interpolate_trajectory(regen, n, last as u64)?;
            let theta_n = traj.thetas[0].clone();
            let coarse = integrate_frozen_ode(topology, mdp, record, &axis, n, &theta_n, horizon, substeps)?;
            let fine = integrate_frozen_ode(topology, mdp, record, &axis, n, &theta_n, horizon, 2 * substeps)?;
            let mut sup: f64 = 0.0;
            let mut series = Vec::with_capacity(coarse.times.len());
            for (t, theta) in coarse.times.iter().zip(&coarse.thetas) {
                let d = distance(&traj.eval(*t)?, theta);
                series.push((*t, d));
                sup = sup.max(d);
            }
            // iterates strictly inside the horizon, against the interpolated ODE
            let ode = InterpolatedTrajectory::new(n, coarse.times.clone(), coarse.thetas.clone())?;
            for (t, theta) in traj.knots() {
                if t <= t_end {
                    sup = sup.max(distance(theta, &ode.eval(t)?));
                }
            }
            Ok(TrackingReport {
                anchor: n,
                anchor_time: axis.t(start),
                horizon,
                substeps,
                integrator_steps: coarse.integrator_steps(),
                sup_distance: sup,
                halving_change: distance(coarse.endpoint(), fine.endpoint()),
                theta_norm: l2_norm(&theta_n),
                series,
            })
        })
        .collect()
}

fn distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn interpolation_is_exact_at_knots_and_linear_between() {
        let tr = InterpolatedTrajectory::new(0, vec![0.0, 0.5, 1.5], vec![vec![0.1, 2.0], vec![0.3, 1.0], vec![-0.7, 1.0]])
            .unwrap();
        assert_eq!(tr.eval(0.5).unwrap(), vec![0.3, 1.0]);
        assert_eq!(tr.eval(1.5).unwrap(), vec![-0.7, 1.0]);
        let mid = tr.eval(1.0).unwrap();
        assert!((mid[0] + 0.2).abs() < 1e-15 && mid[1] == 1.0);
        assert!(tr.eval(1.6).is_err());
        assert!(tr.eval(-0.1).is_err());
    }

    #[test]
    fn zero_length_intervals_return_the_earlier_knot() {
        let tr = InterpolatedTrajectory::new(0, vec![0.0, 1.0, 1.0], vec![vec![0.0], vec![1.0], vec![5.0]]).unwrap();
        assert_eq!(tr.eval(1.0).unwrap(), vec![5.0]);
        assert_eq!(tr.eval(0.25).unwrap(), vec![0.25]);
    }

    #[test]
    fn rejects_mismatched_knots() {
        assert!(InterpolatedTrajectory::new(0, vec![0.0], vec![]).is_err());
        assert!(InterpolatedTrajectory::new(0, vec![1.0, 0.0], vec![vec![0.0], vec![0.0]]).is_err());
    }
}
