use serde::{Deserialize, Serialize};

use super::OccupationMeasure;
use crate::envs::Mdp;
use crate::error::{Error, Result};
use crate::trainer::TrainRecord;

/// `t_0 = 0`, `t_{n+1} = t_n + γ(n)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimeAxis {
    t: Vec<f64>,
}

impl TimeAxis {
    pub fn from_gammas(gammas: &[f64]) -> Result<Self> {
        let mut t = Vec::with_capacity(gammas.len() + 1);
        t.push(0.0);
        let mut acc = 0.0;
        for (n, &g) in gammas.iter().enumerate() {
            if !(g >= 0.0 && g.is_finite()) {
                return Err(Error::Input(format!("step size γ({n}) = {g} is not a finite nonnegative number")));
            }
            acc += g;
            t.push(acc);
        }
        Ok(Self { t })
    }

    pub fn from_record(record: &TrainRecord) -> Result<Self> {
        Self::from_gammas(&record.gammas())
    }

    /// Number of steps `N`.
    pub fn steps(&self) -> usize {
        self.t.len() - 1
    }

    /// `t_n` for `n ≤ N`.
    pub fn t(&self, n: usize) -> f64 {
        self.t[n]
    }

    pub fn times(&self) -> &[f64] {
        &self.t
    }

    /// `t_N`.
    pub fn end(&self) -> f64 {
        self.t[self.t.len() - 1]
    }

    /// The step `n` with `t ∈ [t_n, t_{n+1})`.
    pub fn locate(&self, t: f64) -> Result<usize> {
        if !(t >= 0.0 && t < self.end()) {
            return Err(Error::Input(format!("time {t} outside [0, {})", self.end())));
        }
        Ok(self.t.partition_point(|&tn| tn <= t) - 1)
    }
}

/// `μ` on the interval of step `n`: a Dirac at `(x_n, a_n)`, or for a
/// replay update the mini-batch pairs with mass `1/Ĥ` each.
pub fn step_measure(record: &TrainRecord, n: u64, mdp: &Mdp) -> Result<OccupationMeasure> {
    let atoms = step_atoms(record, n)?;
    OccupationMeasure::from_atoms(mdp.num_states(), mdp.num_actions(), &atoms)
}

pub(crate) fn step_atoms(record: &TrainRecord, n: u64) -> Result<Vec<(usize, usize, f64)>> {
    let row = record.row(n)?;
    Ok(match &row.batch {
        None => vec![(row.x, row.a, 1.0)],
        Some(steps) => {
            let w = 1.0 / steps.len() as f64;
            steps
                .iter()
                .map(|&k| record.row(k).map(|r| (r.x, r.a, w)))
                .collect::<Result<_>>()?
        }
    })
}

/// `μ(t)`, piecewise constant and left-closed on each `[t_n, t_{n+1})`.
pub fn measure_at(record: &TrainRecord, axis: &TimeAxis, mdp: &Mdp, t: f64) -> Result<OccupationMeasure> {
    let n = axis.locate(t)?;
    step_measure(record, n as u64, mdp)
}

/// The final `w`-fraction `[(1 − w) t_N, t_N)` of the time axis.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Window {
    pub fraction: f64,
    pub t_start: f64,
    pub t_end: f64,
    /// Step whose interval contains `t_start`.
    pub first_step: u64,
    /// Last step of the run.
    pub last_step: u64,
}

impl Window {
    pub fn new(axis: &TimeAxis, fraction: f64) -> Result<Self> {
        if !(fraction > 0.0 && fraction <= 1.0) {
            return Err(Error::Input(format!("window fraction {fraction} outside (0, 1]")));
        }
        if axis.steps() == 0 || axis.end() <= 0.0 {
            return Err(Error::Input("empty window: the run has no time to average over".into()));
        }
        let t_end = axis.end();
        let t_start = (1.0 - fraction) * t_end;
        Ok(Self {
            fraction,
            t_start,
            t_end,
            first_step: axis.locate(t_start)? as u64,
            last_step: axis.steps() as u64 - 1,
        })
    }

    pub fn midpoint(&self) -> f64 {
        0.5 * (self.t_start + self.t_end)
    }
}

/// Time average of `μ(t)` over the window: each step's measure weighted by
/// the length of its interval inside `[(1 − w) t_N, t_N)`.
pub fn tail_estimate(record: &TrainRecord, axis: &TimeAxis, mdp: &Mdp, fraction: f64) -> Result<OccupationMeasure> {
    let window = Window::new(axis, fraction)?;
    window_average(record, axis, mdp, &window)
}

pub fn window_average(record: &TrainRecord, axis: &TimeAxis, mdp: &Mdp, window: &Window) -> Result<OccupationMeasure> {
    let (s, a) = (mdp.num_states(), mdp.num_actions());
    let mut weights = vec![0.0; s * a];
    for n in window.first_step..=window.last_step {
        let i = n as usize;
        let overlap = axis.t(i + 1).min(window.t_end) - axis.t(i).max(window.t_start);
        if overlap <= 0.0 {
            continue;
        }
        for (x, act, w) in step_atoms(record, n)? {
            if x >= s || act >= a {
                return Err(Error::Input(format!("record pair ({x}, {act}) outside the MDP")));
            }
            weights[x * a + act] += overlap * w;
        }
    }
    let total: f64 = weights.iter().sum();
    if total <= 0.0 {
        return Err(Error::Input("empty window: no step overlaps it".into()));
    }
    for w in &mut weights {
        *w /= total;
    }
    OccupationMeasure::from_weights(s, a, weights)
}
