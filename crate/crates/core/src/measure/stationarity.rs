use serde::{Deserialize, Serialize};

use super::process::{window_average, TimeAxis, Window};
use super::{pushforward, MarginalHistogram, OccupationMeasure};
use crate::envs::{FrozenKernel, Mdp};
use crate::error::{Error, Result};
use crate::network::{q_values, Checkpoint, Topology};
use crate::trainer::{action_probabilities, PolicyConfig, TrainRecord};

/// `p̃_θ` for the ε-greedy policy of `θ` with exploration rate `epsilon`.
pub fn frozen_kernel(topology: &Topology, theta: &[f64], mdp: &Mdp, epsilon: f64) -> Result<FrozenKernel> {
    let policy = (0..mdp.num_states())
        .map(|x| Ok(action_probabilities(&q_values(topology, theta, mdp.state(x)?)?, epsilon)))
        .collect::<Result<Vec<_>>>()?;
    FrozenKernel::from_policy(mdp, &policy)
}

/// `½ ‖m − mP‖₁`.
pub fn marginal_gap(marginal: &MarginalHistogram, fk: &FrozenKernel) -> Result<f64> {
    marginal.distance(&pushforward(marginal, fk)?)
}

/// Stationarity gap of the measure's state marginal under `p̃_θ`.
pub fn stationarity_gap(
    measure: &OccupationMeasure,
    topology: &Topology,
    theta: &[f64],
    mdp: &Mdp,
    epsilon: f64,
) -> Result<f64> {
    if measure.num_states() != mdp.num_states() {
        return Err(Error::Input("measure and MDP have different state sets".into()));
    }
    marginal_gap(&measure.marginal(), &frozen_kernel(topology, theta, mdp, epsilon)?)
}

/// Stationarity of a tail estimate, judged with the checkpoint nearest the
/// window midpoint and, as a sensitivity check, with those nearest the
/// window start and end.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StationarityReport {
    pub gap: f64,
    pub window: Window,
    pub checkpoint_step: u64,
    pub epsilon: f64,
    /// Gaps with `θ` from the checkpoints nearest window start, middle, end.
    pub sensitivity: [f64; 3],
    pub sensitivity_steps: [u64; 3],
    pub marginal: Vec<f64>,
}

fn nearest_checkpoint(checkpoints: &[Checkpoint], step: u64) -> Result<&Checkpoint> {
    checkpoints
        .iter()
        .min_by_key(|c| c.step.abs_diff(step))
        .ok_or_else(|| Error::Precondition("no checkpoints available".into()))
}

pub fn stationarity_report(
    record: &TrainRecord,
    checkpoints: &[Checkpoint],
    topology: &Topology,
    mdp: &Mdp,
    policy: &PolicyConfig,
    fraction: f64,
) -> Result<StationarityReport> {
    let axis = TimeAxis::from_record(record)?;
    let window = Window::new(&axis, fraction)?;
    let measure = window_average(record, &axis, mdp, &window)?;
    let marginal = measure.marginal();
    let mid_step = axis.locate(window.midpoint())? as u64;
    let targets = [window.first_step, mid_step, window.last_step + 1];
    let mut sensitivity = [0.0; 3];
    let mut sensitivity_steps = [0; 3];
    for (i, &target) in targets.iter().enumerate() {
        let ck = nearest_checkpoint(checkpoints, target)?;
        let fk = frozen_kernel(topology, &ck.theta, mdp, policy.epsilon_at(ck.step))?;
        sensitivity[i] = marginal_gap(&marginal, &fk)?;
        sensitivity_steps[i] = ck.step;
    }
    let checkpoint_step = sensitivity_steps[1];
    Ok(StationarityReport {
        gap: sensitivity[1],
        window,
        checkpoint_step,
        epsilon: policy.epsilon_at(checkpoint_step),
        sensitivity,
        sensitivity_steps,
        marginal: marginal.mass,
    })
}
