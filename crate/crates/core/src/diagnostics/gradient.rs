use serde::{Deserialize, Serialize};

use super::trajectory::mean_field;
use crate::envs::Mdp;
use crate::error::{Error, Result};
use crate::measure::OccupationMeasure;
use crate::network::{l2_norm, Topology};

/// `∇̃ℓ(θ, μ) = Σ_{(x,a)} μ(x, a) (E[r + α max Q(y)] − Q(x, a)) ∇Q(x, a)`,
/// the measure-weighted expected-target direction. It vanishes at a
/// fixed point of the averaged dynamics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GradientFieldEstimate {
    pub theta_norm: f64,
    pub support: usize,
    pub vector: Vec<f64>,
    pub norm: f64,
}

pub fn averaged_gradient(
    topology: &Topology,
    theta: &[f64],
    measure: &OccupationMeasure,
    mdp: &Mdp,
) -> Result<GradientFieldEstimate> {
    if (measure.num_states(), measure.num_actions()) != (mdp.num_states(), mdp.num_actions()) {
        return Err(Error::Input(format!(
            "measure on {} × {} pairs, MDP has {} × {}",
            measure.num_states(),
            measure.num_actions(),
            mdp.num_states(),
            mdp.num_actions()
        )));
    }
    topology.check_theta(theta)?;
    let atoms = measure.atoms();
    let vector = mean_field(topology, theta, mdp, &atoms)?;
    Ok(GradientFieldEstimate {
        theta_norm: l2_norm(theta),
        support: atoms.len(),
        norm: l2_norm(&vector),
        vector,
    })
}
