//! The semi-gradient updates.
//!
//! Every update moves `θ` along `δ · ∇_θ Q(x, a; θ)` where
//! `δ = target − Q(x, a; θ)` and the target is held fixed. This is the
//! descent direction of the frozen-target loss `½ (target − Q)²`, so the
//! step is `θ ← θ + γ δ ∇Q`.

use serde::{Deserialize, Serialize};

use super::Transition;
use crate::envs::{expected_max_q, max_value, Mdp};
use crate::error::{Error, Result};
use crate::network::{check_action, q_and_gradient, q_values, Topology};

/// How the bootstrapped target is formed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum UpdateMode {
    /// `r + α max_a' Q(x_{n+1}, a')` at the sampled next state.
    Online,
    /// `r + α Σ_y p(y|x,a) max_a' Q(y, a')`, enumerated exactly.
    Expected,
}

/// `(target − Q(x, a; θ)) · ∇_θ Q(x, a; θ)` for a fixed target.
pub fn semi_gradient(topology: &Topology, theta: &[f64], x: &[f64], a: usize, target: f64) -> Result<Vec<f64>> {
    let (q, mut grad) = q_and_gradient(topology, theta, x, a)?;
    let delta = target - q;
    for g in &mut grad {
        *g *= delta;
    }
    Ok(grad)
}

/// Sampled target of a transition.
pub fn online_target(topology: &Topology, theta: &[f64], mdp: &Mdp, t: &Transition) -> Result<f64> {
    let next = q_values(topology, theta, mdp.state(t.next)?)?;
    Ok(t.reward + mdp.discount() * max_value(&next))
}

/// Enumerated expected target at `(x, a)`.
pub fn expected_target(topology: &Topology, theta: &[f64], mdp: &Mdp, x: usize, a: usize) -> Result<f64> {
    let e = expected_max_q(mdp, x, a, |y| q_values(topology, theta, mdp.state(y)?))?;
    Ok(mdp.reward(x, a)? + mdp.discount() * e)
}

/// Per-transition semi-gradient with the sampled target.
pub fn online_direction(topology: &Topology, theta: &[f64], mdp: &Mdp, t: &Transition) -> Result<Vec<f64>> {
    mdp.check_pair(t.x, t.a)?;
    check_action(topology, t.a)?;
    let target = online_target(topology, theta, mdp, t)?;
    semi_gradient(topology, theta, mdp.state(t.x)?, t.a, target)
}

/// `∇_θ ℓ(θ, x, a)`: the semi-gradient with the expected target.
pub fn expected_direction(topology: &Topology, theta: &[f64], mdp: &Mdp, x: usize, a: usize) -> Result<Vec<f64>> {
    check_action(topology, a)?;
    let target = expected_target(topology, theta, mdp, x, a)?;
    semi_gradient(topology, theta, mdp.state(x)?, a, target)
}

/// `θ + γ v`, failing on non-finite results.
pub fn apply_step(theta: &[f64], gamma: f64, direction: &[f64], step: u64) -> Result<Vec<f64>> {
    let next: Vec<f64> = theta.iter().zip(direction).map(|(t, v)| t + gamma * v).collect();
    if let Some(i) = next.iter().position(|v| !v.is_finite()) {
        return Err(Error::Diverged {
            step,
            reason: format!("weight {i} became non-finite"),
        });
    }
    Ok(next)
}

pub fn step_online(topology: &Topology, theta: &[f64], mdp: &Mdp, t: &Transition, gamma: f64) -> Result<Vec<f64>> {
    let v = online_direction(topology, theta, mdp, t)?;
    apply_step(theta, gamma, &v, t.step)
}

pub fn step_expected(
    topology: &Topology,
    theta: &[f64],
    mdp: &Mdp,
    x: usize,
    a: usize,
    gamma: f64,
    step: u64,
) -> Result<Vec<f64>> {
    let v = expected_direction(topology, theta, mdp, x, a)?;
    apply_step(theta, gamma, &v, step)
}

/// Mean of the per-transition semi-gradients over `batch`, all at `θ`.
pub fn batch_direction(topology: &Topology, theta: &[f64], mdp: &Mdp, batch: &[Transition]) -> Result<Vec<f64>> {
    let (first, rest) = batch
        .split_first()
        .ok_or_else(|| Error::Precondition("empty replay mini-batch".into()))?;
    let mut acc = online_direction(topology, theta, mdp, first)?;
    for t in rest {
        let v = online_direction(topology, theta, mdp, t)?;
        for (a, b) in acc.iter_mut().zip(&v) {
            *a += b;
        }
    }
    let k = batch.len() as f64;
    for a in &mut acc {
        *a /= k;
    }
    Ok(acc)
}

/// One replay step at step index `step` from an already drawn mini-batch.
pub fn step_replay(
    topology: &Topology,
    theta: &[f64],
    mdp: &Mdp,
    batch: &[Transition],
    gamma: f64,
    step: u64,
) -> Result<Vec<f64>> {
    let v = batch_direction(topology, theta, mdp, batch)?;
    apply_step(theta, gamma, &v, step)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::envs::benchmarks;
    use crate::network::{ActivationKind, Initializer};

    fn setup() -> (Mdp, Topology, Vec<f64>) {
        let mdp = benchmarks::chain();
        let topo = Topology::uniform(5, &[6], ActivationKind::Tanh, 2, 3, ActivationKind::Tanh).unwrap();
        let theta = Initializer::UniformFanIn.initialize(&topo, 21).unwrap().into_inner();
        (mdp, topo, theta)
    }

    #[test]
    fn zero_step_size_leaves_theta_unchanged() {
        let (mdp, topo, theta) = setup();
        let t = Transition { step: 0, x: 2, a: 0, reward: 0.0, next: 1 };
        assert_eq!(step_online(&topo, &theta, &mdp, &t, 0.0).unwrap(), theta);
    }

    #[test]
    fn zero_residual_leaves_theta_unchanged() {
        let (mdp, topo, theta) = setup();
        let t = Transition { step: 0, x: 2, a: 0, reward: 0.0, next: 1 };
        let q = q_values(&topo, &theta, mdp.state(2).unwrap()).unwrap()[0];
        let next = q_values(&topo, &theta, mdp.state(1).unwrap()).unwrap();
        let fitted = Transition {
            reward: q - mdp.discount() * max_value(&next),
            ..t
        };
        let v = online_direction(&topo, &theta, &mdp, &fitted).unwrap();
        assert!(v.iter().all(|x| x.abs() < 1e-15));
    }

    #[test]
    fn deterministic_kernel_makes_expected_and_online_agree() {
        let (mdp, topo, theta) = setup();
        let t = Transition { step: 3, x: 1, a: 1, reward: 0.0, next: 2 };
        let online = step_online(&topo, &theta, &mdp, &t, 0.1).unwrap();
        let expected = step_expected(&topo, &theta, &mdp, 1, 1, 0.1, 3).unwrap();
        assert_eq!(online, expected);
    }

    #[test]
    fn singleton_batch_is_the_online_step() {
        let (mdp, topo, theta) = setup();
        let t = Transition { step: 3, x: 3, a: 0, reward: 0.0, next: 2 };
        assert_eq!(
            step_replay(&topo, &theta, &mdp, &[t], 0.05, 3).unwrap(),
            step_online(&topo, &theta, &mdp, &t, 0.05).unwrap()
        );
    }

    #[test]
    fn empty_batch_is_a_precondition_error() {
        let (mdp, topo, theta) = setup();
        assert!(matches!(
            step_replay(&topo, &theta, &mdp, &[], 0.1, 0),
            Err(Error::Precondition(_))
        ));
    }

    #[test]
    fn overflow_is_reported_as_divergence() {
        assert!(matches!(
            apply_step(&[1.0], f64::MAX, &[f64::MAX], 7),
            Err(Error::Diverged { step: 7, .. })
        ));
    }
}
