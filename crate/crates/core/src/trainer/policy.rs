use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::envs::argmax_lowest;
use crate::error::{Error, Result};
use crate::network::{q_values, Topology};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PolicyMode {
    Greedy,
    EpsilonGreedy,
}

/// Behaviour policy. In `epsilon_greedy` mode the exploration rate is
/// `ε(n) = max(floor, epsilon · decay^n)`; `decay = 1` keeps it constant.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PolicyConfig {
    pub mode: PolicyMode,
    #[serde(default)]
    pub epsilon: f64,
    #[serde(default = "one")]
    pub decay: f64,
    #[serde(default)]
    pub floor: f64,
}

fn one() -> f64 {
    1.0
}

impl PolicyConfig {
    pub fn greedy() -> Self {
        Self {
            mode: PolicyMode::Greedy,
            epsilon: 0.0,
            decay: 1.0,
            floor: 0.0,
        }
    }

    pub fn constant(epsilon: f64) -> Self {
        Self {
            mode: PolicyMode::EpsilonGreedy,
            epsilon,
            decay: 1.0,
            floor: 0.0,
        }
    }

    pub fn decaying(epsilon: f64, decay: f64, floor: f64) -> Self {
        Self {
            mode: PolicyMode::EpsilonGreedy,
            epsilon,
            decay,
            floor,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let unit = |v: f64| (0.0..=1.0).contains(&v);
        if !unit(self.epsilon) {
            return Err(Error::validation("policy.epsilon", format!("must lie in [0, 1], got {}", self.epsilon)));
        }
        if !unit(self.floor) {
            return Err(Error::validation("policy.floor", format!("must lie in [0, 1], got {}", self.floor)));
        }
        if !(self.decay > 0.0 && self.decay <= 1.0) {
            return Err(Error::validation("policy.decay", format!("must lie in (0, 1], got {}", self.decay)));
        }
        Ok(())
    }

    pub fn epsilon_at(&self, n: u64) -> f64 {
        match self.mode {
            PolicyMode::Greedy => 0.0,
            PolicyMode::EpsilonGreedy => {
                let decayed = if self.decay == 1.0 {
                    self.epsilon
                } else {
                    self.epsilon * self.decay.powf(n as f64)
                };
                decayed.max(self.floor)
            }
        }
    }
}

/// One behaviour-policy decision.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Selection {
    pub action: usize,
    pub explored: bool,
    /// The greedy argmax was tied and resolved to the lowest index.
    pub tie: bool,
}

/// ε-greedy choice from precomputed action values. A uniform draw is
/// consumed only when `epsilon > 0`, and a second one only when exploring.
pub fn choose<R: Rng + ?Sized>(q: &[f64], epsilon: f64, rng: &mut R) -> Selection {
    let (greedy, tie) = argmax_lowest(q);
    if epsilon > 0.0 && rng.gen::<f64>() < epsilon {
        return Selection {
            action: rng.gen_range(0..q.len()),
            explored: true,
            tie,
        };
    }
    Selection {
        action: greedy,
        explored: false,
        tie,
    }
}

/// `π_θ(x, ·)` for the given exploration rate.
pub fn action_probabilities(q: &[f64], epsilon: f64) -> Vec<f64> {
    let k = q.len() as f64;
    let mut probs = vec![epsilon / k; q.len()];
    probs[argmax_lowest(q).0] += 1.0 - epsilon;
    probs
}

/// Behaviour-policy action at state vector `x` for step `n`.
pub fn select_action<R: Rng + ?Sized>(
    topology: &Topology,
    theta: &[f64],
    x: &[f64],
    policy: &PolicyConfig,
    n: u64,
    rng: &mut R,
) -> Result<Selection> {
    let q = q_values(topology, theta, x)?;
    Ok(choose(&q, policy.epsilon_at(n), rng))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn greedy_ties_resolve_to_action_zero() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let s = choose(&[1.0, 1.0], 0.0, &mut rng);
        assert_eq!(s, Selection { action: 0, explored: false, tie: true });
    }

    #[test]
    fn zero_epsilon_consumes_no_randomness() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let before = rng.get_word_pos();
        choose(&[0.0, 2.0, 1.0], 0.0, &mut rng);
        assert_eq!(rng.get_word_pos(), before);
    }

    #[test]
    fn epsilon_schedule_decays_to_floor() {
        let p = PolicyConfig::decaying(1.0, 0.5, 0.1);
        assert_eq!(p.epsilon_at(0), 1.0);
        assert_eq!(p.epsilon_at(1), 0.5);
        assert_eq!(p.epsilon_at(10), 0.1);
        assert_eq!(PolicyConfig::greedy().epsilon_at(3), 0.0);
    }

    #[test]
    fn validation_catches_bad_epsilon() {
        assert!(PolicyConfig::constant(1.5).validate().is_err());
        assert!(PolicyConfig::decaying(0.5, 0.0, 0.0).validate().is_err());
        assert!(PolicyConfig::decaying(0.5, 0.9, -0.1).validate().is_err());
    }

    #[test]
    fn probabilities_put_the_remainder_on_the_greedy_action() {
        let p = action_probabilities(&[0.0, 3.0, 1.0, 3.0], 0.2);
        let expected = [0.05, 0.85, 0.05, 0.05];
        for (a, b) in p.iter().zip(expected) {
            assert!((a - b).abs() < 1e-15);
        }
    }
}
