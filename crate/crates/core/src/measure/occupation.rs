use serde::{Deserialize, Serialize};

use crate::envs::{FrozenKernel, PROB_TOL};
use crate::error::{Error, Result};

/// Probability measure on the finite set `S × A`, stored densely with the
/// pair `(x, a)` at index `x · |A| + a`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OccupationMeasure {
    num_states: usize,
    num_actions: usize,
    weights: Vec<f64>,
}

fn check_normalized(weights: &[f64], what: &str) -> Result<()> {
    if let Some(i) = weights.iter().position(|w| !(w.is_finite() && *w >= 0.0)) {
        return Err(Error::Numerical(format!("{what}: weight {i} is negative or non-finite")));
    }
    let total: f64 = weights.iter().sum();
    if (total - 1.0).abs() > PROB_TOL {
        return Err(Error::Numerical(format!("{what}: weights sum to {total}, not 1")));
    }
    Ok(())
}

impl OccupationMeasure {
    /// Measure from `(state, action, weight)` atoms; repeated pairs add up.
    pub fn from_atoms(num_states: usize, num_actions: usize, atoms: &[(usize, usize, f64)]) -> Result<Self> {
        let mut weights = vec![0.0; num_states * num_actions];
        for &(x, a, w) in atoms {
            if x >= num_states || a >= num_actions {
                return Err(Error::Input(format!(
                    "atom ({x}, {a}) outside the {num_states} × {num_actions} state-action set"
                )));
            }
            weights[x * num_actions + a] += w;
        }
        Self::from_weights(num_states, num_actions, weights)
    }

    pub fn from_weights(num_states: usize, num_actions: usize, weights: Vec<f64>) -> Result<Self> {
        if weights.len() != num_states * num_actions {
            return Err(Error::Input(format!(
                "{} weights for a {num_states} × {num_actions} state-action set",
                weights.len()
            )));
        }
        check_normalized(&weights, "occupation measure")?;
        Ok(Self {
            num_states,
            num_actions,
            weights,
        })
    }

    pub fn dirac(num_states: usize, num_actions: usize, x: usize, a: usize) -> Result<Self> {
        Self::from_atoms(num_states, num_actions, &[(x, a, 1.0)])
    }

    pub fn num_states(&self) -> usize {
        self.num_states
    }

    pub fn num_actions(&self) -> usize {
        self.num_actions
    }

    pub fn weight(&self, x: usize, a: usize) -> f64 {
        self.weights[x * self.num_actions + a]
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// Atoms with positive weight, in `(state, action)` order.
    pub fn atoms(&self) -> Vec<(usize, usize, f64)> {
        self.weights
            .iter()
            .enumerate()
            .filter(|(_, &w)| w > 0.0)
            .map(|(i, &w)| (i / self.num_actions, i % self.num_actions, w))
            .collect()
    }

    pub fn support_size(&self) -> usize {
        self.weights.iter().filter(|&&w| w > 0.0).count()
    }

    /// Shannon entropy in nats.
    pub fn entropy(&self) -> f64 {
        -self.weights.iter().filter(|&&w| w > 0.0).map(|w| w * w.ln()).sum::<f64>()
    }

    /// State marginal `μ(dx × A)`: row sums over actions.
    pub fn marginal(&self) -> MarginalHistogram {
        MarginalHistogram {
            mass: self.weights.chunks(self.num_actions).map(|row| row.iter().sum()).collect(),
        }
    }

    /// `state_index,action,weight` rows for every pair.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("state_index,action,weight\n");
        for (i, w) in self.weights.iter().enumerate() {
            s.push_str(&format!("{},{},{}\n", i / self.num_actions, i % self.num_actions, w));
        }
        s
    }
}

/// Total-variation distance `½ Σ |m1 − m2|` over `S × A`.
pub fn measure_distance(m1: &OccupationMeasure, m2: &OccupationMeasure) -> Result<f64> {
    if (m1.num_states, m1.num_actions) != (m2.num_states, m2.num_actions) {
        return Err(Error::Input(format!(
            "measures live on different spaces ({} × {} vs {} × {})",
            m1.num_states, m1.num_actions, m2.num_states, m2.num_actions
        )));
    }
    Ok(tv(&m1.weights, &m2.weights))
}

pub(crate) fn tv(a: &[f64], b: &[f64]) -> f64 {
    0.5 * a.iter().zip(b).map(|(x, y)| (x - y).abs()).sum::<f64>()
}

/// Probability vector over states.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MarginalHistogram {
    pub mass: Vec<f64>,
}

impl MarginalHistogram {
    pub fn new(mass: Vec<f64>) -> Result<Self> {
        check_normalized(&mass, "marginal")?;
        Ok(Self { mass })
    }

    pub fn len(&self) -> usize {
        self.mass.len()
    }

    pub fn is_empty(&self) -> bool {
        self.mass.is_empty()
    }

    /// `state_index,mass` rows.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("state_index,mass\n");
        for (x, m) in self.mass.iter().enumerate() {
            s.push_str(&format!("{x},{m}\n"));
        }
        s
    }

    pub fn distance(&self, other: &MarginalHistogram) -> Result<f64> {
        if self.len() != other.len() {
            return Err(Error::Input(format!("marginals over {} and {} states", self.len(), other.len())));
        }
        Ok(tv(&self.mass, &other.mass))
    }
}

/// `m ↦ mP`.
pub fn pushforward(marginal: &MarginalHistogram, fk: &FrozenKernel) -> Result<MarginalHistogram> {
    Ok(MarginalHistogram {
        mass: fk.apply(&marginal.mass)?,
    })
}
