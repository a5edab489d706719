use serde::{Deserialize, Serialize};

use crate::envs::{argmax_lowest, Mdp, OptimalSolution};
use crate::error::{Error, Result};
use crate::measure::OccupationMeasure;
use crate::network::{q_values, Topology};

/// Region `S(a) = {x : π*(x) = a}` and how the tail measure covers it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegionReport {
    pub action: usize,
    pub states: Vec<usize>,
    /// `μ̂(S(a) × A)`.
    pub region_mass: f64,
    /// `μ̂(S(a) × {a})`.
    pub pair_mass: f64,
    /// Mean of `|Q(x, a; θ) − Q*(x, a)|` over `x ∈ S(a)`; `None` for an empty region.
    pub mean_q_error: Option<f64>,
    /// The region is visited but its optimal action never is.
    pub trapped: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UndertrainingReport {
    pub regions: Vec<RegionReport>,
    pub greedy: Vec<usize>,
    pub optimal: Vec<usize>,
    pub mismatch: Vec<bool>,
    /// Tail mass per state, for weighing mismatches.
    pub state_mass: Vec<f64>,
}

impl UndertrainingReport {
    pub fn trapped_regions(&self) -> Vec<&RegionReport> {
        self.regions.iter().filter(|r| r.trapped).collect()
    }

    /// Largest tail mass of any state whose greedy action differs from `π*`.
    pub fn max_mismatch_mass(&self) -> f64 {
        self.mismatch
            .iter()
            .zip(&self.state_mass)
            .filter(|(m, _)| **m)
            .map(|(_, w)| *w)
            .fold(0.0, f64::max)
    }

    /// Largest mean Q-error over regions whose optimal pair carries mass.
    pub fn covered_q_error(&self) -> Option<f64> {
        self.regions
            .iter()
            .filter(|r| r.pair_mass > 0.0)
            .filter_map(|r| r.mean_q_error)
            .reduce(f64::max)
    }
}

pub fn undertraining_scan(
    topology: &Topology,
    theta: &[f64],
    tail: &OccupationMeasure,
    mdp: &Mdp,
    oracle: &OptimalSolution,
) -> Result<UndertrainingReport> {
    let (s, a_count) = (mdp.num_states(), mdp.num_actions());
    if (tail.num_states(), tail.num_actions()) != (s, a_count) {
        return Err(Error::Input("tail measure and MDP have different state-action sets".into()));
    }
    if oracle.pi_star.len() != s || oracle.q_star.len() != s {
        return Err(Error::Input("oracle solution does not match the MDP".into()));
    }
    let q: Vec<Vec<f64>> = (0..s)
        .map(|x| q_values(topology, theta, mdp.state(x)?))
        .collect::<Result<_>>()?;
    let greedy: Vec<usize> = q.iter().map(|row| argmax_lowest(row).0).collect();
    let state_mass = tail.marginal().mass;
    let regions = (0..a_count)
        .map(|a| {
            let states: Vec<usize> = (0..s).filter(|&x| oracle.pi_star[x] == a).collect();
            let region_mass = states.iter().map(|&x| state_mass[x]).fold(0.0, |s, w| s + w);
            let pair_mass = states.iter().map(|&x| tail.weight(x, a)).fold(0.0, |s, w| s + w);
            let mean_q_error = (!states.is_empty()).then(|| {
                states.iter().map(|&x| (q[x][a] - oracle.q_star[x][a]).abs()).sum::<f64>() / states.len() as f64
            });
            RegionReport {
                action: a,
                trapped: region_mass > 0.0 && pair_mass == 0.0,
                states,
                region_mass,
                pair_mass,
                mean_q_error,
            }
        })
        .collect();
    Ok(UndertrainingReport {
        regions,
        mismatch: greedy.iter().zip(&oracle.pi_star).map(|(g, p)| g != p).collect(),
        greedy,
        optimal: oracle.pi_star.clone(),
        state_mass,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::envs::{benchmarks, value_iteration};
    use crate::network::{ActivationKind, Initializer};
    use crate::trainer::presets::{TRAP_OUTPUT_WEIGHT, TRAP_SUBLAYER_WEIGHT};

    #[test]
    fn biased_trap_network_is_flagged_on_the_trap_region() {
        let mdp = benchmarks::trap();
        let oracle = value_iteration(&mdp, 1e-12, 10_000).unwrap();
        let t = Topology::uniform(4, &[8], ActivationKind::Sigmoid, 2, 4, ActivationKind::Tanh).unwrap();
        let theta = Initializer::Biased {
            action: 1,
            output_weight: TRAP_OUTPUT_WEIGHT,
            sublayer_weight: Some(TRAP_SUBLAYER_WEIGHT),
        }
        .initialize(&t, 3)
        .unwrap()
        .into_inner();
        // greedy rollout under ε = 0 visits every state with action 0
        let atoms: Vec<_> = (0..4).map(|x| (x, 0, 0.25)).collect();
        let tail = OccupationMeasure::from_atoms(4, 2, &atoms).unwrap();
        let r = undertraining_scan(&t, &theta, &tail, &mdp, &oracle).unwrap();
        assert_eq!(r.greedy, vec![0; 4]);
        assert_eq!(r.mismatch, vec![false, false, true, true]);
        let trapped = r.trapped_regions();
        assert_eq!(trapped.len(), 1);
        assert_eq!(trapped[0].states, vec![2, 3]);
        assert_eq!(trapped[0].pair_mass, 0.0);
        assert_eq!(trapped[0].region_mass, 0.5);
        assert_eq!(r.max_mismatch_mass(), 0.25);
    }

    #[test]
    fn regions_partition_the_states() {
        let mdp = benchmarks::chain();
        let oracle = value_iteration(&mdp, 1e-12, 10_000).unwrap();
        let t = Topology::uniform(5, &[4], ActivationKind::Tanh, 2, 2, ActivationKind::Tanh).unwrap();
        let theta = vec![0.0; t.num_weights()];
        let tail = OccupationMeasure::dirac(5, 2, 0, 1).unwrap();
        let r = undertraining_scan(&t, &theta, &tail, &mdp, &oracle).unwrap();
        let mut all: Vec<usize> = r.regions.iter().flat_map(|g| g.states.clone()).collect();
        all.sort();
        assert_eq!(all, vec![0, 1, 2, 3, 4]);
        assert!(r.regions[0].mean_q_error.is_none());
    }
}
