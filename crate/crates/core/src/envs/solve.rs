use serde::{Deserialize, Serialize};

use super::{argmax_lowest, max_value, Mdp};
use crate::error::{Error, Result};

/// Output of [`value_iteration`]: `Q*`, `V*`, a greedy optimal policy and
/// the Bellman residual `‖TQ − Q‖∞` of the returned `Q*`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptimalSolution {
    pub q_star: Vec<Vec<f64>>,
    pub v_star: Vec<f64>,
    pub pi_star: Vec<usize>,
    pub residual: f64,
    pub iterations: usize,
}

/// One application of the Bellman optimality operator.
pub(crate) fn bellman_apply(mdp: &Mdp, q: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let v: Vec<f64> = q.iter().map(|row| max_value(row)).collect();
    (0..mdp.num_states())
        .map(|x| {
            (0..mdp.num_actions())
                .map(|a| {
                    let next: f64 = mdp.kernel[x][a].iter().map(|&(y, p)| p * v[y]).sum();
                    mdp.reward[x][a] + mdp.discount * next
                })
                .collect()
        })
        .collect()
}

fn sup_distance(a: &[Vec<f64>], b: &[Vec<f64>]) -> f64 {
    a.iter()
        .zip(b)
        .flat_map(|(ra, rb)| ra.iter().zip(rb).map(|(x, y)| (x - y).abs()))
        .fold(0.0, f64::max)
}

/// Iterates `Q ← r + α P max_a Q` from `Q = 0` until successive iterates are
/// closer than `tol (1 − α) / α` in sup norm, which bounds the Bellman
/// residual of the result by `tol`.
pub fn value_iteration(mdp: &Mdp, tol: f64, max_iters: usize) -> Result<OptimalSolution> {
    if !(tol > 0.0 && tol.is_finite()) {
        return Err(Error::Input(format!("tolerance must be positive, got {tol}")));
    }
    let alpha = mdp.discount();
    let stop = tol * (1.0 - alpha) / alpha;
    let mut q = vec![vec![0.0; mdp.num_actions()]; mdp.num_states()];
    let mut last_change = f64::INFINITY;
    for it in 1..=max_iters {
        let next = bellman_apply(mdp, &q);
        last_change = sup_distance(&next, &q);
        q = next;
        if last_change < stop {
            let residual = sup_distance(&bellman_apply(mdp, &q), &q);
            let v_star = q.iter().map(|row| max_value(row)).collect();
            let pi_star = q.iter().map(|row| argmax_lowest(row).0).collect();
            return Ok(OptimalSolution {
                q_star: q,
                v_star,
                pi_star,
                residual,
                iterations: it,
            });
        }
    }
    Err(Error::NoConvergence {
        iterations: max_iters,
        last_change,
    })
}
