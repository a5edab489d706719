use nalgebra::{DMatrix, DVector};
use petgraph::algo::tarjan_scc;
use petgraph::graph::DiGraph;
use serde::{Deserialize, Serialize};

use super::{Mdp, PROB_TOL};
use crate::error::{Error, Result};

/// Row-stochastic `|S| × |S|` matrix `p̃(y|x) = Σ_a π(x, a) p(y|x, a)` for a
/// fixed stochastic policy.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrozenKernel {
    matrix: Vec<Vec<f64>>,
}

impl FrozenKernel {
    pub fn new(matrix: Vec<Vec<f64>>) -> Result<Self> {
        let n = matrix.len();
        if n == 0 {
            return Err(Error::validation("kernel", "empty matrix"));
        }
        for (x, row) in matrix.iter().enumerate() {
            if row.len() != n {
                return Err(Error::validation(
                    format!("kernel[{x}]"),
                    format!("row has {} entries, expected {n}", row.len()),
                ));
            }
            if row.iter().any(|p| !(p.is_finite() && *p >= 0.0)) {
                return Err(Error::validation(format!("kernel[{x}]"), "negative or non-finite entry"));
            }
            let sum: f64 = row.iter().sum();
            if (sum - 1.0).abs() > PROB_TOL {
                return Err(Error::validation(format!("kernel[{x}]"), format!("row sums to {sum}")));
            }
        }
        Ok(Self { matrix })
    }

    /// Composes the MDP kernel with `policy[x][a] = π(x, a)`.
    pub fn from_policy(mdp: &Mdp, policy: &[Vec<f64>]) -> Result<Self> {
        if policy.len() != mdp.num_states() {
            return Err(Error::Input(format!(
                "policy covers {} states, MDP has {}",
                policy.len(),
                mdp.num_states()
            )));
        }
        let n = mdp.num_states();
        let mut matrix = vec![vec![0.0; n]; n];
        for (x, probs) in policy.iter().enumerate() {
            if probs.len() != mdp.num_actions() {
                return Err(Error::Input(format!("policy row {x} has {} actions", probs.len())));
            }
            for (a, &w) in probs.iter().enumerate() {
                if w == 0.0 {
                    continue;
                }
                for &(y, p) in mdp.row(x, a)? {
                    matrix[x][y] += w * p;
                }
            }
        }
        Self::new(matrix)
    }

    /// Kernel of the deterministic policy `x ↦ actions[x]`.
    pub fn from_actions(mdp: &Mdp, actions: &[usize]) -> Result<Self> {
        let policy: Vec<Vec<f64>> = actions
            .iter()
            .map(|&a| {
                let mut row = vec![0.0; mdp.num_actions()];
                if a < row.len() {
                    row[a] = 1.0;
                }
                row
            })
            .collect();
        if let Some(&a) = actions.iter().find(|&&a| a >= mdp.num_actions()) {
            return Err(Error::Input(format!("action {a} out of range")));
        }
        Self::from_policy(mdp, &policy)
    }

    pub fn size(&self) -> usize {
        self.matrix.len()
    }

    pub fn matrix(&self) -> &[Vec<f64>] {
        &self.matrix
    }

    pub fn get(&self, x: usize, y: usize) -> f64 {
        self.matrix[x][y]
    }

    /// `π ↦ πP`.
    pub fn apply(&self, dist: &[f64]) -> Result<Vec<f64>> {
        if dist.len() != self.size() {
            return Err(Error::Input(format!(
                "distribution has {} entries, kernel has {} states",
                dist.len(),
                self.size()
            )));
        }
        let mut out = vec![0.0; self.size()];
        for (x, &m) in dist.iter().enumerate() {
            if m == 0.0 {
                continue;
            }
            for (y, &p) in self.matrix[x].iter().enumerate() {
                out[y] += m * p;
            }
        }
        Ok(out)
    }
}

/// One stationary distribution per recurrent class of `fk`.
///
/// Recurrent classes are the strongly connected components of the support
/// digraph with no edge leaving them. On each class `πP = π, Σπ = 1` is
/// solved directly; classes are returned ordered by their smallest state.
pub fn stationary_distributions(fk: &FrozenKernel, tol: f64) -> Result<Vec<Vec<f64>>> {
    let n = fk.size();
    let mut graph = DiGraph::<usize, ()>::with_capacity(n, n * n);
    let nodes: Vec<_> = (0..n).map(|x| graph.add_node(x)).collect();
    for x in 0..n {
        for y in 0..n {
            if fk.get(x, y) > 0.0 {
                graph.add_edge(nodes[x], nodes[y], ());
            }
        }
    }
    let mut component = vec![usize::MAX; n];
    let sccs = tarjan_scc(&graph);
    for (c, members) in sccs.iter().enumerate() {
        for node in members {
            component[graph[*node]] = c;
        }
    }
    let mut classes: Vec<Vec<usize>> = sccs
        .iter()
        .enumerate()
        .filter(|(c, members)| {
            members.iter().all(|node| {
                let x = graph[*node];
                (0..n).all(|y| fk.get(x, y) == 0.0 || component[y] == *c)
            })
        })
        .map(|(_, members)| {
            let mut states: Vec<usize> = members.iter().map(|node| graph[*node]).collect();
            states.sort_unstable();
            states
        })
        .collect();
    classes.sort_by_key(|states| states[0]);

    classes
        .iter()
        .map(|states| {
            let pi = solve_class(fk, states)?;
            let pushed = fk.apply(&pi)?;
            let residual: f64 = pushed.iter().zip(&pi).map(|(a, b)| (a - b).abs()).sum();
            if residual > tol {
                return Err(Error::Numerical(format!(
                    "stationary solve on class {states:?} left residual {residual:e} > {tol:e}"
                )));
            }
            Ok(pi)
        })
        .collect()
}

fn solve_class(fk: &FrozenKernel, states: &[usize]) -> Result<Vec<f64>> {
    let m = states.len();
    // (P_C^T - I) π = 0 with the last equation replaced by Σπ = 1.
    let mut a = DMatrix::<f64>::zeros(m, m);
    for (i, &yi) in states.iter().enumerate() {
        for (j, &xj) in states.iter().enumerate() {
            a[(i, j)] = fk.get(xj, yi) - if i == j { 1.0 } else { 0.0 };
        }
    }
    for j in 0..m {
        a[(m - 1, j)] = 1.0;
    }
    let mut b = DVector::<f64>::zeros(m);
    b[m - 1] = 1.0;
    let sol = a
        .lu()
        .solve(&b)
        .ok_or_else(|| Error::Numerical(format!("singular stationary system on class {states:?}")))?;

    let mut pi = vec![0.0; fk.size()];
    for (i, &x) in states.iter().enumerate() {
        // round-off can leave tiny negative masses
        pi[x] = sol[i].max(0.0);
    }
    let total: f64 = pi.iter().sum();
    for v in &mut pi {
        *v /= total;
    }
    Ok(pi)
}
