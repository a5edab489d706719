//! Finite-support MDPs with exactly enumerable transition kernels, plus the
//! brute-force oracles (value iteration, stationary distributions of frozen
//! kernels) the rest of the lab checks itself against.

pub mod benchmarks;
mod file;
mod kernel;
mod solve;

pub use file::MdpFile;
pub use kernel::{stationary_distributions, FrozenKernel};
pub use solve::{value_iteration, OptimalSolution};

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Tolerance on kernel row sums and other probability normalizations.
pub const PROB_TOL: f64 = 1e-12;

/// One enumerated kernel row: `(next state, probability)` pairs.
pub type KernelRow = Vec<(usize, f64)>;

/// A discounted MDP `(S, A, p, r, α)` whose states are points in `R^k`.
///
/// Immutable after construction; all invariants are checked by [`Mdp::new`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Mdp {
    states: Vec<Vec<f64>>,
    num_actions: usize,
    kernel: Vec<Vec<KernelRow>>,
    reward: Vec<Vec<f64>>,
    discount: f64,
    initial_dist: Vec<f64>,
}

impl Mdp {
    /// Builds and validates an MDP.
    ///
    /// `kernel[x][a]` and `reward[x][a]` are indexed by state then action.
    pub fn new(
        states: Vec<Vec<f64>>,
        num_actions: usize,
        kernel: Vec<Vec<KernelRow>>,
        reward: Vec<Vec<f64>>,
        discount: f64,
        initial_dist: Vec<f64>,
    ) -> Result<Self> {
        let n = states.len();
        if n == 0 {
            return Err(Error::validation("states", "at least one state is required"));
        }
        let dim = states[0].len();
        if dim == 0 {
            return Err(Error::validation("states[0]", "state vectors need dimension k >= 1"));
        }
        for (i, s) in states.iter().enumerate() {
            if s.len() != dim {
                return Err(Error::validation(
                    format!("states[{i}]"),
                    format!("dimension {} differs from states[0] dimension {dim}", s.len()),
                ));
            }
            if let Some(j) = s.iter().position(|v| !v.is_finite()) {
                return Err(Error::validation(format!("states[{i}][{j}]"), "non-finite coordinate"));
            }
        }
        if num_actions == 0 {
            return Err(Error::validation("actions", "at least one action is required"));
        }
        if !(discount > 0.0 && discount < 1.0) {
            return Err(Error::validation(
                "discount",
                format!("discount {discount} must lie strictly inside (0, 1)"),
            ));
        }
        if kernel.len() != n {
            return Err(Error::validation(
                "kernel",
                format!("expected {n} state rows, found {}", kernel.len()),
            ));
        }
        for (x, per_action) in kernel.iter().enumerate() {
            if per_action.len() != num_actions {
                return Err(Error::validation(
                    format!("kernel[{x}]"),
                    format!("expected {num_actions} action rows, found {}", per_action.len()),
                ));
            }
            for (a, row) in per_action.iter().enumerate() {
                validate_row(row, n).map_err(|msg| Error::validation(format!("kernel[{x}][{a}]"), msg))?;
            }
        }
        if reward.len() != n {
            return Err(Error::validation(
                "reward",
                format!("expected {n} state rows, found {}", reward.len()),
            ));
        }
        for (x, row) in reward.iter().enumerate() {
            if row.len() != num_actions {
                return Err(Error::validation(
                    format!("reward[{x}]"),
                    format!("expected {num_actions} entries, found {}", row.len()),
                ));
            }
            if let Some(a) = row.iter().position(|r| !r.is_finite()) {
                return Err(Error::validation(format!("reward[{x}][{a}]"), "reward must be finite"));
            }
        }
        validate_distribution(&initial_dist, n).map_err(|msg| Error::validation("initial_dist", msg))?;

        Ok(Self {
            states,
            num_actions,
            kernel,
            reward,
            discount,
            initial_dist,
        })
    }

    pub fn num_states(&self) -> usize {
        self.states.len()
    }

    pub fn num_actions(&self) -> usize {
        self.num_actions
    }

    /// Dimension `k` of the state embedding.
    pub fn state_dim(&self) -> usize {
        self.states[0].len()
    }

    pub fn states(&self) -> &[Vec<f64>] {
        &self.states
    }

    pub fn state(&self, x: usize) -> Result<&[f64]> {
        self.states
            .get(x)
            .map(Vec::as_slice)
            .ok_or_else(|| Error::Input(format!("state index {x} out of range (|S| = {})", self.num_states())))
    }

    pub fn discount(&self) -> f64 {
        self.discount
    }

    pub fn initial_dist(&self) -> &[f64] {
        &self.initial_dist
    }

    pub fn rewards(&self) -> &[Vec<f64>] {
        &self.reward
    }

    pub fn kernel_rows(&self) -> &[Vec<KernelRow>] {
        &self.kernel
    }

    pub fn reward(&self, x: usize, a: usize) -> Result<f64> {
        self.check_pair(x, a)?;
        Ok(self.reward[x][a])
    }

    /// The enumerated support of `p(·|x, a)`.
    pub fn row(&self, x: usize, a: usize) -> Result<&[(usize, f64)]> {
        self.check_pair(x, a)?;
        Ok(&self.kernel[x][a])
    }

    /// Same MDP, started deterministically in state `x`.
    pub fn with_initial_state(&self, x: usize) -> Result<Self> {
        self.state(x)?;
        let mut dist = vec![0.0; self.num_states()];
        dist[x] = 1.0;
        Ok(Self {
            initial_dist: dist,
            ..self.clone()
        })
    }

    pub(crate) fn check_pair(&self, x: usize, a: usize) -> Result<()> {
        if x >= self.num_states() {
            return Err(Error::Input(format!(
                "state index {x} out of range (|S| = {})",
                self.num_states()
            )));
        }
        if a >= self.num_actions {
            return Err(Error::Input(format!(
                "action {a} out of range (|A| = {})",
                self.num_actions
            )));
        }
        Ok(())
    }

    /// Draws an initial state from `initial_dist` by inverse CDF.
    pub fn sample_initial<R: Rng + ?Sized>(&self, rng: &mut R) -> usize {
        let u: f64 = rng.gen();
        inverse_cdf(self.initial_dist.iter().copied().enumerate(), u)
    }
}

fn validate_row(row: &[(usize, f64)], n: usize) -> std::result::Result<(), String> {
    if row.is_empty() {
        return Err("kernel row is empty".into());
    }
    let mut sum = 0.0;
    for (i, &(y, p)) in row.iter().enumerate() {
        if y >= n {
            return Err(format!("entry {i}: next-state index {y} out of range (|S| = {n})"));
        }
        if !(p.is_finite() && p >= 0.0) {
            return Err(format!("entry {i}: probability {p} is not a finite nonnegative number"));
        }
        sum += p;
    }
    if (sum - 1.0).abs() > PROB_TOL {
        return Err(format!("probabilities sum to {sum}, not 1 within {PROB_TOL:e}"));
    }
    Ok(())
}

fn validate_distribution(dist: &[f64], n: usize) -> std::result::Result<(), String> {
    if dist.len() != n {
        return Err(format!("expected {n} entries, found {}", dist.len()));
    }
    if let Some(i) = dist.iter().position(|p| !(p.is_finite() && *p >= 0.0)) {
        return Err(format!("entry {i} is not a finite nonnegative number"));
    }
    let sum: f64 = dist.iter().sum();
    if (sum - 1.0).abs() > PROB_TOL {
        return Err(format!("entries sum to {sum}, not 1"));
    }
    Ok(())
}

/// First index whose cumulative mass exceeds `u`; falls back to the last
/// positive-mass index when rounding leaves the total just below `u`.
fn inverse_cdf(weights: impl Iterator<Item = (usize, f64)>, u: f64) -> usize {
    let mut cum = 0.0;
    let mut last = None;
    for (idx, p) in weights {
        if p <= 0.0 {
            continue;
        }
        cum += p;
        last = Some(idx);
        if u < cum {
            return idx;
        }
    }
    last.expect("validated rows carry positive mass")
}

/// Draws `x' ~ p(·|x, a)` by inverse CDF over the enumerated support and
/// returns it with the deterministic reward `r(x, a)`.
pub fn sample_transition<R: Rng + ?Sized>(mdp: &Mdp, x: usize, a: usize, rng: &mut R) -> Result<(usize, f64)> {
    let row = mdp.row(x, a)?;
    let u: f64 = rng.gen();
    let next = inverse_cdf(row.iter().copied(), u);
    Ok((next, mdp.reward[x][a]))
}

/// `Σ_y p(y|x,a) · max_a' Q(y, a')`, by exact enumeration of the kernel row.
///
/// `q_values` maps a state index to its vector of action values.
pub fn expected_max_q<F>(mdp: &Mdp, x: usize, a: usize, mut q_values: F) -> Result<f64>
where
    F: FnMut(usize) -> Result<Vec<f64>>,
{
    let row = mdp.row(x, a)?;
    let mut total = 0.0;
    for &(y, p) in row {
        let q = q_values(y)?;
        total += p * max_value(&q);
    }
    Ok(total)
}

/// Largest entry; `-inf` for an empty slice.
pub fn max_value(values: &[f64]) -> f64 {
    values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
}

/// Index of the largest entry, ties broken towards the lowest index.
/// The flag reports whether another index attains the same maximum.
pub fn argmax_lowest(values: &[f64]) -> (usize, bool) {
    let mut best = 0;
    let mut tie = false;
    for (i, &v) in values.iter().enumerate().skip(1) {
        if v > values[best] {
            best = i;
            tie = false;
        } else if v == values[best] {
            tie = true;
        }
    }
    (best, tie)
}
