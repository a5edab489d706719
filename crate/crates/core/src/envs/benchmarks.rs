//! The shipped benchmark MDPs.
//!
//! All of them embed state `i` as the `i`-th unit vector, so a DQN without
//! biases can still address every state separately.
//!
//! * [`chain`]: five states on a line. `forward` (action 1) walks right
//!   deterministically and cashes in a reward of 1 when it wraps from the
//!   last state back to the first. `back` (action 0) is a noisy step left.
//!   The optimal policy is `forward` everywhere and its chain is a
//!   deterministic 5-cycle, so once exploration has decayed the
//!   sampled-target noise only enters through exploratory `back` moves.
//! * [`reducible`]: two disjoint copies of a three-state version of the
//!   chain. No action crosses between them, so every policy has at least two
//!   recurrent classes.
//! * [`trap`]: a four-state ring where action 1 is optimal on states 2 and 3.
//!   Combined with an initializer that makes `Q(·, 1)` strongly negative
//!   (see the trap presets), action 1 is never greedy and an
//!   exploitation-only learner never visits those pairs.
//! * [`single_state`]: one state, one action, a self loop; `Q* = r / (1 − α)`.

use super::{KernelRow, Mdp};

/// Discount of [`chain`] and [`reducible`].
pub const CHAIN_DISCOUNT: f64 = 0.8;
/// Discount of [`trap`].
pub const TRAP_DISCOUNT: f64 = 0.6;
/// States of [`trap`] on which action 1 is optimal.
pub const TRAP_REGION: [usize; 2] = [2, 3];

pub const BACK: usize = 0;
pub const FORWARD: usize = 1;

fn one_hot(n: usize) -> Vec<Vec<f64>> {
    (0..n)
        .map(|i| (0..n).map(|j| if i == j { 1.0 } else { 0.0 }).collect())
        .collect()
}

fn uniform(n: usize) -> Vec<f64> {
    vec![1.0 / n as f64; n]
}

/// Kernel rows and rewards of one noisy chain segment occupying the states
/// `offset..offset + len`, paying `payout` on the wrap-around.
fn chain_segment(offset: usize, len: usize, payout: f64) -> (Vec<Vec<KernelRow>>, Vec<Vec<f64>>) {
    let mut kernel = Vec::with_capacity(len);
    let mut reward = Vec::with_capacity(len);
    for i in 0..len {
        let s = offset + i;
        let back = if i == 0 {
            vec![(s, 1.0)]
        } else {
            vec![(s - 1, 0.5), (s, 0.5)]
        };
        let (forward, r) = if i + 1 == len {
            (vec![(offset, 1.0)], payout)
        } else {
            (vec![(s + 1, 1.0)], 0.0)
        };
        kernel.push(vec![back, forward]);
        reward.push(vec![0.0, r]);
    }
    (kernel, reward)
}

/// The 5-state, 2-action chain.
pub fn chain() -> Mdp {
    let (kernel, reward) = chain_segment(0, 5, 1.0);
    Mdp::new(one_hot(5), 2, kernel, reward, CHAIN_DISCOUNT, uniform(5)).expect("chain benchmark is valid")
}

/// Two closed three-state chains: states 0–2 pay 1 per lap, states 3–5 pay 0.5.
pub fn reducible() -> Mdp {
    let (mut kernel, mut reward) = chain_segment(0, 3, 1.0);
    let (k2, r2) = chain_segment(3, 3, 0.5);
    kernel.extend(k2);
    reward.extend(r2);
    Mdp::new(one_hot(6), 2, kernel, reward, CHAIN_DISCOUNT, uniform(6)).expect("reducible benchmark is valid")
}

/// The undertraining trap. Both actions advance `s → s + 1 mod 4`;
/// action 0 pays 1 everywhere, action 1 pays 1.5 on [`TRAP_REGION`] and 0
/// elsewhere.
pub fn trap() -> Mdp {
    let n = 4;
    let kernel = (0..n)
        .map(|s| vec![vec![((s + 1) % n, 1.0)], vec![((s + 1) % n, 1.0)]])
        .collect();
    let reward = (0..n)
        .map(|s| vec![1.0, if TRAP_REGION.contains(&s) { 1.5 } else { 0.0 }])
        .collect();
    Mdp::new(one_hot(n), 2, kernel, reward, TRAP_DISCOUNT, uniform(n)).expect("trap benchmark is valid")
}

/// One state at the origin of `R^1`, one action, reward `r`, discount `alpha`.
pub fn single_state(r: f64, alpha: f64) -> Mdp {
    Mdp::new(vec![vec![0.0]], 1, vec![vec![vec![(0, 1.0)]]], vec![vec![r]], alpha, vec![1.0])
        .expect("single-state MDP is valid")
}
