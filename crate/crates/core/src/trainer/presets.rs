//! Run configurations used by the shipped benchmarks. The TOML files in
//! `configs/` mirror these.

use super::{NetworkConfig, PolicyConfig, ReplayConfig, RunConfig, StepSchedule, TrainConfig, UpdateMode};
use crate::network::{ActivationKind, Initializer};

/// `γ(n) = 0.5 (n + 10)^(−0.6)`.
pub fn benchmark_schedule() -> StepSchedule {
    StepSchedule {
        c: 0.5,
        n0: 10.0,
        p: 0.6,
    }
}

/// ε from 1 decaying by 0.999 per step to 0.01 (reached near step 4600).
pub fn benchmark_policy() -> PolicyConfig {
    PolicyConfig::decaying(1.0, 0.999, 0.01)
}

/// Chain benchmark: two tanh hidden layers of 8, tanh sublayers of 4,
/// 2·10⁵ steps.
pub fn chain_config() -> TrainConfig {
    TrainConfig {
        network: NetworkConfig {
            hidden: vec![8, 8],
            activation: ActivationKind::Tanh,
            output_activation: ActivationKind::Tanh,
            output_width: 4,
            initializer: Initializer::UniformFanIn,
            seed: 1,
        },
        schedule: benchmark_schedule(),
        policy: benchmark_policy(),
        replay: ReplayConfig::disabled(),
        run: RunConfig {
            steps: 200_000,
            checkpoint_every: 1000,
            divergence_guard: 1e6,
            seed: 7,
            update: UpdateMode::Online,
        },
    }
}

/// Output weight given to action 1 by the trap initializer.
pub const TRAP_OUTPUT_WEIGHT: f64 = -1.0;
/// Sublayer weight given to action 1 by the trap initializer.
///
/// The sigmoid hidden units of the one-hot trap lie in `(σ(−½), σ(½))`, so
/// each action-1 pre-activation is at least `8 σ(−½) > 3` and every tanh
/// output unit exceeds `0.995`. Hence `Q(x, 1) < −7.9` while
/// `Q(x, 0) ≥ −4 / √8`: action 1 starts non-greedy everywhere. The output
/// weights see unsaturated features, so sampled action-1 updates can undo
/// the bias.
pub const TRAP_SUBLAYER_WEIGHT: f64 = 0.25;

/// Trap benchmark, exploitation only, biased against action 1.
pub fn trap_config() -> TrainConfig {
    TrainConfig {
        network: NetworkConfig {
            hidden: vec![8],
            activation: ActivationKind::Sigmoid,
            output_activation: ActivationKind::Tanh,
            output_width: 4,
            initializer: Initializer::Biased {
                action: 1,
                output_weight: TRAP_OUTPUT_WEIGHT,
                sublayer_weight: Some(TRAP_SUBLAYER_WEIGHT),
            },
            seed: 3,
        },
        schedule: benchmark_schedule(),
        policy: PolicyConfig::greedy(),
        replay: ReplayConfig::disabled(),
        run: RunConfig {
            steps: 100_000,
            checkpoint_every: 1000,
            divergence_guard: 1e6,
            seed: 11,
            update: UpdateMode::Online,
        },
    }
}

/// [`trap_config`] with ε decaying from 1 to a floor of 0.05, run for
/// 3 · 10⁵ steps so the explored action-1 values have time to overtake.
pub fn trap_exploring_config() -> TrainConfig {
    let mut cfg = trap_config();
    cfg.policy = PolicyConfig::decaying(1.0, 0.999, 0.05);
    cfg.run.steps = 300_000;
    cfg
}

/// Reducible benchmark: the chain network and schedule, 10⁵ steps.
pub fn reducible_config() -> TrainConfig {
    let mut cfg = chain_config();
    cfg.run.steps = 100_000;
    cfg
}
