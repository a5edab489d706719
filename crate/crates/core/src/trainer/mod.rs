//! The learning loop: step-size schedules, ε-greedy behaviour, the online,
//! expected-target and replay semi-gradient updates, the per-step record and
//! deterministic regeneration of `θ_n` from it.

mod policy;
pub mod presets;
mod record;
mod regen;
mod replay;
mod run;
mod schedule;
mod update;

pub use policy::{action_probabilities, choose, select_action, PolicyConfig, PolicyMode, Selection};
pub use record::{RunMode, StepRecord, TrainRecord, RECORD_HEADER};
pub use regen::ThetaReplay;
pub use replay::{ReplayBuffer, ReplayConfig, Transition};
pub use run::{train, NetworkConfig, RunConfig, RunStatus, TrainConfig, TrainOutput, Trainer};
pub use schedule::StepSchedule;
pub use update::{
    apply_step, batch_direction, expected_direction, expected_target, online_direction, online_target,
    semi_gradient, step_expected, step_online, step_replay, UpdateMode,
};
