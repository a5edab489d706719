//! The bias-free DQN: topology and weight layout, forward evaluation,
//! reverse-mode `∇_θ Q`, the output-magnitude bound check and checkpoints.

mod activation;
mod bound;
mod checkpoint;
mod forward;
mod topology;

pub use activation::ActivationKind;
pub use bound::{ball_point, local_lipschitz, q_bound_check, BoundReport, BoundViolation};
pub use checkpoint::{Checkpoint, StreamState};
pub use forward::{backward, forward, q_and_gradient, q_gradient, q_values, ForwardTrace, LayerTrace};
pub(crate) use forward::check_action;
pub use topology::{l2_norm, Initializer, LayerSpec, Topology, WeightVector};
