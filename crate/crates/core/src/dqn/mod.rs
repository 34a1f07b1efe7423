//! Deep Q-network controller built on a hand-written MLP.

pub mod adam;
pub mod agent;
pub mod mlp;
pub mod replay;

pub use adam::Adam;
pub use agent::{
    argmax, decay_epsilon, select_action, sync_target, td_loss_and_grad, td_targets, train_step, DqnAgent,
    DqnConfig, EpsilonSchedule,
};
pub use mlp::{param_count, Mlp};
pub use replay::{ReplayBuffer, Transition};
