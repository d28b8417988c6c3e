//! Actor-critic agents that build cross-domain multicast trees: one
//! inter-domain agent choosing links between domains and one intra-domain
//! agent per domain choosing nodes inside it.

pub mod actor_critic;
pub mod buffer;
pub mod checkpoint;
pub mod env;
mod error;
pub mod mlp;
pub mod state;
pub mod train;

pub use actor_critic::ActorCritic;
pub use buffer::{ReplayBuffer, Transition};
pub use env::{RewardParams, Scenario};
pub use error::{Error, Result};
pub use state::StateTensor;
pub use train::{greedy_rollout, run_macdmr_episode, train, AgentId, Hyperparams, MultiAgent, TrainingMode};
