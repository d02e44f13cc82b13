//! Multi-agent deep deterministic policy gradient: one agent sets the
//! aerobic dissolved-oxygen target, the other the PAC dose.

pub mod agent;
pub mod buffer;
pub mod nn;
pub mod obs;
pub mod persist;
pub mod train;

/// Hourly slices in each observation.
pub const HISTORY_LEN: usize = 5;

pub use agent::{td_targets, update_actor, update_critic, Agent, AgentConfig, Batch, Transition, CRITIC_DIM, N_AGENTS};
pub use buffer::ReplayBuffer;
pub use nn::{soft_update, Adam, Mlp, Output};
pub use obs::{build_observation, ObsScale, ObsSlice, OBS_DIM};
pub use persist::TeamDocument;
pub use train::{train, window_mean, write_log, History, StepLog, Team, TrainConfig, TrainOutcome};
