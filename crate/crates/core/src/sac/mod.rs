//! Soft Actor-Critic with a squashed Gaussian policy, twin critics, Polyak
//! targets and optional automatic temperature tuning.

mod agent;
mod buffer;
mod checkpoint;
mod hyper;
mod train;

pub use agent::{squash, PolicySample, SacAgent, UpdateStats, LOG_STD_MAX, LOG_STD_MIN, SQUASH_EPS};
pub use buffer::{Batch, ReplayBuffer, Transition};
pub use checkpoint::{checkpoint_name, checkpoint_step, list_checkpoints};
pub use hyper::{AlphaMode, SacHyperparams};
pub use train::{log_header, log_to_csv, parse_log, read_log, train_loop, write_log, StepRecord, TrainLog, TrainOptions};
