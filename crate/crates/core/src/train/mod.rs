//! Incremental temporal training: shared weights, per-iteration L1 losses,
//! detached recurrence and Adam with a halving schedule.

mod chain;
mod config;
mod log;
mod trainer;

pub use chain::{make_chain, make_chain_with_step, single_shot_chain, TemporalChain, FLOOR_TLS, MAX_ITERATIONS};
pub use config::{lr_at, TrainConfig, TrainMode};
pub use log::{LogRecord, StepRecord, TrainLog, ValidationRecord};
pub use trainer::{chain_gradients, keyed_rng, train, train_step, TrainBatch, Trainer, FINAL_CHECKPOINT, TRAIN_LOG};
