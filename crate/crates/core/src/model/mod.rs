//! The multi-temporal recurrent encoder-decoder.

mod checkpoint;
mod config;
mod network;
mod params;

pub use checkpoint::{decode_checkpoint, encode_checkpoint, load_checkpoint, save_checkpoint, Checkpoint, CheckpointMeta, CHECKPOINT_MAGIC};
pub use config::ModelConfig;
pub use network::{forward, forward_graph, init_recurrent_state, RecurrentState, StepVars};
pub use params::{init_model, layer_specs, param_breakdown, BoundParams, LayerKind, LayerSpec, ModelParams};
