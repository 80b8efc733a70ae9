use std::path::Path;

use serde::{Deserialize, Serialize};

use super::chain::{make_chain_with_step, single_shot_chain, TemporalChain, FLOOR_TLS, MAX_ITERATIONS};
use crate::error::{Error, Result};
use crate::model::ModelConfig;
use crate::numerics::AdamHyper;

/// How each training sample's targets are chosen.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TrainMode {
    /// Step down the ladder by `temporal_step` per iteration.
    #[default]
    MultiTemporal,
    /// One iteration from the input straight to the floor level.
    SingleShot,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub model: ModelConfig,
    pub adam: AdamHyper,
    pub total_steps: u64,
    pub halve_every: u64,
    pub batch_size: usize,
    pub patch_size: usize,
    pub total_iterations: usize,
    pub temporal_step: u32,
    pub target_floor_tl: u32,
    pub mode: TrainMode,
    /// Train from this level instead of sampling native levels.
    pub fixed_input_tl: Option<u32>,
    /// Apply Adam after every iteration instead of once per chain.
    pub step_per_iteration: bool,
    pub seed: u64,
    /// Validation period in steps; 0 disables.
    pub validate_every: u64,
    pub val_iterations: usize,
    /// Checkpoint period in steps; 0 keeps only the final checkpoint.
    pub checkpoint_every: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            model: ModelConfig::desk(),
            adam: AdamHyper::default(),
            total_steps: 2000,
            halve_every: 1000,
            batch_size: 4,
            patch_size: 64,
            total_iterations: 6,
            temporal_step: 2,
            target_floor_tl: 1,
            mode: TrainMode::MultiTemporal,
            fixed_input_tl: None,
            step_per_iteration: false,
            seed: 0,
            validate_every: 500,
            val_iterations: 8,
            checkpoint_every: 0,
        }
    }
}

impl TrainConfig {
    pub fn from_json_file(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let config: Self = serde_json::from_str(&text)?;
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<()> {
        self.model.validate()?;
        if self.halve_every == 0 {
            return Err(Error::Config("halve_every must be positive".into()));
        }
        if self.batch_size == 0 {
            return Err(Error::Config("batch_size must be positive".into()));
        }
        if self.patch_size == 0 || self.patch_size % 4 != 0 {
            return Err(Error::Config(format!("patch_size must be a positive multiple of 4, got {}", self.patch_size)));
        }
        if !FLOOR_TLS.contains(&self.target_floor_tl) {
            return Err(Error::Config(format!("target_floor_tl must be one of {FLOOR_TLS:?}")));
        }
        if !(1..=MAX_ITERATIONS).contains(&self.total_iterations) {
            return Err(Error::Config(format!("total_iterations must be in 1..={MAX_ITERATIONS}")));
        }
        if !(self.adam.lr.is_finite() && self.adam.lr > 0.0) {
            return Err(Error::Config(format!("lr must be positive, got {}", self.adam.lr)));
        }
        Ok(())
    }

    /// Iterations run per training sample.
    pub fn iterations(&self) -> usize {
        match self.mode {
            TrainMode::MultiTemporal => self.total_iterations,
            TrainMode::SingleShot => 1,
        }
    }

    pub fn chain(&self, start_tl: u32) -> Result<TemporalChain> {
        match self.mode {
            TrainMode::MultiTemporal => {
                make_chain_with_step(start_tl, self.total_iterations, self.target_floor_tl, self.temporal_step)
            }
            TrainMode::SingleShot => single_shot_chain(start_tl, self.target_floor_tl),
        }
    }
}

/// `lr * 0.5^floor(step / halve_every)`
pub fn lr_at(step: u64, config: &TrainConfig) -> f64 {
    let halvings = (step / config.halve_every).min(1074) as i32;
    config.adam.lr * 0.5f64.powi(halvings)
}
