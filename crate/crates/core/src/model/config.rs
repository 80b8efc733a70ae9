use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Network hyperparameters. Stage widths are `base * {1, 2, 4}`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ModelConfig {
    pub base_channels: usize,
    pub resblocks_per_stage: usize,
    pub kernel_size: usize,
    pub in_channels: usize,
    pub width_multiplier: f64,
    /// Feed decoder features of the previous iteration back into the encoder.
    pub recurrent_features: bool,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self::desk()
    }
}

impl ModelConfig {
    /// 16-channel configuration used for CPU-scale experiments.
    pub fn desk() -> Self {
        Self {
            base_channels: 16,
            resblocks_per_stage: 3,
            kernel_size: 3,
            in_channels: 3,
            width_multiplier: 1.0,
            recurrent_features: true,
        }
    }

    /// 32/64/128-channel configuration with 3x3 kernels.
    pub fn full() -> Self {
        Self { base_channels: 32, ..Self::desk() }
    }

    pub fn validate(&self) -> Result<()> {
        if self.kernel_size % 2 == 0 || self.kernel_size == 0 {
            return Err(Error::Config(format!("kernel_size must be odd, got {}", self.kernel_size)));
        }
        if self.in_channels == 0 {
            return Err(Error::Config("in_channels must be positive".into()));
        }
        if !(self.width_multiplier.is_finite() && self.width_multiplier > 0.0) {
            return Err(Error::Config(format!(
                "width_multiplier must be positive, got {}",
                self.width_multiplier
            )));
        }
        if self.width() == 0 {
            return Err(Error::Config("effective width is zero".into()));
        }
        Ok(())
    }

    /// Top-stage channel count after applying the width multiplier.
    pub fn width(&self) -> usize {
        (self.base_channels as f64 * self.width_multiplier).round() as usize
    }

    /// Channels at stage 0 (full), 1 (half) and 2 (quarter resolution).
    pub fn stage_channels(&self) -> [usize; 3] {
        let c = self.width();
        [c, 2 * c, 4 * c]
    }
}
