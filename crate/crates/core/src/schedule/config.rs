use serde::{Deserialize, Serialize};

use super::NoiseConfig;
use crate::autodiff::AdamConfig;
use crate::error::{invalid, Result};

/// λ values of the standard sweep.
pub const DEFAULT_LAMBDAS: [f64; 6] = [0.0, 0.01, 0.1, 1.0, 10.0, 100.0];

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainConfig {
    /// Weight of the discriminator constraint in the BT objective.
    pub lambda_ld: f64,
    /// Step budget T; one step is a DAE plus a BT update for one language side.
    pub max_steps: u64,
    pub max_epochs: usize,
    /// Leading epochs that run DAE and discriminator training only.
    pub warmup_epochs: usize,
    pub batch_size: usize,
    pub noise: NoiseConfig,
    pub patience: usize,
    pub seed: u64,
    pub adam: AdamConfig,
    pub ld_adam: AdamConfig,
    /// Global gradient-norm clip for the translation model; 0 disables it.
    pub clip_norm: f64,
    /// Longest intermediate translation, in tokens excluding EOS, is the
    /// source length plus this slack.
    pub bt_len_slack: usize,
    /// Also constrain the first-step output of the reconstruction half.
    pub ld_on_reconstruction: bool,
    /// Build without any discriminator. Only meaningful with `lambda_ld = 0`.
    pub no_discriminator: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            lambda_ld: 1.0,
            max_steps: 1_000_000,
            max_epochs: 20,
            warmup_epochs: 2,
            batch_size: 32,
            noise: NoiseConfig::default(),
            patience: 5,
            seed: 1,
            adam: AdamConfig::default(),
            ld_adam: AdamConfig::default(),
            clip_norm: 5.0,
            bt_len_slack: 3,
            ld_on_reconstruction: false,
            no_discriminator: false,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.lambda_ld >= 0.0 && self.lambda_ld.is_finite()) {
            return invalid(format!("lambda_ld must be a finite value >= 0, got {}", self.lambda_ld));
        }
        if self.patience == 0 {
            return invalid("patience must be at least 1");
        }
        if self.batch_size == 0 {
            return invalid("batch_size must be at least 1");
        }
        if self.no_discriminator && self.lambda_ld != 0.0 {
            return invalid("no_discriminator requires lambda_ld = 0");
        }
        for (name, a) in [("adam", &self.adam), ("ld_adam", &self.ld_adam)] {
            if !(a.lr > 0.0) || !(0.0..1.0).contains(&a.beta1) || !(0.0..1.0).contains(&a.beta2) {
                return invalid(format!("{name} settings out of range"));
            }
        }
        if self.clip_norm < 0.0 {
            return invalid("clip_norm must be >= 0");
        }
        self.noise.validate()
    }
}
