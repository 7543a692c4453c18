//! The training schedule: DAE and back-translation steps with the language
//! discriminator, warm-up, early stopping and the λ sweep.

mod config;
mod noise;
mod sweep;
mod trainer;

pub use config::{TrainConfig, DEFAULT_LAMBDAS};
pub use noise::{apply_noise, NoiseConfig};
pub use sweep::{sweep, SweepRow};
pub use trainer::{
    bt_objective, direction_from, load_model, save_model, translate_ids, BtLosses, BtObjective, DaeLosses, EpochRecord,
    PerDirection, PerLang, StopReason, TrainData, TrainState, Trainer, Validation, BEST_CHECKPOINT, LAST_CHECKPOINT,
    METRICS_LOG,
};
