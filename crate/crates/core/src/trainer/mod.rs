//! Multi-label sigmoid classifier trained for exactly one pass with Adam,
//! gradient accumulation, dropout and the one-cycle schedule.

mod adam;
mod config;
mod model;
mod train;

pub use adam::AdamParams;
pub use config::{Preset, TrainConfig, DEFAULT_HIDDEN_WIDTH};
pub use model::{bce_multilabel, sigmoid, DropoutMask, Gradients, Layer, ModelState, BCE_EPS, MODEL_MAGIC, MODEL_VERSION};
pub use train::{predict, predict_tta, train_one_epoch, train_one_epoch_with_report, TrainReport, TrainingData};
