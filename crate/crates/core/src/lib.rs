//! Single-epoch training and evaluation pipeline for camera-trap image sequences.
//!
//! The crate covers the whole path from a dataset manifest to a scored submission:
//!
//! * [`manifest`] and [`features`] load image metadata, multi-hot labels and
//!   precomputed feature vectors;
//! * [`sampler`] fixes the exactly-once visitation order (global shuffle or
//!   season chunks with the most recent seasons last) and flip flags;
//! * [`schedule`] gives the one-cycle learning rate per optimizer step;
//! * [`trainer`] fits a sigmoid multi-label MLP in one pass with Adam and
//!   gradient accumulation;
//! * [`ensemble`] combines models (mean, geometric mean, class-aware) and
//!   averages images into sequences;
//! * [`metrics`] scores sequences with the aggregated binary log loss, argmax
//!   accuracy and empty-detection accuracy;
//! * [`synth`] and [`ablation`] generate desk-scale datasets and reproduce the
//!   single-model versus ensemble comparison.

pub mod ablation;
pub mod ensemble;
pub mod error;
pub mod features;
pub mod manifest;
pub mod metrics;
pub mod predictions;
pub mod rng;
pub mod run;
pub mod sampler;
pub mod schedule;
pub mod synth;
pub mod trainer;

pub use error::{Error, Result};
