//! Single-pass training loop and batch prediction.

use super::config::TrainConfig;
use super::model::{DropoutMask, Gradients, ModelState};
use crate::error::{Error, Result};
use crate::features::FeatureStore;
use crate::manifest::Manifest;
use crate::predictions::{Level, PredictionTable, RowKey};
use crate::rng::SplitMix64;
use crate::sampler::build_plan;
use crate::schedule::{lr_at, ScheduleConfig};

/// Training data: the manifest, its features, and optionally the features of
/// horizontally flipped images (same row indexing).
#[derive(Debug, Clone, Copy)]
pub struct TrainingData<'a> {
    pub manifest: &'a Manifest,
    pub features: &'a FeatureStore,
    pub flipped: Option<&'a FeatureStore>,
}

impl<'a> TrainingData<'a> {
    pub fn new(manifest: &'a Manifest, features: &'a FeatureStore) -> Self {
        Self {
            manifest,
            features,
            flipped: None,
        }
    }

    pub fn with_flipped(mut self, flipped: Option<&'a FeatureStore>) -> Self {
        self.flipped = flipped;
        self
    }

    fn check(&self) -> Result<()> {
        let needed = self.manifest.required_feature_rows();
        for store in std::iter::once(self.features).chain(self.flipped) {
            if store.rows() < needed {
                return Err(Error::FeatureFormat(format!(
                    "manifest references row {} but the feature store has {} rows",
                    needed - 1,
                    store.rows()
                )));
            }
        }
        if let Some(f) = self.flipped {
            if f.dim() != self.features.dim() {
                return Err(Error::DimensionMismatch {
                    expected: self.features.dim(),
                    found: f.dim(),
                });
            }
        }
        Ok(())
    }
}

/// Instrumentation collected during one epoch.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainReport {
    /// Visits per manifest record.
    pub visits: Vec<u32>,
    pub examples_seen: usize,
    pub flipped_examples: usize,
    /// Learning rate applied at each optimizer step, in order.
    pub applied_lrs: Vec<f64>,
    /// Mean training loss of each accumulation group.
    pub group_losses: Vec<f64>,
}

pub fn train_one_epoch(data: TrainingData<'_>, config: &TrainConfig, schedule: &ScheduleConfig) -> Result<ModelState> {
    train_one_epoch_with_report(data, config, schedule).map(|(m, _)| m)
}

pub fn train_one_epoch_with_report(
    data: TrainingData<'_>,
    config: &TrainConfig,
    schedule: &ScheduleConfig,
) -> Result<(ModelState, TrainReport)> {
    config.validate()?;
    schedule.validate()?;
    let manifest = data.manifest;
    if manifest.is_empty() {
        return Err(Error::EmptyManifest);
    }
    data.check()?;
    let expected_steps = config.total_steps(manifest.len());
    if schedule.total_steps != expected_steps {
        return Err(Error::Config(format!(
            "schedule has {} steps but one pass takes {expected_steps}",
            schedule.total_steps
        )));
    }

    let plan = build_plan(manifest, &config.strategy, config.seed, config.flip_probability)?;
    let mut model = ModelState::init(data.features.dim(), &config.hidden_dims, manifest.vocabulary().len(), config.seed)?;
    let mut dropout_rng = SplitMix64::derived(config.seed, "dropout");
    let mut grads = Gradients::zeros_like(&model);
    let mut report = TrainReport {
        visits: vec![0; manifest.len()],
        examples_seen: 0,
        flipped_examples: 0,
        applied_lrs: Vec::with_capacity(expected_steps),
        group_losses: Vec::with_capacity(expected_steps),
    };

    let mut x = vec![0.0; data.features.dim()];
    let mut target = vec![0.0; manifest.vocabulary().len()];
    let batches: Vec<_> = plan.batches(config.batch_size).collect();
    for group in batches.chunks(config.grad_accum) {
        grads.clear();
        let mut group_examples = 0usize;
        let mut group_loss = 0.0;
        for entry in group.iter().flat_map(|b| b.iter()) {
            let record = &manifest.records()[entry.record];
            let store = match (entry.flip, data.flipped) {
                (true, Some(flipped)) => {
                    report.flipped_examples += 1;
                    flipped
                }
                _ => data.features,
            };
            x.iter_mut()
                .zip(store.row(record.feature_row))
                .for_each(|(d, &s)| *d = f64::from(s));
            target.iter_mut().zip(&record.labels).for_each(|(t, &l)| *t = f64::from(l));
            let mask = (config.dropout > 0.0 && !model.hidden_dims().is_empty())
                .then(|| DropoutMask::sample(&model, config.dropout, &mut dropout_rng));
            group_loss += model.accumulate_gradient(&x, &target, mask.as_ref(), &mut grads)?;
            report.visits[entry.record] += 1;
            group_examples += 1;
        }
        report.examples_seen += group_examples;

        let step_index = model.step as usize;
        grads.scale(1.0 / group_examples as f64);
        if !grads.is_finite() {
            return Err(Error::NonFiniteGradient { step: step_index });
        }
        let lr = lr_at(step_index, schedule)?;
        config.adam.step(&mut model, &grads, lr);
        if !model.is_finite() {
            return Err(Error::NonFiniteGradient { step: step_index });
        }
        report.applied_lrs.push(lr);
        report.group_losses.push(group_loss / group_examples as f64);
    }
    Ok((model, report))
}

/// Per-image probabilities in manifest order. With `flipped`, each row is
/// the mean of the plain and flipped passes.
pub fn predict(model: &ModelState, manifest: &Manifest, features: &FeatureStore, flipped: Option<&FeatureStore>) -> Result<PredictionTable> {
    let data = TrainingData::new(manifest, features).with_flipped(flipped);
    data.check()?;
    if model.input_dim() != features.dim() {
        return Err(Error::DimensionMismatch {
            expected: model.input_dim(),
            found: features.dim(),
        });
    }
    if model.output_dim() != manifest.vocabulary().len() {
        return Err(Error::LengthMismatch {
            expected: manifest.vocabulary().len(),
            found: model.output_dim(),
        });
    }
    let to_f64 = |row: &[f32]| row.iter().map(|&v| f64::from(v)).collect::<Vec<_>>();
    let mut table = PredictionTable::new(manifest.vocabulary().names().to_vec(), Level::Image);
    for rec in manifest.records() {
        let mut p = model.forward(&to_f64(features.row(rec.feature_row)), None)?;
        if let Some(flipped) = flipped {
            let q = model.forward(&to_f64(flipped.row(rec.feature_row)), None)?;
            p.iter_mut().zip(q).for_each(|(a, b)| *a = (*a + b) / 2.0);
        }
        table.push(RowKey::image(&rec.sequence_id, &rec.image_id), p)?;
    }
    Ok(table)
}

/// `predict` with an explicit flip switch; asking for flip averaging without a
/// flipped store is an error.
pub fn predict_tta(
    model: &ModelState,
    manifest: &Manifest,
    features: &FeatureStore,
    flipped: Option<&FeatureStore>,
    tta_flip: bool,
) -> Result<PredictionTable> {
    match (tta_flip, flipped) {
        (true, None) => Err(Error::MissingFlippedFeatures),
        (true, Some(f)) => predict(model, manifest, features, Some(f)),
        (false, _) => predict(model, manifest, features, None),
    }
}
