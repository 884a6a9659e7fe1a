//! Preset-by-preset and ensemble evaluation on a held-out split.

use std::io::Write;

use crate::ensemble::{aggregate_sequence, combine, CombinerKind};
use crate::error::{Error, Result};
use crate::features::FeatureStore;
use crate::manifest::Manifest;
use crate::metrics::{agg_log_loss, AggLogLoss, GroundTruth};
use crate::predictions::PredictionTable;
use crate::rng::derive_seed;
use crate::trainer::{predict, train_one_epoch, Preset, TrainingData};

/// Held-out images and their sequence truth.
#[derive(Debug, Clone, Copy)]
pub struct EvalData<'a> {
    pub manifest: &'a Manifest,
    pub features: &'a FeatureStore,
    pub flipped: Option<&'a FeatureStore>,
    pub truth: &'a GroundTruth,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AblationConfig {
    pub presets: Vec<Preset>,
    pub seeds: Vec<u64>,
    /// Average predictions over the flipped view at evaluation time.
    pub tta_flip: bool,
    pub hidden_dims: Option<Vec<usize>>,
}

impl Default for AblationConfig {
    fn default() -> Self {
        Self {
            presets: Preset::ALL.to_vec(),
            seeds: vec![0, 1],
            tta_flip: false,
            hidden_dims: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AblationEntry {
    Model { slot: usize, preset: Preset },
    Ensemble(CombinerKind),
}

impl std::fmt::Display for AblationEntry {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            AblationEntry::Model { slot, preset } => write!(f, "model{}_{preset}", slot + 1),
            AblationEntry::Ensemble(kind) => write!(f, "ensemble_{kind}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AblationRow {
    pub entry: AblationEntry,
    pub seed: u64,
    pub loss: AggLogLoss,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct AblationReport {
    pub rows: Vec<AblationRow>,
}

impl AblationReport {
    pub fn rows_for_seed(&self, seed: u64) -> impl Iterator<Item = &AblationRow> {
        self.rows.iter().filter(move |r| r.seed == seed)
    }

    pub fn model_rows(&self, seed: u64) -> impl Iterator<Item = &AblationRow> {
        self.rows_for_seed(seed).filter(|r| matches!(r.entry, AblationEntry::Model { .. }))
    }

    pub fn ensemble_row(&self, seed: u64, kind: CombinerKind) -> Option<&AblationRow> {
        self.rows_for_seed(seed).find(|r| r.entry == AblationEntry::Ensemble(kind))
    }

    fn entries(&self) -> Vec<AblationEntry> {
        let mut out: Vec<AblationEntry> = Vec::new();
        for r in &self.rows {
            if !out.contains(&r.entry) {
                out.push(r.entry);
            }
        }
        out
    }

    fn seeds(&self) -> Vec<u64> {
        let mut out: Vec<u64> = Vec::new();
        for r in &self.rows {
            if !out.contains(&r.seed) {
                out.push(r.seed);
            }
        }
        out
    }

    /// `entry,seed,agg_log_loss_normalized,agg_log_loss_raw`; with several
    /// seeds, one extra `mean` row per entry.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(w);
        w.write_record(["entry", "seed", "agg_log_loss_normalized", "agg_log_loss_raw"])?;
        for r in &self.rows {
            w.write_record([
                r.entry.to_string(),
                r.seed.to_string(),
                format!("{:?}", r.loss.normalized),
                format!("{:?}", r.loss.raw),
            ])?;
        }
        if self.seeds().len() > 1 {
            for entry in self.entries() {
                let picked: Vec<&AblationRow> = self.rows.iter().filter(|r| r.entry == entry).collect();
                let n = picked.len() as f64;
                let norm = picked.iter().map(|r| r.loss.normalized).sum::<f64>() / n;
                let raw = picked.iter().map(|r| r.loss.raw).sum::<f64>() / n;
                w.write_record([entry.to_string(), "mean".into(), format!("{norm:?}"), format!("{raw:?}")])?;
            }
        }
        w.flush().map_err(|e| Error::io("<ablation writer>", e))?;
        Ok(())
    }
}

fn score(table: &PredictionTable, truth: &GroundTruth) -> Result<AggLogLoss> {
    agg_log_loss(&aggregate_sequence(table)?, truth)
}

/// Trains every preset once per seed, scores each model on the held-out split,
/// then scores the three uniform-weight ensembles when more than one model was trained.
pub fn run_ablation(train: TrainingData<'_>, eval: EvalData<'_>, config: &AblationConfig) -> Result<AblationReport> {
    if config.presets.is_empty() || config.seeds.is_empty() {
        return Err(Error::Config("ablation needs at least one preset and one seed".into()));
    }
    if config.tta_flip && eval.flipped.is_none() {
        return Err(Error::MissingFlippedFeatures);
    }
    let empty_index = eval.truth.vocabulary().empty_index();
    let mut report = AblationReport::default();
    for &seed in &config.seeds {
        let mut tables = Vec::with_capacity(config.presets.len());
        for (slot, &preset) in config.presets.iter().enumerate() {
            let mut cfg = preset.config(derive_seed(seed, &preset.to_string()));
            if let Some(h) = &config.hidden_dims {
                cfg.hidden_dims = h.clone();
            }
            let schedule = cfg.reference_schedule(train.manifest.len())?;
            let model = train_one_epoch(train, &cfg, &schedule)?;
            let flipped = if config.tta_flip { eval.flipped } else { None };
            let table = predict(&model, eval.manifest, eval.features, flipped)?;
            report.rows.push(AblationRow {
                entry: AblationEntry::Model { slot, preset },
                seed,
                loss: score(&table, eval.truth)?,
            });
            tables.push(table);
        }
        if tables.len() > 1 {
            for kind in CombinerKind::ALL {
                let combined = combine(&tables, kind, empty_index)?;
                report.rows.push(AblationRow {
                    entry: AblationEntry::Ensemble(kind),
                    seed,
                    loss: score(&combined, eval.truth)?,
                });
            }
        }
    }
    Ok(report)
}
