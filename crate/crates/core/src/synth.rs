//! Synthetic camera-trap datasets with Gaussian class clusters, a dominant
//! empty class and imbalanced animal categories.
//!
//! Every category gets a random mean direction of length `separation`. An
//! image's features are the sum of its positive categories' means, plus a
//! per-sequence offset (`sequence_noise`) and per-image noise (`noise`).
//! The flipped view of an image reuses the sequence offset with fresh
//! per-image noise. All images of a sequence share its labels.

use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::features::FeatureStore;
use crate::manifest::{ImageRecord, LabelVocabulary, Manifest, DEFAULT_EMPTY_NAME};
use crate::metrics::{GroundTruth, SequenceGroundTruth};
use crate::rng::SplitMix64;

#[derive(Debug, Clone, PartialEq)]
pub struct SynthConfig {
    /// Animal categories; the vocabulary adds `empty` in front.
    pub categories: usize,
    pub sequences: usize,
    /// Extra sequences written as a held-out split with the same cluster geometry.
    pub holdout_sequences: usize,
    /// Images per sequence, uniform on this inclusive range.
    pub images_per_sequence: (usize, usize),
    pub empty_fraction: f64,
    pub seasons: usize,
    /// Probability that a non-empty sequence carries a second animal.
    pub co_occurrence: f64,
    /// Category frequency falls off as `rank^-imbalance`.
    pub imbalance: f64,
    pub feature_dim: usize,
    pub separation: f64,
    pub noise: f64,
    pub sequence_noise: f64,
    pub seed: u64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            categories: 3,
            sequences: 1000,
            holdout_sequences: 0,
            images_per_sequence: (1, 3),
            empty_fraction: 0.75,
            seasons: 10,
            co_occurrence: 0.1,
            imbalance: 1.0,
            feature_dim: 16,
            separation: 6.0,
            noise: 1.0,
            sequence_noise: 0.5,
            seed: 0,
        }
    }
}

impl SynthConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::Config(m.to_owned()));
        if self.categories == 0 || self.sequences == 0 || self.seasons == 0 || self.feature_dim == 0 {
            return bad("categories, sequences, seasons and feature_dim must be at least 1");
        }
        let (lo, hi) = self.images_per_sequence;
        if lo == 0 || hi < lo {
            return bad("images per sequence must be a range with 1 <= min <= max");
        }
        if !(0.0..1.0).contains(&self.empty_fraction) {
            return bad("empty fraction must lie in [0, 1)");
        }
        if !(0.0..=1.0).contains(&self.co_occurrence) {
            return bad("co-occurrence must lie in [0, 1]");
        }
        for (name, v) in [
            ("imbalance", self.imbalance),
            ("separation", self.separation),
            ("noise", self.noise),
            ("sequence_noise", self.sequence_noise),
        ] {
            if !(v.is_finite() && v >= 0.0) {
                return Err(Error::Config(format!("{name} must be finite and non-negative")));
            }
        }
        Ok(())
    }

    pub fn vocabulary(&self) -> LabelVocabulary {
        let names = std::iter::once(DEFAULT_EMPTY_NAME.to_owned())
            .chain((1..=self.categories).map(|k| format!("species_{k:02}")))
            .collect();
        LabelVocabulary::new(names, 0).expect("generated names are unique")
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthSplit {
    pub manifest: Manifest,
    pub features: FeatureStore,
    pub flipped: FeatureStore,
    pub truth: GroundTruth,
}

impl SynthSplit {
    pub fn images(&self) -> usize {
        self.manifest.len()
    }

    /// Writes `<prefix>_manifest.csv`, `<prefix>_features.bin`,
    /// `<prefix>_features_flipped.bin` and `<prefix>_truth.csv` into `dir`.
    pub fn write(&self, dir: &Path, prefix: &str) -> Result<SplitPaths> {
        let paths = SplitPaths::new(dir, prefix);
        self.manifest.save(&paths.manifest)?;
        self.features.save(&paths.features)?;
        self.flipped.save(&paths.flipped)?;
        self.truth.save(&paths.truth)?;
        Ok(paths)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SplitPaths {
    pub manifest: PathBuf,
    pub features: PathBuf,
    pub flipped: PathBuf,
    pub truth: PathBuf,
}

impl SplitPaths {
    pub fn new(dir: &Path, prefix: &str) -> Self {
        Self {
            manifest: dir.join(format!("{prefix}_manifest.csv")),
            features: dir.join(format!("{prefix}_features.bin")),
            flipped: dir.join(format!("{prefix}_features_flipped.bin")),
            truth: dir.join(format!("{prefix}_truth.csv")),
        }
    }

    pub fn all(&self) -> [&Path; 4] {
        [&self.manifest, &self.features, &self.flipped, &self.truth]
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthDataset {
    pub train: SynthSplit,
    pub test: Option<SynthSplit>,
}

impl SynthDataset {
    pub fn write(&self, dir: &Path) -> Result<Vec<PathBuf>> {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let mut out: Vec<PathBuf> = self.train.write(dir, "train")?.all().iter().map(|p| p.to_path_buf()).collect();
        if let Some(test) = &self.test {
            out.extend(test.write(dir, "test")?.all().iter().map(|p| p.to_path_buf()));
        }
        Ok(out)
    }
}

struct Generator<'a> {
    config: &'a SynthConfig,
    means: Vec<Vec<f64>>,
    cumulative_weights: Vec<f64>,
    labels_rng: SplitMix64,
    feature_rng: SplitMix64,
}

impl Generator<'_> {
    fn pick_animal(&mut self, exclude: Option<usize>) -> usize {
        loop {
            let total = *self.cumulative_weights.last().unwrap();
            let u = self.labels_rng.next_f64() * total;
            let k = self.cumulative_weights.partition_point(|&c| c <= u).min(self.config.categories - 1);
            // vocabulary index: animals start after `empty`
            let idx = k + 1;
            if Some(idx) != exclude {
                return idx;
            }
        }
    }

    fn sequence_labels(&mut self) -> Vec<u8> {
        let mut labels = vec![0u8; self.config.categories + 1];
        if self.labels_rng.bernoulli(self.config.empty_fraction) {
            labels[0] = 1;
            return labels;
        }
        let first = self.pick_animal(None);
        labels[first] = 1;
        if self.config.categories > 1 && self.labels_rng.bernoulli(self.config.co_occurrence) {
            labels[self.pick_animal(Some(first))] = 1;
        }
        labels
    }

    fn image_features(&mut self, center: &[f64]) -> Vec<f32> {
        center
            .iter()
            .map(|c| (c + self.config.noise * self.feature_rng.normal()) as f32)
            .collect()
    }

    fn split(&mut self, count: usize, id_prefix: &str) -> Result<SynthSplit> {
        let cfg = self.config;
        let (lo, hi) = cfg.images_per_sequence;
        let mut records = Vec::new();
        let mut rows = Vec::new();
        let mut flipped_rows = Vec::new();
        let mut truths = Vec::with_capacity(count);
        for s in 0..count {
            let sequence_id = format!("{id_prefix}{s:06}");
            let season = (1 + self.labels_rng.below(cfg.seasons as u64)).to_string();
            let images = lo + self.labels_rng.below((hi - lo + 1) as u64) as usize;
            let labels = self.sequence_labels();
            let mut center = vec![0.0; cfg.feature_dim];
            for (c, _) in labels.iter().enumerate().filter(|(_, &v)| v == 1) {
                center.iter_mut().zip(&self.means[c]).for_each(|(a, m)| *a += m);
            }
            for v in center.iter_mut() {
                *v += cfg.sequence_noise * self.feature_rng.normal();
            }
            for i in 0..images {
                records.push(ImageRecord {
                    season: season.clone(),
                    sequence_id: sequence_id.clone(),
                    image_id: i.to_string(),
                    feature_row: rows.len(),
                    labels: labels.clone(),
                });
                rows.push(self.image_features(&center));
                flipped_rows.push(self.image_features(&center));
            }
            truths.push(SequenceGroundTruth { sequence_id, labels });
        }
        let vocab = cfg.vocabulary();
        Ok(SynthSplit {
            manifest: Manifest::new(vocab.clone(), records)?,
            features: FeatureStore::new(cfg.feature_dim, rows.concat())?,
            flipped: FeatureStore::new(cfg.feature_dim, flipped_rows.concat())?,
            truth: GroundTruth::new(vocab, truths)?,
        })
    }
}

pub fn synth(config: &SynthConfig) -> Result<SynthDataset> {
    config.validate()?;
    let mut geometry = SplitMix64::derived(config.seed, "geometry");
    let means = (0..=config.categories)
        .map(|_| {
            let dir: Vec<f64> = (0..config.feature_dim).map(|_| geometry.normal()).collect();
            let norm = dir.iter().map(|v| v * v).sum::<f64>().sqrt().max(f64::MIN_POSITIVE);
            dir.into_iter().map(|v| config.separation * v / norm).collect()
        })
        .collect();
    let mut acc = 0.0;
    let cumulative_weights = (1..=config.categories)
        .map(|rank| {
            acc += (rank as f64).powf(-config.imbalance);
            acc
        })
        .collect();
    let mut gen = Generator {
        config,
        means,
        cumulative_weights,
        labels_rng: SplitMix64::derived(config.seed, "labels"),
        feature_rng: SplitMix64::derived(config.seed, "features"),
    };
    let train = gen.split(config.sequences, "seq")?;
    let test = if config.holdout_sequences > 0 {
        Some(gen.split(config.holdout_sequences, "test")?)
    } else {
        None
    };
    Ok(SynthDataset { train, test })
}
