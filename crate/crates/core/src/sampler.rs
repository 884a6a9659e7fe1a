//! Single-epoch visitation order.
//!
//! A [`SamplePlan`] lists every manifest record exactly once together with a
//! horizontal-flip flag. Two strategies are supported: one global shuffle, or
//! season chunks visited in a fixed order with the configured tail seasons last.

use std::cmp::Ordering;
use std::collections::BTreeMap;
use std::fmt;
use std::io::Write;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::manifest::Manifest;
use crate::rng::SplitMix64;

pub const DEFAULT_FLIP_PROBABILITY: f64 = 0.5;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SamplingKind {
    Random,
    SeasonBySeason,
}

impl fmt::Display for SamplingKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SamplingKind::Random => "random",
            SamplingKind::SeasonBySeason => "season_by_season",
        })
    }
}

impl FromStr for SamplingKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "random" => Ok(SamplingKind::Random),
            "season_by_season" => Ok(SamplingKind::SeasonBySeason),
            other => Err(Error::Config(format!("unknown sampling strategy {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SamplingStrategy {
    pub kind: SamplingKind,
    /// Seasons visited last, in this order. Ignored by `Random`.
    pub tail_seasons: Vec<String>,
}

impl SamplingStrategy {
    pub fn random() -> Self {
        Self::new(SamplingKind::Random)
    }

    pub fn season_by_season() -> Self {
        Self::new(SamplingKind::SeasonBySeason)
    }

    /// Strategy of the given kind with the default tail seasons `["9", "10"]`.
    pub fn new(kind: SamplingKind) -> Self {
        Self {
            kind,
            tail_seasons: vec!["9".into(), "10".into()],
        }
    }

    pub fn with_tail_seasons(kind: SamplingKind, tail_seasons: Vec<String>) -> Result<Self> {
        for (i, s) in tail_seasons.iter().enumerate() {
            if tail_seasons[..i].contains(s) {
                return Err(Error::Config(format!("tail season {s:?} listed twice")));
            }
        }
        Ok(Self { kind, tail_seasons })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PlanEntry {
    pub record: usize,
    pub flip: bool,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SamplePlan {
    pub order: Vec<PlanEntry>,
    pub seed: u64,
}

impl SamplePlan {
    pub fn len(&self) -> usize {
        self.order.len()
    }

    pub fn is_empty(&self) -> bool {
        self.order.is_empty()
    }

    /// Record indices in visitation order, flags dropped.
    pub fn permutation(&self) -> Vec<usize> {
        self.order.iter().map(|e| e.record).collect()
    }

    /// Consecutive slices of `batch_size` entries; the last may be shorter.
    pub fn batches(&self, batch_size: usize) -> std::slice::Chunks<'_, PlanEntry> {
        assert!(batch_size >= 1, "batch size must be positive");
        self.order.chunks(batch_size)
    }

    pub fn batch_count(&self, batch_size: usize) -> usize {
        self.order.len().div_ceil(batch_size)
    }

    /// Writes `position,record_index,flip` rows.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(w);
        w.write_record(["position", "record_index", "flip"])?;
        for (pos, e) in self.order.iter().enumerate() {
            w.write_record([
                pos.to_string(),
                e.record.to_string(),
                u8::from(e.flip).to_string(),
            ])?;
        }
        w.flush().map_err(|e| Error::io("<plan writer>", e))?;
        Ok(())
    }
}

/// Ascending numeric order for numeric tags, numeric before non-numeric,
/// lexicographic otherwise.
fn season_order(a: &str, b: &str) -> Ordering {
    match (a.parse::<f64>(), b.parse::<f64>()) {
        (Ok(x), Ok(y)) => x.partial_cmp(&y).unwrap_or(Ordering::Equal).then_with(|| a.cmp(b)),
        (Ok(_), Err(_)) => Ordering::Less,
        (Err(_), Ok(_)) => Ordering::Greater,
        (Err(_), Err(_)) => a.cmp(b),
    }
}

/// Season tags in visitation order for `season_by_season`.
pub fn chunk_order(manifest: &Manifest, tail_seasons: &[String]) -> Vec<String> {
    let mut seasons: Vec<&str> = manifest.records().iter().map(|r| r.season.as_str()).collect();
    seasons.sort_unstable();
    seasons.dedup();
    let mut head: Vec<&str> = seasons
        .iter()
        .copied()
        .filter(|s| !tail_seasons.iter().any(|t| t == s))
        .collect();
    head.sort_by(|a, b| season_order(a, b));
    head.into_iter()
        .map(str::to_owned)
        .chain(
            tail_seasons
                .iter()
                .filter(|t| seasons.contains(&t.as_str()))
                .cloned(),
        )
        .collect()
}

pub fn build_plan(
    manifest: &Manifest,
    strategy: &SamplingStrategy,
    seed: u64,
    flip_probability: f64,
) -> Result<SamplePlan> {
    if manifest.is_empty() {
        return Err(Error::EmptyManifest);
    }
    if !(0.0..=1.0).contains(&flip_probability) {
        return Err(Error::Config(format!(
            "flip probability {flip_probability} outside [0, 1]"
        )));
    }
    let mut stream = SplitMix64::derived(seed, "plan");
    let permutation = match strategy.kind {
        SamplingKind::Random => {
            let mut idx: Vec<usize> = (0..manifest.len()).collect();
            stream.shuffle(&mut idx);
            idx
        }
        SamplingKind::SeasonBySeason => {
            let mut by_season: BTreeMap<&str, Vec<usize>> = BTreeMap::new();
            for (i, r) in manifest.records().iter().enumerate() {
                by_season.entry(r.season.as_str()).or_default().push(i);
            }
            let mut idx = Vec::with_capacity(manifest.len());
            for season in chunk_order(manifest, &strategy.tail_seasons) {
                let mut chunk = by_season.remove(season.as_str()).unwrap_or_default();
                SplitMix64::derived(seed, &format!("season:{season}")).shuffle(&mut chunk);
                idx.extend(chunk);
            }
            idx
        }
    };
    let order = permutation
        .into_iter()
        .map(|record| PlanEntry {
            record,
            flip: stream.bernoulli(flip_probability),
        })
        .collect();
    Ok(SamplePlan { order, seed })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::manifest::{ImageRecord, LabelVocabulary};

    fn manifest(seasons: &[&str]) -> Manifest {
        let vocab = LabelVocabulary::new(vec!["empty".into(), "zebra".into()], 0).unwrap();
        let records = seasons
            .iter()
            .enumerate()
            .map(|(i, s)| ImageRecord {
                season: s.to_string(),
                sequence_id: format!("S{i}"),
                image_id: "0".into(),
                feature_row: i,
                labels: vec![1, 0],
            })
            .collect();
        Manifest::new(vocab, records).unwrap()
    }

    #[test]
    fn tail_seasons_come_last() {
        let m = manifest(&["9", "1", "2", "9", "1"]);
        assert_eq!(chunk_order(&m, &["9".into(), "10".into()]), ["1", "2", "9"]);
        let m = manifest(&["10", "9", "11", "2", "x", "a"]);
        assert_eq!(
            chunk_order(&m, &["9".into(), "10".into()]),
            ["2", "11", "a", "x", "9", "10"]
        );
    }

    #[test]
    fn numeric_seasons_sort_by_value() {
        let m = manifest(&["12", "3", "1"]);
        assert_eq!(chunk_order(&m, &[]), ["1", "3", "12"]);
    }

    #[test]
    fn single_record_plan() {
        let m = manifest(&["1"]);
        for kind in [SamplingKind::Random, SamplingKind::SeasonBySeason] {
            let plan = build_plan(&m, &SamplingStrategy::new(kind), 5, 0.5).unwrap();
            assert_eq!(plan.permutation(), vec![0]);
        }
    }

    #[test]
    fn empty_manifest_is_rejected() {
        let vocab = LabelVocabulary::new(vec!["empty".into(), "zebra".into()], 0).unwrap();
        let m = Manifest::new(vocab, vec![]).unwrap();
        assert!(matches!(
            build_plan(&m, &SamplingStrategy::random(), 0, 0.5),
            Err(Error::EmptyManifest)
        ));
    }

    #[test]
    fn batch_sizes() {
        let m = manifest(&["1"; 5]);
        let plan = build_plan(&m, &SamplingStrategy::random(), 1, 0.0).unwrap();
        let sizes: Vec<usize> = plan.batches(2).map(<[_]>::len).collect();
        assert_eq!(sizes, [2, 2, 1]);
        let m = manifest(&["1"; 4]);
        let plan = build_plan(&m, &SamplingStrategy::random(), 1, 0.0).unwrap();
        assert_eq!(plan.batches(4).count(), 1);
    }

    #[test]
    fn flip_fraction_near_half() {
        let m = manifest(&vec!["1"; 10_000]);
        let plan = build_plan(&m, &SamplingStrategy::random(), 2024, 0.5).unwrap();
        let flips = plan.order.iter().filter(|e| e.flip).count() as f64 / 10_000.0;
        assert!((0.47..=0.53).contains(&flips), "{flips}");
    }

    #[test]
    fn flip_probability_does_not_change_order() {
        let m = manifest(&["1", "2", "3", "9", "2", "1", "10", "4"]);
        for strategy in [SamplingStrategy::random(), SamplingStrategy::season_by_season()] {
            let a = build_plan(&m, &strategy, 77, 0.0).unwrap();
            let b = build_plan(&m, &strategy, 77, 0.9).unwrap();
            assert_eq!(a.permutation(), b.permutation());
        }
    }

    #[test]
    fn duplicate_tail_season_rejected() {
        assert!(SamplingStrategy::with_tail_seasons(
            SamplingKind::SeasonBySeason,
            vec!["9".into(), "9".into()]
        )
        .is_err());
    }

    #[test]
    fn plan_csv_rows() {
        let m = manifest(&["1", "1"]);
        let plan = build_plan(&m, &SamplingStrategy::random(), 3, 1.0).unwrap();
        let mut out = Vec::new();
        plan.write_csv(&mut out).unwrap();
        let text = String::from_utf8(out).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "position,record_index,flip");
        assert_eq!(lines.len(), 3);
        assert!(lines[1].starts_with("0,") && lines[1].ends_with(",1"));
    }
}
