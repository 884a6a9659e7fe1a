//! Sequence-level scoring: aggregated binary log loss, argmax accuracy and
//! empty-detection accuracy.

use std::collections::HashSet;
use std::fmt;
use std::io::{Read, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::manifest::{LabelVocabulary, Manifest};
use crate::predictions::{Level, PredictionTable, RowKey};

/// Predictions are clamped to `[LOG_CLAMP, 1 - LOG_CLAMP]` before taking logs.
pub const LOG_CLAMP: f64 = 1e-15;
pub const DEFAULT_EMPTY_THRESHOLD: f64 = 0.5;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SequenceGroundTruth {
    pub sequence_id: String,
    pub labels: Vec<u8>,
}

/// Ground truth for a set of sequences, in file order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GroundTruth {
    vocabulary: LabelVocabulary,
    sequences: Vec<SequenceGroundTruth>,
}

impl GroundTruth {
    pub fn new(vocabulary: LabelVocabulary, sequences: Vec<SequenceGroundTruth>) -> Result<Self> {
        let mut seen = HashSet::new();
        for (i, s) in sequences.iter().enumerate() {
            vocabulary.check_labels(&s.labels, i + 1)?;
            if !seen.insert(s.sequence_id.as_str()) {
                return Err(Error::KeyMismatch(format!("duplicate truth sequence {:?}", s.sequence_id)));
            }
        }
        Ok(Self { vocabulary, sequences })
    }

    /// One truth row per sequence: the union of its images' labels, with the
    /// empty label dropped when any image shows an animal.
    pub fn from_manifest(manifest: &Manifest) -> Self {
        let vocab = manifest.vocabulary();
        let empty = vocab.empty_index();
        let sequences = manifest
            .group_by_sequence()
            .into_iter()
            .map(|(id, records)| {
                let mut labels = vec![0u8; vocab.len()];
                for r in records {
                    labels.iter_mut().zip(&r.labels).for_each(|(a, b)| *a |= b);
                }
                if labels.iter().enumerate().any(|(i, &v)| i != empty && v == 1) {
                    labels[empty] = 0;
                }
                SequenceGroundTruth {
                    sequence_id: id.to_owned(),
                    labels,
                }
            })
            .collect();
        Self {
            vocabulary: vocab.clone(),
            sequences,
        }
    }

    pub fn vocabulary(&self) -> &LabelVocabulary {
        &self.vocabulary
    }

    pub fn sequences(&self) -> &[SequenceGroundTruth] {
        &self.sequences
    }

    pub fn len(&self) -> usize {
        self.sequences.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sequences.is_empty()
    }

    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(w);
        let mut header = vec!["sequence_id".to_owned()];
        header.extend(self.vocabulary.names().iter().cloned());
        w.write_record(&header)?;
        for s in &self.sequences {
            let mut row = vec![s.sequence_id.clone()];
            row.extend(s.labels.iter().map(u8::to_string));
            w.write_record(&row)?;
        }
        w.flush().map_err(|e| Error::io("<truth writer>", e))?;
        Ok(())
    }

    pub fn read_csv<R: Read>(r: R, empty_name: &str) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new().flexible(true).from_reader(r);
        let header = rdr.headers()?.clone();
        if header.get(0) != Some("sequence_id") {
            return Err(Error::MalformedRow {
                row: 0,
                reason: "first column must be sequence_id".into(),
            });
        }
        let names = header.iter().skip(1).map(str::to_owned).collect();
        let vocabulary = LabelVocabulary::with_empty_name(names, empty_name)?;
        let mut sequences = Vec::new();
        for (i, rec) in rdr.records().enumerate() {
            let rec = rec?;
            let row = i + 1;
            if rec.len() != header.len() {
                return Err(Error::InconsistentWidth {
                    row,
                    expected: vocabulary.len(),
                    found: rec.len().saturating_sub(1),
                });
            }
            let labels = rec
                .iter()
                .skip(1)
                .map(|c| match c.trim() {
                    "0" => Ok(0),
                    "1" => Ok(1),
                    other => Err(Error::MalformedRow {
                        row,
                        reason: format!("label {other:?} is not 0 or 1"),
                    }),
                })
                .collect::<Result<Vec<u8>>>()?;
            sequences.push(SequenceGroundTruth {
                sequence_id: rec[0].to_owned(),
                labels,
            });
        }
        Self::new(vocabulary, sequences)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        self.write_csv(std::io::BufWriter::new(file))
    }

    pub fn load(path: impl AsRef<Path>, empty_name: &str) -> Result<Self> {
        let path = path.as_ref();
        let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
        Self::read_csv(std::io::BufReader::new(file), empty_name)
    }
}

/// Pairs each truth row with its prediction row, in truth order.
fn aligned<'a>(predictions: &'a PredictionTable, truths: &'a GroundTruth) -> Result<Vec<(&'a [f64], &'a SequenceGroundTruth)>> {
    if predictions.categories() != truths.vocabulary().names() {
        return Err(Error::VocabularyMismatch);
    }
    if predictions.level() != Level::Sequence {
        return Err(Error::KeyMismatch("predictions must be aggregated to sequences".into()));
    }
    if predictions.len() != truths.len() {
        return Err(Error::KeyMismatch(format!(
            "{} predicted sequences vs {} truth sequences",
            predictions.len(),
            truths.len()
        )));
    }
    truths
        .sequences()
        .iter()
        .map(|t| {
            predictions
                .get(&RowKey::sequence(&t.sequence_id))
                .map(|p| (p, t))
                .ok_or_else(|| Error::KeyMismatch(format!("no prediction for sequence {:?}", t.sequence_id)))
        })
        .collect()
}

/// Running mean that stays exact when every input is equal.
#[derive(Default)]
struct RunningMean {
    mean: f64,
    n: usize,
}

impl RunningMean {
    fn push(&mut self, x: f64) {
        self.n += 1;
        self.mean += (x - self.mean) / self.n as f64;
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AggLogLoss {
    /// Mean over sequences of the per-sequence sum of binary losses.
    pub raw: f64,
    /// `raw` divided by the number of categories.
    pub normalized: f64,
}

#[inline]
fn binary_log_loss(p: f64, t: u8) -> f64 {
    let p = p.clamp(LOG_CLAMP, 1.0 - LOG_CLAMP);
    if t == 1 {
        -p.ln()
    } else {
        -(1.0 - p).ln()
    }
}

pub fn agg_log_loss(predictions: &PredictionTable, truths: &GroundTruth) -> Result<AggLogLoss> {
    let pairs = aligned(predictions, truths)?;
    let mut raw = RunningMean::default();
    let mut normalized = RunningMean::default();
    for (p, t) in pairs {
        let mut sum = 0.0;
        let mut per_category = RunningMean::default();
        for (&pi, &ti) in p.iter().zip(&t.labels) {
            let l = binary_log_loss(pi, ti);
            sum += l;
            per_category.push(l);
        }
        raw.push(sum);
        normalized.push(per_category.mean);
    }
    Ok(AggLogLoss {
        raw: raw.mean,
        normalized: normalized.mean,
    })
}

/// Index of the largest entry, ties to the lowest index.
pub fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, v) in values.iter().enumerate().skip(1) {
        if *v > values[best] {
            best = i;
        }
    }
    best
}

/// Fraction of sequences whose argmax category is one of the true labels.
pub fn accuracy(predictions: &PredictionTable, truths: &GroundTruth) -> Result<f64> {
    let pairs = aligned(predictions, truths)?;
    if pairs.is_empty() {
        return Ok(0.0);
    }
    let correct = pairs.iter().filter(|(p, t)| t.labels[argmax(p)] == 1).count();
    Ok(correct as f64 / pairs.len() as f64)
}

/// Binary accuracy of `p_empty >= threshold` against the empty label.
pub fn empty_accuracy(predictions: &PredictionTable, truths: &GroundTruth, threshold: f64) -> Result<f64> {
    if !(threshold > 0.0 && threshold < 1.0) {
        return Err(Error::Config(format!("threshold {threshold} outside (0, 1)")));
    }
    let pairs = aligned(predictions, truths)?;
    if pairs.is_empty() {
        return Ok(0.0);
    }
    let e = truths.vocabulary().empty_index();
    let correct = pairs
        .iter()
        .filter(|(p, t)| (p[e] >= threshold) == (t.labels[e] == 1))
        .count();
    Ok(correct as f64 / pairs.len() as f64)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MetricReport {
    pub agg_log_loss: AggLogLoss,
    pub accuracy: f64,
    pub empty_accuracy: f64,
    pub sequences_scored: usize,
}

pub fn evaluate(predictions: &PredictionTable, truths: &GroundTruth, threshold: f64) -> Result<MetricReport> {
    Ok(MetricReport {
        agg_log_loss: agg_log_loss(predictions, truths)?,
        accuracy: accuracy(predictions, truths)?,
        empty_accuracy: empty_accuracy(predictions, truths, threshold)?,
        sequences_scored: truths.len(),
    })
}

/// `%g`-style formatting with `digits` significant digits.
pub fn format_significant(x: f64, digits: usize) -> String {
    if x == 0.0 || !x.is_finite() {
        return format!("{x}");
    }
    let sci = format!("{:.*e}", digits - 1, x);
    let (mantissa, exp) = sci.split_once('e').expect("scientific format");
    let exp: i32 = exp.parse().expect("exponent");
    let trim = |s: &str| -> String {
        if s.contains('.') {
            s.trim_end_matches('0').trim_end_matches('.').to_owned()
        } else {
            s.to_owned()
        }
    };
    if exp < -4 || exp >= digits as i32 {
        let sign = if exp < 0 { '-' } else { '+' };
        format!("{}e{sign}{:02}", trim(mantissa), exp.abs())
    } else {
        let decimals = (digits as i32 - 1 - exp).max(0) as usize;
        trim(&format!("{x:.decimals$}"))
    }
}

impl fmt::Display for MetricReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "agg_log_loss_raw={}", format_significant(self.agg_log_loss.raw, 6))?;
        writeln!(f, "agg_log_loss_normalized={}", format_significant(self.agg_log_loss.normalized, 6))?;
        writeln!(f, "accuracy={}", format_significant(self.accuracy, 6))?;
        writeln!(f, "empty_accuracy={}", format_significant(self.empty_accuracy, 6))?;
        writeln!(f, "sequences={}", self.sequences_scored)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn vocab() -> LabelVocabulary {
        LabelVocabulary::new(vec!["empty".into(), "wildebeest".into(), "zebra".into()], 0).unwrap()
    }

    fn truth(rows: &[(&str, [u8; 3])]) -> GroundTruth {
        GroundTruth::new(
            vocab(),
            rows.iter()
                .map(|(id, l)| SequenceGroundTruth {
                    sequence_id: id.to_string(),
                    labels: l.to_vec(),
                })
                .collect(),
        )
        .unwrap()
    }

    fn preds(rows: &[(&str, [f64; 3])]) -> PredictionTable {
        PredictionTable::from_rows(
            vocab().names().to_vec(),
            Level::Sequence,
            rows.iter().map(|(id, v)| (RowKey::sequence(*id), v.to_vec())),
        )
        .unwrap()
    }

    #[test]
    fn single_sequence_loss() {
        let l = agg_log_loss(&preds(&[("A", [0.8, 0.1, 0.3])]), &truth(&[("A", [1, 0, 0])])).unwrap();
        assert!((l.raw - 0.685_179_010_910_768_5).abs() < 1e-12);
        assert!((l.normalized - 0.228_393_003_636_922_8).abs() < 1e-12);
    }

    #[test]
    fn half_predictions_give_ln2() {
        let t = truth(&[("A", [1, 0, 0]), ("B", [0, 1, 1]), ("C", [0, 0, 1])]);
        let p = preds(&[("A", [0.5; 3]), ("B", [0.5; 3]), ("C", [0.5; 3])]);
        let l = agg_log_loss(&p, &t).unwrap();
        assert_eq!(l.normalized, std::f64::consts::LN_2);
        assert!((l.raw - 3.0 * std::f64::consts::LN_2).abs() < 1e-15);
    }

    #[test]
    fn perfect_predictions_hit_the_clamp_floor() {
        let l = agg_log_loss(&preds(&[("A", [0.0, 1.0, 1.0])]), &truth(&[("A", [0, 1, 1])])).unwrap();
        assert!(l.raw <= 3.0 * 1.2e-15, "{}", l.raw);
    }

    #[test]
    fn argmax_membership() {
        let t = truth(&[("A", [0, 1, 1]), ("B", [1, 0, 0]), ("C", [0, 0, 1])]);
        let p = preds(&[("A", [0.1, 0.2, 0.9]), ("B", [0.9, 0.1, 0.1]), ("C", [0.6, 0.3, 0.3])]);
        assert!((accuracy(&p, &t).unwrap() - 2.0 / 3.0).abs() < 1e-15);
        // ties resolve to the lowest index
        let p = preds(&[("A", [0.5, 0.5, 0.5]), ("B", [0.5, 0.5, 0.5]), ("C", [0.2, 0.7, 0.7])]);
        assert!((accuracy(&p, &t).unwrap() - 1.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn empty_threshold_rule() {
        let t = truth(&[("A", [1, 0, 0]), ("B", [1, 0, 0]), ("C", [0, 1, 0]), ("D", [0, 0, 1])]);
        let p = preds(&[
            ("A", [0.9, 0.0, 0.0]),
            ("B", [0.5, 0.0, 0.0]),
            ("C", [0.7, 0.9, 0.0]),
            ("D", [0.2, 0.0, 0.9]),
        ]);
        assert_eq!(empty_accuracy(&p, &t, 0.5).unwrap(), 0.75);
        assert!(empty_accuracy(&p, &t, 1.0).is_err());
    }

    #[test]
    fn key_and_vocabulary_mismatch() {
        let t = truth(&[("A", [1, 0, 0])]);
        assert!(matches!(agg_log_loss(&preds(&[("B", [0.5; 3])]), &t), Err(Error::KeyMismatch(_))));
        let other = PredictionTable::from_rows(
            vec!["empty".into(), "lion".into(), "zebra".into()],
            Level::Sequence,
            [(RowKey::sequence("A"), vec![0.5; 3])],
        )
        .unwrap();
        assert!(matches!(agg_log_loss(&other, &t), Err(Error::VocabularyMismatch)));
    }

    #[test]
    fn truth_from_manifest_drops_empty_when_animals_present() {
        let csv = "season,sequence_id,image_id,feature_row,empty,wildebeest,zebra\n\
                   1,A,1,0,1,0,0\n1,A,2,1,0,0,1\n1,B,1,2,1,0,0\n";
        let m = Manifest::from_reader(csv.as_bytes(), "empty").unwrap();
        let t = GroundTruth::from_manifest(&m);
        assert_eq!(t.sequences()[0].labels, vec![0, 0, 1]);
        assert_eq!(t.sequences()[1].labels, vec![1, 0, 0]);
    }

    #[test]
    fn truth_csv_roundtrip() {
        let t = truth(&[("A", [1, 0, 0]), ("B", [0, 1, 1])]);
        let mut buf = Vec::new();
        t.write_csv(&mut buf).unwrap();
        assert_eq!(GroundTruth::read_csv(buf.as_slice(), "empty").unwrap(), t);
        assert!(GroundTruth::read_csv("sequence_id,empty,zebra\nA,1,1\n".as_bytes(), "empty").is_err());
    }

    #[test]
    fn significant_digits() {
        assert_eq!(format_significant(0.00531, 6), "0.00531");
        assert_eq!(format_significant(std::f64::consts::LN_2, 6), "0.693147");
        assert_eq!(format_significant(1.0, 6), "1");
        assert_eq!(format_significant(0.75, 6), "0.75");
        assert_eq!(format_significant(1.234567e-7, 6), "1.23457e-07");
        assert_eq!(format_significant(12345678.0, 6), "1.23457e+07");
        assert_eq!(format_significant(0.0, 6), "0");
    }

    #[test]
    fn report_format() {
        let t = truth(&[("A", [1, 0, 0])]);
        let r = evaluate(&preds(&[("A", [0.5; 3])]), &t, 0.5).unwrap();
        assert_eq!(
            r.to_string(),
            "agg_log_loss_raw=2.07944\nagg_log_loss_normalized=0.693147\naccuracy=1\nempty_accuracy=1\nsequences=1\n"
        );
    }
}
