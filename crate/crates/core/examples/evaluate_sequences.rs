//! Scores a few sequence-level predictions and prints the metric report.

use camtrap::manifest::LabelVocabulary;
use camtrap::metrics::{agg_log_loss, evaluate, GroundTruth, SequenceGroundTruth};
use camtrap::predictions::{Level, PredictionTable, RowKey};

fn main() -> camtrap::Result<()> {
    let vocab = LabelVocabulary::new(vec!["empty".into(), "zebra".into(), "wildebeest".into()], 0)?;
    let truth = GroundTruth::new(
        vocab.clone(),
        [("S1", [1, 0, 0]), ("S2", [0, 1, 1]), ("S3", [0, 0, 1]), ("S4", [1, 0, 0])]
            .into_iter()
            .map(|(id, l)| SequenceGroundTruth { sequence_id: id.into(), labels: l.to_vec() })
            .collect(),
    )?;
    let preds = PredictionTable::from_rows(
        vocab.names().to_vec(),
        Level::Sequence,
        [
            ("S1", [0.97, 0.02, 0.01]),
            ("S2", [0.05, 0.70, 0.60]),
            ("S3", [0.40, 0.10, 0.55]),
            ("S4", [0.45, 0.50, 0.05]),
        ]
        .into_iter()
        .map(|(id, p)| (RowKey::sequence(id), p.to_vec())),
    )?;
    print!("{}", evaluate(&preds, &truth, 0.5)?);

    let uniform = PredictionTable::from_rows(
        vocab.names().to_vec(),
        Level::Sequence,
        truth.sequences().iter().map(|s| (RowKey::sequence(s.sequence_id.clone()), vec![0.5; 3])),
    )?;
    println!("uniform 0.5 baseline: {:.6}", agg_log_loss(&uniform, &truth)?.normalized);
    Ok(())
}
