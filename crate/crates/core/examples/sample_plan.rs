//! Compares the two sampling strategies on a toy manifest.

use camtrap::manifest::{ImageRecord, LabelVocabulary, Manifest};
use camtrap::sampler::{build_plan, chunk_order, SamplingStrategy, DEFAULT_FLIP_PROBABILITY};

fn main() -> camtrap::Result<()> {
    let vocab = LabelVocabulary::new(vec!["empty".into(), "zebra".into(), "gazelle".into()], 0)?;
    let seasons = ["10", "2", "9", "1", "11", "2", "1", "9", "3", "10", "1", "11"];
    let records = seasons
        .iter()
        .enumerate()
        .map(|(i, s)| ImageRecord {
            season: s.to_string(),
            sequence_id: format!("S{s}_{i}"),
            image_id: "1".into(),
            feature_row: i,
            labels: if i % 3 == 0 { vec![1, 0, 0] } else { vec![0, 1, 0] },
        })
        .collect();
    let manifest = Manifest::new(vocab, records)?;

    let sbs = SamplingStrategy::season_by_season();
    println!("season order: {:?}", chunk_order(&manifest, &sbs.tail_seasons));

    for strategy in [SamplingStrategy::random(), sbs] {
        let plan = build_plan(&manifest, &strategy, 42, DEFAULT_FLIP_PROBABILITY)?;
        println!("\n{}", strategy.kind);
        for (b, batch) in plan.batches(4).enumerate() {
            let shown: Vec<String> = batch
                .iter()
                .map(|e| {
                    let r = &manifest.records()[e.record];
                    format!("{}{}", r.sequence_id, if e.flip { "*" } else { "" })
                })
                .collect();
            println!("  batch {b}: {}", shown.join(" "));
        }
    }
    println!("\n* = horizontally flipped view");
    Ok(())
}
