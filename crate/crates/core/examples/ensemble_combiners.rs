//! Combines three hand-written prediction tables with each combiner, then
//! collapses images to sequences.

use camtrap::ensemble::{aggregate_sequence, combine, weighted_combine, CombinerKind};
use camtrap::predictions::{Level, PredictionTable, RowKey};

fn table(rows: [[f64; 3]; 3]) -> PredictionTable {
    let keys = [RowKey::image("A", "1"), RowKey::image("A", "2"), RowKey::image("B", "1")];
    let cats = vec!["empty".to_string(), "zebra".into(), "lion".into()];
    PredictionTable::from_rows(cats, Level::Image, keys.into_iter().zip(rows.map(Vec::from))).unwrap()
}

fn show(title: &str, t: &PredictionTable) {
    println!("{title}");
    for (key, values) in t.rows() {
        let id = key.image_id.as_deref().map(|i| format!("/{i}")).unwrap_or_default();
        println!("  {}{id:<3} {:.4?}", key.sequence_id, values);
    }
}

fn main() -> camtrap::Result<()> {
    let tables = [
        table([[0.9, 0.1, 0.0], [0.8, 0.2, 0.1], [0.1, 0.3, 0.7]]),
        table([[0.7, 0.2, 0.1], [0.9, 0.1, 0.0], [0.2, 0.1, 0.9]]),
        table([[0.95, 0.05, 0.0], [0.6, 0.4, 0.1], [0.05, 0.2, 0.8]]),
    ];
    let empty = 0;
    for kind in CombinerKind::ALL {
        show(&format!("{kind}"), &combine(&tables, kind, empty)?);
    }
    let weighted = weighted_combine(&tables, &[0.5, 0.25, 0.25], CombinerKind::ClassAware, empty)?;
    show("class_aware, weights 0.5/0.25/0.25", &weighted);
    show("per sequence", &aggregate_sequence(&weighted)?);
    Ok(())
}
