//! Generates a small synthetic camera-trap dataset and writes it to disk.
//!
//! cargo run --example synth_dataset -- [OUT_DIR]

use camtrap::synth::{synth, SynthConfig};

fn main() -> camtrap::Result<()> {
    let out = std::env::args().nth(1).unwrap_or_else(|| "synth_out".into());
    let config = SynthConfig {
        categories: 4,
        sequences: 2_000,
        holdout_sequences: 500,
        imbalance: 1.5,
        seed: 3,
        ..SynthConfig::default()
    };
    let data = synth(&config)?;

    let vocab = config.vocabulary();
    let empty = vocab.empty_index();
    let mut counts = vec![0usize; vocab.len()];
    for r in data.train.manifest.records() {
        for (c, &l) in r.labels.iter().enumerate() {
            counts[c] += usize::from(l);
        }
    }
    println!("{} training images in {} sequences", data.train.images(), data.train.truth.len());
    for (name, n) in vocab.names().iter().zip(&counts) {
        println!("  {name:<12} {n}");
    }
    let empty_seqs = data.train.truth.sequences().iter().filter(|s| s.labels[empty] == 1).count();
    println!("empty sequence share {:.3}", empty_seqs as f64 / data.train.truth.len() as f64);

    for path in data.write(std::path::Path::new(&out))? {
        println!("wrote {}", path.display());
    }
    Ok(())
}
