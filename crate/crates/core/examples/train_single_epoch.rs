//! Trains one epoch with preset 1 on a separable synthetic dataset, saves the
//! model and scores the held-out sequences.
//!
//! cargo run --release --example train_single_epoch

use std::time::Instant;

use camtrap::ensemble::aggregate_sequence;
use camtrap::metrics::{evaluate, DEFAULT_EMPTY_THRESHOLD};
use camtrap::synth::{synth, SynthConfig};
use camtrap::trainer::{predict_tta, train_one_epoch_with_report, ModelState, Preset, TrainingData};

fn main() -> camtrap::Result<()> {
    let data = synth(&SynthConfig {
        sequences: 10_000,
        holdout_sequences: 2_000,
        separation: 20.0,
        seed: 7,
        ..SynthConfig::default()
    })?;
    let config = Preset::One.config(11);
    let schedule = config.reference_schedule(data.train.images())?;

    let start = Instant::now();
    let train = TrainingData::new(&data.train.manifest, &data.train.features).with_flipped(Some(&data.train.flipped));
    let (model, report) = train_one_epoch_with_report(train, &config, &schedule)?;
    println!(
        "{} images, {} optimizer steps, {} flipped, {:?}",
        report.examples_seen,
        model.step,
        report.flipped_examples,
        start.elapsed()
    );
    let losses = &report.group_losses;
    println!("group loss: first {:.4}, last {:.4}", losses[0], losses[losses.len() - 1]);

    let path = std::env::temp_dir().join("camtrap_preset1.bin");
    model.save(&path)?;
    let model = ModelState::load(&path)?;
    println!("saved {} parameters to {}", model.parameter_count(), path.display());

    let test = data.test.expect("holdout requested");
    let images = predict_tta(&model, &test.manifest, &test.features, Some(&test.flipped), true)?;
    print!("{}", evaluate(&aggregate_sequence(&images)?, &test.truth, DEFAULT_EMPTY_THRESHOLD)?);
    Ok(())
}
