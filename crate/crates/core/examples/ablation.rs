//! Trains all four presets over two seeds on a noisy dataset and prints the
//! ablation table.
//!
//! cargo run --release --example ablation

use camtrap::ablation::{run_ablation, AblationConfig, EvalData};
use camtrap::synth::{synth, SynthConfig};
use camtrap::trainer::TrainingData;

fn main() -> camtrap::Result<()> {
    let data = synth(&SynthConfig {
        sequences: 4_000,
        holdout_sequences: 1_000,
        separation: 7.0,
        seed: 8,
        ..SynthConfig::default()
    })?;
    let test = data.test.as_ref().expect("holdout requested");
    let report = run_ablation(
        TrainingData::new(&data.train.manifest, &data.train.features).with_flipped(Some(&data.train.flipped)),
        EvalData { manifest: &test.manifest, features: &test.features, flipped: Some(&test.flipped), truth: &test.truth },
        &AblationConfig { seeds: vec![0, 1], tta_flip: true, ..AblationConfig::default() },
    )?;
    report.write_csv(std::io::stdout())
}
