//! Drives the `camtrap` binary through every subcommand and checks the file
//! formats and exit codes it promises.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use camtrap::features::FeatureStore;
use camtrap::manifest::Manifest;
use camtrap::predictions::{Level, PredictionTable};
use camtrap::trainer::ModelState;

fn camtrap(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_camtrap"))
        .arg("--quiet")
        .args(args)
        .output()
        .expect("binary runs")
}

fn ok(args: &[&str]) -> String {
    let out = camtrap(args);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn synth_into(dir: &Path, seed: &str) -> PathBuf {
    let data = dir.join("data");
    ok(&[
        "--seed", seed, "synth", "--out", s(&data), "--sequences", "400", "--holdout-sequences", "100",
        "--separation", "20",
    ]);
    data
}

#[test]
fn synth_is_byte_reproducible() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let da = synth_into(a.path(), "5");
    let db = synth_into(b.path(), "5");
    for name in [
        "train_manifest.csv",
        "train_features.bin",
        "train_features_flipped.bin",
        "train_truth.csv",
        "test_manifest.csv",
        "test_features.bin",
        "test_features_flipped.bin",
        "test_truth.csv",
    ] {
        assert_eq!(std::fs::read(da.join(name)).unwrap(), std::fs::read(db.join(name)).unwrap(), "{name}");
    }
    let header = std::fs::read_to_string(da.join("train_manifest.csv")).unwrap();
    assert!(header.starts_with("season,sequence_id,image_id,feature_row,empty,species_01,species_02,species_03\n"));
}

#[test]
fn full_pipeline() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let data = synth_into(d, "1");
    let j = |n: &str| data.join(n);

    let plan = d.join("plan.csv");
    ok(&["--seed", "4", "sample-plan", "--manifest", s(&j("train_manifest.csv")), "--strategy", "season_by_season", "--out", s(&plan)]);
    let text = std::fs::read_to_string(&plan).unwrap();
    let manifest = Manifest::load(j("train_manifest.csv"), "empty").unwrap();
    let mut seen: Vec<usize> = text
        .lines()
        .skip(1)
        .enumerate()
        .map(|(pos, line)| {
            let cols: Vec<&str> = line.split(',').collect();
            assert_eq!(cols[0], pos.to_string());
            assert!(cols[2] == "0" || cols[2] == "1");
            cols[1].parse().unwrap()
        })
        .collect();
    // tail seasons 9 and 10 close the plan
    let last = seen[seen.len() - 1];
    assert_eq!(manifest.records()[last].season, "10");
    seen.sort_unstable();
    assert_eq!(seen, (0..manifest.len()).collect::<Vec<_>>());

    let mut preds = Vec::new();
    for (preset, seed) in [("1", "1"), ("4", "2")] {
        let model = d.join(format!("model{preset}.bin"));
        ok(&[
            "--seed", seed, "train", "--manifest", s(&j("train_manifest.csv")), "--features", s(&j("train_features.bin")),
            "--flipped-features", s(&j("train_features_flipped.bin")), "--preset", preset, "--out", s(&model),
        ]);
        let loaded = ModelState::load(&model).unwrap();
        assert_eq!(loaded.input_dim(), 16);
        assert_eq!(loaded.output_dim(), 4);
        let pred = d.join(format!("pred{preset}.csv"));
        ok(&[
            "predict", "--model", s(&model), "--manifest", s(&j("test_manifest.csv")), "--features", s(&j("test_features.bin")),
            "--flipped-features", s(&j("test_features_flipped.bin")), "--tta-flip", "--out", s(&pred),
        ]);
        let table = PredictionTable::load(&pred).unwrap();
        assert_eq!(table.level(), Level::Image);
        preds.push(pred);
    }

    let final_csv = d.join("final.csv");
    ok(&[
        "ensemble", "--in", s(&preds[0]), s(&preds[1]), "--kind", "class_aware", "--weights", "0.5,0.5",
        "--aggregate-sequences", "--out", s(&final_csv),
    ]);
    let first = std::fs::read_to_string(&final_csv).unwrap();
    assert!(first.starts_with("sequence_id,empty,species_01,species_02,species_03\n"));

    let report = ok(&["evaluate", "--pred", s(&final_csv), "--truth", s(&j("test_truth.csv"))]);
    let keys: Vec<&str> = report.lines().map(|l| l.split('=').next().unwrap()).collect();
    assert_eq!(keys, ["agg_log_loss_raw", "agg_log_loss_normalized", "accuracy", "empty_accuracy", "sequences"]);
    assert!(report.ends_with("sequences=100\n"));
    let acc: f64 = report.lines().nth(2).unwrap().split('=').nth(1).unwrap().parse().unwrap();
    assert!(acc > 0.9, "{report}");

    // the run record goes to stderr unless --quiet
    let out = Command::new(env!("CARGO_BIN_EXE_camtrap"))
        .args(["evaluate", "--pred", s(&final_csv), "--truth", s(&j("test_truth.csv"))])
        .output()
        .unwrap();
    let stderr = String::from_utf8(out.stderr).unwrap();
    assert!(stderr.contains("\"command\":\"evaluate\"") && stderr.contains("\"inputs\""));
}

#[test]
fn schedule_dump_rows() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("lr.csv");
    ok(&["schedule-dump", "--batch-size", "16", "--grad-accum", "2", "--total-steps", "701", "--out", s(&out)]);
    let text = std::fs::read_to_string(&out).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "step,lr");
    assert_eq!(lines.len(), 702);
    assert_eq!(lines[1], "0,1e-6");
    assert_eq!(lines[301], "300,1e-4");
    assert_eq!(lines[701], "700,1e-6");
    let mid: f64 = lines[501].split(',').nth(1).unwrap().parse().unwrap();
    assert!((mid - 5.05e-5).abs() < 1e-16);
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let manifest = d.join("m.csv");
    std::fs::write(&manifest, "season,sequence_id,image_id,feature_row,empty,zebra\n1,A,1,0,1,1\n").unwrap();
    let out = camtrap(&["sample-plan", "--manifest", s(&manifest), "--strategy", "random", "--out", s(&d.join("p.csv"))]);
    assert_eq!(out.status.code(), Some(2));
    assert!(!d.join("p.csv").exists());

    std::fs::write(&manifest, "season,sequence_id,image_id,feature_row,empty,zebra\n1,A,1,0,1,0\n1,B,1,1,0,1\n").unwrap();
    let features = d.join("f.bin");
    FeatureStore::from_rows(&[vec![f32::NAN, 1.0], vec![0.0, 1.0]]).unwrap().save(&features).unwrap();
    let out = camtrap(&["train", "--manifest", s(&manifest), "--features", s(&features), "--preset", "2", "--out", s(&d.join("m.bin"))]);
    assert_eq!(out.status.code(), Some(3), "{}", String::from_utf8_lossy(&out.stderr));

    let out = camtrap(&["evaluate", "--pred", s(&d.join("missing.csv")), "--truth", s(&manifest)]);
    assert_eq!(out.status.code(), Some(4));

    // preset and manual flags are mutually exclusive
    let out = camtrap(&[
        "train", "--manifest", s(&manifest), "--features", s(&features), "--preset", "1", "--batch-size", "4", "--out",
        s(&d.join("m.bin")),
    ]);
    assert_eq!(out.status.code(), Some(2));

    let preds = d.join("p.csv");
    std::fs::write(&preds, "sequence_id,image_id,empty,zebra\nA,1,0.5,0.5\n").unwrap();
    let out = camtrap(&["ensemble", "--in", s(&preds), s(&preds), "--kind", "mean", "--weights", "0.9,0.9", "--out", s(&d.join("e.csv"))]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn manual_training_flags_and_custom_empty_name() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let manifest = d.join("m.csv");
    std::fs::write(
        &manifest,
        "season,sequence_id,image_id,feature_row,blank,zebra\n1,A,1,0,1,0\n2,B,1,1,0,1\n9,C,1,2,1,0\n",
    )
    .unwrap();
    let features = d.join("f.bin");
    FeatureStore::from_rows(&[vec![0.0, 1.0], vec![1.0, 0.0], vec![0.5, 0.5]]).unwrap().save(&features).unwrap();
    let model = d.join("m.bin");
    ok(&[
        "--empty-name", "blank", "train", "--manifest", s(&manifest), "--features", s(&features), "--batch-size", "2",
        "--grad-accum", "1", "--strategy", "season_by_season", "--dropout", "0.0", "--hidden", "", "--out", s(&model),
    ]);
    assert_eq!(ModelState::load(&model).unwrap().layers.len(), 1);
    let out = camtrap(&["train", "--manifest", s(&manifest), "--features", s(&features), "--preset", "1", "--out", s(&model)]);
    assert_eq!(out.status.code(), Some(2), "no column named empty");
}

#[test]
fn ablation_subcommand_writes_report() {
    let dir = tempfile::tempdir().unwrap();
    let data = synth_into(dir.path(), "2");
    let out = dir.path().join("ablation.csv");
    ok(&["ablation", "--data", s(&data), "--presets", "1,2", "--seeds", "3,4", "--out", s(&out)]);
    let text = std::fs::read_to_string(&out).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "entry,seed,agg_log_loss_normalized,agg_log_loss_raw");
    // 2 seeds x (2 models + 3 ensembles) + 5 mean rows
    assert_eq!(lines.len(), 1 + 10 + 5);
    assert!(lines.iter().any(|l| l.starts_with("ensemble_class_aware,mean,")));
}
