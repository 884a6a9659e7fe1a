use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand};

use camtrap::ablation::{run_ablation, AblationConfig, EvalData};
use camtrap::ensemble::{aggregate_sequence, combine, weighted_combine, CombinerKind};
use camtrap::features::FeatureStore;
use camtrap::manifest::Manifest;
use camtrap::metrics::{evaluate, GroundTruth, DEFAULT_EMPTY_THRESHOLD};
use camtrap::predictions::PredictionTable;
use camtrap::run::PipelineRun;
use camtrap::sampler::{build_plan, SamplingKind, SamplingStrategy, DEFAULT_FLIP_PROBABILITY};
use camtrap::schedule::{reference_warmup_steps, write_schedule_csv, ScheduleConfig, END_LR, MAX_LR};
use camtrap::synth::{synth, SplitPaths, SynthConfig};
use camtrap::trainer::{predict_tta, train_one_epoch, Preset, TrainConfig, TrainingData, DEFAULT_HIDDEN_WIDTH};
use camtrap::{Error, Result};

#[derive(Parser)]
#[command(name = "camtrap", version, about = "Single-epoch camera-trap training, ensembling and scoring")]
struct Cli {
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    /// Name of the category column that marks empty images.
    #[arg(long, global = true, default_value = "empty")]
    empty_name: String,
    /// Suppress the run record on stderr.
    #[arg(long, global = true)]
    quiet: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic dataset (manifest, features, flipped features, truth).
    Synth(SynthArgs),
    /// Write the single-epoch visitation order as `position,record_index,flip`.
    SamplePlan(SamplePlanArgs),
    /// Write the learning rate of every optimizer step as `step,lr`.
    ScheduleDump(ScheduleArgs),
    /// Train one model for exactly one pass over the manifest.
    Train(TrainArgs),
    /// Write per-image probabilities for a manifest.
    Predict(PredictArgs),
    /// Combine prediction files and optionally aggregate them to sequences.
    Ensemble(EnsembleArgs),
    /// Score sequence-level predictions against ground truth.
    Evaluate(EvaluateArgs),
    /// Train the presets per seed on `train_*` files and score them and their ensembles on `test_*` files.
    Ablation(AblationArgs),
}

#[derive(Args)]
struct SynthArgs {
    #[arg(long)]
    out: PathBuf,
    /// Animal categories (the empty class is added on top).
    #[arg(long, default_value_t = 3)]
    categories: usize,
    #[arg(long, default_value_t = 1000)]
    sequences: usize,
    #[arg(long, default_value_t = 0)]
    holdout_sequences: usize,
    #[arg(long, default_value_t = 1)]
    min_images: usize,
    #[arg(long, default_value_t = 3)]
    max_images: usize,
    #[arg(long, default_value_t = 0.75)]
    empty_fraction: f64,
    #[arg(long, default_value_t = 10)]
    seasons: usize,
    #[arg(long, default_value_t = 0.1)]
    co_occurrence: f64,
    #[arg(long, default_value_t = 1.0)]
    imbalance: f64,
    #[arg(long, default_value_t = 16)]
    feature_dim: usize,
    #[arg(long, default_value_t = 6.0)]
    separation: f64,
    #[arg(long, default_value_t = 1.0)]
    noise: f64,
    #[arg(long, default_value_t = 0.5)]
    sequence_noise: f64,
}

#[derive(Args)]
struct SamplePlanArgs {
    #[arg(long)]
    manifest: PathBuf,
    #[arg(long, value_parser = parse_kind)]
    strategy: SamplingKind,
    #[arg(long, value_delimiter = ',', default_value = "9,10")]
    tail_seasons: Vec<String>,
    #[arg(long, default_value_t = DEFAULT_FLIP_PROBABILITY)]
    flip_probability: f64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct ScheduleArgs {
    #[arg(long)]
    batch_size: usize,
    #[arg(long)]
    grad_accum: usize,
    #[arg(long)]
    total_steps: usize,
    /// Overrides the warm-up derived from batch size and accumulation.
    #[arg(long)]
    warmup_steps: Option<usize>,
    #[arg(long, default_value_t = MAX_LR)]
    max_lr: f64,
    #[arg(long, default_value_t = END_LR)]
    end_lr: f64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct TrainArgs {
    #[arg(long)]
    manifest: PathBuf,
    #[arg(long)]
    features: PathBuf,
    #[arg(long)]
    flipped_features: Option<PathBuf>,
    /// Reference configuration 1-4; replaces the four manual flags.
    #[arg(long, conflicts_with_all = ["batch_size", "grad_accum", "strategy", "dropout"])]
    preset: Option<u8>,
    #[arg(long, required_unless_present = "preset")]
    batch_size: Option<usize>,
    #[arg(long, required_unless_present = "preset")]
    grad_accum: Option<usize>,
    #[arg(long, value_parser = parse_kind, required_unless_present = "preset")]
    strategy: Option<SamplingKind>,
    #[arg(long, required_unless_present = "preset")]
    dropout: Option<f64>,
    /// Hidden layer widths; pass an empty string for a linear model.
    #[arg(long, default_value_t = DEFAULT_HIDDEN_WIDTH.to_string())]
    hidden: String,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct PredictArgs {
    #[arg(long)]
    model: PathBuf,
    #[arg(long)]
    manifest: PathBuf,
    #[arg(long)]
    features: PathBuf,
    #[arg(long)]
    flipped_features: Option<PathBuf>,
    #[arg(long)]
    tta_flip: bool,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct EnsembleArgs {
    #[arg(long = "in", num_args = 1.., required = true)]
    inputs: Vec<PathBuf>,
    #[arg(long, value_parser = |s: &str| s.parse::<CombinerKind>().map_err(|e| e.to_string()))]
    kind: CombinerKind,
    #[arg(long, value_delimiter = ',')]
    weights: Option<Vec<f64>>,
    #[arg(long)]
    aggregate_sequences: bool,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct EvaluateArgs {
    #[arg(long)]
    pred: PathBuf,
    #[arg(long)]
    truth: PathBuf,
    #[arg(long, default_value_t = DEFAULT_EMPTY_THRESHOLD)]
    threshold: f64,
}

#[derive(Args)]
struct AblationArgs {
    /// Directory written by `synth` with a holdout split.
    #[arg(long)]
    data: PathBuf,
    #[arg(long, value_delimiter = ',', default_value = "1,2,3,4")]
    presets: Vec<u8>,
    #[arg(long, value_delimiter = ',', default_value = "0,1")]
    seeds: Vec<u64>,
    #[arg(long)]
    tta_flip: bool,
    #[arg(long)]
    out: PathBuf,
}

fn parse_kind(s: &str) -> std::result::Result<SamplingKind, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

fn parse_hidden(s: &str) -> Result<Vec<usize>> {
    s.split(',')
        .map(str::trim)
        .filter(|p| !p.is_empty())
        .map(|p| p.parse().map_err(|_| Error::Config(format!("bad hidden width {p:?}"))))
        .collect()
}

fn load_optional(path: Option<&Path>, run: &mut PipelineRun) -> Result<Option<FeatureStore>> {
    path.map(|p| {
        run.input(p)?;
        FeatureStore::load(p)
    })
    .transpose()
}

fn execute(cli: &Cli, run: &mut PipelineRun) -> Result<()> {
    run.seed = Some(cli.seed);
    run.flag("empty_name", &cli.empty_name);
    match &cli.command {
        Command::Synth(a) => {
            let cfg = SynthConfig {
                categories: a.categories,
                sequences: a.sequences,
                holdout_sequences: a.holdout_sequences,
                images_per_sequence: (a.min_images, a.max_images),
                empty_fraction: a.empty_fraction,
                seasons: a.seasons,
                co_occurrence: a.co_occurrence,
                imbalance: a.imbalance,
                feature_dim: a.feature_dim,
                separation: a.separation,
                noise: a.noise,
                sequence_noise: a.sequence_noise,
                seed: cli.seed,
            };
            run.flag("synth", format!("{cfg:?}"));
            for path in synth(&cfg)?.write(&a.out)? {
                run.output(&path);
            }
        }
        Command::SamplePlan(a) => {
            run.input(&a.manifest)?;
            run.flag("strategy", a.strategy)
                .flag("tail_seasons", a.tail_seasons.join(","))
                .flag("flip_probability", a.flip_probability);
            let manifest = Manifest::load(&a.manifest, &cli.empty_name)?;
            let strategy = SamplingStrategy::with_tail_seasons(a.strategy, a.tail_seasons.clone())?;
            let plan = build_plan(&manifest, &strategy, cli.seed, a.flip_probability)?;
            let file = std::fs::File::create(&a.out).map_err(|e| io_error(&a.out, e))?;
            plan.write_csv(std::io::BufWriter::new(file))?;
            run.output(&a.out);
        }
        Command::ScheduleDump(a) => {
            if a.batch_size == 0 || a.grad_accum == 0 {
                return Err(Error::Config("batch size and gradient accumulation must be positive".into()));
            }
            let warmup = a.warmup_steps.unwrap_or_else(|| reference_warmup_steps(a.batch_size, a.grad_accum));
            let cfg = ScheduleConfig::new(warmup, a.max_lr, a.end_lr, a.total_steps)?;
            run.flag("schedule", format!("{cfg:?}"));
            let file = std::fs::File::create(&a.out).map_err(|e| io_error(&a.out, e))?;
            write_schedule_csv(&cfg, std::io::BufWriter::new(file))?;
            run.output(&a.out);
        }
        Command::Train(a) => {
            run.input(&a.manifest)?.input(&a.features)?;
            let manifest = Manifest::load(&a.manifest, &cli.empty_name)?;
            let features = FeatureStore::load(&a.features)?;
            let flipped = load_optional(a.flipped_features.as_deref(), run)?;
            let mut cfg = match a.preset {
                Some(n) => Preset::from_number(n)?.config(cli.seed),
                None => TrainConfig::new(
                    a.batch_size.expect("required by clap"),
                    a.grad_accum.expect("required by clap"),
                    SamplingStrategy::new(a.strategy.expect("required by clap")),
                    a.dropout.expect("required by clap"),
                    cli.seed,
                )?,
            };
            cfg.hidden_dims = parse_hidden(&a.hidden)?;
            cfg.validate()?;
            let schedule = cfg.reference_schedule(manifest.len())?;
            run.flag("train", format!("{cfg:?}")).flag("schedule", format!("{schedule:?}"));
            let data = TrainingData::new(&manifest, &features).with_flipped(flipped.as_ref());
            let model = train_one_epoch(data, &cfg, &schedule)?;
            model.save(&a.out)?;
            run.output(&a.out);
        }
        Command::Predict(a) => {
            run.input(&a.model)?.input(&a.manifest)?.input(&a.features)?;
            run.flag("tta_flip", a.tta_flip);
            let model = camtrap::trainer::ModelState::load(&a.model)?;
            let manifest = Manifest::load(&a.manifest, &cli.empty_name)?;
            let features = FeatureStore::load(&a.features)?;
            let flipped = load_optional(a.flipped_features.as_deref(), run)?;
            let table = predict_tta(&model, &manifest, &features, flipped.as_ref(), a.tta_flip)?;
            table.save(&a.out)?;
            run.output(&a.out);
        }
        Command::Ensemble(a) => {
            run.flag("kind", a.kind).flag("aggregate_sequences", a.aggregate_sequences);
            let mut tables = Vec::with_capacity(a.inputs.len());
            for p in &a.inputs {
                run.input(p)?;
                tables.push(PredictionTable::load(p)?);
            }
            let empty_index = tables[0].category_index(&cli.empty_name)?;
            let mut combined = match &a.weights {
                Some(w) => {
                    run.flag("weights", format!("{w:?}"));
                    weighted_combine(&tables, w, a.kind, empty_index)?
                }
                None => combine(&tables, a.kind, empty_index)?,
            };
            if a.aggregate_sequences {
                combined = aggregate_sequence(&combined)?;
            }
            combined.save(&a.out)?;
            run.output(&a.out);
        }
        Command::Evaluate(a) => {
            run.input(&a.pred)?.input(&a.truth)?;
            run.flag("threshold", a.threshold);
            let pred = PredictionTable::load(&a.pred)?;
            let truth = GroundTruth::load(&a.truth, &cli.empty_name)?;
            print!("{}", evaluate(&pred, &truth, a.threshold)?);
        }
        Command::Ablation(a) => {
            let train = SplitPaths::new(&a.data, "train");
            let test = SplitPaths::new(&a.data, "test");
            for p in train.all().into_iter().chain(test.all()) {
                run.input(p)?;
            }
            let train_manifest = Manifest::load(&train.manifest, &cli.empty_name)?;
            let train_features = FeatureStore::load(&train.features)?;
            let train_flipped = FeatureStore::load(&train.flipped)?;
            let test_manifest = Manifest::load(&test.manifest, &cli.empty_name)?;
            let test_features = FeatureStore::load(&test.features)?;
            let test_flipped = FeatureStore::load(&test.flipped)?;
            let truth = GroundTruth::load(&test.truth, &cli.empty_name)?;
            let config = AblationConfig {
                presets: a.presets.iter().map(|&n| Preset::from_number(n)).collect::<Result<_>>()?,
                seeds: a.seeds.clone(),
                tta_flip: a.tta_flip,
                hidden_dims: None,
            };
            run.flag("ablation", format!("{config:?}"));
            let report = run_ablation(
                TrainingData::new(&train_manifest, &train_features).with_flipped(Some(&train_flipped)),
                EvalData {
                    manifest: &test_manifest,
                    features: &test_features,
                    flipped: Some(&test_flipped),
                    truth: &truth,
                },
                &config,
            )?;
            let file = std::fs::File::create(&a.out).map_err(|e| io_error(&a.out, e))?;
            report.write_csv(std::io::BufWriter::new(file))?;
            run.output(&a.out);
        }
    }
    Ok(())
}

fn io_error(path: &Path, e: std::io::Error) -> Error {
    Error::Io {
        path: path.to_path_buf(),
        source: e,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let started = Instant::now();
    let name = match &cli.command {
        Command::Synth(_) => "synth",
        Command::SamplePlan(_) => "sample-plan",
        Command::ScheduleDump(_) => "schedule-dump",
        Command::Train(_) => "train",
        Command::Predict(_) => "predict",
        Command::Ensemble(_) => "ensemble",
        Command::Evaluate(_) => "evaluate",
        Command::Ablation(_) => "ablation",
    };
    let mut run = PipelineRun::new(name);
    match execute(&cli, &mut run) {
        Ok(()) => {
            run.finish(started.elapsed());
            if !cli.quiet {
                eprintln!("{}", run.to_json());
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
