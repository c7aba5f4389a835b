use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use repseg::decode::SegmentFile;
use repseg::features::FeatureVariant;
use repseg::harness::{
    load_dataset, run_experiment, synth_generate, train_final, write_dataset, ExperimentConfig, Scope, SynthParams,
    TrainedModel,
};
use repseg::neural::{grad_check, Checkpoint, Head, ModelConfig};
use repseg::skeleton::read_skeleton;
use repseg::{Error, ErrorClass};
use serde_json::json;

#[derive(Parser)]
#[command(name = "repseg", version, about = "Repetition segmentation and counting for skeleton recordings")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Validate a directory of samples and copy it to the interchange layout.
    Ingest {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        output: PathBuf,
    },
    /// Generate synthetic recordings with exact annotations.
    Synth(SynthArgs),
    /// Train one model on a whole dataset and save a checkpoint.
    Train {
        #[command(flatten)]
        run: RunArgs,
        #[arg(long)]
        checkpoint: PathBuf,
    },
    /// Cross-validate and write a run directory.
    Eval {
        #[command(flatten)]
        run: RunArgs,
    },
    /// Segment one recording with a trained checkpoint.
    Segment {
        #[arg(long)]
        checkpoint: PathBuf,
        /// Skeleton CSV; a `.meta.json` sidecar is used when present.
        #[arg(long)]
        input: PathBuf,
        /// Fail unless the checkpoint has this head.
        #[arg(long)]
        head: Option<Head>,
        /// Defaults to stdout.
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Compare analytic and finite-difference gradients.
    Gradcheck(GradcheckArgs),
}

#[derive(Args)]
struct SynthArgs {
    /// JSON file with generator settings; flags override it.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    output: PathBuf,
    #[arg(long)]
    n: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    min_reps: Option<usize>,
    #[arg(long)]
    max_reps: Option<usize>,
    #[arg(long)]
    noise: Option<f64>,
}

#[derive(Args)]
struct RunArgs {
    /// `run.json` experiment config; flags override it.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    data: Option<PathBuf>,
    #[arg(long)]
    output_dir: Option<PathBuf>,
    #[arg(long)]
    head: Option<Head>,
    #[arg(long)]
    features: Option<FeatureVariant>,
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    learning_rate: Option<f64>,
    #[arg(long)]
    hidden: Option<usize>,
    #[arg(long)]
    layers: Option<usize>,
    #[arg(long)]
    folds: Option<usize>,
    #[arg(long, value_parser = ["general", "exercise_specific"])]
    scope: Option<String>,
    #[arg(long)]
    subject_disjoint: bool,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    threads: Option<usize>,
}

#[derive(Args)]
struct GradcheckArgs {
    #[arg(long, default_value_t = 6)]
    input_dim: usize,
    #[arg(long, default_value_t = 12)]
    hidden: usize,
    #[arg(long, default_value_t = 20)]
    length: usize,
    #[arg(long, default_value_t = 1e-4)]
    tolerance: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Check only this many LSTM layers instead of 1 to 3.
    #[arg(long)]
    layers: Option<usize>,
    /// Check only this head instead of all three.
    #[arg(long)]
    head: Option<Head>,
    /// Only the configuration without the convolution layer.
    #[arg(long, conflicts_with = "conv_only")]
    no_conv: bool,
    /// Only the configuration with the convolution layer.
    #[arg(long)]
    conv_only: bool,
}

impl RunArgs {
    fn resolve(&self) -> repseg::Result<ExperimentConfig> {
        let mut cfg = match &self.config {
            Some(path) => ExperimentConfig::load(path)?,
            None => ExperimentConfig::default(),
        };
        if let Some(v) = &self.data {
            cfg.dataset_path = v.clone();
        }
        if let Some(v) = &self.output_dir {
            cfg.output_dir = v.clone();
        }
        if let Some(v) = self.head {
            cfg.head = v;
        }
        if let Some(v) = self.features {
            cfg.pipeline.feature_variant = v;
        }
        if let Some(v) = self.epochs {
            cfg.schedule.epochs = v;
        }
        if let Some(v) = self.learning_rate {
            cfg.schedule.learning_rate = v;
        }
        if let Some(v) = self.hidden {
            cfg.model.hidden_dim = Some(v);
        }
        if let Some(v) = self.layers {
            cfg.model.lstm_layers = v;
        }
        if let Some(v) = self.folds {
            cfg.folds = v;
        }
        if let Some(v) = &self.scope {
            cfg.scope = if v == "general" { Scope::General } else { Scope::ExerciseSpecific };
        }
        if self.subject_disjoint {
            cfg.subject_disjoint = true;
        }
        if let Some(v) = self.seed {
            cfg.seed = v;
        }
        if let Some(v) = self.threads {
            cfg.threads = Some(v);
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

enum Failure {
    Lib(Error),
    GradCheck(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Lib(e)
    }
}

fn print_json(value: &serde_json::Value) {
    println!("{}", serde_json::to_string_pretty(value).expect("json value serializes"));
}

fn ingest(input: &Path, output: &Path) -> Result<(), Failure> {
    let samples = load_dataset(input)?;
    let manifest = write_dataset(output, &samples)?;
    print_json(&json!({ "samples": manifest.samples.len(), "output": output }));
    Ok(())
}

fn synth(args: &SynthArgs) -> Result<(), Failure> {
    let mut params = match &args.config {
        Some(path) => {
            let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
            serde_json::from_str(&text).map_err(Error::from)?
        }
        None => SynthParams::default(),
    };
    if let Some(v) = args.n {
        params.n_sequences = v;
    }
    if let Some(v) = args.seed {
        params.seed = v;
    }
    if let Some(v) = args.min_reps {
        params.reps_range.0 = v;
    }
    if let Some(v) = args.max_reps {
        params.reps_range.1 = v;
    }
    if let Some(v) = args.noise {
        params.joint_noise_std = v;
    }
    params.validate()?;
    let samples = synth_generate(&params)?;
    let manifest = write_dataset(&args.output, &samples)?;
    print_json(&json!({ "samples": manifest.samples.len(), "output": args.output }));
    Ok(())
}

fn train(run: &RunArgs, checkpoint: &Path) -> Result<(), Failure> {
    let cfg = run.resolve()?;
    let samples = load_dataset(&cfg.dataset_path)?;
    let trained = train_final(&samples, &cfg)?;
    trained.checkpoint().save(checkpoint)?;
    print_json(&json!({
        "checkpoint": checkpoint,
        "samples": samples.len(),
        "final_loss": trained.log.epoch_losses.last(),
    }));
    Ok(())
}

fn eval(run: &RunArgs) -> Result<(), Failure> {
    let cfg = run.resolve()?;
    let (report, dir) = run_experiment(&cfg)?;
    print_json(&json!({ "run_dir": dir, "overall": report.overall }));
    Ok(())
}

fn segment(checkpoint: &Path, input: &Path, head: Option<Head>, output: Option<&Path>) -> Result<(), Failure> {
    let trained = TrainedModel::from_checkpoint(&Checkpoint::load(checkpoint)?)?;
    if let Some(expected) = head {
        if expected != trained.head() {
            return Err(Error::HeadMismatch {
                expected: expected.to_string(),
                actual: trained.head().to_string(),
            }
            .into());
        }
    }
    let seq = read_skeleton(input)?;
    let pred = trained.predict(&seq)?;
    let file = SegmentFile::new(&pred, seq.num_frames(), &seq.meta.exercise_id, &seq.meta.subject_id);
    let text = serde_json::to_string_pretty(&file).map_err(Error::from)?;
    match output {
        Some(path) => fs::write(path, text).map_err(|e| Error::io(path, e))?,
        None => println!("{text}"),
    }
    Ok(())
}

fn gradcheck(args: &GradcheckArgs) -> Result<(), Failure> {
    let layers: Vec<usize> = args.layers.map_or_else(|| vec![1, 2, 3], |l| vec![l]);
    let heads: Vec<Head> = args.head.map_or_else(|| vec![Head::Binary, Head::Density, Head::Count], |h| vec![h]);
    let convs: Vec<bool> = match (args.no_conv, args.conv_only) {
        (true, _) => vec![false],
        (_, true) => vec![true],
        _ => vec![false, true],
    };
    let mut reports = Vec::new();
    let mut worst = 0.0f64;
    for &l in &layers {
        for &conv in &convs {
            for &head in &heads {
                let mut cfg = ModelConfig::new(args.input_dim, head);
                cfg.hidden_dim = args.hidden;
                cfg.conv_channels = args.hidden;
                cfg.lstm_layers = l;
                cfg.use_conv = conv;
                cfg.seed = args.seed;
                let report = grad_check(&cfg, args.length, args.tolerance)?;
                worst = worst.max(report.max_rel_error);
                reports.push(report);
            }
        }
    }
    let passed = reports.iter().all(|r| r.passed);
    print_json(&json!({
        "max_rel_error": worst,
        "tolerance": args.tolerance,
        "passed": passed,
        "configs": reports,
    }));
    if passed {
        Ok(())
    } else {
        Err(Failure::GradCheck(format!("max relative error {worst:e} exceeds {:e}", args.tolerance)))
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Ingest { input, output } => ingest(input, output),
        Command::Synth(args) => synth(args),
        Command::Train { run, checkpoint } => train(run, checkpoint),
        Command::Eval { run } => eval(run),
        Command::Segment { checkpoint, input, head, output } => segment(checkpoint, input, *head, output.as_deref()),
        Command::Gradcheck(args) => gradcheck(args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Lib(e)) => {
            let record = json!({ "error": e.kind(), "message": e.to_string() });
            eprintln!("{record}");
            ExitCode::from(match e.class() {
                ErrorClass::Usage => 2,
                ErrorClass::Data => 3,
                ErrorClass::Numeric => 4,
            })
        }
        Err(Failure::GradCheck(message)) => {
            eprintln!("{}", json!({ "error": "GradientCheckFailed", "message": message }));
            ExitCode::from(4)
        }
    }
}

