//! Stage-by-stage command-line driver. Each command reads the previous
//! stage's directory and writes its own; see `faceparts <command> --help`.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use faceparts::config::{FaceRegion, FeatureSource};
use faceparts::pipeline::{self, StageReport};
use faceparts::synth::{write_dataset, SynthParams};
use faceparts::{Manifest, PipelineConfig, Result};

#[derive(Parser)]
#[command(name = "faceparts", version, about = "Facial-parts expression recognition pipeline")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct Common {
    /// Master seed; replaces the config seed and every seed derived from it.
    #[arg(long)]
    seed: Option<u64>,
    /// TOML configuration file (defaults apply to missing keys).
    #[arg(long)]
    config: Option<PathBuf>,
    /// Worker threads (0 = one per core).
    #[arg(long, default_value_t = 0)]
    jobs: usize,
    /// Overrides `features.source`.
    #[arg(long, value_parser = parse_source)]
    feature_source: Option<FeatureSource>,
    /// Overrides `features.region`.
    #[arg(long, value_parser = parse_region)]
    region: Option<FaceRegion>,
}

#[derive(Args)]
struct Stage {
    #[arg(long)]
    manifest: PathBuf,
    /// Previous stage's output directory.
    #[arg(long = "in")]
    input: PathBuf,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Subcommand)]
enum Command {
    /// Rotate and scale every sample to the reference eye geometry.
    Align {
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        common: Common,
    },
    /// Crop the four parts and the whole face from aligned samples.
    Parts {
        #[command(flatten)]
        stage: Stage,
        #[command(flatten)]
        common: Common,
    },
    /// Conv maps (stub encoder or tensor files) or hand-crafted vectors.
    Features {
        #[command(flatten)]
        stage: Stage,
        #[command(flatten)]
        common: Common,
    },
    /// Train one fusion net per modality on the fine-tuning subjects.
    TrainFusion {
        #[command(flatten)]
        stage: Stage,
        #[command(flatten)]
        common: Common,
    },
    /// Write FC7 vectors with the trained nets.
    Extract {
        #[arg(long)]
        manifest: PathBuf,
        /// Output of `features`.
        #[arg(long)]
        features: PathBuf,
        /// Output of `train-fusion`.
        #[arg(long)]
        models: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        common: Common,
    },
    /// Fit PCA on the evaluation subjects and write reduced vectors.
    Pca {
        #[command(flatten)]
        stage: Stage,
        #[command(flatten)]
        common: Common,
    },
    /// Train the polynomial SVM on the reduced vectors.
    Svm {
        #[command(flatten)]
        stage: Stage,
        #[command(flatten)]
        common: Common,
    },
    /// Run the cross-validation protocol and write report.json / report.txt.
    Evaluate {
        #[command(flatten)]
        stage: Stage,
        #[command(flatten)]
        common: Common,
    },
    /// Generate a synthetic texture/depth dataset with a manifest.
    Synth {
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 10)]
        subjects: usize,
        #[command(flatten)]
        common: Common,
    },
    /// Mean inner-eye distance over a random batch of the manifest's faces.
    RefDistance {
        #[arg(long)]
        manifest: PathBuf,
        /// Batch size (all samples when omitted).
        #[arg(long)]
        batch: Option<usize>,
        #[command(flatten)]
        common: Common,
    },
}

fn parse_source(s: &str) -> std::result::Result<FeatureSource, String> {
    s.parse().map_err(|e: faceparts::Error| e.to_string())
}

fn parse_region(s: &str) -> std::result::Result<FaceRegion, String> {
    match s.replace('-', "_").as_str() {
        "parts" => Ok(FaceRegion::Parts),
        "whole_face" => Ok(FaceRegion::WholeFace),
        _ => Err(format!("unknown region {s:?}, expected parts or whole-face")),
    }
}

impl Common {
    fn config(&self) -> Result<PipelineConfig> {
        let mut cfg = match &self.config {
            Some(path) => PipelineConfig::load(path)?,
            None => PipelineConfig::default(),
        };
        if let Some(seed) = self.seed {
            cfg = cfg.with_seed(seed);
        }
        if let Some(source) = self.feature_source {
            cfg.features.source = source;
        }
        if let Some(region) = self.region {
            cfg.features.region = region;
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

impl Command {
    fn common(&self) -> &Common {
        match self {
            Command::Align { common, .. }
            | Command::Parts { common, .. }
            | Command::Features { common, .. }
            | Command::TrainFusion { common, .. }
            | Command::Extract { common, .. }
            | Command::Pca { common, .. }
            | Command::Svm { common, .. }
            | Command::Evaluate { common, .. }
            | Command::Synth { common, .. }
            | Command::RefDistance { common, .. } => common,
        }
    }
}

fn stage_fn(
    f: fn(&Manifest, &Path, &Path, &PipelineConfig) -> Result<StageReport>,
    stage: &Stage,
    cfg: &PipelineConfig,
) -> Result<StageReport> {
    f(&Manifest::read(&stage.manifest)?, &stage.input, &stage.out, cfg)
}

fn run(command: &Command, cfg: &PipelineConfig) -> Result<Option<StageReport>> {
    let report = match command {
        Command::Align { manifest, out, .. } => pipeline::align_stage(&Manifest::read(manifest)?, out, cfg)?,
        Command::Parts { stage, .. } => stage_fn(pipeline::parts_stage, stage, cfg)?,
        Command::Features { stage, .. } => stage_fn(pipeline::features_stage, stage, cfg)?,
        Command::TrainFusion { stage, .. } => stage_fn(pipeline::train_fusion_stage, stage, cfg)?,
        Command::Extract {
            manifest,
            features,
            models,
            out,
            ..
        } => pipeline::extract_stage(&Manifest::read(manifest)?, features, models, out, cfg)?,
        Command::Pca { stage, .. } => stage_fn(pipeline::pca_stage, stage, cfg)?,
        Command::Svm { stage, .. } => stage_fn(pipeline::svm_stage, stage, cfg)?,
        Command::Evaluate { stage, .. } => {
            let report = pipeline::evaluate_stage(&Manifest::read(&stage.manifest)?, &stage.input, &stage.out, cfg)?;
            print!("{}", report.to_text());
            return Ok(None);
        }
        Command::Synth { out, subjects, .. } => {
            let manifest = write_dataset(out, *subjects, cfg.seed, &SynthParams::default())?;
            println!("wrote {} samples to {}", manifest.records.len(), out.display());
            return Ok(None);
        }
        Command::RefDistance { manifest, batch, .. } => {
            let d = pipeline::reference_distance(&Manifest::read(manifest)?, *batch, cfg.seed)?;
            println!("{d:.4}");
            return Ok(None);
        }
    };
    Ok(Some(report))
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    let common = cli.command.common().clone();
    let outcome = common
        .config()
        .and_then(|cfg| pipeline::with_jobs(common.jobs, || run(&cli.command, &cfg)).and_then(|r| r));
    match outcome {
        Ok(None) => ExitCode::SUCCESS,
        Ok(Some(report)) => {
            eprintln!("{}: {} processed, {} failed", report.stage, report.processed, report.failures.len());
            if report.is_success() {
                ExitCode::SUCCESS
            } else {
                ExitCode::FAILURE
            }
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
