use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::error::ErrorKind;
use clap::{Args, Parser, Subcommand};
use deepbof::pipeline::{make_synthetic_corpus, Pipeline, PipelineConfig, Stage, SynthOptions};
use deepbof::{Error, Result};

/// Deep bag-of-features audio tagging.
#[derive(Parser)]
#[command(name = "deepbof", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// TOML run configuration.
    #[arg(long)]
    config: PathBuf,
    /// Overrides the config's root seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Artifact root.
    #[arg(long, default_value = "out")]
    out: PathBuf,
}

#[derive(Subcommand)]
enum Command {
    /// Mel spectrograms and onset functions for every clip.
    Featurize(Common),
    /// Onset-aligned or random training blocks from the train split.
    Sample(Common),
    /// PCA whitening and the sparse feature RBM.
    TrainRbm(Common),
    /// Bag-of-features table for every clip.
    ExtractBof(Common),
    /// Layer-wise ReLU RBM pretraining.
    Pretrain(Common),
    /// Supervised fine-tuning with early stopping on the valid split.
    Finetune(Common),
    /// Test-split metrics.
    Evaluate(Common),
    /// Tag probabilities for the manifest, or for the given WAV files.
    Predict {
        #[command(flatten)]
        common: Common,
        audio: Vec<PathBuf>,
    },
    /// Every stage up to evaluate, reusing finished ones.
    Run(Common),
    /// Writes a synthetic tagged corpus and its manifest.
    SynthCorpus {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value = "corpus")]
        out: PathBuf,
        #[arg(long, default_value_t = 300)]
        clips: usize,
        #[arg(long, default_value_t = 8)]
        tags: usize,
        #[arg(long, default_value_t = 10.0)]
        duration: f64,
    },
}

fn pipeline(common: &Common) -> Result<Pipeline> {
    let mut config = PipelineConfig::load(&common.config)?;
    if let Some(seed) = common.seed {
        config.seed = seed;
    }
    Pipeline::new(config, &common.out)
}

fn stage(common: &Common, stage: Stage) -> Result<()> {
    let p = pipeline(common)?;
    let dir = p.run_stage(stage)?;
    println!("{}", dir.display());
    if stage == Stage::Evaluate {
        print!("{}", std::fs::read_to_string(dir.join("report.txt"))?);
    }
    Ok(())
}

fn print_predictions(p: &Pipeline, paths: &[PathBuf]) -> Result<()> {
    let scores = p.predict_files(paths)?;
    println!("path\t{}", p.manifest().tag_vocabulary.join("\t"));
    for (path, row) in paths.iter().zip(scores.rows()) {
        let cells: Vec<String> = row.iter().map(|v| format!("{v:.6}")).collect();
        println!("{}\t{}", path.display(), cells.join("\t"));
    }
    Ok(())
}

fn synth(config: Option<&Path>, options: &SynthOptions, out: &Path) -> Result<()> {
    if let Some(path) = config {
        PipelineConfig::load(path)?;
    }
    let manifest = make_synthetic_corpus(out, options)?;
    println!("{}", out.join("manifest.tsv").display());
    eprintln!("{} clips, tags: {}", manifest.entries.len(), manifest.tag_vocabulary.join(","));
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Featurize(c) => stage(&c, Stage::Featurize),
        Command::Sample(c) => stage(&c, Stage::Sample),
        Command::TrainRbm(c) => stage(&c, Stage::TrainRbm),
        Command::ExtractBof(c) => stage(&c, Stage::ExtractBof),
        Command::Pretrain(c) => stage(&c, Stage::Pretrain),
        Command::Finetune(c) => stage(&c, Stage::Finetune),
        Command::Evaluate(c) => stage(&c, Stage::Evaluate),
        Command::Predict { common, audio } if audio.is_empty() => stage(&common, Stage::Predict),
        Command::Predict { common, audio } => print_predictions(&pipeline(&common)?, &audio),
        Command::Run(c) => {
            let p = pipeline(&c)?;
            let (report, stages) = p.run_all(true)?;
            for s in stages {
                eprintln!("{}\t{}{}", s.stage, s.dir.display(), if s.reused { "\treused" } else { "" });
            }
            print!("{}", report.to_table());
            Ok(())
        }
        Command::SynthCorpus {
            config,
            seed,
            out,
            clips,
            tags,
            duration,
        } => {
            let mut options = SynthOptions::new(clips, tags, seed);
            options.duration_seconds = duration;
            synth(config.as_deref(), &options, &out)
        }
    }
}

fn one_line(s: &str) -> String {
    s.split_whitespace().collect::<Vec<_>>().join(" ")
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) => e.exit(),
        Err(e) => {
            let text = e.to_string();
            let first = text.lines().next().unwrap_or("").trim_start_matches("error: ");
            eprintln!("error: usage: {}", one_line(first));
            return ExitCode::from(2);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}: {}", e.kind(), one_line(&e.to_string()));
            ExitCode::from(match e {
                Error::Config(_) | Error::ManifestParse { .. } => 2,
                _ => 1,
            })
        }
    }
}
