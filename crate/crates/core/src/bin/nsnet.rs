use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Parser, Subcommand, ValueEnum};
use nsnet::aggregator::Ablation;
use nsnet::config::RunConfig;
use nsnet::data::Split;
use nsnet::eval::{EvalReport, ModelKind};
use nsnet::pipeline::Pipeline;

#[derive(Parser)]
#[command(name = "nsnet", version, about = "Neural-symbolic textual entailment")]
struct Cli {
    /// JSON run configuration; unspecified fields take their defaults.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Build the KB index snapshot from a subject/predicate/object TSV.
    Index { kb: PathBuf },
    /// Write the sub-facts of a split in the replay format.
    Decompose { split: String },
    /// Train the entailment network on whole pairs.
    Pretrain,
    /// Jointly train NSnet from the pretrained network.
    Train,
    /// Score a model on a split and write text and JSON reports.
    Eval {
        #[arg(long, value_enum)]
        model: Model,
        #[arg(long)]
        split: String,
        #[arg(long, value_enum)]
        ablate: Option<Ablate>,
        /// A previous JSON report to compare against (McNemar test).
        #[arg(long)]
        baseline: Option<PathBuf>,
    },
    /// Score a single premise/hypothesis pair.
    Predict {
        #[arg(long)]
        premise: String,
        #[arg(long)]
        hypothesis: String,
    },
    /// Per-sub-fact breakdown of one dataset example.
    Explain {
        #[arg(long)]
        id: String,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Model {
    Nsnet,
    Ensemble,
    #[value(name = "neural_base")]
    NeuralBase,
    #[value(name = "neural_decomposed")]
    NeuralDecomposed,
    Majority,
}

#[derive(Clone, Copy, ValueEnum)]
enum Ablate {
    Matcher,
    Lookup,
    Both,
}

fn run(cli: Cli) -> Result<()> {
    let mut config = match &cli.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    if let Some(seed) = cli.seed {
        config = config.with_seed(seed);
    }
    let pipeline = Pipeline::new(config)?;

    match cli.command {
        Command::Index { kb } => {
            let s = pipeline.index(&kb)?;
            println!(
                "indexed {} tuples ({} skipped) -> {}",
                s.loaded,
                s.skipped,
                s.path.display()
            );
        }
        Command::Decompose { split } => {
            let path = pipeline.decompose(split.parse::<Split>()?)?;
            println!("{}", path.display());
        }
        Command::Pretrain => {
            let s = pipeline.pretrain()?;
            println!("best epoch {} -> {}", s.best_epoch, s.checkpoint.display());
        }
        Command::Train => {
            let s = pipeline.train()?;
            println!("best epoch {} -> {}", s.best_epoch, s.checkpoint.display());
        }
        Command::Eval {
            model,
            split,
            ablate,
            baseline,
        } => {
            let model = match model {
                Model::Nsnet => ModelKind::Nsnet,
                Model::Ensemble => ModelKind::Ensemble,
                Model::NeuralBase => ModelKind::NeuralBase,
                Model::NeuralDecomposed => ModelKind::NeuralDecomposed,
                Model::Majority => ModelKind::Majority,
            };
            let ablation = match ablate {
                None => pipeline.config.ablation,
                Some(Ablate::Matcher) => Ablation {
                    disable_matcher: true,
                    disable_lookup: false,
                },
                Some(Ablate::Lookup) => Ablation {
                    disable_matcher: false,
                    disable_lookup: true,
                },
                Some(Ablate::Both) => Ablation::BOTH,
            };
            let mut report = pipeline.evaluate(model, split.parse()?, ablation)?;
            if let Some(path) = baseline {
                let base = EvalReport::load(&path)?;
                report
                    .compare_with(&base)
                    .with_context(|| format!("comparing with {}", path.display()))?;
                report.save(&pipeline.artifact("reports"))?;
            }
            print!(
                "{}",
                report.to_text().split("\n\n").next().unwrap_or_default()
            );
            println!();
        }
        Command::Predict {
            premise,
            hypothesis,
        } => {
            print!("{}", pipeline.predict(&premise, &hypothesis)?.to_text());
        }
        Command::Explain { id } => {
            print!("{}", pipeline.explain(&id)?.to_text());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let code = e
                .downcast_ref::<nsnet::Error>()
                .map_or(1, nsnet::Error::exit_code);
            let category = e
                .downcast_ref::<nsnet::Error>()
                .map_or("error", nsnet::Error::category);
            eprintln!("nsnet: {category}: {e:#}");
            ExitCode::from(code as u8)
        }
    }
}
