use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Context as _;
use clap::{Parser, Subcommand};
use ldp_cli::commands::{self, Axis, TrainArgs};
use ldp_cli::{CliError, PipelineConfig};
use ldp_core::alignment::Phase;

#[derive(Parser)]
#[command(name = "ldp", version, about = "Report-generation pipeline: prepare, train, evaluate, ablate")]
struct Cli {
    /// TOML pipeline config; built-in defaults when omitted.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Run seed; overrides the config's `seed`.
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Build image-report pairs, the frame ledger and the split.
    Prep {
        #[arg(long)]
        out: PathBuf,
    },
    /// Train adapters for one phase.
    Train {
        #[arg(long, value_parser = parse_phase)]
        phase: Phase,
        /// Directory written by `prep`.
        #[arg(long)]
        corpus: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Checkpoint to continue from.
        #[arg(long)]
        init: Option<PathBuf>,
        /// SFT checkpoint used as the frozen DPO reference.
        #[arg(long)]
        reference: Option<PathBuf>,
    },
    /// Generate for the evaluation split and score the reports.
    Eval {
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        corpus: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Physician score sheet for the PS column.
        #[arg(long)]
        sheets: Option<PathBuf>,
    },
    /// Trainable-parameter accounting.
    Efficiency {
        /// Base model parameter count, e.g. 7e9.
        #[arg(long, requires = "trainable")]
        base_params: Option<f64>,
        /// Trainable parameter count, e.g. 8.4e6.
        #[arg(long, requires = "base_params")]
        trainable: Option<f64>,
    },
    /// Compare LoRA ranks or alignment phases.
    Ablate {
        #[arg(long)]
        corpus: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Comma-separated ranks; the config's list when neither axis is given.
        #[arg(long, value_delimiter = ',', conflicts_with = "phases")]
        ranks: Option<Vec<usize>>,
        /// Comma-separated variants such as `sft,sft+dpo`.
        #[arg(long, value_delimiter = ',')]
        phases: Option<Vec<String>>,
    },
    /// PS table and rater agreement from a score sheet.
    Score {
        #[arg(long)]
        sheets: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn parse_phase(s: &str) -> Result<Phase, String> {
    s.parse().map_err(|e: ldp_core::LdpError| e.to_string())
}

fn run(cli: Cli) -> anyhow::Result<()> {
    let cfg = match &cli.config {
        Some(p) => PipelineConfig::load(p).with_context(|| format!("loading {}", p.display()))?,
        None => PipelineConfig::default(),
    }
    .with_seed(cli.seed);
    match cli.command {
        Command::Prep { out } => {
            let m = commands::prep(&cfg, &out)?;
            println!("{}", serde_json::to_string_pretty(&m.metrics)?);
        }
        Command::Train { phase, corpus, out, init, reference } => {
            let args = TrainArgs {
                phase,
                corpus: &corpus,
                init: init.as_deref(),
                reference: reference.as_deref(),
                out: &out,
            };
            let m = commands::train(&cfg, &args)?;
            println!("{}", serde_json::to_string_pretty(&m.metrics)?);
        }
        Command::Eval { checkpoint, corpus, out, sheets } => {
            commands::eval(&cfg, &checkpoint, &corpus, sheets.as_deref(), &out)?;
            print!("{}", std::fs::read_to_string(out.join("report.tsv"))?);
        }
        Command::Efficiency { base_params, trainable } => {
            let totals = base_params.zip(trainable);
            print!("{}", commands::render_efficiency(&commands::efficiency(&cfg, totals)?));
        }
        Command::Ablate { corpus, out, ranks, phases } => {
            let axis = match (ranks, phases) {
                (_, Some(p)) => Axis::Phases(p),
                (Some(r), None) => Axis::Ranks(r),
                (None, None) => Axis::Ranks(cfg.ablate.ranks.clone()),
            };
            commands::ablate(&cfg, &corpus, &axis, &out)?;
            print!("{}", std::fs::read_to_string(out.join("ablation.tsv"))?);
        }
        Command::Score { sheets, out } => {
            print!("{}", commands::score(&cfg, &sheets, out.as_deref())?.render());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            let code = e.downcast_ref::<CliError>().map_or(5, CliError::exit_code);
            ExitCode::from(code)
        }
    }
}
