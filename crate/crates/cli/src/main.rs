mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use slotloc_core::corpus::CorpusError;
use slotloc_core::evaluation::EvalError;
use slotloc_core::filtering::{FilterError, OracleError};
use slotloc_core::generation::GenerationError;
use slotloc_core::ifm::IfmError;
use slotloc_core::prompt::PromptError;

use crate::config::{Config, ConfigError};

#[derive(Parser)]
#[command(
    name = "slotloc",
    version,
    about = "Localize IC+ST training data into other languages"
)]
struct Cli {
    /// Pipeline config (TOML).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Overrides seeds.base_seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads; overrides pipeline.jobs.
    #[arg(long, global = true)]
    jobs: Option<usize>,
    #[arg(long, global = true, default_value = "info")]
    log_level: log::LevelFilter,
    /// `section.key=value`, applied after the config file.
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    overrides: Vec<String>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Validate a corpus and convert it between formats.
    Ingest(IngestArgs),
    /// Write rendered prompts, or prompt/target pairs from a parallel corpus.
    ExtractPrompts(ExtractArgs),
    /// Sample candidates for every English record and target language.
    Generate,
    /// Filter candidate pools and select one output per prompt.
    Filter,
    /// Iteratively refilter pools with a retrained tagger.
    Ifm(IfmArgs),
    /// Score taggers trained on stage outputs against validation sets.
    Evaluate(EvaluateArgs),
    /// Success-rate tables from stage statistics.
    Report(ReportArgs),
}

#[derive(Args)]
pub struct IngestArgs {
    #[arg(long)]
    pub input: PathBuf,
    /// Inferred from the extension when omitted.
    #[arg(long)]
    pub input_format: Option<String>,
    /// Validate only when omitted.
    #[arg(long)]
    pub output: Option<PathBuf>,
    #[arg(long)]
    pub output_format: Option<String>,
}

#[derive(Args)]
pub struct ExtractArgs {
    /// Parallel corpus with replacement-method judgments.
    #[arg(long, requires = "locale")]
    pub parallel: Option<PathBuf>,
    /// Target locale in the parallel corpus, e.g. `de-DE`.
    #[arg(long)]
    pub locale: Option<String>,
    /// Defaults to `<output>/pairs/<locale>.jsonl` or `<output>/prompts/`.
    #[arg(long)]
    pub output: Option<PathBuf>,
}

#[derive(Args)]
pub struct IfmArgs {
    /// Continue from the checkpoints already present.
    #[arg(long)]
    pub resume: bool,
}

#[derive(Args)]
pub struct EvaluateArgs {
    /// Stage outputs to score (`filter`, `ifm`); every stage present when omitted.
    #[arg(long)]
    pub stage: Vec<String>,
}

#[derive(Args)]
pub struct ReportArgs {
    /// `[METHOD=]PATH` of a stats TSV; defaults to the filter stage's.
    #[arg(long)]
    pub stats: Vec<String>,
    /// tsv, markdown or jsonl; all three when omitted.
    #[arg(long)]
    pub format: Vec<String>,
}

fn load_config(cli: &Cli) -> anyhow::Result<Config> {
    let mut cfg = Config::load(cli.config.as_deref(), &cli.overrides)?;
    if let Some(seed) = cli.seed {
        cfg.seeds.base_seed = seed;
    }
    if let Some(jobs) = cli.jobs {
        cfg.pipeline.jobs = jobs;
    }
    Ok(cfg)
}

fn run(cli: &Cli) -> anyhow::Result<()> {
    match &cli.command {
        Command::Ingest(a) => commands::ingest(a),
        Command::ExtractPrompts(a) => commands::extract_prompts(&load_config(cli)?, a),
        Command::Generate => commands::generate(&load_config(cli)?),
        Command::Filter => commands::filter(&load_config(cli)?),
        Command::Ifm(a) => commands::ifm(&load_config(cli)?, a),
        Command::Evaluate(a) => commands::evaluate(&load_config(cli)?, a),
        Command::Report(a) => commands::report(&load_config(cli)?, a),
    }
}

/// 3: backend or oracle unreachable; 2: config or input format; 1: other.
fn exit_code(err: &anyhow::Error) -> u8 {
    let mut code = 1;
    for cause in err.chain() {
        let c = if let Some(e) = cause.downcast_ref::<FilterError>() {
            match e {
                _ if e.is_systemic() => 3,
                FilterError::Prompt(_) | FilterError::Config(_) => 2,
                FilterError::Generation(GenerationError::InvalidConfig(_)) => 2,
                _ => 1,
            }
        } else if let Some(e) = cause.downcast_ref::<GenerationError>() {
            match e {
                _ if e.is_systemic() => 3,
                GenerationError::InvalidConfig(_) => 2,
                _ => 1,
            }
        } else if let Some(e) = cause.downcast_ref::<OracleError>() {
            if e.is_systemic() {
                3
            } else {
                1
            }
        } else if let Some(e) = cause.downcast_ref::<IfmError>() {
            match e {
                IfmError::Oracle(o) | IfmError::Eval(EvalError::Oracle(o)) if o.is_systemic() => 3,
                IfmError::Config(_) | IfmError::Checkpoint { .. } => 2,
                _ => 1,
            }
        } else if let Some(e) = cause.downcast_ref::<EvalError>() {
            match e {
                EvalError::Oracle(o) if o.is_systemic() => 3,
                EvalError::InconsistentStats { .. } => 2,
                _ => 1,
            }
        } else if cause.is::<ConfigError>()
            || cause.is::<CorpusError>()
            || cause.is::<PromptError>()
            || cause.is::<toml::de::Error>()
            || cause.is::<serde_json::Error>()
        {
            2
        } else {
            continue;
        };
        code = code.max(c);
    }
    code
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    env_logger::Builder::new()
        .filter_level(cli.log_level)
        .format_timestamp(None)
        .target(env_logger::Target::Stderr)
        .init();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            log::error!("{e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
