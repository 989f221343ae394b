//! `scenemocap`: contact annotation, trajectory optimisation, synthetic
//! scenarios and benchmark sweeps from the command line.

mod commands;
mod config;

use std::fmt;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use scenemocap::bench::{BenchSpec, ScenarioKind, Suite};

use crate::config::{load_config, AnnotateConfig, MakeScenarioConfig, OptimizeConfig};

#[derive(Debug)]
pub enum CliError {
    /// Missing or malformed input; exit code 2.
    Input(String),
    /// Failure while computing; exit code 1.
    Runtime(String),
}

impl CliError {
    fn context(self, path: &Path) -> Self {
        match self {
            CliError::Input(m) => CliError::Input(format!("{}: {m}", path.display())),
            CliError::Runtime(m) => CliError::Runtime(format!("{}: {m}", path.display())),
        }
    }

    fn exit_code(&self) -> u8 {
        match self {
            CliError::Input(_) => 2,
            CliError::Runtime(_) => 1,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Input(m) => write!(f, "input error: {m}"),
            CliError::Runtime(m) => write!(f, "error: {m}"),
        }
    }
}

impl From<scenemocap::Error> for CliError {
    fn from(e: scenemocap::Error) -> Self {
        if e.is_input_error() {
            CliError::Input(e.to_string())
        } else {
            CliError::Runtime(e.to_string())
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "scenemocap", version, about = "Scene-aware monocular motion trajectory optimisation")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
struct Common {
    /// JSON configuration; defaults are used when absent.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory.
    #[arg(long)]
    out: PathBuf,
    /// Worker threads (default: all cores).
    #[arg(long)]
    threads: Option<usize>,
    /// Override a configuration field, e.g. `--set stage.n_sam=200`.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Label body and scene contacts of a known motion.
    Annotate {
        #[command(flatten)]
        common: Common,
    },
    /// Run the three-stage optimisation on one sequence.
    Optimize {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        seed: u64,
    },
    /// Evaluate the configured pipeline on synthetic scenarios.
    Bench {
        #[command(flatten)]
        common: Common,
        /// Run this seed only instead of the configured seed list.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Run ablation suites on synthetic scenarios.
    Ablate {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        seed: Option<u64>,
        /// Suite name; repeat for several. All suites when absent.
        #[arg(long = "suite")]
        suites: Vec<String>,
    },
    /// Generate a synthetic scenario with its scene cloud and initial estimate.
    MakeScenario {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        seed: u64,
        #[arg(long, value_parser = parse_kind)]
        kind: Option<ScenarioKind>,
    },
}

fn parse_kind(s: &str) -> Result<ScenarioKind, String> {
    ScenarioKind::ALL
        .into_iter()
        .find(|k| k.name() == s)
        .ok_or_else(|| format!("unknown scenario kind '{s}' (floor, wall, seat, combo)"))
}

fn bench_spec(common: &Common, seed: Option<u64>) -> Result<BenchSpec, CliError> {
    let (mut spec, _) = load_config::<BenchSpec>(common.config.as_deref(), &common.overrides)?;
    if let Some(s) = seed {
        spec.seeds = vec![s];
    }
    Ok(spec)
}

fn run(command: Command) -> Result<(), CliError> {
    match command {
        Command::Annotate { common } => {
            let (cfg, base) = load_config::<AnnotateConfig>(common.config.as_deref(), &common.overrides)?;
            commands::annotate_cmd(&cfg, &base, &common.out)
        }
        Command::Optimize { common, seed } => {
            let (cfg, base) = load_config::<OptimizeConfig>(common.config.as_deref(), &common.overrides)?;
            commands::optimize_cmd(&cfg, &base, seed, &common.out)
        }
        Command::Bench { common, seed } => commands::bench_cmd(&bench_spec(&common, seed)?, &common.out),
        Command::Ablate { common, seed, suites } => {
            let spec = bench_spec(&common, seed)?;
            let suites = if suites.is_empty() {
                Suite::ALL.to_vec()
            } else {
                suites.iter().map(|s| Suite::parse(s)).collect::<Result<_, _>>()?
            };
            commands::ablate_cmd(&spec, &suites, &common.out)
        }
        Command::MakeScenario { common, seed, kind } => {
            let (mut cfg, base) = load_config::<MakeScenarioConfig>(common.config.as_deref(), &common.overrides)?;
            if let Some(k) = kind {
                cfg.kind = k;
            }
            commands::make_scenario_cmd(&cfg, &base, seed, &common.out)
        }
    }
}

fn threads(command: &Command) -> Option<usize> {
    match command {
        Command::Annotate { common }
        | Command::Optimize { common, .. }
        | Command::Bench { common, .. }
        | Command::Ablate { common, .. }
        | Command::MakeScenario { common, .. } => common.threads,
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    let mut pool = rayon::ThreadPoolBuilder::new();
    match threads(&cli.command) {
        Some(0) => {
            eprintln!("input error: --threads must be at least 1");
            return ExitCode::from(2);
        }
        Some(n) => pool = pool.num_threads(n),
        None => {}
    }
    let pool = match pool.build() {
        Ok(p) => p,
        Err(e) => {
            eprintln!("error: thread pool: {e}");
            return ExitCode::from(1);
        }
    };
    match pool.install(|| run(cli.command)) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{e}");
            ExitCode::from(e.exit_code())
        }
    }
}
