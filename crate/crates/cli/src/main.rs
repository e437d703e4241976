use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use ialm_cli::commands;
use ialm_cli::config;
use ialm_cli::output::OutputFormat;

/// Experiment harness for the inexact augmented Lagrangian solvers:
/// configure a problem, solve it with full trace capture, sweep stopping
/// thresholds for complexity measurement, verify the regularity condition,
/// or finite-difference-check the problem derivatives.
#[derive(Parser)]
#[command(name = "ialm", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(clap::Args)]
struct CommonArgs {
    /// Configuration file (sectioned key = value text).
    #[arg(long)]
    config: PathBuf,
    /// Overrides the [run] seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Output path; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Output format: csv or json.
    #[arg(long, default_value = "csv")]
    format: String,
}

#[derive(Subcommand)]
enum Command {
    /// Run one solve and emit the iteration trace plus a summary block.
    Solve {
        #[command(flatten)]
        common: CommonArgs,
    },
    /// Solve once per stopping threshold and fit the oracle-complexity
    /// slope over the certified points.
    Sweep {
        #[command(flatten)]
        common: CommonArgs,
        /// Comma-separated, strictly decreasing thresholds (at least 3).
        #[arg(long, value_delimiter = ',', required = true)]
        taus: Vec<f64>,
    },
    /// Solve while tabulating the regularity estimate against the
    /// closed-form lower bounds.
    Check {
        #[command(flatten)]
        common: CommonArgs,
    },
    /// Finite-difference checks of the configured problem's derivatives.
    Gradcheck {
        /// Configuration file (sectioned key = value text).
        #[arg(long)]
        config: PathBuf,
        /// Overrides the [run] seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Random draws per derivative check.
        #[arg(long, default_value_t = 100)]
        samples: usize,
    },
}

fn run() -> Result<i32, ialm_cli::CliError> {
    let cli = Cli::parse();
    match cli.command {
        Command::Solve { common } => {
            let cfg = config::load(&common.config, common.seed)?;
            let format: OutputFormat = common.format.parse()?;
            commands::cmd_solve(&cfg, common.out.as_deref(), format)
        }
        Command::Sweep { common, taus } => {
            let cfg = config::load(&common.config, common.seed)?;
            let format: OutputFormat = common.format.parse()?;
            commands::cmd_sweep(&cfg, &taus, common.out.as_deref(), format)
        }
        Command::Check { common } => {
            let cfg = config::load(&common.config, common.seed)?;
            let format: OutputFormat = common.format.parse()?;
            commands::cmd_check(&cfg, common.out.as_deref(), format)
        }
        Command::Gradcheck {
            config: path,
            seed,
            samples,
        } => {
            let cfg = config::load(&path, seed)?;
            commands::cmd_gradcheck(&cfg, samples)
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run() {
        Ok(code) => ExitCode::from(code as u8),
        Err(err) => {
            eprintln!("ialm: {err}");
            ExitCode::from(err.exit_code() as u8)
        }
    }
}
