//! Frequency-domain stability analysis of reset control systems from the
//! command line: sector analysis, hybrid simulation, matrix-vs-FRF
//! equivalence checks, and delay feasibility studies.

mod commands;
mod config;
mod report;

use std::path::PathBuf;

use clap::{Parser, Subcommand};
use thiserror::Error;

use commands::{
    cmd_analyze, cmd_delay_study, cmd_equiv_check, cmd_simulate, AnalyzeArgs, DelayStudyArgs,
    SimulateArgs,
};

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{path}:{line}: {message}")]
    Schema {
        path: String,
        line: usize,
        message: String,
    },
    #[error("usage: {0}")]
    Usage(String),
    #[error(transparent)]
    Core(#[from] rcstab_core::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

#[derive(Parser)]
#[command(
    name = "rcstab",
    version,
    about = "Stability, boundedness and convergence analysis for reset control systems"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the frequency-domain stability analysis and write report.json
    /// plus theta_trace.csv. Exit codes: 0 stable, 2 not shown,
    /// 3 infeasible by delay, 1 error.
    Analyze {
        /// System config file
        #[arg(long)]
        system: PathBuf,
        /// Lower band edge override, rad/s
        #[arg(long)]
        wmin: Option<f64>,
        /// Upper band edge override, rad/s
        #[arg(long)]
        wmax: Option<f64>,
        /// Total grid points (overrides points_per_decade)
        #[arg(long)]
        points: Option<usize>,
        /// Delay handling: exact | pade:<k>
        #[arg(long, value_parser = config::parse_delay_mode)]
        delay_mode: Option<rcstab_core::frf::DelayMode>,
        /// Output directory
        #[arg(long)]
        out: PathBuf,
    },
    /// Integrate the hybrid closed loop and write trace.csv + summary.json.
    Simulate {
        /// System config file (rational plant required)
        #[arg(long)]
        system: PathBuf,
        /// Input spec, e.g. "step:1", "sine:1:10", "step:1+d:sine:0.5:42.66"
        #[arg(long)]
        input: String,
        /// Initial state, comma-separated (defaults to the origin)
        #[arg(long)]
        x0: Option<String>,
        /// Second initial state for --convergence
        #[arg(long)]
        x0b: Option<String>,
        /// Also run the two-trajectory convergence probe
        #[arg(long)]
        convergence: bool,
        /// Horizon, seconds
        #[arg(long, default_value_t = 2.0)]
        t_end: f64,
        /// Fixed step, seconds
        #[arg(long, default_value_t = 1e-4)]
        dt: f64,
        /// Output directory
        #[arg(long)]
        out: PathBuf,
    },
    /// Compare the matrix-form and FRF-form positivity functions on random
    /// loops. Exit 0 iff the max relative deviation is below 1e-8.
    EquivCheck {
        #[arg(long, default_value_t = 100)]
        trials: usize,
        #[arg(long, default_value_t = 42)]
        seed: u64,
    },
    /// Per-delay feasibility table across a list of delay times.
    DelayStudy {
        /// System config file
        #[arg(long)]
        system: PathBuf,
        /// Comma-separated delay times in seconds
        #[arg(long, value_delimiter = ',')]
        delays: Vec<f64>,
        /// Output directory
        #[arg(long)]
        out: PathBuf,
    },
}

fn run() -> Result<i32, CliError> {
    let cli = Cli::try_parse().map_err(|e| CliError::Usage(e.to_string()))?;
    match cli.command {
        Command::Analyze {
            system,
            wmin,
            wmax,
            points,
            delay_mode,
            out,
        } => cmd_analyze(&AnalyzeArgs {
            system,
            wmin,
            wmax,
            points,
            delay_mode,
            out,
        }),
        Command::Simulate {
            system,
            input,
            x0,
            x0b,
            convergence,
            t_end,
            dt,
            out,
        } => cmd_simulate(&SimulateArgs {
            system,
            input,
            x0,
            x0b,
            convergence,
            t_end,
            dt,
            out,
        }),
        Command::EquivCheck { trials, seed } => cmd_equiv_check(trials, seed),
        Command::DelayStudy {
            system,
            delays,
            out,
        } => cmd_delay_study(&DelayStudyArgs {
            system,
            delays,
            out,
        }),
    }
}

fn main() {
    match run() {
        Ok(code) => std::process::exit(code),
        Err(CliError::Usage(msg)) => {
            eprintln!("{msg}");
            std::process::exit(1);
        }
        Err(e) => {
            eprintln!("error: {e}");
            std::process::exit(1);
        }
    }
}
