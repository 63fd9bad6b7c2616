mod control;
mod error;
mod simulate;

use std::io;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use control::{ControlArgs, DEFAULT_WINDOW_SECONDS};
use error::CliError;
use simulate::{parse_plot_list, SimulateArgs, SweepArgs};

/// Simulates Gaussian-policy pricing bandits in a query market and runs a live
/// price controller.
#[derive(Debug, Parser)]
#[command(name = "pricing-sim", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run one scenario and write metrics and plot data.
    Simulate {
        /// Scenario JSON file, or the name of a bundled scenario.
        #[arg(long)]
        scenario: PathBuf,
        /// Override the scenario's master seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Output directory (created if missing).
        #[arg(long)]
        out: PathBuf,
        /// Comma-separated plot kinds: policyTrace, servedVolumes, revenueRate,
        /// totalRevenue, policyDensity:<step>.
        #[arg(long, default_value = "")]
        plots: String,
        /// Suppress the summary line.
        #[arg(long)]
        quiet: bool,
    },
    /// Run a scenario for seeds 0..N-1 and write an aggregate summary.
    Sweep {
        /// Scenario JSON file, or the name of a bundled scenario.
        #[arg(long)]
        scenario: PathBuf,
        /// Number of seeds.
        #[arg(long)]
        seeds: u64,
        /// Output directory; each run goes to seed-<k>/.
        #[arg(long)]
        out: PathBuf,
        /// Plot kinds to emit for every seed.
        #[arg(long, default_value = "")]
        plots: String,
        /// Suppress the per-seed summary lines.
        #[arg(long)]
        quiet: bool,
    },
    /// Read volume reports as NDJSON on stdin and write prices as NDJSON on stdout.
    Control {
        /// Bandit configuration JSON.
        #[arg(long)]
        agent_config: PathBuf,
        /// State file, created on first start and updated after every report.
        #[arg(long)]
        state: PathBuf,
        /// Length of one reward window in seconds.
        #[arg(long, default_value_t = DEFAULT_WINDOW_SECONDS)]
        window_seconds: f64,
        /// Accepted for symmetry with the other commands; control prints no summary.
        #[arg(long)]
        quiet: bool,
    },
}

fn run(command: Command) -> Result<(), CliError> {
    match command {
        Command::Simulate {
            scenario,
            seed,
            out,
            plots,
            quiet,
        } => simulate::simulate(&SimulateArgs {
            scenario,
            seed,
            out,
            plots: parse_plot_list(&plots)?,
            quiet,
        }),
        Command::Sweep {
            scenario,
            seeds,
            out,
            plots,
            quiet,
        } => simulate::sweep(&SweepArgs {
            scenario,
            seeds,
            out,
            plots: parse_plot_list(&plots)?,
            quiet,
        }),
        Command::Control {
            agent_config,
            state,
            window_seconds,
            quiet: _,
        } => control::control(
            &ControlArgs {
                agent_config,
                state,
                window_seconds,
            },
            io::stdin().lock(),
            io::stdout().lock(),
            io::stderr(),
        ),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(error::EXIT_INVALID as u8)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
