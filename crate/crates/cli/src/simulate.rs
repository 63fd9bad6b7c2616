//! `simulate` and `sweep`: offline scenario runs with metrics and plot output.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use bandit_pricing::scenario::metrics::{format_sig9, write_metrics};
use bandit_pricing::scenario::plots::{emit_plot_data, PlotKind};
use bandit_pricing::scenario::{bundled, parse_scenario, ParsedScenario};
use bandit_pricing::simulation::{
    run_scenario, summarize, ConvergenceCriterion, ScenarioConfig, ScenarioSummary, SimulationError,
};
use rayon::prelude::*;

use crate::error::CliError;

pub const SUMMARY_FILE: &str = "summary.csv";

/// Loads a scenario from a file, or from the bundled set when `source` names
/// one of the bundled scenarios (with or without `.json`) and no such file exists.
pub fn load_scenario(source: &Path) -> Result<ParsedScenario, CliError> {
    let text = match fs::read_to_string(source) {
        Ok(text) => text,
        Err(err) => {
            let name = source.to_string_lossy();
            let name = name.strip_suffix(".json").unwrap_or(&name);
            match bundled::source(name) {
                Some(text) if err.kind() == std::io::ErrorKind::NotFound => text.to_string(),
                _ => {
                    return Err(CliError::Read {
                        path: source.to_path_buf(),
                        source: err,
                    })
                }
            }
        }
    };
    parse_scenario(&text).map_err(|e| CliError::Invalid(format!("{}: {e}", source.display())))
}

pub fn parse_plot_list(list: &str) -> Result<Vec<PlotKind>, CliError> {
    list.split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| {
            s.parse()
                .map_err(|e| CliError::Invalid(format!("--plots: {e}")))
        })
        .collect()
}

fn simulation_error(err: SimulationError) -> CliError {
    match err {
        SimulationError::Config(msg) => CliError::Invalid(msg),
        other => CliError::Runtime(other.to_string()),
    }
}

/// Runs one scenario and writes metrics, plot data, and a one-row summary into `out`.
pub fn run_into(
    config: &ScenarioConfig,
    plots: &[PlotKind],
    out: &Path,
) -> Result<ScenarioSummary, CliError> {
    let records = run_scenario(config).map_err(simulation_error)?;
    write_metrics(&records, out).map_err(|e| CliError::Runtime(e.to_string()))?;
    if !plots.is_empty() {
        emit_plot_data(&records, config, plots, out)
            .map_err(|e| CliError::Runtime(e.to_string()))?;
    }
    let summary = summarize(&records, &ConvergenceCriterion::default());
    let path = out.join(SUMMARY_FILE);
    let text = format!(
        "{}\n{}\n",
        summary_header(&summary),
        summary_row(config.seed, &summary)
    );
    fs::write(&path, text).map_err(CliError::io(path.display().to_string()))?;
    Ok(summary)
}

pub fn summary_header(summary: &ScenarioSummary) -> String {
    let mut header = String::from("seed");
    for a in &summary.agents {
        for col in [
            "final_mean",
            "final_stddev",
            "total_revenue",
            "total_served",
            "convergence_step",
        ] {
            let _ = write!(header, ",{col}_{}", a.label);
        }
    }
    header.push_str(",total_dropped");
    header
}

pub fn summary_row(seed: u64, summary: &ScenarioSummary) -> String {
    let mut row = seed.to_string();
    for a in &summary.agents {
        match a.final_policy {
            Some(p) => {
                let _ = write!(row, ",{},{}", format_sig9(p.mean), format_sig9(p.stddev));
            }
            None => row.push_str(",,"),
        }
        let _ = write!(
            row,
            ",{},{},{}",
            format_sig9(a.total_revenue),
            format_sig9(a.total_served),
            a.convergence_step
                .map(|s| s.to_string())
                .unwrap_or_default()
        );
    }
    let _ = write!(row, ",{}", format_sig9(summary.total_dropped));
    row
}

/// The one-line human summary printed after a run.
pub fn summary_line(summary: &ScenarioSummary) -> String {
    let revenue: Vec<String> = summary
        .agents
        .iter()
        .map(|a| format!("{}={}", a.label, format_sig9(a.total_revenue)))
        .collect();
    let convergence: Vec<String> = summary
        .agents
        .iter()
        .filter(|a| a.final_policy.is_some())
        .map(|a| {
            let step = a
                .convergence_step
                .map_or("none".to_string(), |s| s.to_string());
            format!("{}={step}", a.label)
        })
        .collect();
    let mut line = format!(
        "revenue {} | dropped {}",
        revenue.join(" "),
        format_sig9(summary.total_dropped)
    );
    if !convergence.is_empty() {
        let _ = write!(line, " | converged at {}", convergence.join(" "));
    }
    line
}

pub struct SimulateArgs {
    pub scenario: PathBuf,
    pub seed: Option<u64>,
    pub out: PathBuf,
    pub plots: Vec<PlotKind>,
    pub quiet: bool,
}

pub fn simulate(args: &SimulateArgs) -> Result<(), CliError> {
    let mut config = load_scenario(&args.scenario)?.config;
    if let Some(seed) = args.seed {
        config.seed = seed;
    }
    let summary = run_into(&config, &args.plots, &args.out)?;
    if !args.quiet {
        println!("{}", summary_line(&summary));
    }
    Ok(())
}

pub struct SweepArgs {
    pub scenario: PathBuf,
    pub seeds: u64,
    pub out: PathBuf,
    pub plots: Vec<PlotKind>,
    pub quiet: bool,
}

pub fn seed_dir(out: &Path, seed: u64) -> PathBuf {
    out.join(format!("seed-{seed}"))
}

pub fn sweep(args: &SweepArgs) -> Result<(), CliError> {
    if args.seeds == 0 {
        return Err(CliError::Invalid("--seeds must be at least 1".into()));
    }
    let base = load_scenario(&args.scenario)?.config;
    let summaries = (0..args.seeds)
        .into_par_iter()
        .map(|seed| {
            let mut config = base.clone();
            config.seed = seed;
            run_into(&config, &args.plots, &seed_dir(&args.out, seed))
                .map(|s| (seed, s))
                .map_err(|e| match e {
                    CliError::Runtime(msg) => CliError::Runtime(format!("seed {seed}: {msg}")),
                    other => other,
                })
        })
        .collect::<Result<Vec<_>, _>>()?;

    let mut text = summary_header(&summaries[0].1);
    text.push('\n');
    for (seed, summary) in &summaries {
        text.push_str(&summary_row(*seed, summary));
        text.push('\n');
    }
    let path = args.out.join(SUMMARY_FILE);
    fs::write(&path, text).map_err(CliError::io(path.display().to_string()))?;
    if !args.quiet {
        for (seed, summary) in &summaries {
            println!("seed {seed}: {}", summary_line(summary));
        }
    }
    Ok(())
}
