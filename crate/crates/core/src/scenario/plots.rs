//! Gnuplot-ready data files for the standard figure panels.
//!
//! Each kind writes one whitespace-separated file whose `#` header names the
//! columns; `plots.manifest` lists every file written together with its series.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;
use std::str::FromStr;

use thiserror::Error;

use super::metrics::{format_sig9, io_err, MetricsError};
use crate::policy::{ActionSpace, GaussianPolicyParams};
use crate::simulation::{AgentKind, ScenarioConfig, StepRecord};

pub const MANIFEST_FILE: &str = "plots.manifest";
pub const DENSITY_POINTS: usize = 256;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PlotKind {
    PolicyTrace,
    ServedVolumes,
    RevenueRate,
    TotalRevenue,
    PolicyDensity(u64),
}

#[derive(Debug, Error)]
pub enum PlotError {
    #[error("unknown plot kind '{0}' (expected policyTrace, servedVolumes, revenueRate, totalRevenue or policyDensity:<step>)")]
    UnknownKind(String),
    #[error("no policy snapshot at step {0}")]
    MissingSnapshot(u64),
    #[error("no records to plot")]
    Empty,
    #[error(transparent)]
    Io(#[from] MetricsError),
}

impl FromStr for PlotKind {
    type Err = PlotError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "policyTrace" => Ok(PlotKind::PolicyTrace),
            "servedVolumes" => Ok(PlotKind::ServedVolumes),
            "revenueRate" => Ok(PlotKind::RevenueRate),
            "totalRevenue" => Ok(PlotKind::TotalRevenue),
            _ => s
                .strip_prefix("policyDensity:")
                .and_then(|step| step.parse().ok())
                .map(PlotKind::PolicyDensity)
                .ok_or_else(|| PlotError::UnknownKind(s.to_string())),
        }
    }
}

impl PlotKind {
    pub fn file_name(&self) -> String {
        match self {
            PlotKind::PolicyTrace => "policyTrace.dat".into(),
            PlotKind::ServedVolumes => "servedVolumes.dat".into(),
            PlotKind::RevenueRate => "revenueRate.dat".into(),
            PlotKind::TotalRevenue => "totalRevenue.dat".into(),
            PlotKind::PolicyDensity(step) => format!("policyDensity_{step}.dat"),
        }
    }
}

/// An in-memory plot table: column names and rows.
#[derive(Debug, Clone, PartialEq)]
pub struct PlotTable {
    pub columns: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

impl PlotTable {
    pub fn render(&self) -> String {
        let mut out = format!("# {}\n", self.columns.join(" "));
        for row in &self.rows {
            let cells: Vec<String> = row.iter().map(|v| format_sig9(*v)).collect();
            out.push_str(&cells.join(" "));
            out.push('\n');
        }
        out
    }

    /// Names of the data series (every column after the abscissa).
    pub fn series(&self) -> &[String] {
        &self.columns[1..]
    }
}

fn bandit_indices(config: &ScenarioConfig) -> Vec<usize> {
    (0..config.agents.len())
        .filter(|&i| config.agents[i].is_bandit())
        .collect()
}

fn action_space(config: &ScenarioConfig, index: usize) -> ActionSpace {
    match &config.agents[index].kind {
        AgentKind::Bandit(cfg) => cfg.action_space,
        _ => ActionSpace::linear(config.price_bounds),
    }
}

/// Builds the table for one plot kind.
pub fn plot_table(
    records: &[StepRecord],
    config: &ScenarioConfig,
    kind: PlotKind,
) -> Result<PlotTable, PlotError> {
    let first = records.first().ok_or(PlotError::Empty)?;
    let labels: Vec<&str> = first.agents.iter().map(|a| a.label.as_str()).collect();
    let bandits = bandit_indices(config);
    let per_agent =
        |prefix: &str| -> Vec<String> { labels.iter().map(|l| format!("{prefix}_{l}")).collect() };

    let table = match kind {
        PlotKind::PolicyTrace => {
            let mut columns = vec!["step".to_string()];
            for &i in &bandits {
                columns.push(format!("mean_{}", labels[i]));
                columns.push(format!("stddev_{}", labels[i]));
            }
            let rows = records
                .iter()
                .filter(|r| {
                    bandits.iter().all(|&i| r.agents[i].policy.is_some()) && !bandits.is_empty()
                })
                .map(|r| {
                    let mut row = vec![r.step as f64];
                    for &i in &bandits {
                        let p = r.agents[i].policy.expect("filtered above");
                        row.push(p.mean);
                        row.push(p.stddev);
                    }
                    row
                })
                .collect();
            PlotTable { columns, rows }
        }
        PlotKind::ServedVolumes => {
            let mut columns = vec!["step".to_string()];
            columns.extend(per_agent("served"));
            columns.push("dropped".into());
            let rows = records
                .iter()
                .map(|r| {
                    let mut row = vec![r.step as f64];
                    row.extend(r.agents.iter().map(|a| a.served.value()));
                    row.push(r.dropped.value());
                    row
                })
                .collect();
            PlotTable { columns, rows }
        }
        PlotKind::RevenueRate | PlotKind::TotalRevenue => {
            let cumulative = kind == PlotKind::TotalRevenue;
            let mut columns = vec!["step".to_string()];
            columns.extend(per_agent(if cumulative { "cumrev" } else { "reward" }));
            let rows = records
                .iter()
                .map(|r| {
                    let mut row = vec![r.step as f64];
                    row.extend(r.agents.iter().map(|a| {
                        if cumulative {
                            a.cumulative_revenue.value()
                        } else {
                            a.reward.value()
                        }
                    }));
                    row
                })
                .collect();
            PlotTable { columns, rows }
        }
        PlotKind::PolicyDensity(step) => {
            let record = records
                .iter()
                .find(|r| r.step == step)
                .ok_or(PlotError::MissingSnapshot(step))?;
            let snapshots: Vec<(usize, GaussianPolicyParams)> = bandits
                .iter()
                .map(|&i| {
                    record.agents[i]
                        .policy
                        .map(|p| (i, GaussianPolicyParams::from_stddev(p.mean, p.stddev)))
                        .ok_or(PlotError::MissingSnapshot(step))
                })
                .collect::<Result<_, _>>()?;
            if snapshots.is_empty() {
                return Err(PlotError::MissingSnapshot(step));
            }
            let mut columns = vec!["price".to_string()];
            columns.extend(snapshots.iter().map(|(i, _)| format!("pdf_{}", labels[*i])));
            let (lo, hi) = (config.price_bounds.floor(), config.price_bounds.ceiling());
            let rows =
                (0..DENSITY_POINTS)
                    .map(|k| {
                        let price = lo + (hi - lo) * k as f64 / (DENSITY_POINTS - 1) as f64;
                        let mut row = vec![price];
                        row.extend(snapshots.iter().map(|(i, params)| {
                            action_space(config, *i).price_density(params, price)
                        }));
                        row
                    })
                    .collect();
            PlotTable { columns, rows }
        }
    };
    Ok(table)
}

/// Writes one data file per requested kind plus the manifest into `dir`.
pub fn emit_plot_data(
    records: &[StepRecord],
    config: &ScenarioConfig,
    kinds: &[PlotKind],
    dir: &Path,
) -> Result<(), PlotError> {
    let tables = kinds
        .iter()
        .map(|k| plot_table(records, config, *k).map(|t| (k.file_name(), t)))
        .collect::<Result<Vec<_>, _>>()?;
    fs::create_dir_all(dir).map_err(io_err(dir))?;
    let mut manifest = String::new();
    for (name, table) in &tables {
        let path = dir.join(name);
        fs::write(&path, table.render()).map_err(io_err(&path))?;
        let _ = writeln!(manifest, "{name} {}", table.series().join(" "));
    }
    let path = dir.join(MANIFEST_FILE);
    fs::write(&path, manifest).map_err(io_err(&path))?;
    Ok(())
}
