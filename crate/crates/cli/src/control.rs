//! `control`: a live price controller speaking NDJSON on stdin/stdout.
//!
//! Volume reports accumulate until a full window has elapsed. Each closed
//! window becomes one reward for the last emitted price, the bandit learns,
//! and the next price is emitted. The complete controller state is persisted
//! after every accepted report, so a restarted process continues exactly
//! where the previous one stopped.

use std::fs;
use std::io::{BufRead, ErrorKind, Write};
use std::path::{Path, PathBuf};

use bandit_pricing::agents::{BanditConfig, GaussianBandit};
use bandit_pricing::market::{PriceBounds, QueryVolume};
use bandit_pricing::rng::{agent_stream, RandomStream};
use bandit_pricing::scenario::{resolve_bandit_entry, AgentEntry, BoundsEntry, SCHEMA_VERSION};
use serde::{Deserialize, Serialize};

use crate::error::CliError;

pub const DEFAULT_WINDOW_SECONDS: f64 = 180.0;
pub const STATE_SCHEMA_VERSION: u32 = 1;

/// The `--agent-config` document: one bandit entry plus its price range.
#[derive(Debug, Clone, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct AgentConfigFile {
    #[serde(default)]
    pub schema_version: Option<u32>,
    pub price_bounds: BoundsEntry,
    #[serde(default)]
    pub seed: u64,
    pub agent: AgentEntry,
}

pub fn load_agent_config(path: &Path) -> Result<(BanditConfig, u64), CliError> {
    let text = fs::read_to_string(path).map_err(|source| CliError::Read {
        path: path.to_path_buf(),
        source,
    })?;
    let invalid = |msg: String| CliError::Invalid(format!("{}: {msg}", path.display()));
    let file: AgentConfigFile = serde_json::from_str(&text).map_err(|e| invalid(e.to_string()))?;
    if let Some(v) = file.schema_version {
        if v != SCHEMA_VERSION {
            return Err(invalid(format!("schemaVersion: unsupported version {v}")));
        }
    }
    let bounds = PriceBounds::new(file.price_bounds.floor, file.price_bounds.ceiling)
        .map_err(|e| invalid(format!("priceBounds: {e}")))?;
    let (config, _) =
        resolve_bandit_entry("agent", &file.agent, bounds).map_err(|e| invalid(e.to_string()))?;
    Ok((config, file.seed))
}

#[derive(Debug, Clone, Copy, PartialEq, Deserialize)]
#[serde(tag = "type", rename_all = "camelCase")]
pub enum Inbound {
    #[serde(rename_all = "camelCase")]
    Volume {
        served_queries: f64,
        window_seconds: f64,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "camelCase")]
pub enum Outbound {
    Price {
        value: f64,
        mean: f64,
        stddev: f64,
        step: u64,
    },
}

/// Parses one inbound line into `(servedQueries, windowSeconds)`.
pub fn parse_report(line: &str) -> Result<(f64, f64), String> {
    let Inbound::Volume {
        served_queries,
        window_seconds,
    } = serde_json::from_str(line).map_err(|e| e.to_string())?;
    if !(served_queries.is_finite() && served_queries >= 0.0) {
        return Err(format!(
            "servedQueries must be a nonnegative number, got {served_queries}"
        ));
    }
    if !(window_seconds.is_finite() && window_seconds > 0.0) {
        return Err(format!(
            "windowSeconds must be positive, got {window_seconds}"
        ));
    }
    Ok((served_queries, window_seconds))
}

/// Reports received since the last window closed.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct OpenWindow {
    pub served_queries: f64,
    pub elapsed_seconds: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct ControllerState {
    pub schema_version: u32,
    pub bandit: GaussianBandit,
    pub window: OpenWindow,
}

#[derive(Debug, Clone)]
pub struct Controller {
    state: ControllerState,
    window_seconds: f64,
}

impl Controller {
    /// A fresh controller and the first price it offers.
    pub fn start(config: BanditConfig, seed: u64, window_seconds: f64) -> (Self, Outbound) {
        let bandit = GaussianBandit::new(config, RandomStream::new(seed, agent_stream(0)));
        let mut controller = Controller {
            state: ControllerState {
                schema_version: STATE_SCHEMA_VERSION,
                bandit,
                window: OpenWindow::default(),
            },
            window_seconds,
        };
        let first = controller.quote();
        (controller, first)
    }

    pub fn resume(state: ControllerState, window_seconds: f64) -> Result<Self, String> {
        if state.schema_version != STATE_SCHEMA_VERSION {
            return Err(format!(
                "unsupported state schemaVersion {}",
                state.schema_version
            ));
        }
        if state.bandit.pending_action().is_none() {
            return Err("state has no outstanding price".into());
        }
        Ok(Controller {
            state,
            window_seconds,
        })
    }

    pub fn state(&self) -> &ControllerState {
        &self.state
    }

    fn quote(&mut self) -> Outbound {
        let bandit = &mut self.state.bandit;
        let (price, _) = bandit.act();
        let policy = bandit.snapshot();
        Outbound::Price {
            value: price.value(),
            mean: policy.mean,
            stddev: policy.stddev,
            step: bandit.step(),
        }
    }

    /// Adds one report; returns the next price when it closes the window.
    pub fn report(
        &mut self,
        served_queries: f64,
        seconds: f64,
    ) -> Result<Option<Outbound>, CliError> {
        let window = &mut self.state.window;
        window.served_queries += served_queries;
        window.elapsed_seconds += seconds;
        // tolerate rounding in reports that are meant to sum to one window
        if window.elapsed_seconds < self.window_seconds * (1.0 - 1e-9) {
            return Ok(None);
        }
        let served = QueryVolume::clamped(window.served_queries);
        *window = OpenWindow::default();

        let bandit = &mut self.state.bandit;
        let (price, raw) = bandit
            .pending_action()
            .expect("a price is always outstanding between windows");
        let reward = bandit.config().reward_signal.reward(price, served);
        bandit
            .observe_and_learn(price, raw, reward)
            .map_err(|e| CliError::Runtime(e.to_string()))?;
        Ok(Some(self.quote()))
    }
}

/// Reads the state file, `Ok(None)` when it does not exist.
pub fn load_state(path: &Path) -> Result<Option<ControllerState>, CliError> {
    let text = match fs::read_to_string(path) {
        Ok(text) => text,
        Err(e) if e.kind() == ErrorKind::NotFound => return Ok(None),
        Err(source) => {
            return Err(CliError::Read {
                path: path.to_path_buf(),
                source,
            })
        }
    };
    serde_json::from_str(&text).map(Some).map_err(|e| {
        CliError::Invalid(format!(
            "{}: corrupt state file, refusing to start: {e}",
            path.display()
        ))
    })
}

fn temp_path(path: &Path) -> PathBuf {
    let mut name = path.file_name().unwrap_or_default().to_os_string();
    name.push(".tmp");
    path.with_file_name(name)
}

/// Writes the state next to its destination and renames it into place, so
/// the file on disk is always one complete state or the other.
pub fn save_state(path: &Path, state: &ControllerState) -> Result<(), CliError> {
    let tmp = temp_path(path);
    let text = serde_json::to_string(state).expect("controller state always serializes");
    let context = || tmp.display().to_string();
    let mut file = fs::File::create(&tmp).map_err(CliError::io(context()))?;
    file.write_all(text.as_bytes())
        .map_err(CliError::io(context()))?;
    file.sync_all().map_err(CliError::io(context()))?;
    fs::rename(&tmp, path).map_err(CliError::io(path.display().to_string()))?;
    Ok(())
}

fn emit(out: &mut impl Write, message: &Outbound) -> Result<(), CliError> {
    let line = serde_json::to_string(message).expect("price messages always serialize");
    writeln!(out, "{line}")
        .and_then(|_| out.flush())
        .map_err(CliError::io("writing output"))
}

pub struct ControlArgs {
    pub agent_config: PathBuf,
    pub state: PathBuf,
    pub window_seconds: f64,
}

/// Runs the controller until `input` is exhausted.
pub fn control(
    args: &ControlArgs,
    input: impl BufRead,
    mut output: impl Write,
    mut log: impl Write,
) -> Result<(), CliError> {
    if !(args.window_seconds.is_finite() && args.window_seconds > 0.0) {
        return Err(CliError::Invalid(
            "--window-seconds must be positive".into(),
        ));
    }
    let (config, seed) = load_agent_config(&args.agent_config)?;
    let mut controller = match load_state(&args.state)? {
        Some(state) => {
            if *state.bandit.config() != config {
                return Err(CliError::Invalid(format!(
                    "{}: state was created for a different agent configuration, refusing to start",
                    args.state.display()
                )));
            }
            Controller::resume(state, args.window_seconds).map_err(|e| {
                CliError::Invalid(format!("{}: {e}, refusing to start", args.state.display()))
            })?
        }
        None => {
            let (controller, first) = Controller::start(config, seed, args.window_seconds);
            save_state(&args.state, controller.state())?;
            emit(&mut output, &first)?;
            controller
        }
    };

    for (index, line) in input.lines().enumerate() {
        let line = line.map_err(CliError::io("reading input"))?;
        if line.trim().is_empty() {
            continue;
        }
        let (served, seconds) = match parse_report(&line) {
            Ok(report) => report,
            Err(e) => {
                let _ = writeln!(log, "input line {}: skipped: {e}", index + 1);
                continue;
            }
        };
        let next = controller.report(served, seconds)?;
        save_state(&args.state, controller.state())?;
        if let Some(message) = next {
            emit(&mut output, &message)?;
        }
    }
    Ok(())
}
