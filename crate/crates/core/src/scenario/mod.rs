//! Scenario documents, metrics output, plot data, and the bundled reproduction scenarios.
//!
//! A scenario is a JSON document (`schemaVersion` 1). Unknown keys are
//! rejected, every constraint of the underlying types is re-checked, and each
//! default that parsing fills in is listed in the returned provenance.

pub mod bundled;
pub mod metrics;
pub mod plots;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::agents::{BanditConfig, RewardSignal, UpdateRule};
use crate::environment::{DistributorKind, Schedule, TrafficConfig};
use crate::market::{Budget, Price, PriceBounds, QueryVolume};
use crate::policy::{ActionSpace, GaussianPolicyParams};
use crate::simulation::{AgentKind, AgentSpec, ScenarioConfig, DEFAULT_STEPS};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error("{path}: {message}")]
    Schema { path: String, message: String },
    #[error("{path}: {message}")]
    Constraint { path: String, message: String },
    #[error("rule violated: {0}")]
    Rule(String),
}

impl ScenarioError {
    fn constraint(path: impl Into<String>, message: impl Into<String>) -> Self {
        ScenarioError::Constraint {
            path: path.into(),
            message: message.into(),
        }
    }

    /// JSON path of the offending key, when the error concerns one.
    pub fn path(&self) -> Option<&str> {
        match self {
            ScenarioError::Schema { path, .. } | ScenarioError::Constraint { path, .. } => {
                Some(path)
            }
            ScenarioError::Rule(_) => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct ScenarioFile {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub schema_version: Option<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub steps: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    pub price_bounds: BoundsEntry,
    pub traffic: TrafficEntry,
    pub distributor: DistributorEntry,
    pub agents: Vec<AgentEntry>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub snapshot_every: Option<u64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BoundsEntry {
    pub floor: f64,
    pub ceiling: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct TrafficEntry {
    pub base_volume: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub noise_stddev: Option<f64>,
    pub budget_schedule: Vec<BudgetSegment>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub volume_schedule: Option<Vec<VolumeSegment>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct BudgetSegment {
    pub from_step: u64,
    pub budget: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct VolumeSegment {
    pub from_step: u64,
    pub multiplier: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct DistributorEntry {
    pub kind: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub temperature: Option<f64>,
}

/// One agent declaration. Which fields are allowed depends on `kind`
/// (`deterministic`, `stochastic`, or `bandit`).
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct AgentEntry {
    pub kind: String,
    pub label: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub price: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mean: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub stddev: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub update_rule: Option<UpdateRule>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub learning_rate: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub clip_epsilon: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub buffer_capacity: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub epochs_per_update: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub baseline_decay: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pull_rate: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub no_reward_window: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub initial_mean: Option<f64>,
    /// Human-friendly initial spread. Mutually exclusive with `initialScaleParam`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub initial_stddev: Option<f64>,
    /// Initial `ln(stddev)`, exact.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub initial_scale_param: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub log_space: Option<bool>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reward_signal: Option<RewardSignal>,
}

/// A validated scenario plus the defaults that were filled in.
#[derive(Debug, Clone, PartialEq)]
pub struct ParsedScenario {
    pub config: ScenarioConfig,
    pub provenance: Vec<String>,
}

/// Parses and validates a scenario document.
pub fn parse_scenario(document: &str) -> Result<ParsedScenario, ScenarioError> {
    let mut de = serde_json::Deserializer::from_str(document);
    let file: ScenarioFile = serde_path_to_error::deserialize(&mut de).map_err(|e| {
        let path = e.path().to_string();
        ScenarioError::Schema {
            path: if path.is_empty() { "$".into() } else { path },
            message: e.into_inner().to_string(),
        }
    })?;
    de.end().map_err(|e| ScenarioError::Schema {
        path: "$".into(),
        message: e.to_string(),
    })?;
    resolve(&file)
}

fn finite_nonneg(path: &str, v: f64) -> Result<f64, ScenarioError> {
    if v.is_finite() && v >= 0.0 {
        Ok(v)
    } else {
        Err(ScenarioError::constraint(
            path,
            format!("must be finite and nonnegative, got {v}"),
        ))
    }
}

fn finite_pos(path: &str, v: f64) -> Result<f64, ScenarioError> {
    if v.is_finite() && v > 0.0 {
        Ok(v)
    } else {
        Err(ScenarioError::constraint(
            path,
            format!("must be finite and positive, got {v}"),
        ))
    }
}

fn required<T: Copy>(path: String, v: Option<T>) -> Result<T, ScenarioError> {
    v.ok_or_else(|| ScenarioError::constraint(path, "is required for this agent kind"))
}

struct Defaults<'a>(&'a mut Vec<String>);

impl Defaults<'_> {
    fn take<T: std::fmt::Debug + Copy>(&mut self, path: &str, v: Option<T>, default: T) -> T {
        v.unwrap_or_else(|| {
            self.0.push(format!("{path} = {default:?} (default)"));
            default
        })
    }
}

/// Turns a schema-valid document into a checked [`ScenarioConfig`].
pub fn resolve(file: &ScenarioFile) -> Result<ParsedScenario, ScenarioError> {
    let mut provenance = Vec::new();
    let mut defaults = Defaults(&mut provenance);

    let version = defaults.take("schemaVersion", file.schema_version, SCHEMA_VERSION);
    if version != SCHEMA_VERSION {
        return Err(ScenarioError::constraint(
            "schemaVersion",
            format!("unsupported version {version}, expected {SCHEMA_VERSION}"),
        ));
    }
    let steps = defaults.take("steps", file.steps, DEFAULT_STEPS);
    if steps == 0 {
        return Err(ScenarioError::constraint("steps", "must be positive"));
    }
    let seed = defaults.take("seed", file.seed, 0);
    let snapshot_every = defaults.take("snapshotEvery", file.snapshot_every, 1);
    if snapshot_every == 0 {
        return Err(ScenarioError::constraint(
            "snapshotEvery",
            "must be positive",
        ));
    }

    let floor = finite_nonneg("priceBounds.floor", file.price_bounds.floor)?;
    let price_bounds = PriceBounds::new(floor, file.price_bounds.ceiling)
        .map_err(|e| ScenarioError::constraint("priceBounds.ceiling", e.to_string()))?;

    let traffic = resolve_traffic(&file.traffic, &mut defaults)?;
    let distributor = resolve_distributor(&file.distributor)?;

    if file.agents.is_empty() {
        return Err(ScenarioError::constraint(
            "agents",
            "at least one agent is required",
        ));
    }
    let agents = file
        .agents
        .iter()
        .enumerate()
        .map(|(i, a)| resolve_agent(i, a, price_bounds, &mut defaults))
        .collect::<Result<Vec<_>, _>>()?;

    let config = ScenarioConfig {
        steps,
        seed,
        traffic,
        distributor,
        agents,
        price_bounds,
        snapshot_every,
    };
    config.validate().map_err(ScenarioError::Rule)?;
    Ok(ParsedScenario { config, provenance })
}

fn resolve_traffic(
    t: &TrafficEntry,
    defaults: &mut Defaults,
) -> Result<TrafficConfig, ScenarioError> {
    let base = finite_nonneg("traffic.baseVolume", t.base_volume)?;
    let noise = defaults.take("traffic.noiseStddev", t.noise_stddev, 0.0);
    finite_nonneg("traffic.noiseStddev", noise)?;

    let mut budgets = Vec::with_capacity(t.budget_schedule.len());
    for (i, seg) in t.budget_schedule.iter().enumerate() {
        let path = format!("traffic.budgetSchedule[{i}].budget");
        let b =
            Budget::new(seg.budget).map_err(|e| ScenarioError::constraint(path, e.to_string()))?;
        budgets.push((seg.from_step, b));
    }
    let budget_schedule = Schedule::new(budgets)
        .map_err(|e| ScenarioError::constraint("traffic.budgetSchedule", e.to_string()))?;

    let volume_segments = match &t.volume_schedule {
        Some(v) => v.clone(),
        None => {
            defaults
                .0
                .push("traffic.volumeSchedule = [{fromStep: 0, multiplier: 1.0}] (default)".into());
            vec![VolumeSegment {
                from_step: 0,
                multiplier: 1.0,
            }]
        }
    };
    let mut mults = Vec::with_capacity(volume_segments.len());
    for (i, seg) in volume_segments.iter().enumerate() {
        let m = finite_nonneg(
            &format!("traffic.volumeSchedule[{i}].multiplier"),
            seg.multiplier,
        )?;
        mults.push((seg.from_step, m));
    }
    let volume_schedule = Schedule::new(mults)
        .map_err(|e| ScenarioError::constraint("traffic.volumeSchedule", e.to_string()))?;

    Ok(TrafficConfig {
        base_volume: QueryVolume::new(base).expect("checked above"),
        noise_stddev: noise,
        budget_schedule,
        volume_schedule,
    })
}

fn resolve_distributor(d: &DistributorEntry) -> Result<DistributorKind, ScenarioError> {
    let no_temperature = |kind: DistributorKind| {
        if d.temperature.is_some() {
            Err(ScenarioError::constraint(
                "distributor.temperature",
                format!("not allowed for kind {}", d.kind),
            ))
        } else {
            Ok(kind)
        }
    };
    match d.kind.as_str() {
        "singleAgentThreshold" => no_temperature(DistributorKind::SingleAgentThreshold),
        "budgetFilteredUniform" => no_temperature(DistributorKind::BudgetFilteredUniform),
        "inverseProportional" => no_temperature(DistributorKind::InverseProportional),
        "softmaxNegPrice" => {
            let t = d.temperature.ok_or_else(|| {
                ScenarioError::constraint(
                    "distributor.temperature",
                    "is required for softmaxNegPrice",
                )
            })?;
            Ok(DistributorKind::SoftmaxNegPrice {
                temperature: finite_pos("distributor.temperature", t)?,
            })
        }
        other => Err(ScenarioError::constraint(
            "distributor.kind",
            format!("unknown distributor kind '{other}'"),
        )),
    }
}

fn reject_fields(prefix: &str, kind: &str, present: &[(&str, bool)]) -> Result<(), ScenarioError> {
    match present.iter().find(|(_, set)| *set) {
        Some((name, _)) => Err(ScenarioError::constraint(
            format!("{prefix}.{name}"),
            format!("not allowed for kind {kind}"),
        )),
        None => Ok(()),
    }
}

fn resolve_agent(
    index: usize,
    a: &AgentEntry,
    bounds: PriceBounds,
    defaults: &mut Defaults,
) -> Result<AgentSpec, ScenarioError> {
    let p = format!("agents[{index}]");
    if a.label.is_empty() {
        return Err(ScenarioError::constraint(
            format!("{p}.label"),
            "must not be empty",
        ));
    }
    if a.label.contains(|c: char| c == ',' || c.is_whitespace()) {
        return Err(ScenarioError::constraint(
            format!("{p}.label"),
            "must not contain commas or whitespace",
        ));
    }
    let bandit_fields = [
        ("updateRule", a.update_rule.is_some()),
        ("learningRate", a.learning_rate.is_some()),
        ("clipEpsilon", a.clip_epsilon.is_some()),
        ("bufferCapacity", a.buffer_capacity.is_some()),
        ("epochsPerUpdate", a.epochs_per_update.is_some()),
        ("baselineDecay", a.baseline_decay.is_some()),
        ("pullRate", a.pull_rate.is_some()),
        ("noRewardWindow", a.no_reward_window.is_some()),
        ("initialMean", a.initial_mean.is_some()),
        ("initialStddev", a.initial_stddev.is_some()),
        ("initialScaleParam", a.initial_scale_param.is_some()),
        ("logSpace", a.log_space.is_some()),
        ("rewardSignal", a.reward_signal.is_some()),
    ];
    let kind = match a.kind.as_str() {
        "deterministic" => {
            reject_fields(
                &p,
                &a.kind,
                &[("mean", a.mean.is_some()), ("stddev", a.stddev.is_some())],
            )?;
            reject_fields(&p, &a.kind, &bandit_fields)?;
            let price = required(format!("{p}.price"), a.price)?;
            let price = finite_nonneg(&format!("{p}.price"), price)?;
            if !bounds.contains(price) {
                return Err(ScenarioError::constraint(
                    format!("{p}.price"),
                    "outside priceBounds",
                ));
            }
            AgentKind::Deterministic {
                price: Price::new(price).expect("checked above"),
            }
        }
        "stochastic" => {
            reject_fields(&p, &a.kind, &[("price", a.price.is_some())])?;
            reject_fields(&p, &a.kind, &bandit_fields)?;
            let mean = required(format!("{p}.mean"), a.mean)?;
            if !mean.is_finite() {
                return Err(ScenarioError::constraint(
                    format!("{p}.mean"),
                    "must be finite",
                ));
            }
            let stddev = finite_pos(
                &format!("{p}.stddev"),
                required(format!("{p}.stddev"), a.stddev)?,
            )?;
            AgentKind::Stochastic { mean, stddev }
        }
        "bandit" => {
            reject_fields(
                &p,
                &a.kind,
                &[
                    ("price", a.price.is_some()),
                    ("mean", a.mean.is_some()),
                    ("stddev", a.stddev.is_some()),
                ],
            )?;
            AgentKind::Bandit(resolve_bandit(&p, a, bounds, defaults)?)
        }
        other => {
            return Err(ScenarioError::constraint(
                format!("{p}.kind"),
                format!("unknown agent kind '{other}'"),
            ))
        }
    };
    Ok(AgentSpec {
        label: a.label.clone(),
        kind,
    })
}

fn resolve_bandit(
    p: &str,
    a: &AgentEntry,
    bounds: PriceBounds,
    defaults: &mut Defaults,
) -> Result<BanditConfig, ScenarioError> {
    let initial_mean = required(format!("{p}.initialMean"), a.initial_mean)?;
    if !initial_mean.is_finite() {
        return Err(ScenarioError::constraint(
            format!("{p}.initialMean"),
            "must be finite",
        ));
    }
    let scale_param = match (a.initial_stddev, a.initial_scale_param) {
        (Some(_), Some(_)) => {
            return Err(ScenarioError::constraint(
                format!("{p}.initialScaleParam"),
                "give either initialStddev or initialScaleParam, not both",
            ))
        }
        (Some(s), None) => finite_pos(&format!("{p}.initialStddev"), s)?.ln(),
        (None, Some(s)) => {
            if !s.is_finite() {
                return Err(ScenarioError::constraint(
                    format!("{p}.initialScaleParam"),
                    "must be finite",
                ));
            }
            s
        }
        (None, None) => {
            return Err(ScenarioError::constraint(
                format!("{p}.initialStddev"),
                "is required for this agent kind",
            ))
        }
    };

    let cfg = BanditConfig {
        update_rule: defaults.take(
            &format!("{p}.updateRule"),
            a.update_rule,
            UpdateRule::PpoRolling,
        ),
        learning_rate: defaults.take(
            &format!("{p}.learningRate"),
            a.learning_rate,
            BanditConfig::DEFAULT_LEARNING_RATE,
        ),
        clip_epsilon: defaults.take(
            &format!("{p}.clipEpsilon"),
            a.clip_epsilon,
            BanditConfig::DEFAULT_CLIP_EPSILON,
        ),
        buffer_capacity: defaults.take(
            &format!("{p}.bufferCapacity"),
            a.buffer_capacity,
            BanditConfig::DEFAULT_BUFFER_CAPACITY,
        ),
        epochs_per_update: defaults.take(
            &format!("{p}.epochsPerUpdate"),
            a.epochs_per_update,
            BanditConfig::DEFAULT_EPOCHS_PER_UPDATE,
        ),
        baseline_decay: defaults.take(
            &format!("{p}.baselineDecay"),
            a.baseline_decay,
            BanditConfig::DEFAULT_BASELINE_DECAY,
        ),
        pull_rate: defaults.take(
            &format!("{p}.pullRate"),
            a.pull_rate,
            BanditConfig::DEFAULT_PULL_RATE,
        ),
        no_reward_window: defaults.take(
            &format!("{p}.noRewardWindow"),
            a.no_reward_window,
            BanditConfig::DEFAULT_NO_REWARD_WINDOW,
        ),
        initial_params: GaussianPolicyParams::new(initial_mean, scale_param),
        action_space: ActionSpace {
            bounds,
            log_space: defaults.take(&format!("{p}.logSpace"), a.log_space, false),
        },
        reward_signal: defaults.take(
            &format!("{p}.rewardSignal"),
            a.reward_signal,
            RewardSignal::Revenue,
        ),
    };
    cfg.validate().map_err(|msg| {
        let field = msg.split_whitespace().next().unwrap_or("");
        ScenarioError::constraint(format!("{p}.{field}"), msg)
    })?;
    Ok(cfg)
}

/// Writes every field of `config` explicitly, so parsing the result yields
/// `config` again with an empty provenance.
pub fn to_document(config: &ScenarioConfig) -> ScenarioFile {
    let agents = config
        .agents
        .iter()
        .map(|spec| match &spec.kind {
            AgentKind::Deterministic { price } => AgentEntry {
                kind: "deterministic".into(),
                label: spec.label.clone(),
                price: Some(price.value()),
                ..Default::default()
            },
            AgentKind::Stochastic { mean, stddev } => AgentEntry {
                kind: "stochastic".into(),
                label: spec.label.clone(),
                mean: Some(*mean),
                stddev: Some(*stddev),
                ..Default::default()
            },
            AgentKind::Bandit(cfg) => bandit_entry(&spec.label, cfg),
        })
        .collect();
    ScenarioFile {
        schema_version: Some(SCHEMA_VERSION),
        steps: Some(config.steps),
        seed: Some(config.seed),
        price_bounds: BoundsEntry {
            floor: config.price_bounds.floor(),
            ceiling: config.price_bounds.ceiling(),
        },
        traffic: TrafficEntry {
            base_volume: config.traffic.base_volume.value(),
            noise_stddev: Some(config.traffic.noise_stddev),
            budget_schedule: config
                .traffic
                .budget_schedule
                .segments()
                .iter()
                .map(|(from_step, b)| BudgetSegment {
                    from_step: *from_step,
                    budget: b.value(),
                })
                .collect(),
            volume_schedule: Some(
                config
                    .traffic
                    .volume_schedule
                    .segments()
                    .iter()
                    .map(|(from_step, m)| VolumeSegment {
                        from_step: *from_step,
                        multiplier: *m,
                    })
                    .collect(),
            ),
        },
        distributor: DistributorEntry {
            kind: config.distributor.name().into(),
            temperature: match config.distributor {
                DistributorKind::SoftmaxNegPrice { temperature } => Some(temperature),
                _ => None,
            },
        },
        agents,
        snapshot_every: Some(config.snapshot_every),
    }
}

/// Fully explicit agent entry for a bandit.
pub fn bandit_entry(label: &str, cfg: &BanditConfig) -> AgentEntry {
    AgentEntry {
        kind: "bandit".into(),
        label: label.into(),
        update_rule: Some(cfg.update_rule),
        learning_rate: Some(cfg.learning_rate),
        clip_epsilon: Some(cfg.clip_epsilon),
        buffer_capacity: Some(cfg.buffer_capacity),
        epochs_per_update: Some(cfg.epochs_per_update),
        baseline_decay: Some(cfg.baseline_decay),
        pull_rate: Some(cfg.pull_rate),
        no_reward_window: Some(cfg.no_reward_window),
        initial_mean: Some(cfg.initial_params.mean),
        initial_scale_param: Some(cfg.initial_params.scale_param),
        log_space: Some(cfg.action_space.log_space),
        reward_signal: Some(cfg.reward_signal),
        ..Default::default()
    }
}

/// Resolves a standalone bandit entry (as used by the live controller).
pub fn resolve_bandit_entry(
    path: &str,
    entry: &AgentEntry,
    bounds: PriceBounds,
) -> Result<(BanditConfig, Vec<String>), ScenarioError> {
    let mut provenance = Vec::new();
    match resolve_agent(0, entry, bounds, &mut Defaults(&mut provenance)) {
        Ok(AgentSpec {
            kind: AgentKind::Bandit(cfg),
            ..
        }) => Ok((cfg, provenance)),
        Ok(_) => Err(ScenarioError::constraint(
            format!("{path}.kind"),
            "must be bandit",
        )),
        Err(ScenarioError::Constraint {
            path: inner,
            message,
        }) => Err(ScenarioError::Constraint {
            path: inner.replacen("agents[0]", path, 1),
            message,
        }),
        Err(e) => Err(e),
    }
}

pub fn to_json(config: &ScenarioConfig) -> String {
    serde_json::to_string_pretty(&to_document(config)).expect("scenario documents always serialize")
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"{
        "priceBounds": {"floor": 0.0, "ceiling": 2.0},
        "traffic": {"baseVolume": 100, "budgetSchedule": [{"fromStep": 0, "budget": 1.0}]},
        "distributor": {"kind": "singleAgentThreshold"},
        "agents": [{"kind": "deterministic", "label": "fixed", "price": 0.5}]
    }"#;

    #[test]
    fn minimal_document_gets_defaults() {
        let parsed = parse_scenario(MINIMAL).unwrap();
        assert_eq!(parsed.config.steps, 1000);
        assert_eq!(parsed.config.seed, 0);
        assert_eq!(parsed.config.snapshot_every, 1);
        assert_eq!(parsed.config.traffic.noise_stddev, 0.0);
        assert!(parsed
            .provenance
            .iter()
            .any(|p| p.starts_with("steps = 1000")));
        assert!(parsed
            .provenance
            .iter()
            .any(|p| p.starts_with("traffic.volumeSchedule")));
    }

    #[test]
    fn negative_stddev_names_its_path() {
        let doc = MINIMAL.replace(
            r#"{"kind": "deterministic", "label": "fixed", "price": 0.5}"#,
            r#"{"kind": "stochastic", "label": "s", "mean": 1.0, "stddev": -1}"#,
        );
        let err = parse_scenario(&doc).unwrap_err();
        assert_eq!(err.path(), Some("agents[0].stddev"));
    }

    #[test]
    fn unknown_keys_are_rejected_with_path() {
        let doc = MINIMAL.replace(r#""baseVolume": 100"#, r#""baseVolume": 100, "bogus": 1"#);
        let err = parse_scenario(&doc).unwrap_err();
        assert!(matches!(err, ScenarioError::Schema { .. }));
        assert_eq!(err.path(), Some("traffic.bogus"));
        let doc = MINIMAL.replace(r#""price": 0.5"#, r#""price": 0.5, "learningRate": 0.1"#);
        assert_eq!(
            parse_scenario(&doc).unwrap_err().path(),
            Some("agents[0].learningRate")
        );
        let doc = MINIMAL.replace(r#""price": 0.5"#, r#""price": 0.5, "whatever": 0.1"#);
        assert_eq!(
            parse_scenario(&doc).unwrap_err().path(),
            Some("agents[0].whatever")
        );
    }

    #[test]
    fn semantic_rule_violation() {
        let doc = MINIMAL.replace(
            r#"{"kind": "deterministic", "label": "fixed", "price": 0.5}"#,
            r#"{"kind": "deterministic", "label": "a", "price": 0.5},
               {"kind": "deterministic", "label": "b", "price": 0.5}"#,
        );
        match parse_scenario(&doc).unwrap_err() {
            ScenarioError::Rule(msg) => assert!(msg.contains("singleAgentThreshold"), "{msg}"),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn bandit_requires_initial_spread() {
        let doc = MINIMAL.replace(
            r#"{"kind": "deterministic", "label": "fixed", "price": 0.5}"#,
            r#"{"kind": "bandit", "label": "b", "initialMean": 0.5}"#,
        );
        assert_eq!(
            parse_scenario(&doc).unwrap_err().path(),
            Some("agents[0].initialStddev")
        );
        let doc = MINIMAL.replace(
            r#"{"kind": "deterministic", "label": "fixed", "price": 0.5}"#,
            r#"{"kind": "bandit", "label": "b", "initialMean": 0.5, "initialStddev": 0.2, "clipEpsilon": 0}"#,
        );
        assert_eq!(
            parse_scenario(&doc).unwrap_err().path(),
            Some("agents[0].clipEpsilon")
        );
    }

    #[test]
    fn trailing_garbage_is_a_schema_error() {
        let doc = format!("{MINIMAL} 42");
        assert!(matches!(
            parse_scenario(&doc),
            Err(ScenarioError::Schema { .. })
        ));
    }

    #[test]
    fn round_trip_through_document() {
        for name in bundled::NAMES {
            let parsed = bundled::load(name).unwrap();
            let again = parse_scenario(&to_json(&parsed.config)).unwrap();
            assert_eq!(again.config, parsed.config, "{name}");
            assert!(
                again.provenance.is_empty(),
                "{name}: {:?}",
                again.provenance
            );
        }
    }
}
