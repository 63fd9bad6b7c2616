//! The deterministic step loop and its per-step records.
//!
//! Each step runs traffic → bids → allocation → rewards → learning. All agents
//! bid before any of them learns. Traffic and every agent draw from their own
//! random stream derived from the master seed, so appending an agent leaves
//! the traffic realization and every other agent's draws unchanged.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::agents::{Agent, AgentError, BanditConfig, GaussianBandit};
use crate::environment::{
    distribute, generate_traffic, DistributeError, DistributorKind, TrafficConfig,
};
use crate::market::{agent_revenue, Budget, Price, PriceBounds, QueryVolume, Reward};
use crate::policy::PolicySnapshot;
use crate::rng::{agent_stream, RandomStream, TRAFFIC_STREAM};

pub const DEFAULT_STEPS: u64 = 1000;

#[derive(Debug, Clone, PartialEq)]
pub enum AgentKind {
    Deterministic { price: Price },
    Stochastic { mean: f64, stddev: f64 },
    Bandit(BanditConfig),
}

#[derive(Debug, Clone, PartialEq)]
pub struct AgentSpec {
    pub label: String,
    pub kind: AgentKind,
}

impl AgentSpec {
    pub fn is_bandit(&self) -> bool {
        matches!(self.kind, AgentKind::Bandit(_))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioConfig {
    pub steps: u64,
    pub seed: u64,
    pub traffic: TrafficConfig,
    pub distributor: DistributorKind,
    pub agents: Vec<AgentSpec>,
    pub price_bounds: PriceBounds,
    pub snapshot_every: u64,
}

#[derive(Debug, Error)]
pub enum SimulationError {
    #[error("invalid scenario: {0}")]
    Config(String),
    #[error("step {step}: agent {label}: {source}")]
    Agent {
        step: u64,
        label: String,
        #[source]
        source: AgentError,
    },
    #[error("step {step}: {source}")]
    Distribute {
        step: u64,
        #[source]
        source: DistributeError,
    },
}

impl ScenarioConfig {
    /// Checks cross-field rules. Returns a message naming the broken rule.
    pub fn validate(&self) -> Result<(), String> {
        if self.steps == 0 {
            return Err("steps must be positive".into());
        }
        if self.snapshot_every == 0 {
            return Err("snapshotEvery must be positive".into());
        }
        if self.agents.is_empty() {
            return Err("a scenario needs at least one agent".into());
        }
        if self.distributor == DistributorKind::SingleAgentThreshold && self.agents.len() != 1 {
            return Err(format!(
                "singleAgentThreshold requires exactly 1 agent, found {}",
                self.agents.len()
            ));
        }
        if let DistributorKind::SoftmaxNegPrice { temperature } = self.distributor {
            if !(temperature > 0.0 && temperature.is_finite()) {
                return Err("distributor.temperature must be positive".into());
            }
        }
        if !(self.traffic.noise_stddev >= 0.0 && self.traffic.noise_stddev.is_finite()) {
            return Err("traffic.noiseStddev must be nonnegative".into());
        }
        for (i, spec) in self.agents.iter().enumerate() {
            // labels become CSV and plot column suffixes
            let label_ok = !spec.label.is_empty()
                && spec
                    .label
                    .chars()
                    .all(|c| c.is_ascii_alphanumeric() || matches!(c, '-' | '_' | '.'));
            if !label_ok {
                return Err(format!(
                    "agents[{i}].label '{}' must be nonempty and use only letters, digits, '-', '_' or '.'",
                    spec.label
                ));
            }
            if self.agents[..i].iter().any(|a| a.label == spec.label) {
                return Err(format!("agent label '{}' is not unique", spec.label));
            }
            match &spec.kind {
                AgentKind::Deterministic { price } => {
                    if !self.price_bounds.contains(price.value()) {
                        return Err(format!("agents[{i}].price lies outside priceBounds"));
                    }
                }
                AgentKind::Stochastic { mean, stddev } => {
                    if !(*stddev > 0.0 && stddev.is_finite()) || !mean.is_finite() {
                        return Err(format!("agents[{i}].stddev must be positive"));
                    }
                }
                AgentKind::Bandit(cfg) => {
                    cfg.validate().map_err(|e| format!("agents[{i}]: {e}"))?;
                }
            }
        }
        Ok(())
    }

    fn build_agents(&self) -> Vec<Agent> {
        self.agents
            .iter()
            .enumerate()
            .map(|(i, spec)| {
                let rng = RandomStream::new(self.seed, agent_stream(i));
                match &spec.kind {
                    AgentKind::Deterministic { price } => Agent::Deterministic { price: *price },
                    AgentKind::Stochastic { mean, stddev } => Agent::Stochastic {
                        mean: *mean,
                        stddev: *stddev,
                        bounds: self.price_bounds,
                        rng,
                    },
                    AgentKind::Bandit(cfg) => {
                        Agent::Bandit(Box::new(GaussianBandit::new(*cfg, rng)))
                    }
                }
            })
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct AgentStepRecord {
    pub label: String,
    pub bid: Price,
    pub served: QueryVolume,
    pub reward: Reward,
    pub cumulative_revenue: Reward,
    /// Policy after this step's learning; bandits on snapshot steps only.
    pub policy: Option<PolicySnapshot>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct StepRecord {
    pub step: u64,
    pub volume: QueryVolume,
    pub budget: Budget,
    pub dropped: QueryVolume,
    pub agents: Vec<AgentStepRecord>,
}

/// Runs every step of `config` and returns one record per step.
pub fn run_scenario(config: &ScenarioConfig) -> Result<Vec<StepRecord>, SimulationError> {
    config.validate().map_err(SimulationError::Config)?;
    let mut traffic_rng = RandomStream::new(config.seed, TRAFFIC_STREAM);
    let mut agents = config.build_agents();
    let mut cumulative = vec![0.0; agents.len()];
    let mut records = Vec::with_capacity(config.steps as usize);

    for step in 0..config.steps {
        let (volume, budget) = generate_traffic(&config.traffic, step, &mut traffic_rng);
        let bids: Vec<Price> = agents.iter_mut().map(Agent::bid).collect();
        let alloc = distribute(&config.distributor, &bids, volume, budget)
            .map_err(|source| SimulationError::Distribute { step, source })?;

        let snapshot_step = step % config.snapshot_every == 0 || step + 1 == config.steps;
        let mut rows = Vec::with_capacity(agents.len());
        for (i, agent) in agents.iter_mut().enumerate() {
            let served = alloc.served[i];
            let reward = agent_revenue(bids[i], served);
            cumulative[i] += reward.value();
            agent
                .feedback(served)
                .map_err(|source| SimulationError::Agent {
                    step,
                    label: config.agents[i].label.clone(),
                    source,
                })?;
            let policy = if snapshot_step {
                agent.as_bandit().map(|b| b.params().snapshot(step))
            } else {
                None
            };
            rows.push(AgentStepRecord {
                label: config.agents[i].label.clone(),
                bid: bids[i],
                served,
                reward,
                cumulative_revenue: Reward::new(cumulative[i]).unwrap_or(Reward::ZERO),
                policy,
            });
        }
        records.push(StepRecord {
            step,
            volume,
            budget,
            dropped: alloc.dropped,
            agents: rows,
        });
    }
    Ok(records)
}

/// When a bandit counts as converged: its mean sits strictly within `band` of
/// the step's budget, either for `sustain` consecutive snapshots or, when
/// `sustain` is `None`, for every remaining snapshot of the run.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConvergenceCriterion {
    pub band: f64,
    pub sustain: Option<usize>,
}

impl Default for ConvergenceCriterion {
    fn default() -> Self {
        Self {
            band: 0.1,
            sustain: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AgentSummary {
    pub label: String,
    pub total_served: f64,
    pub total_revenue: f64,
    pub final_policy: Option<PolicySnapshot>,
    pub convergence_step: Option<u64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioSummary {
    pub steps: u64,
    pub total_volume: f64,
    pub total_dropped: f64,
    pub agents: Vec<AgentSummary>,
}

impl ScenarioSummary {
    pub fn agent(&self, label: &str) -> Option<&AgentSummary> {
        self.agents.iter().find(|a| a.label == label)
    }
}

/// `(step, policy, budget)` for every snapshot of agent `index`.
pub fn policy_trace(records: &[StepRecord], index: usize) -> Vec<(u64, PolicySnapshot, f64)> {
    records
        .iter()
        .filter_map(|r| {
            r.agents[index]
                .policy
                .map(|p| (r.step, p, r.budget.value()))
        })
        .collect()
}

pub fn convergence_step(
    records: &[StepRecord],
    index: usize,
    criterion: &ConvergenceCriterion,
) -> Option<u64> {
    let trace = policy_trace(records, index);
    let inside: Vec<bool> = trace
        .iter()
        .map(|(_, p, b)| (p.mean - b).abs() < criterion.band)
        .collect();
    match criterion.sustain {
        None => {
            let outside_after = inside.iter().rposition(|ok| !ok);
            let first = outside_after.map_or(0, |i| i + 1);
            trace.get(first).map(|(s, _, _)| *s)
        }
        Some(n) => {
            let n = n.max(1);
            let mut run = 0usize;
            for (i, ok) in inside.iter().enumerate() {
                run = if *ok { run + 1 } else { 0 };
                if run == n {
                    return Some(trace[i + 1 - n].0);
                }
            }
            None
        }
    }
}

/// Aggregates per-agent totals, final policies, and convergence steps.
///
/// # Panics
/// If `records` is empty.
pub fn summarize(records: &[StepRecord], criterion: &ConvergenceCriterion) -> ScenarioSummary {
    let last = records.last().expect("summarize needs at least one record");
    let agents = (0..last.agents.len())
        .map(|i| {
            let total_served = records.iter().map(|r| r.agents[i].served.value()).sum();
            let final_policy = records.iter().rev().find_map(|r| r.agents[i].policy);
            AgentSummary {
                label: last.agents[i].label.clone(),
                total_served,
                total_revenue: last.agents[i].cumulative_revenue.value(),
                final_policy,
                convergence_step: final_policy
                    .and_then(|_| convergence_step(records, i, criterion)),
            }
        })
        .collect();
    ScenarioSummary {
        steps: records.len() as u64,
        total_volume: records.iter().map(|r| r.volume.value()).sum(),
        total_dropped: records.iter().map(|r| r.dropped.value()).sum(),
        agents,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::agents::UpdateRule;
    use crate::environment::Schedule;
    use crate::policy::{ActionSpace, GaussianPolicyParams};

    fn bounds() -> PriceBounds {
        PriceBounds::new(0.0, 3.0).unwrap()
    }

    fn fixed(label: &str, price: f64) -> AgentSpec {
        AgentSpec {
            label: label.into(),
            kind: AgentKind::Deterministic {
                price: Price::new(price).unwrap(),
            },
        }
    }

    fn bandit(label: &str, mean: f64) -> AgentSpec {
        AgentSpec {
            label: label.into(),
            kind: AgentKind::Bandit(BanditConfig::new(
                UpdateRule::PpoRolling,
                GaussianPolicyParams::from_stddev(mean, 0.2),
                ActionSpace::linear(bounds()),
            )),
        }
    }

    fn scenario(
        agents: Vec<AgentSpec>,
        distributor: DistributorKind,
        steps: u64,
    ) -> ScenarioConfig {
        ScenarioConfig {
            steps,
            seed: 0,
            traffic: TrafficConfig::constant(100.0, 1.0),
            distributor,
            agents,
            price_bounds: bounds(),
            snapshot_every: 1,
        }
    }

    #[test]
    fn single_fixed_agent_accumulates_revenue() {
        let cfg = scenario(
            vec![fixed("fixed", 0.5)],
            DistributorKind::SingleAgentThreshold,
            10,
        );
        let records = run_scenario(&cfg).unwrap();
        assert_eq!(records[9].agents[0].cumulative_revenue.value(), 500.0);
        let summary = summarize(&records, &ConvergenceCriterion::default());
        assert_eq!(summary.agents[0].total_revenue, 500.0);
        assert_eq!(summary.agents[0].total_served, 1000.0);
        assert_eq!(summary.total_dropped, 0.0);
    }

    #[test]
    fn all_dropped_when_everyone_overprices() {
        let cfg = scenario(
            vec![fixed("a", 1.5), fixed("b", 2.0)],
            DistributorKind::BudgetFilteredUniform,
            20,
        );
        let summary = summarize(
            &run_scenario(&cfg).unwrap(),
            &ConvergenceCriterion::default(),
        );
        assert!(summary
            .agents
            .iter()
            .all(|a| a.total_served == 0.0 && a.total_revenue == 0.0));
        assert_eq!(summary.total_dropped, summary.total_volume);
        assert_eq!(summary.total_dropped, 2000.0);
    }

    #[test]
    fn zero_demand_has_nothing_to_drop() {
        let mut cfg = scenario(
            vec![bandit("b", 0.5)],
            DistributorKind::SingleAgentThreshold,
            260,
        );
        cfg.traffic.volume_schedule = Schedule::new(vec![(0, 1.0), (200, 0.0)]).unwrap();
        let records = run_scenario(&cfg).unwrap();
        for r in &records[200..] {
            assert_eq!(r.agents[0].reward.value(), 0.0);
            assert_eq!(r.dropped.value(), 0.0);
        }
    }

    #[test]
    fn labels_must_be_column_safe() {
        for bad in ["", "a,b", "has space"] {
            let config = scenario(
                vec![fixed(bad, 0.5)],
                DistributorKind::SingleAgentThreshold,
                3,
            );
            assert!(config.validate().is_err(), "{bad:?}");
        }
    }

    #[test]
    fn threshold_with_two_agents_is_rejected() {
        let cfg = scenario(
            vec![fixed("a", 0.5), fixed("b", 0.5)],
            DistributorKind::SingleAgentThreshold,
            5,
        );
        assert!(matches!(
            run_scenario(&cfg),
            Err(SimulationError::Config(_))
        ));
    }

    #[test]
    fn runs_are_bit_identical() {
        let mut cfg = scenario(
            vec![bandit("x", 0.4), bandit("y", 0.8)],
            DistributorKind::InverseProportional,
            300,
        );
        cfg.traffic.noise_stddev = 3.0;
        assert_eq!(run_scenario(&cfg).unwrap(), run_scenario(&cfg).unwrap());
    }

    #[test]
    fn over_budget_agent_is_invisible_to_uniform_split() {
        let base = scenario(
            vec![bandit("x", 0.4), bandit("y", 0.8)],
            DistributorKind::BudgetFilteredUniform,
            300,
        );
        let mut extended = base.clone();
        extended.agents.push(fixed("greedy", 2.5));
        let a = run_scenario(&base).unwrap();
        let b = run_scenario(&extended).unwrap();
        for (ra, rb) in a.iter().zip(&b) {
            assert_eq!(ra.agents[..], rb.agents[..2]);
            assert_eq!(rb.agents[2].served.value(), 0.0);
        }
    }

    #[test]
    fn invariants_hold_across_seeds() {
        for seed in 0..100 {
            let mut cfg = scenario(
                vec![bandit("x", 0.6), bandit("y", 1.1), fixed("z", 0.9)],
                DistributorKind::InverseProportional,
                40,
            );
            cfg.seed = seed;
            cfg.traffic.noise_stddev = 20.0;
            for r in run_scenario(&cfg).unwrap() {
                let total: f64 =
                    r.agents.iter().map(|a| a.served.value()).sum::<f64>() + r.dropped.value();
                assert!((total - r.volume.value()).abs() <= 1e-9 * r.volume.value().max(1.0));
                for a in &r.agents {
                    if a.served.value() > 0.0 {
                        assert!(a.bid <= Price::new(r.budget.value()).unwrap());
                    }
                }
            }
        }
    }

    #[test]
    fn convergence_step_variants() {
        let cfg = scenario(
            vec![fixed("f", 0.5)],
            DistributorKind::SingleAgentThreshold,
            3,
        );
        let mut records = run_scenario(&cfg).unwrap();
        let means = [0.5, 0.95, 1.02, 0.7, 0.93, 0.97, 1.05];
        records = (0..means.len())
            .map(|i| {
                let mut r = records[0].clone();
                r.step = i as u64;
                r.agents[0].policy = Some(PolicySnapshot {
                    mean: means[i],
                    stddev: 0.1,
                    step_index: i as u64,
                });
                r
            })
            .collect();
        let until_end = ConvergenceCriterion::default();
        assert_eq!(convergence_step(&records, 0, &until_end), Some(4));
        let sustained = ConvergenceCriterion {
            band: 0.1,
            sustain: Some(2),
        };
        assert_eq!(convergence_step(&records, 0, &sustained), Some(1));
        let long = ConvergenceCriterion {
            band: 0.1,
            sustain: Some(5),
        };
        assert_eq!(convergence_step(&records, 0, &long), None);
    }
}
