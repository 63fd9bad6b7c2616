//! Pricing agents: fixed heuristics and trainable Gaussian bandits.

pub mod bandit;
pub mod buffer;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use bandit::{
    BanditConfig, GaussianBandit, LearnOutcome, RewardBaseline, RewardSignal, UpdateRule,
};
pub use buffer::{Experience, ReplayBuffer};

use crate::market::{Price, PriceBounds, QueryVolume};
use crate::policy::PolicySnapshot;
use crate::rng::RandomStream;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum AgentError {
    #[error("non-finite policy gradient at agent step {step}; the learning rate is likely misconfigured")]
    NonFiniteGradient { step: u64 },
    #[error("policy parameters became non-finite at agent step {step}")]
    NonFiniteParams { step: u64 },
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct AgentId {
    pub index: usize,
    pub label: String,
}

impl std::fmt::Display for AgentId {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.label)
    }
}

/// Bids the same price forever.
pub fn fixed_deterministic_bid(price: Price) -> Price {
    price
}

/// Draws from a Gaussian that never changes, clamped into `bounds`.
pub fn fixed_stochastic_bid(
    mean: f64,
    stddev: f64,
    bounds: &PriceBounds,
    rng: &mut RandomStream,
) -> Price {
    bounds.clamp(rng.normal(mean, stddev))
}

/// A market participant driven by the simulation loop.
#[derive(Debug, Clone)]
#[allow(clippy::large_enum_variant)]
pub enum Agent {
    Deterministic {
        price: Price,
    },
    Stochastic {
        mean: f64,
        stddev: f64,
        bounds: PriceBounds,
        rng: RandomStream,
    },
    Bandit(Box<GaussianBandit>),
}

impl Agent {
    pub fn bid(&mut self) -> Price {
        match self {
            Agent::Deterministic { price } => fixed_deterministic_bid(*price),
            Agent::Stochastic {
                mean,
                stddev,
                bounds,
                rng,
            } => fixed_stochastic_bid(*mean, *stddev, bounds, rng),
            Agent::Bandit(b) => b.act().0,
        }
    }

    /// Feeds the step outcome back. Fixed agents ignore it.
    pub fn feedback(&mut self, served: QueryVolume) -> Result<Option<LearnOutcome>, AgentError> {
        match self {
            Agent::Bandit(b) => {
                let (price, raw) = b
                    .pending_action()
                    .expect("feedback without a preceding bid");
                let reward = b.config().reward_signal.reward(price, served);
                b.observe_and_learn(price, raw, reward).map(Some)
            }
            _ => Ok(None),
        }
    }

    pub fn snapshot(&self) -> Option<PolicySnapshot> {
        match self {
            Agent::Bandit(b) => Some(b.snapshot()),
            _ => None,
        }
    }

    pub fn as_bandit(&self) -> Option<&GaussianBandit> {
        match self {
            Agent::Bandit(b) => Some(b),
            _ => None,
        }
    }
}
