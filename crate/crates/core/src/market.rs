//! Shared domain quantities and the reward arithmetic of the query market.
//!
//! All quantities are real-valued flows measured per simulation step. Volume
//! is a continuous aggregate rather than a count of discrete queries, so
//! proportional distributors can hand out fractional shares.

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum MarketError {
    #[error("{what} must be finite and nonnegative, got {value}")]
    Negative { what: &'static str, value: f64 },
    #[error("price floor {floor} must be below price ceiling {ceiling}")]
    EmptyBounds { floor: f64, ceiling: f64 },
}

fn check_nonnegative(what: &'static str, value: f64) -> Result<f64, MarketError> {
    if value.is_finite() && value >= 0.0 {
        Ok(value)
    } else {
        Err(MarketError::Negative { what, value })
    }
}

macro_rules! nonnegative_quantity {
    ($(#[$meta:meta])* $name:ident, $what:literal) => {
        $(#[$meta])*
        #[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Default, Serialize, Deserialize)]
        #[serde(transparent)]
        pub struct $name(f64);

        impl $name {
            pub const ZERO: Self = Self(0.0);

            pub fn new(value: f64) -> Result<Self, MarketError> {
                check_nonnegative($what, value).map(Self)
            }

            #[inline]
            pub fn value(self) -> f64 {
                self.0
            }
        }

        impl std::fmt::Display for $name {
            fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
                self.0.fmt(f)
            }
        }
    };
}

nonnegative_quantity!(
    /// A per-query price bid, in budget units.
    Price,
    "price"
);
nonnegative_quantity!(
    /// The consumer's hidden per-query budget. Every query generated in a
    /// step shares the same budget.
    Budget,
    "budget"
);
nonnegative_quantity!(
    /// Aggregate query volume for one step.
    QueryVolume,
    "query volume"
);
nonnegative_quantity!(
    /// Revenue earned in one step. Serving cost is zero, so this is never negative.
    Reward,
    "reward"
);

impl QueryVolume {
    /// Builds a volume from a possibly negative noisy realization, clamping at zero.
    pub fn clamped(value: f64) -> Self {
        if value.is_nan() || value <= 0.0 {
            Self(0.0)
        } else {
            Self(value)
        }
    }
}

impl Budget {
    /// A budget no price can exceed.
    pub const UNLIMITED: Self = Self(f64::INFINITY);
}

/// The admissible price interval `[floor, ceiling]` for an agent.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PriceBounds {
    floor: f64,
    ceiling: f64,
}

impl PriceBounds {
    pub fn new(floor: f64, ceiling: f64) -> Result<Self, MarketError> {
        check_nonnegative("price floor", floor)?;
        if !ceiling.is_finite() || ceiling <= floor {
            return Err(MarketError::EmptyBounds { floor, ceiling });
        }
        Ok(Self { floor, ceiling })
    }

    pub fn floor(&self) -> f64 {
        self.floor
    }

    pub fn ceiling(&self) -> f64 {
        self.ceiling
    }

    /// Clamps an arbitrary real into the interval. NaN maps to the floor.
    pub fn clamp(&self, value: f64) -> Price {
        let v = if value.is_nan() {
            self.floor
        } else {
            value.clamp(self.floor, self.ceiling)
        };
        Price(v)
    }

    pub fn contains(&self, value: f64) -> bool {
        value >= self.floor && value <= self.ceiling
    }
}

/// Reward of a lone agent: it is served the whole volume iff its price fits the budget.
///
/// The boundary `price == budget` pays.
pub fn single_agent_reward(price: Price, budget: Budget, volume: QueryVolume) -> Reward {
    if price.0 <= budget.0 {
        agent_revenue(price, volume)
    } else {
        Reward::ZERO
    }
}

/// Revenue for the volume a distributor actually routed to an agent.
pub fn agent_revenue(price: Price, served: QueryVolume) -> Reward {
    Reward(price.0 * served.0)
}
