//! One-dimensional Gaussian policy over prices.
//!
//! The standard deviation is stored as an unconstrained log-scale so any
//! gradient step keeps it strictly positive. Log-densities are always taken on
//! the raw (unclamped) action; clamping into the price interval is treated as
//! part of the environment.

use serde::{Deserialize, Serialize};

use crate::market::{Price, PriceBounds};
use crate::rng::RandomStream;

/// `½·ln(2π)`
pub const HALF_LN_TWO_PI: f64 = 0.918_938_533_204_672_7;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct GaussianPolicyParams {
    pub mean: f64,
    pub scale_param: f64,
}

impl GaussianPolicyParams {
    pub fn new(mean: f64, scale_param: f64) -> Self {
        Self { mean, scale_param }
    }

    /// Builds parameters from a mean and a strictly positive standard deviation.
    pub fn from_stddev(mean: f64, stddev: f64) -> Self {
        Self::new(mean, stddev.ln())
    }

    #[inline]
    pub fn stddev(&self) -> f64 {
        self.scale_param.exp()
    }

    pub fn is_finite(&self) -> bool {
        self.mean.is_finite() && self.scale_param.is_finite()
    }

    pub fn snapshot(&self, step_index: u64) -> PolicySnapshot {
        PolicySnapshot {
            mean: self.mean,
            stddev: self.stddev(),
            step_index,
        }
    }
}

/// Gradient with respect to `(mean, scale_param)`.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct ParamGrad {
    pub d_mean: f64,
    pub d_scale: f64,
}

impl ParamGrad {
    pub fn scaled(self, k: f64) -> Self {
        Self {
            d_mean: self.d_mean * k,
            d_scale: self.d_scale * k,
        }
    }

    pub fn is_finite(&self) -> bool {
        self.d_mean.is_finite() && self.d_scale.is_finite()
    }
}

impl std::ops::AddAssign for ParamGrad {
    fn add_assign(&mut self, rhs: Self) {
        self.d_mean += rhs.d_mean;
        self.d_scale += rhs.d_scale;
    }
}

/// Point-in-time view of a policy for metrics and plotting.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct PolicySnapshot {
    pub mean: f64,
    pub stddev: f64,
    pub step_index: u64,
}

/// Maps raw Gaussian actions to prices.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct ActionSpace {
    pub bounds: PriceBounds,
    /// When set, the Gaussian lives over log-price and actions are exponentiated.
    pub log_space: bool,
}

impl ActionSpace {
    pub fn linear(bounds: PriceBounds) -> Self {
        Self {
            bounds,
            log_space: false,
        }
    }

    pub fn to_price(&self, raw_action: f64) -> Price {
        let unclamped = if self.log_space {
            raw_action.exp()
        } else {
            raw_action
        };
        self.bounds.clamp(unclamped)
    }

    /// Density of the (unclamped) price induced by `params`, evaluated at `price`.
    pub fn price_density(&self, params: &GaussianPolicyParams, price: f64) -> f64 {
        if self.log_space {
            if price <= 0.0 {
                0.0
            } else {
                log_prob(params, price.ln()).exp() / price
            }
        } else {
            log_prob(params, price).exp()
        }
    }
}

/// Draws a raw action and the clamped price it maps to.
pub fn sample_action(
    params: &GaussianPolicyParams,
    space: &ActionSpace,
    rng: &mut RandomStream,
) -> (Price, f64) {
    let raw = rng.normal(params.mean, params.stddev());
    (space.to_price(raw), raw)
}

pub fn log_prob(params: &GaussianPolicyParams, raw_action: f64) -> f64 {
    let sigma = params.stddev();
    let z = (raw_action - params.mean) / sigma;
    -0.5 * z * z - params.scale_param - HALF_LN_TWO_PI
}

/// Analytic gradient of [`log_prob`] with respect to the parameters.
pub fn log_prob_grad(params: &GaussianPolicyParams, raw_action: f64) -> ParamGrad {
    let var = (2.0 * params.scale_param).exp();
    let diff = raw_action - params.mean;
    ParamGrad {
        d_mean: diff / var,
        d_scale: diff * diff / var - 1.0,
    }
}

/// Euclidean distance in `(mean, scale_param)` space.
pub fn param_distance(a: &GaussianPolicyParams, b: &GaussianPolicyParams) -> f64 {
    (a.mean - b.mean).hypot(a.scale_param - b.scale_param)
}
