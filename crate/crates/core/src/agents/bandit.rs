//! Trainable Gaussian bandits.
//!
//! Three update rules share one agent state machine:
//!
//! * `vanillaPG` takes one score-function step per observation and discards it.
//! * `ppoClear` waits for a full buffer, runs several clipped-surrogate epochs,
//!   then empties the buffer (on-policy).
//! * `ppoRolling` keeps a fixed-size window of the most recent experiences and
//!   runs the clipped-surrogate epochs after every observation. Older entries
//!   were drawn by earlier policies, so the rule is off-policy; the importance
//!   ratio against the stored behavior log-probability corrects for that.
//!
//! Independently of the rule, a run of zero-reward observations switches the
//! bandit into a mode that interpolates its parameters back toward the initial
//! policy instead of learning.

use serde::{Deserialize, Serialize};

use super::buffer::{Experience, ReplayBuffer};
use super::AgentError;
use crate::market::{agent_revenue, Price, QueryVolume, Reward};
use crate::policy::{
    log_prob, log_prob_grad, sample_action, ActionSpace, GaussianPolicyParams, ParamGrad,
    PolicySnapshot,
};
use crate::rng::RandomStream;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum UpdateRule {
    #[serde(rename = "vanillaPG")]
    VanillaPg,
    #[serde(rename = "ppoClear")]
    PpoClear,
    #[serde(rename = "ppoRolling")]
    PpoRolling,
}

impl UpdateRule {
    pub fn name(self) -> &'static str {
        match self {
            UpdateRule::VanillaPg => "vanillaPG",
            UpdateRule::PpoClear => "ppoClear",
            UpdateRule::PpoRolling => "ppoRolling",
        }
    }
}

/// What the bandit learns from. Recorded metrics always report revenue.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub enum RewardSignal {
    /// `price × served volume`
    #[default]
    Revenue,
    /// Served volume alone, ignoring the price it was sold at.
    ServedVolume,
}

impl RewardSignal {
    pub fn reward(self, price: Price, served: QueryVolume) -> Reward {
        match self {
            RewardSignal::Revenue => agent_revenue(price, served),
            RewardSignal::ServedVolume => Reward::new(served.value()).unwrap_or(Reward::ZERO),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct BanditConfig {
    pub update_rule: UpdateRule,
    pub learning_rate: f64,
    pub clip_epsilon: f64,
    pub buffer_capacity: usize,
    pub epochs_per_update: usize,
    pub baseline_decay: f64,
    pub pull_rate: f64,
    pub no_reward_window: u64,
    pub initial_params: GaussianPolicyParams,
    pub action_space: ActionSpace,
    pub reward_signal: RewardSignal,
}

impl BanditConfig {
    pub const DEFAULT_LEARNING_RATE: f64 = 1e-2;
    pub const DEFAULT_CLIP_EPSILON: f64 = 0.2;
    pub const DEFAULT_BUFFER_CAPACITY: usize = 16;
    pub const DEFAULT_EPOCHS_PER_UPDATE: usize = 4;
    pub const DEFAULT_BASELINE_DECAY: f64 = 0.99;
    pub const DEFAULT_PULL_RATE: f64 = 0.02;
    pub const DEFAULT_NO_REWARD_WINDOW: u64 = 10;

    pub fn new(
        update_rule: UpdateRule,
        initial_params: GaussianPolicyParams,
        action_space: ActionSpace,
    ) -> Self {
        Self {
            update_rule,
            learning_rate: Self::DEFAULT_LEARNING_RATE,
            clip_epsilon: Self::DEFAULT_CLIP_EPSILON,
            buffer_capacity: Self::DEFAULT_BUFFER_CAPACITY,
            epochs_per_update: Self::DEFAULT_EPOCHS_PER_UPDATE,
            baseline_decay: Self::DEFAULT_BASELINE_DECAY,
            pull_rate: Self::DEFAULT_PULL_RATE,
            no_reward_window: Self::DEFAULT_NO_REWARD_WINDOW,
            initial_params,
            action_space,
            reward_signal: RewardSignal::Revenue,
        }
    }

    /// Returns the name of the first violated constraint.
    pub fn validate(&self) -> Result<(), &'static str> {
        let positive = |x: f64| x.is_finite() && x > 0.0;
        if !positive(self.learning_rate) {
            return Err("learningRate must be positive");
        }
        if !positive(self.clip_epsilon) {
            return Err("clipEpsilon must be positive");
        }
        if self.buffer_capacity == 0 {
            return Err("bufferCapacity must be positive");
        }
        if self.epochs_per_update == 0 {
            return Err("epochsPerUpdate must be positive");
        }
        if !(0.0..1.0).contains(&self.baseline_decay) {
            return Err("baselineDecay must lie in [0, 1)");
        }
        if !positive(self.pull_rate) || self.pull_rate > 1.0 {
            return Err("pullRate must lie in (0, 1]");
        }
        if self.no_reward_window == 0 {
            return Err("noRewardWindow must be positive");
        }
        if !self.initial_params.is_finite() {
            return Err("initial policy parameters must be finite");
        }
        Ok(())
    }
}

/// Exponential moving averages of observed rewards and of their squares.
/// The first is the advantage baseline; the second scales vanilla PG advantages.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct RewardBaseline {
    pub ema_value: f64,
    pub ema_square: f64,
    pub decay: f64,
}

impl RewardBaseline {
    pub fn new(decay: f64) -> Self {
        Self {
            ema_value: 0.0,
            ema_square: 0.0,
            decay,
        }
    }

    pub fn observe(&mut self, reward: f64) {
        self.ema_value = self.decay * self.ema_value + (1.0 - self.decay) * reward;
        self.ema_square = self.decay * self.ema_square + (1.0 - self.decay) * reward * reward;
    }

    pub fn advantage(&self, reward: f64) -> f64 {
        reward - self.ema_value
    }

    /// Running root-mean-square of rewards.
    pub fn rms(&self) -> f64 {
        self.ema_square.max(0.0).sqrt()
    }
}

/// Fisher-preconditioned ascent step.
///
/// The Fisher information of a Gaussian in `(mean, ln stddev)` coordinates is
/// `diag(1/σ², 2)`, so the step is `lr · (σ² ∂mean, ½ ∂scale)`. This keeps the
/// mean step proportional to the policy's own spread instead of to `1/σ`.
pub fn natural_step(
    params: &GaussianPolicyParams,
    grad: ParamGrad,
    learning_rate: f64,
) -> ParamGrad {
    let var = (2.0 * params.scale_param).exp();
    ParamGrad {
        d_mean: learning_rate * var * grad.d_mean,
        d_scale: learning_rate * 0.5 * grad.d_scale,
    }
}

/// Zero-mean, unit-variance rescaling. A constant input maps to all zeros.
pub fn standardize(values: &[f64]) -> Vec<f64> {
    if values.is_empty() {
        return Vec::new();
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    let sd = var.sqrt();
    if sd <= 1e-12 * mean.abs().max(1.0) {
        return vec![0.0; values.len()];
    }
    values.iter().map(|v| (v - mean) / sd).collect()
}

/// Mean clipped surrogate `min(ρA, clip(ρ, 1−ε, 1+ε)A)` over the samples.
pub fn clipped_surrogate(
    params: &GaussianPolicyParams,
    samples: &[Experience],
    advantages: &[f64],
    clip_epsilon: f64,
) -> f64 {
    if samples.is_empty() {
        return 0.0;
    }
    let total: f64 = samples
        .iter()
        .zip(advantages)
        .map(|(s, &a)| {
            let ratio = (log_prob(params, s.raw_action) - s.behavior_log_prob).exp();
            let clipped = ratio.clamp(1.0 - clip_epsilon, 1.0 + clip_epsilon);
            (ratio * a).min(clipped * a)
        })
        .sum();
    total / samples.len() as f64
}

/// Analytic gradient of [`clipped_surrogate`]. Samples whose clipped branch
/// is active contribute nothing.
pub fn clipped_surrogate_grad(
    params: &GaussianPolicyParams,
    samples: &[Experience],
    advantages: &[f64],
    clip_epsilon: f64,
) -> ParamGrad {
    let mut grad = ParamGrad::default();
    if samples.is_empty() {
        return grad;
    }
    for (s, &a) in samples.iter().zip(advantages) {
        let ratio = (log_prob(params, s.raw_action) - s.behavior_log_prob).exp();
        let clipped = ratio.clamp(1.0 - clip_epsilon, 1.0 + clip_epsilon);
        if ratio * a <= clipped * a {
            grad += log_prob_grad(params, s.raw_action).scaled(a * ratio);
        }
    }
    grad.scaled(1.0 / samples.len() as f64)
}

/// Score-function gradient `mean(A · ∇ log π)`.
pub fn policy_gradient(
    params: &GaussianPolicyParams,
    samples: &[Experience],
    advantages: &[f64],
) -> ParamGrad {
    let mut grad = ParamGrad::default();
    if samples.is_empty() {
        return grad;
    }
    for (s, &a) in samples.iter().zip(advantages) {
        grad += log_prob_grad(params, s.raw_action).scaled(a);
    }
    grad.scaled(1.0 / samples.len() as f64)
}

/// What happened to the policy after an observation.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LearnOutcome {
    /// The update trigger was not met (`ppoClear` with a partial buffer).
    Waiting,
    Updated,
    Pulled,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
struct PendingAction {
    raw_action: f64,
    price: Price,
}

/// A Gaussian bandit's full mutable state. Serializable so a live controller
/// can persist and resume it exactly.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct GaussianBandit {
    config: BanditConfig,
    params: GaussianPolicyParams,
    buffer: ReplayBuffer,
    baseline: RewardBaseline,
    zero_reward_streak: u64,
    step: u64,
    pending: Option<PendingAction>,
    rng: RandomStream,
}

impl GaussianBandit {
    pub fn new(config: BanditConfig, rng: RandomStream) -> Self {
        Self {
            params: config.initial_params,
            buffer: ReplayBuffer::new(config.buffer_capacity),
            baseline: RewardBaseline::new(config.baseline_decay),
            zero_reward_streak: 0,
            step: 0,
            pending: None,
            config,
            rng,
        }
    }

    pub fn config(&self) -> &BanditConfig {
        &self.config
    }

    pub fn params(&self) -> GaussianPolicyParams {
        self.params
    }

    pub fn buffer(&self) -> &ReplayBuffer {
        &self.buffer
    }

    pub fn baseline(&self) -> &RewardBaseline {
        &self.baseline
    }

    pub fn zero_reward_streak(&self) -> u64 {
        self.zero_reward_streak
    }

    /// Number of observations consumed so far.
    pub fn step(&self) -> u64 {
        self.step
    }

    pub fn snapshot(&self) -> PolicySnapshot {
        self.params.snapshot(self.step)
    }

    /// Samples the next bid and remembers the raw action for [`Self::observe`].
    pub fn act(&mut self) -> (Price, f64) {
        let (price, raw_action) =
            sample_action(&self.params, &self.config.action_space, &mut self.rng);
        self.pending = Some(PendingAction { raw_action, price });
        (price, raw_action)
    }

    /// Price and raw action of the last [`Self::act`] not yet observed.
    pub fn pending_action(&self) -> Option<(Price, f64)> {
        self.pending.map(|p| (p.price, p.raw_action))
    }

    /// Records the outcome of an action drawn by the current policy.
    pub fn observe(&mut self, price: Price, raw_action: f64, reward: Reward) {
        self.pending = None;
        let exp = Experience {
            raw_action,
            price,
            reward,
            behavior_log_prob: log_prob(&self.params, raw_action),
            step_index: self.step,
        };
        self.buffer.push(exp);
        self.baseline.observe(reward.value());
        if reward.value() == 0.0 {
            self.zero_reward_streak += 1;
        } else {
            self.zero_reward_streak = 0;
        }
        self.step += 1;
    }

    pub fn pull_active(&self) -> bool {
        self.zero_reward_streak >= self.config.no_reward_window
    }

    pub fn update_due(&self) -> bool {
        match self.config.update_rule {
            UpdateRule::VanillaPg | UpdateRule::PpoRolling => !self.buffer.is_empty(),
            UpdateRule::PpoClear => self.buffer.is_full(),
        }
    }

    /// Runs whichever of pull / update / nothing the current state calls for.
    pub fn learn(&mut self) -> Result<LearnOutcome, AgentError> {
        if self.pull_active() {
            self.pull_toward_initial();
            Ok(LearnOutcome::Pulled)
        } else if self.update_due() {
            self.update()?;
            Ok(LearnOutcome::Updated)
        } else {
            Ok(LearnOutcome::Waiting)
        }
    }

    /// `observe` followed by `learn`, the per-step sequence used by the simulator.
    pub fn observe_and_learn(
        &mut self,
        price: Price,
        raw_action: f64,
        reward: Reward,
    ) -> Result<LearnOutcome, AgentError> {
        self.observe(price, raw_action, reward);
        self.learn()
    }

    /// Advantages for the buffered samples, in buffer order.
    ///
    /// Raw advantages are `reward - baseline`. The PPO rules standardize them
    /// across the buffer; vanilla PG divides by the running reward RMS.
    fn advantages(&self) -> Vec<f64> {
        let raw: Vec<f64> = self
            .buffer
            .iter()
            .map(|e| self.baseline.advantage(e.reward.value()))
            .collect();
        match self.config.update_rule {
            UpdateRule::VanillaPg => {
                let scale = self.baseline.rms();
                if scale > 0.0 {
                    raw.iter().map(|a| a / scale).collect()
                } else {
                    raw
                }
            }
            UpdateRule::PpoClear | UpdateRule::PpoRolling => standardize(&raw),
        }
    }

    /// Applies the configured update rule to the buffer, ignoring the trigger.
    pub fn update(&mut self) -> Result<GaussianPolicyParams, AgentError> {
        let samples: Vec<Experience> = self.buffer.iter().copied().collect();
        let advantages = self.advantages();
        match self.config.update_rule {
            UpdateRule::VanillaPg => {
                let grad = policy_gradient(&self.params, &samples, &advantages);
                self.apply(grad)?;
                self.buffer.clear();
            }
            UpdateRule::PpoClear | UpdateRule::PpoRolling => {
                for _ in 0..self.config.epochs_per_update {
                    let grad = clipped_surrogate_grad(
                        &self.params,
                        &samples,
                        &advantages,
                        self.config.clip_epsilon,
                    );
                    self.apply(grad)?;
                }
                if self.config.update_rule == UpdateRule::PpoClear {
                    self.buffer.clear();
                }
            }
        }
        Ok(self.params)
    }

    fn apply(&mut self, grad: ParamGrad) -> Result<(), AgentError> {
        if !grad.is_finite() {
            return Err(AgentError::NonFiniteGradient { step: self.step });
        }
        let delta = natural_step(&self.params, grad, self.config.learning_rate);
        let next = GaussianPolicyParams::new(
            self.params.mean + delta.d_mean,
            self.params.scale_param + delta.d_scale,
        );
        if !next.is_finite() {
            return Err(AgentError::NonFiniteParams { step: self.step });
        }
        self.params = next;
        Ok(())
    }

    /// Moves the parameters a `pullRate` fraction of the way back to the initial policy.
    ///
    /// On-policy rules drop their buffer since its entries no longer match the policy.
    pub fn pull_toward_initial(&mut self) -> GaussianPolicyParams {
        let init = self.config.initial_params;
        let rate = self.config.pull_rate;
        self.params = GaussianPolicyParams::new(
            self.params.mean + rate * (init.mean - self.params.mean),
            self.params.scale_param + rate * (init.scale_param - self.params.scale_param),
        );
        if self.config.update_rule != UpdateRule::PpoRolling {
            self.buffer.clear();
        }
        self.params
    }

    #[cfg(test)]
    pub(crate) fn set_params(&mut self, params: GaussianPolicyParams) {
        self.params = params;
    }
}
