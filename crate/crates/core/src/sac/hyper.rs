use serde::{Deserialize, Serialize};

use crate::nn::{Activation, AdamConfig};
use crate::{Error, Result};

/// How the entropy temperature is set.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase", tag = "mode", content = "alpha")]
pub enum AlphaMode {
    Fixed(f64),
    /// Learned, starting from the given value.
    Auto(f64),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SacHyperparams {
    pub gamma: f64,
    pub tau: f64,
    /// Defaults to `-action_dim` when absent.
    pub target_entropy: Option<f64>,
    pub batch_size: usize,
    pub buffer_capacity: usize,
    /// Environment steps collected before the first gradient step.
    pub learning_starts: usize,
    pub train_freq: usize,
    pub gradient_steps: usize,
    pub alpha_mode: AlphaMode,
    pub learning_rate: f64,
    pub hidden: Vec<usize>,
    pub activation: Activation,
    /// Treat time-limit episode ends as non-terminal when bootstrapping.
    pub bootstrap_on_timeout: bool,
    /// Uniform random actions until learning starts.
    pub random_warmup: bool,
    /// Rewards are multiplied by this before entering the replay buffer.
    pub reward_scale: f64,
}

impl Default for SacHyperparams {
    fn default() -> Self {
        Self {
            gamma: 0.99,
            tau: 0.005,
            target_entropy: None,
            batch_size: 64,
            buffer_capacity: 1000,
            learning_starts: 64,
            train_freq: 1,
            gradient_steps: 1,
            alpha_mode: AlphaMode::Auto(1.0),
            learning_rate: 3e-4,
            hidden: vec![256, 256],
            activation: Activation::Relu,
            bootstrap_on_timeout: true,
            random_warmup: true,
            reward_scale: 0.01,
        }
    }
}

impl SacHyperparams {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::Config(m.to_string()));
        if !(0.0..1.0).contains(&self.gamma) {
            return bad("gamma must lie in [0, 1)");
        }
        if !(self.tau > 0.0 && self.tau <= 1.0) {
            return bad("tau must lie in (0, 1]");
        }
        if self.batch_size == 0 || self.batch_size > self.buffer_capacity {
            return bad("batch_size must be positive and at most buffer_capacity");
        }
        if self.train_freq == 0 || self.gradient_steps == 0 {
            return bad("train_freq and gradient_steps must be positive");
        }
        match self.alpha_mode {
            AlphaMode::Fixed(a) if !(a >= 0.0 && a.is_finite()) => return bad("fixed alpha must be finite and non-negative"),
            AlphaMode::Auto(a) if !(a > 0.0 && a.is_finite()) => return bad("initial alpha must be finite and positive"),
            _ => {}
        }
        if let Some(h) = self.target_entropy {
            if !h.is_finite() {
                return bad("target_entropy must be finite");
            }
        }
        if self.hidden.is_empty() || self.hidden.contains(&0) {
            return bad("hidden layer sizes must be positive");
        }
        if !(self.reward_scale > 0.0 && self.reward_scale.is_finite()) {
            return bad("reward_scale must be finite and positive");
        }
        self.adam().validate()
    }

    pub fn adam(&self) -> AdamConfig {
        AdamConfig::with_lr(self.learning_rate)
    }

    pub fn target_entropy_for(&self, action_dim: usize) -> f64 {
        self.target_entropy.unwrap_or(-(action_dim as f64))
    }
}
