//! Shaped reward for parameter-tuning steps.

use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BestScope {
    /// Best score tracked over the whole run.
    Global,
    /// Best score forgotten at every reset.
    Episode,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RewardConfig {
    /// Reward when there is no output or the score ratio is negative.
    pub no_output: f64,
    pub base_scale: f64,
    pub exp_slope: f64,
    pub exp_offset: f64,
    pub improvement: f64,
    pub regression: f64,
    pub best_bonus: f64,
    pub timeout_penalty: f64,
    /// Changes smaller than this earn neither the improvement bonus nor
    /// the regression penalty.
    pub sr_tolerance: f64,
    /// Award the improvement bonus together with the best bonus.
    pub stack_best_with_improvement: bool,
    /// Apply the timeout penalty even when the best bonus was just earned.
    pub timeout_with_best: bool,
    pub best_scope: BestScope,
}

impl Default for RewardConfig {
    fn default() -> Self {
        Self {
            no_output: -5.0,
            base_scale: 10.0,
            exp_slope: 5.0,
            exp_offset: -1.0,
            improvement: 2.0,
            regression: -2.0,
            best_bonus: 3.0,
            timeout_penalty: -3.0,
            sr_tolerance: 1e-9,
            stack_best_with_improvement: true,
            timeout_with_best: true,
            best_scope: BestScope::Global,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct RewardShaper {
    pub config: RewardConfig,
    prev_sr: Option<f64>,
    best_sr: f64,
}

impl RewardShaper {
    pub fn new(config: RewardConfig) -> Self {
        Self { config, prev_sr: None, best_sr: f64::NEG_INFINITY }
    }

    pub fn prev_sr(&self) -> Option<f64> {
        self.prev_sr
    }

    /// Highest score ratio observed in the current scope.
    pub fn best_sr(&self) -> f64 {
        self.best_sr
    }

    /// Record the score at an episode start without producing a reward.
    pub fn observe_reset(&mut self, sr: Option<f64>) {
        if self.config.best_scope == BestScope::Episode {
            self.best_sr = f64::NEG_INFINITY;
        }
        self.prev_sr = sr;
        if let Some(s) = sr {
            self.best_sr = self.best_sr.max(s);
        }
    }

    /// Forget all history.
    pub fn clear(&mut self) {
        self.prev_sr = None;
        self.best_sr = f64::NEG_INFINITY;
    }

    pub fn base(&self, sr: f64) -> f64 {
        let c = &self.config;
        c.base_scale * (c.exp_slope * sr + c.exp_offset).exp()
    }

    pub fn shape(&mut self, sr: Option<f64>, at_max_steps: bool) -> f64 {
        let c = self.config.clone();
        let Some(sr) = sr else {
            return c.no_output;
        };
        let prev = self.prev_sr.replace(sr);
        let is_best = sr > self.best_sr;
        self.best_sr = self.best_sr.max(sr);
        if sr < 0.0 {
            return c.no_output;
        }
        let mut r = self.base(sr);
        let improved = prev.is_some_and(|p| sr > p + c.sr_tolerance);
        let regressed = prev.is_some_and(|p| sr < p - c.sr_tolerance);
        if improved && (c.stack_best_with_improvement || !is_best) {
            r += c.improvement;
        }
        if regressed {
            r += c.regression;
        }
        if is_best {
            r += c.best_bonus;
        }
        if at_max_steps && (c.timeout_with_best || !is_best) {
            r += c.timeout_penalty;
        }
        r
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn base_at_point_two_is_ten() {
        let s = RewardShaper::new(RewardConfig::default());
        assert_eq!(s.base(0.2), 10.0);
    }

    #[test]
    fn best_tracks_maximum() {
        let mut s = RewardShaper::new(RewardConfig::default());
        let trace = [0.1, -0.3, 0.5, 0.2, 0.4];
        for &v in &trace {
            s.shape(Some(v), false);
        }
        assert_eq!(s.best_sr(), 0.5);
        s.shape(None, false);
        assert_eq!(s.prev_sr(), Some(0.4));
    }

    #[test]
    fn episode_scope_resets_best() {
        let cfg = RewardConfig { best_scope: BestScope::Episode, ..Default::default() };
        let mut s = RewardShaper::new(cfg);
        s.observe_reset(Some(0.5));
        s.observe_reset(Some(0.1));
        assert_eq!(s.best_sr(), 0.1);
        let mut g = RewardShaper::new(RewardConfig::default());
        g.observe_reset(Some(0.5));
        g.observe_reset(Some(0.1));
        assert_eq!(g.best_sr(), 0.5);
    }
}
