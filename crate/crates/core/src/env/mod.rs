//! Parameter tuning as a reinforcement-learning environment.
//!
//! The state is the parameter vector mapped onto `[0, 1]` per component
//! followed by the current score ratio. Actions in `[-1, 1]^d` move each
//! parameter by a fraction of its range.

pub mod evaluator;
pub mod reward;
pub mod space;

use std::path::{Path, PathBuf};
use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::cube::{read_catalog, read_cube};
use crate::cube::Patch;
use crate::error::{Error, Result};
use crate::finder::FinderConfig;
use crate::scorer::MatchConfig;

pub use evaluator::{
    score_ratio, Evaluation, Evaluator, PatchScore, PipelineEvaluator, QuadraticEvaluator, QUADRATIC_TRUTH,
};
pub use reward::{BestScope, RewardConfig, RewardShaper};
pub use space::{benchmark_values, ParamBounds, ParamSpace, ParamVector};

/// Interface the agent trains against.
pub trait Environment {
    fn state_dim(&self) -> usize;
    fn action_dim(&self) -> usize;
    fn reset(&mut self, seed: u64) -> Result<Vec<f64>>;
    fn step(&mut self, action: &[f64]) -> Result<StepOutcome>;
    /// Parameters after the last reset or step.
    fn params(&self) -> Option<&ParamVector>;
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StepInfo {
    pub total: Option<f64>,
    pub sr: Option<f64>,
    pub n_matched: usize,
    pub n_detected: usize,
    pub wall_ms: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct StepOutcome {
    pub state: Vec<f64>,
    pub reward: f64,
    pub done: bool,
    pub params: ParamVector,
    pub info: StepInfo,
}

/// State encoding of a score ratio. Missing output reads as -1 and the
/// ratio is clipped to `[-1, 1]`.
pub fn state_sr(sr: Option<f64>) -> f64 {
    sr.map_or(-1.0, |s| s.clamp(-1.0, 1.0))
}

pub const DEFAULT_DELTA: f64 = 0.1;
pub const DEFAULT_MAX_EPISODE_STEPS: usize = 100;

pub struct TuningEnv<E> {
    space: ParamSpace,
    delta: f64,
    max_steps: usize,
    evaluator: E,
    shaper: RewardShaper,
    params: Option<ParamVector>,
    sr: Option<f64>,
    steps: usize,
}

impl<E: Evaluator> TuningEnv<E> {
    pub fn new(space: ParamSpace, evaluator: E, delta: f64, max_steps: usize, reward: RewardConfig) -> Result<Self> {
        if !(delta > 0.0 && delta <= 1.0) {
            return Err(Error::Config(format!("step fraction must be in (0, 1], got {delta}")));
        }
        if max_steps == 0 {
            return Err(Error::Config("max_episode_steps must be at least 1".into()));
        }
        Ok(Self {
            space,
            delta,
            max_steps,
            evaluator,
            shaper: RewardShaper::new(reward),
            params: None,
            sr: None,
            steps: 0,
        })
    }

    pub fn space(&self) -> &ParamSpace {
        &self.space
    }

    pub fn evaluator(&self) -> &E {
        &self.evaluator
    }

    pub fn shaper(&self) -> &RewardShaper {
        &self.shaper
    }

    pub fn shaper_mut(&mut self) -> &mut RewardShaper {
        &mut self.shaper
    }

    pub fn max_episode_steps(&self) -> usize {
        self.max_steps
    }

    pub fn steps_taken(&self) -> usize {
        self.steps
    }

    pub fn current_sr(&self) -> Option<f64> {
        self.sr
    }

    pub fn evaluate(&self, params: &ParamVector) -> Result<Evaluation> {
        self.evaluator.evaluate(&self.space, params)
    }

    fn state(&self) -> Vec<f64> {
        let mut s = self.params.as_ref().map(|p| self.space.normalize(p)).unwrap_or_else(|| vec![0.0; self.space.dim()]);
        s.push(state_sr(self.sr));
        s
    }

    /// Start an episode from the given parameters.
    pub fn reset_to(&mut self, params: ParamVector) -> Result<Vec<f64>> {
        let eval = self.evaluate(&params).map_err(|e| Error::Env { step: 0, source: Box::new(e) })?;
        self.params = Some(params);
        self.sr = eval.sr;
        self.steps = 0;
        self.shaper.observe_reset(eval.sr);
        Ok(self.state())
    }
}

impl<E: Evaluator> Environment for TuningEnv<E> {
    fn state_dim(&self) -> usize {
        self.space.dim() + 1
    }

    fn action_dim(&self) -> usize {
        self.space.dim()
    }

    fn reset(&mut self, seed: u64) -> Result<Vec<f64>> {
        let params = self.space.sample(&mut ChaCha8Rng::seed_from_u64(seed));
        self.reset_to(params)
    }

    fn step(&mut self, action: &[f64]) -> Result<StepOutcome> {
        let current = self.params.as_ref().ok_or_else(|| Error::Usage("step called before reset".into()))?;
        if action.iter().any(|a| !a.is_finite()) {
            return Err(Error::Usage("action contains non-finite values".into()));
        }
        let params = self.space.apply_action(current, action, self.delta)?;
        let started = Instant::now();
        let eval = match self.evaluate(&params) {
            Ok(e) => Some(e),
            Err(e) => {
                log::warn!("pipeline failed at step {}: {e}", self.steps + 1);
                None
            }
        };
        let wall_ms = started.elapsed().as_secs_f64() * 1e3;
        self.steps += 1;
        let done = self.steps >= self.max_steps;
        let sr = eval.as_ref().and_then(|e| e.sr);
        let reward = self.shaper.shape(sr, done);
        self.params = Some(params.clone());
        self.sr = sr;
        Ok(StepOutcome {
            state: self.state(),
            reward,
            done,
            params,
            info: StepInfo {
                total: eval.as_ref().map(|e| e.total),
                sr,
                n_matched: eval.as_ref().map_or(0, |e| e.n_matched),
                n_detected: eval.as_ref().map_or(0, |e| e.n_detected),
                wall_ms,
            },
        })
    }

    fn params(&self) -> Option<&ParamVector> {
        self.params.as_ref()
    }
}

/// Cube and truth catalog on disk.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PatchFiles {
    pub cube: PathBuf,
    pub truth: PathBuf,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
}

impl PatchFiles {
    pub fn label(&self) -> String {
        self.name.clone().unwrap_or_else(|| {
            self.cube.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_else(|| "patch".into())
        })
    }
}

/// Read every patch, failing up front with the full list of missing files.
pub fn load_patches(files: &[PatchFiles]) -> Result<Vec<(String, Patch)>> {
    let missing: Vec<String> = files
        .iter()
        .flat_map(|f| [&f.cube, &f.truth])
        .filter(|p| !p.is_file())
        .map(|p| p.display().to_string())
        .collect();
    if !missing.is_empty() {
        return Err(Error::Io {
            path: PathBuf::from(missing.join(", ")),
            source: std::io::Error::new(std::io::ErrorKind::NotFound, format!("{} missing patch file(s)", missing.len())),
        });
    }
    files
        .iter()
        .map(|f| {
            let patch = Patch { cube: read_cube(&f.cube)?, truth: read_catalog(&f.truth)?, shapes: Vec::new() };
            Ok((f.label(), patch))
        })
        .collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QuadraticSpec {
    pub optimum: Vec<f64>,
    #[serde(default)]
    pub weights: Option<Vec<f64>>,
}

/// Environment section of a run configuration.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EnvConfig {
    pub space: ParamSpace,
    pub delta: f64,
    pub max_episode_steps: usize,
    pub patches: Vec<PatchFiles>,
    pub reward: RewardConfig,
    pub finder: FinderConfig,
    pub scorer: MatchConfig,
    /// Replace the pipeline by the closed-form reference objective.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub quadratic: Option<QuadraticSpec>,
}

impl Default for EnvConfig {
    fn default() -> Self {
        Self {
            space: ParamSpace::default(),
            delta: DEFAULT_DELTA,
            max_episode_steps: DEFAULT_MAX_EPISODE_STEPS,
            patches: Vec::new(),
            reward: RewardConfig::default(),
            finder: FinderConfig::default(),
            scorer: MatchConfig::default(),
            quadratic: None,
        }
    }
}

impl EnvConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.delta > 0.0 && self.delta <= 1.0) {
            return Err(Error::Config("delta must be in (0, 1]".into()));
        }
        if self.max_episode_steps == 0 {
            return Err(Error::Config("max_episode_steps must be at least 1".into()));
        }
        self.finder.validate()?;
        self.scorer.validate()?;
        match &self.quadratic {
            Some(q) => {
                QuadraticEvaluator::new(&self.space, q.optimum.clone(), q.weights.clone())?;
            }
            None => {
                if self.patches.is_empty() {
                    return Err(Error::Config("no patches configured".into()));
                }
                for name in self.space.names() {
                    self.finder.get_param(name)?;
                }
            }
        }
        Ok(())
    }

    /// Resolve relative patch paths against `dir`.
    pub fn resolve_paths(&mut self, dir: &Path) {
        for p in &mut self.patches {
            if p.cube.is_relative() {
                p.cube = dir.join(&p.cube);
            }
            if p.truth.is_relative() {
                p.truth = dir.join(&p.truth);
            }
        }
    }

    pub fn pipeline_env(&self, patches: Vec<(String, Patch)>) -> Result<TuningEnv<PipelineEvaluator>> {
        let evaluator = PipelineEvaluator::new(self.finder.clone(), self.scorer.clone(), patches)?;
        TuningEnv::new(self.space.clone(), evaluator, self.delta, self.max_episode_steps, self.reward.clone())
    }

    pub fn quadratic_env(&self, spec: &QuadraticSpec) -> Result<TuningEnv<QuadraticEvaluator>> {
        let evaluator = QuadraticEvaluator::new(&self.space, spec.optimum.clone(), spec.weights.clone())?;
        TuningEnv::new(self.space.clone(), evaluator, self.delta, self.max_episode_steps, self.reward.clone())
    }
}

/// Quadratic reference environment with equal weights.
pub fn quadratic_reference_env(optimum: &ParamVector) -> Result<TuningEnv<QuadraticEvaluator>> {
    let cfg = EnvConfig::default();
    cfg.quadratic_env(&QuadraticSpec { optimum: optimum.values().to_vec(), weights: None })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn quad() -> TuningEnv<QuadraticEvaluator> {
        let s = ParamSpace::default();
        quadratic_reference_env(&s.vector(&[3.7, 0.3, 0.4, 1.0]).unwrap()).unwrap()
    }

    #[test]
    fn reset_is_seeded_and_normalized() {
        let mut e = quad();
        let a = e.reset(5).unwrap();
        let b = e.reset(5).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.len(), 5);
        assert!(a[..4].iter().all(|v| (0.0..=1.0).contains(v)));
        let starts: Vec<Vec<f64>> = (0..10).map(|s| e.reset(s).unwrap()).collect();
        for i in 0..10 {
            for j in 0..i {
                assert_ne!(starts[i][..4], starts[j][..4]);
            }
        }
    }

    #[test]
    fn done_at_max_steps() {
        let mut e = quad();
        e.reset(1).unwrap();
        for k in 1..=DEFAULT_MAX_EPISODE_STEPS {
            let o = e.step(&[0.0; 4]).unwrap();
            assert_eq!(o.done, k == DEFAULT_MAX_EPISODE_STEPS);
        }
    }

    #[test]
    fn zero_actions_hold_sr() {
        let mut e = quad();
        e.reset(2).unwrap();
        let first = e.step(&[0.0; 4]).unwrap().info.sr;
        for _ in 0..5 {
            assert_eq!(e.step(&[0.0; 4]).unwrap().info.sr, first);
        }
    }

    #[test]
    fn step_before_reset_is_usage_error() {
        let mut e = quad();
        assert!(matches!(e.step(&[0.0; 4]), Err(Error::Usage(_))));
        e.reset(0).unwrap();
        assert!(e.step(&[0.0; 3]).is_err());
    }

    #[test]
    fn config_requires_patches_or_quadratic() {
        assert!(EnvConfig::default().validate().is_err());
        let cfg = EnvConfig {
            quadratic: Some(QuadraticSpec { optimum: vec![3.7, 0.3, 0.4, 1.0], weights: None }),
            ..Default::default()
        };
        cfg.validate().unwrap();
        let text = serde_json::to_string(&cfg).unwrap();
        let back: EnvConfig = serde_json::from_str(&text).unwrap();
        assert_eq!(back, cfg);
    }

    #[test]
    fn missing_patch_files_are_listed() {
        let files = vec![
            PatchFiles { cube: "/nonexistent/a.sfcb".into(), truth: "/nonexistent/a.csv".into(), name: None },
            PatchFiles { cube: "/nonexistent/b.sfcb".into(), truth: "/nonexistent/b.csv".into(), name: None },
        ];
        let err = load_patches(&files).unwrap_err().to_string();
        assert!(err.contains("a.sfcb") && err.contains("b.csv"), "{err}");
    }
}
