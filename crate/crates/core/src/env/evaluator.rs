//! Scoring a parameter vector: the finder pipeline over patches, or a
//! closed-form stand-in with a known optimum.

use serde::{Deserialize, Serialize};

use super::space::{ParamSpace, ParamVector};
use crate::cube::{Patch, SourceRecord};
use crate::error::{Error, Result};
use crate::exec;
use crate::finder::{records, FinderConfig, PreparedCube};
use crate::scorer::{score, MatchConfig, ScoreReport};

/// Score ratio: total score over truth count.
pub fn score_ratio(total: f64, n_truth: usize) -> Result<f64> {
    if n_truth == 0 {
        return Err(Error::Usage("score ratio needs at least one truth source".into()));
    }
    Ok(total / n_truth as f64)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PatchScore {
    pub name: String,
    pub n_truth: usize,
    pub n_detected: usize,
    pub n_matched: usize,
    pub n_false: usize,
    pub total: f64,
    pub sr: f64,
}

impl PatchScore {
    fn from_report(name: &str, r: &ScoreReport) -> Self {
        Self {
            name: name.to_string(),
            n_truth: r.n_truth,
            n_detected: r.n_detected,
            n_matched: r.n_matched,
            n_false: r.n_false,
            total: r.total,
            sr: r.sr,
        }
    }
}

/// Outcome of scoring one parameter vector.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Evaluation {
    pub total: f64,
    pub n_truth: usize,
    pub n_detected: usize,
    pub n_matched: usize,
    /// `None` when nothing was detected anywhere.
    pub sr: Option<f64>,
    pub patches: Vec<PatchScore>,
}

impl Evaluation {
    pub fn aggregate(patches: Vec<PatchScore>) -> Result<Self> {
        let total = patches.iter().map(|p| p.total).sum();
        let n_truth = patches.iter().map(|p| p.n_truth).sum();
        let n_detected = patches.iter().map(|p| p.n_detected).sum();
        let n_matched = patches.iter().map(|p| p.n_matched).sum();
        let sr = if n_detected == 0 { None } else { Some(score_ratio(total, n_truth)?) };
        Ok(Self { total, n_truth, n_detected, n_matched, sr, patches })
    }
}

pub trait Evaluator: Send + Sync {
    fn evaluate(&self, space: &ParamSpace, params: &ParamVector) -> Result<Evaluation>;
}

/// A patch ready for repeated pipeline runs.
#[derive(Clone, Debug)]
pub struct PreparedPatch {
    pub name: String,
    pub cube: PreparedCube,
    pub truth: Vec<SourceRecord>,
}

/// Runs the finder with shared parameters on every patch and scores the
/// union against the truth catalogs.
#[derive(Clone, Debug)]
pub struct PipelineEvaluator {
    pub finder: FinderConfig,
    pub matcher: MatchConfig,
    pub patches: Vec<PreparedPatch>,
}

impl PipelineEvaluator {
    pub fn new(finder: FinderConfig, matcher: MatchConfig, patches: Vec<(String, Patch)>) -> Result<Self> {
        if patches.is_empty() {
            return Err(Error::Config("at least one patch is required".into()));
        }
        matcher.validate()?;
        let prepared = exec::map(&patches, |(name, p)| {
            if p.truth.is_empty() {
                return Err(Error::Config(format!("patch '{name}' has an empty truth catalog")));
            }
            Ok(PreparedPatch { name: name.clone(), cube: PreparedCube::new(&p.cube, &finder)?, truth: p.truth.clone() })
        });
        Ok(Self { finder, matcher, patches: prepared.into_iter().collect::<Result<_>>()? })
    }

    fn config_for(&self, space: &ParamSpace, params: &ParamVector) -> Result<FinderConfig> {
        let mut cfg = self.finder.clone();
        for (name, &v) in space.names().into_iter().zip(params.values()) {
            cfg.set_param(name, v)?;
        }
        Ok(cfg)
    }

    /// Per-patch score reports for `params`.
    pub fn reports(&self, space: &ParamSpace, params: &ParamVector) -> Result<Vec<ScoreReport>> {
        let cfg = self.config_for(space, params)?;
        exec::map(&self.patches, |p| {
            let det = p.cube.run(&cfg)?;
            score(&p.truth, &records(&det), &self.matcher)
        })
        .into_iter()
        .collect()
    }
}

impl Evaluator for PipelineEvaluator {
    fn evaluate(&self, space: &ParamSpace, params: &ParamVector) -> Result<Evaluation> {
        let reports = self.reports(space, params)?;
        let scores = self.patches.iter().zip(&reports).map(|(p, r)| PatchScore::from_report(&p.name, r)).collect();
        Evaluation::aggregate(scores)
    }
}

/// Score ratio `1 - sum_i w_i (p_i - opt_i)^2 / range_i^2`, clipped to
/// `[-1, 1]`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct QuadraticEvaluator {
    pub optimum: Vec<f64>,
    pub weights: Vec<f64>,
}

/// Truth count the quadratic stand-in reports.
pub const QUADRATIC_TRUTH: usize = 100;

impl QuadraticEvaluator {
    pub fn new(space: &ParamSpace, optimum: Vec<f64>, weights: Option<Vec<f64>>) -> Result<Self> {
        let weights = weights.unwrap_or_else(|| vec![1.0 / space.dim() as f64; space.dim()]);
        if optimum.len() != space.dim() || weights.len() != space.dim() {
            return Err(Error::Shape("quadratic optimum/weights must match the parameter space".into()));
        }
        for (o, b) in optimum.iter().zip(space.bounds()) {
            if !(b.lower..=b.upper).contains(o) {
                return Err(Error::Config(format!("optimum for '{}' is outside its bounds", b.name)));
            }
        }
        if weights.iter().any(|w| !(*w >= 0.0)) {
            return Err(Error::Config("quadratic weights must be non-negative".into()));
        }
        Ok(Self { optimum, weights })
    }

    pub fn sr(&self, space: &ParamSpace, params: &ParamVector) -> f64 {
        let loss: f64 = params
            .values()
            .iter()
            .zip(&self.optimum)
            .zip(&self.weights)
            .zip(space.bounds())
            .map(|(((p, o), w), b)| w * (p - o).powi(2) / b.range().powi(2))
            .sum();
        (1.0 - loss).clamp(-1.0, 1.0)
    }
}

impl Evaluator for QuadraticEvaluator {
    fn evaluate(&self, space: &ParamSpace, params: &ParamVector) -> Result<Evaluation> {
        let sr = self.sr(space, params);
        let total = sr * QUADRATIC_TRUTH as f64;
        let patch = PatchScore {
            name: "quadratic".into(),
            n_truth: QUADRATIC_TRUTH,
            n_detected: QUADRATIC_TRUTH,
            n_matched: QUADRATIC_TRUTH,
            n_false: 0,
            total,
            sr,
        };
        Ok(Evaluation { total, n_truth: QUADRATIC_TRUTH, n_detected: QUADRATIC_TRUTH, n_matched: QUADRATIC_TRUTH, sr: Some(sr), patches: vec![patch] })
    }
}
