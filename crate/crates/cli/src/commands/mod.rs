mod apply;
mod eval;
mod gen;
mod importance;
mod report;
mod train;

pub use apply::{apply, ApplyArgs, ApplyOutcome};
pub use eval::{eval, EvalArgs, EvalResult};
pub use gen::{gen, GenArgs, ManifestEntry};
pub use importance::{importance, ImportanceArgs};
pub use report::{histogram, report, ReportArgs};
pub use train::{train, BenchmarkRecord, TrainArgs, TrainOutcome, BENCHMARK_FILE, CHECKPOINT_DIR, CONFIG_FILE, LOG_FILE};

use std::path::PathBuf;

use scfind_tuner::env::{load_patches, PatchFiles};
use scfind_tuner::{cube::Patch, Result};

use crate::config::patch_from_cube;

/// Patches named on the command line replace the configured ones.
pub(crate) fn select_patches(cli: &[PathBuf], configured: &[PatchFiles]) -> Vec<PatchFiles> {
    if cli.is_empty() {
        configured.to_vec()
    } else {
        cli.iter().map(|p| patch_from_cube(p)).collect()
    }
}

pub(crate) fn load(files: &[PatchFiles]) -> Result<Vec<(String, Patch)>> {
    if files.is_empty() {
        return Err(scfind_tuner::Error::Config("no patches given".into()));
    }
    load_patches(files)
}

use scfind_tuner::env::{
    EnvConfig, Environment, Evaluation, Evaluator, ParamSpace, ParamVector, PipelineEvaluator, QuadraticEvaluator,
    TuningEnv,
};
use scfind_tuner::finder::FinderConfig;

/// The environment a run config describes.
pub(crate) enum RunEnv {
    Pipeline(TuningEnv<PipelineEvaluator>),
    Quadratic(TuningEnv<QuadraticEvaluator>),
}

impl RunEnv {
    pub fn build(cfg: &EnvConfig) -> Result<Self> {
        cfg.validate()?;
        Ok(match &cfg.quadratic {
            Some(q) => RunEnv::Quadratic(cfg.quadratic_env(q)?),
            None => RunEnv::Pipeline(cfg.pipeline_env(load(&cfg.patches)?)?),
        })
    }

    pub fn env_mut(&mut self) -> &mut dyn Environment {
        match self {
            RunEnv::Pipeline(e) => e,
            RunEnv::Quadratic(e) => e,
        }
    }

    pub fn space(&self) -> &ParamSpace {
        match self {
            RunEnv::Pipeline(e) => e.space(),
            RunEnv::Quadratic(e) => e.space(),
        }
    }

    pub fn evaluate(&self, params: &ParamVector) -> Result<Evaluation> {
        match self {
            RunEnv::Pipeline(e) => e.evaluator().evaluate(e.space(), params),
            RunEnv::Quadratic(e) => e.evaluator().evaluate(e.space(), params),
        }
    }
}

/// Finder defaults for every tuned parameter in `space`.
pub(crate) fn benchmark_params(space: &ParamSpace) -> Result<ParamVector> {
    let defaults = FinderConfig::default();
    let values = space.names().into_iter().map(|n| defaults.get_param(n)).collect::<Result<Vec<f64>>>()?;
    space.vector(&values)
}
