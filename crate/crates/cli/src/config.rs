use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use scfind_tuner::env::{EnvConfig, PatchFiles};
use scfind_tuner::sac::SacHyperparams;
use scfind_tuner::{Error, Result};

pub const SEED_ENV: &str = "SCFIND_TUNER_SEED";

/// Everything a training run needs, as stored in a JSON config file.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub env: EnvConfig,
    pub sac: SacHyperparams,
    pub total_steps: u64,
    pub checkpoint_every: u64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    pub output_dir: PathBuf,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            env: EnvConfig::default(),
            sac: SacHyperparams::default(),
            total_steps: 10_000,
            checkpoint_every: 100,
            seed: None,
            output_dir: PathBuf::from("run"),
        }
    }
}

impl RunConfig {
    /// Read a config file. Relative patch paths are taken relative to the
    /// file's directory.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut cfg: RunConfig =
            serde_json::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        if let Some(dir) = path.parent() {
            cfg.env.resolve_paths(dir);
        }
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        self.env.validate()?;
        self.sac.validate()
    }
}

/// Flag, then config, then `SCFIND_TUNER_SEED`, then zero.
pub fn resolve_seed(flag: Option<u64>, config: Option<u64>) -> Result<u64> {
    if let Some(s) = flag.or(config) {
        return Ok(s);
    }
    match std::env::var(SEED_ENV) {
        Ok(v) => v.trim().parse().map_err(|_| Error::Config(format!("{SEED_ENV}={v:?} is not an unsigned integer"))),
        Err(_) => Ok(0),
    }
}

/// A cube path with its truth catalog next to it as `<stem>_truth.csv`.
pub fn patch_from_cube(cube: &Path) -> PatchFiles {
    let stem = cube.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_else(|| "patch".into());
    PatchFiles { truth: cube.with_file_name(format!("{stem}_truth.csv")), cube: cube.to_path_buf(), name: Some(stem) }
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut bytes = serde_json::to_vec_pretty(value)?;
    bytes.push(b'\n');
    scfind_tuner::binio::write_atomic(path, &bytes)
}

pub fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| Error::format("json", format!("{}: {e}", path.display())))
}
