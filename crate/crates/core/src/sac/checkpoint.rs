//! `SFCK` agent checkpoints.
//!
//! Payload: hyperparameters as a JSON blob, the five networks as nested
//! `SFTN` blobs (actor, critic 1, critic 2, target 1, target 2), `log_alpha`,
//! the four optimizer states (actor, critics, temperature), the ChaCha8 RNG
//! position (seed, stream, word position), global step and update count.

use std::path::{Path, PathBuf};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::agent::SacAgent;
use super::hyper::SacHyperparams;
use crate::binio::{self, Reader, Writer};
use crate::nn::{AdamState, Mlp};
use crate::{Error, Result};

const MAGIC: &[u8; 4] = b"SFCK";
const VERSION: u8 = 1;
const KIND: &str = "checkpoint";

pub fn checkpoint_name(step: u64) -> String {
    format!("ckpt_{step:06}.sfck")
}

/// Step number encoded in a checkpoint file name.
pub fn checkpoint_step(path: &Path) -> Option<u64> {
    let name = path.file_name()?.to_str()?;
    name.strip_prefix("ckpt_")?.strip_suffix(".sfck")?.parse().ok()
}

/// Checkpoints in `dir`, sorted by step.
pub fn list_checkpoints(dir: &Path) -> Result<Vec<(u64, PathBuf)>> {
    let entries = std::fs::read_dir(dir).map_err(|e| Error::io(dir, e))?;
    let mut out = Vec::new();
    for entry in entries {
        let path = entry.map_err(|e| Error::io(dir, e))?.path();
        if let Some(step) = checkpoint_step(&path) {
            out.push((step, path));
        }
    }
    out.sort();
    Ok(out)
}

impl SacAgent {
    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        let mut w = Writer::new();
        w.blob(&serde_json::to_vec(&self.hyper)?);
        for net in [&self.actor, &self.critic1, &self.critic2, &self.target1, &self.target2] {
            w.blob(&net.to_bytes());
        }
        w.f64(self.log_alpha);
        for opt in [&self.actor_opt, &self.critic1_opt, &self.critic2_opt, &self.alpha_opt] {
            opt.write(&mut w);
        }
        w.bytes(&self.rng.get_seed());
        w.u64(self.rng.get_stream());
        w.u128(self.rng.get_word_pos());
        w.u64(self.global_step);
        w.u64(self.updates);
        Ok(binio::seal(MAGIC, VERSION, &w.into_inner()))
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let (version, payload) = binio::open(bytes, MAGIC, KIND)?;
        if version != VERSION {
            return Err(Error::format(KIND, format!("unsupported version {version}")));
        }
        let mut r = Reader::new(payload, KIND);
        let hyper: SacHyperparams =
            serde_json::from_slice(r.blob()?).map_err(|e| Error::format(KIND, e.to_string()))?;
        let mut net = || -> Result<Mlp> { Mlp::from_bytes(r.blob()?) };
        let nets = [net()?, net()?, net()?, net()?, net()?];
        let log_alpha = r.f64()?;
        let opts = [AdamState::read(&mut r)?, AdamState::read(&mut r)?, AdamState::read(&mut r)?, AdamState::read(&mut r)?];
        let seed: [u8; 32] = r.take(32)?.try_into().expect("32 bytes");
        let mut rng = ChaCha8Rng::from_seed(seed);
        rng.set_stream(r.u64()?);
        rng.set_word_pos(r.u128()?);
        let global_step = r.u64()?;
        let updates = r.u64()?;
        r.finish()?;
        SacAgent::from_parts(hyper, nets, log_alpha, opts, rng, global_step, updates)
            .map_err(|e| Error::format(KIND, e.to_string()))
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        binio::write_atomic(path, &self.to_bytes()?)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
        Self::from_bytes(&bytes)
    }
}
