use std::path::{Path, PathBuf};

use clap::Args;
use serde::{Deserialize, Serialize};

use scfind_tuner::sac::{checkpoint_step, list_checkpoints, SacAgent};
use scfind_tuner::{seed, Error, Result};

use super::train::{CHECKPOINT_DIR, CONFIG_FILE};
use super::{select_patches, RunEnv};
use crate::config::{resolve_seed, write_json, RunConfig};

#[derive(Args, Debug, Clone, Default)]
pub struct EvalArgs {
    /// Training output directory; supplies the config and checkpoints.
    #[arg(long)]
    pub run: Option<PathBuf>,
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Checkpoint file, or a directory of checkpoints to compare.
    #[arg(long)]
    pub checkpoint: Option<PathBuf>,
    /// Only consider checkpoints from this step on.
    #[arg(long, default_value_t = 0)]
    pub from_step: u64,
    /// Cube file to evaluate on (truth read from `<stem>_truth.csv`); repeatable.
    #[arg(long = "patch")]
    pub patches: Vec<PathBuf>,
    #[arg(long, default_value_t = 100)]
    pub max_steps: usize,
    /// Output JSON; defaults to `eval.json` in the run directory or here.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Candidate {
    pub checkpoint: String,
    pub step: u64,
    pub best_sr: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalResult {
    pub checkpoint: String,
    pub step: u64,
    pub param_names: Vec<String>,
    pub best_params: Vec<f64>,
    pub best_sr: Option<f64>,
    /// Score ratio after each evaluation step; `None` where nothing was detected.
    pub trace: Vec<Option<f64>>,
    pub params_trace: Vec<Vec<f64>>,
    /// Every checkpoint considered, when a directory was evaluated.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub candidates: Vec<Candidate>,
}

fn rollout(agent: &SacAgent, env: &mut RunEnv, max_steps: usize, reset_seed: u64, name: String, step: u64) -> Result<EvalResult> {
    let param_names = env.space().names().into_iter().map(String::from).collect();
    let e = env.env_mut();
    if e.state_dim() != agent.state_dim() || e.action_dim() != agent.action_dim() {
        return Err(Error::Shape(format!(
            "checkpoint {name} expects state {} / action {}, environment has {} / {}",
            agent.state_dim(),
            agent.action_dim(),
            e.state_dim(),
            e.action_dim()
        )));
    }
    let mut state = e.reset(reset_seed)?;
    let mut trace = Vec::new();
    let mut params_trace = Vec::new();
    let mut best: Option<(f64, Vec<f64>)> = None;
    for _ in 0..max_steps {
        let action = agent.deterministic_action(&state)?;
        let out = e.step(&action)?;
        let p = out.params.values().to_vec();
        if let Some(sr) = out.info.sr {
            if best.as_ref().is_none_or(|(b, _)| sr > *b) {
                best = Some((sr, p.clone()));
            }
        }
        trace.push(out.info.sr);
        params_trace.push(p);
        if out.done {
            break;
        }
        state = out.state;
    }
    let (best_sr, best_params) = match best {
        Some((s, p)) => (Some(s), p),
        None => (None, params_trace.last().cloned().unwrap_or_default()),
    };
    Ok(EvalResult { checkpoint: name, step, param_names, best_params, best_sr, trace, params_trace, candidates: Vec::new() })
}

fn candidates(path: &Path, from_step: u64) -> Result<Vec<(u64, PathBuf)>> {
    if path.is_dir() {
        let all: Vec<_> = list_checkpoints(path)?.into_iter().filter(|(s, _)| *s >= from_step).collect();
        if all.is_empty() {
            return Err(Error::Usage(format!("no checkpoints at or after step {from_step} in {}", path.display())));
        }
        Ok(all)
    } else {
        Ok(vec![(checkpoint_step(path).unwrap_or(0), path.to_path_buf())])
    }
}

/// Run the deterministic policy from a seeded reset for up to `max_steps`
/// and keep the best parameters seen. A directory of checkpoints is
/// evaluated one by one and the best result is returned.
pub fn eval(args: &EvalArgs, seed_flag: Option<u64>) -> Result<EvalResult> {
    if args.max_steps == 0 {
        return Err(Error::Usage("--max-steps must be at least 1".into()));
    }
    let config_path = args.config.clone().or_else(|| args.run.as_ref().map(|r| r.join(CONFIG_FILE)));
    let mut cfg = match &config_path {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    cfg.env.patches = select_patches(&args.patches, &cfg.env.patches);
    let seed = resolve_seed(seed_flag, cfg.seed)?;
    let ckpt = args
        .checkpoint
        .clone()
        .or_else(|| args.run.as_ref().map(|r| r.join(CHECKPOINT_DIR)))
        .ok_or_else(|| Error::Usage("give --checkpoint or --run".into()))?;
    let list = candidates(&ckpt, args.from_step)?;
    let mut env = RunEnv::build(&cfg.env)?;
    let reset_seed = seed::derive(seed, seed::TAG_ENV, 1);

    let mut results = Vec::with_capacity(list.len());
    for (step, path) in &list {
        let agent = SacAgent::load(path)?;
        let name = path.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default();
        let r = rollout(&agent, &mut env, args.max_steps, reset_seed, name, *step)?;
        log::info!("{}: best SR {:?}", r.checkpoint, r.best_sr);
        results.push(r);
    }
    let summary: Vec<Candidate> =
        results.iter().map(|r| Candidate { checkpoint: r.checkpoint.clone(), step: r.step, best_sr: r.best_sr }).collect();
    let mut best_idx = 0;
    for (i, r) in results.iter().enumerate() {
        if r.best_sr.is_some() && (results[best_idx].best_sr.is_none() || r.best_sr > results[best_idx].best_sr) {
            best_idx = i;
        }
    }
    let mut best = results.swap_remove(best_idx);
    if list.len() > 1 {
        best.candidates = summary;
    }

    let out = args.out.clone().unwrap_or_else(|| args.run.clone().unwrap_or_default().join("eval.json"));
    write_json(&out, &best)?;
    match best.best_sr {
        Some(sr) => println!("best SR: {sr} ({}, {} steps)", best.checkpoint, best.trace.len()),
        None => println!("best SR: none ({}, {} steps)", best.checkpoint, best.trace.len()),
    }
    println!("best params: {}", crate::format_list(&best.best_params));
    Ok(best)
}
