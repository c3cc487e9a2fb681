use std::path::PathBuf;

use clap::Args;
use serde::{Deserialize, Serialize};

use scfind_tuner::env::Evaluation;
use scfind_tuner::sac::{train_loop, write_log, SacAgent, StepRecord, TrainOptions};
use scfind_tuner::{Error, Result};

use super::{benchmark_params, select_patches, RunEnv};
use crate::config::{resolve_seed, write_json, RunConfig};
use crate::{parse_list, NumList};

pub const LOG_FILE: &str = "train_log.csv";
pub const BENCHMARK_FILE: &str = "benchmark.json";
pub const CONFIG_FILE: &str = "config.json";
pub const CHECKPOINT_DIR: &str = "checkpoints";

#[derive(Args, Debug, Clone, Default)]
pub struct TrainArgs {
    /// JSON run configuration.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub steps: Option<u64>,
    #[arg(long)]
    pub checkpoint_every: Option<u64>,
    /// Output directory.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Cube file to train on (truth read from `<stem>_truth.csv`); repeatable.
    #[arg(long = "patch")]
    pub patches: Vec<PathBuf>,
    /// Use the closed-form reference objective with this optimum.
    #[arg(long, value_parser = parse_list)]
    pub quadratic: Option<NumList>,
    /// Hidden layer sizes, comma separated.
    #[arg(long, value_parser = parse_list)]
    pub hidden: Option<NumList>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkRecord {
    pub param_names: Vec<String>,
    pub params: Vec<f64>,
    pub sr: Option<f64>,
    pub evaluation: Evaluation,
}

#[derive(Clone, Debug)]
pub struct TrainOutcome {
    pub out_dir: PathBuf,
    pub benchmark: BenchmarkRecord,
    pub records: Vec<StepRecord>,
    pub checkpoints: Vec<PathBuf>,
}

/// Resolve flags over the config file; everything is validated before any
/// compute starts.
pub fn resolve(args: &TrainArgs, seed_flag: Option<u64>) -> Result<RunConfig> {
    let mut cfg = match &args.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    if let Some(s) = args.steps {
        cfg.total_steps = s;
    }
    if let Some(c) = args.checkpoint_every {
        cfg.checkpoint_every = c;
    }
    if let Some(o) = &args.out {
        cfg.output_dir = o.clone();
    }
    cfg.env.patches = select_patches(&args.patches, &cfg.env.patches);
    // The saved config is read back relative to the run directory.
    for p in &mut cfg.env.patches {
        for path in [&mut p.cube, &mut p.truth] {
            *path = std::path::absolute(&*path).map_err(|e| Error::io(&*path, e))?;
        }
    }
    if let Some(q) = &args.quadratic {
        cfg.env.quadratic = Some(scfind_tuner::env::QuadraticSpec { optimum: q.clone(), weights: None });
    }
    if let Some(h) = &args.hidden {
        if h.iter().any(|v| v.fract() != 0.0 || *v < 1.0) {
            return Err(Error::Usage("--hidden takes positive integers".into()));
        }
        cfg.sac.hidden = h.iter().map(|&v| v as usize).collect();
    }
    cfg.seed = Some(resolve_seed(seed_flag, cfg.seed)?);
    cfg.validate()?;
    Ok(cfg)
}

pub fn train(args: &TrainArgs, seed_flag: Option<u64>) -> Result<TrainOutcome> {
    let cfg = resolve(args, seed_flag)?;
    let seed = cfg.seed.expect("resolved");
    let out = cfg.output_dir.clone();
    let mut env = RunEnv::build(&cfg.env)?;
    let space = env.space().clone();

    let bench = benchmark_params(&space)?;
    let evaluation = env.evaluate(&bench)?;
    let benchmark = BenchmarkRecord {
        param_names: space.names().into_iter().map(String::from).collect(),
        params: bench.values().to_vec(),
        sr: evaluation.sr,
        evaluation,
    };
    match benchmark.sr {
        Some(sr) => println!("benchmark SR: {sr}"),
        None => println!("benchmark SR: none (no detections)"),
    }
    std::fs::create_dir_all(&out).map_err(|e| Error::io(&out, e))?;
    write_json(&out.join(BENCHMARK_FILE), &benchmark)?;
    write_json(&out.join(CONFIG_FILE), &cfg)?;

    let log_path = out.join(LOG_FILE);
    let n_params = space.dim();
    let env = env.env_mut();
    let mut agent = SacAgent::new(env.state_dim(), env.action_dim(), cfg.sac.clone(), seed)?;
    let opts = TrainOptions {
        total_steps: cfg.total_steps,
        checkpoint_every: cfg.checkpoint_every,
        checkpoint_dir: Some(out.join(CHECKPOINT_DIR)),
        seed,
    };
    let mut seen: Vec<StepRecord> = Vec::new();
    let mut write_err = None;
    let result = train_loop(&mut agent, env, &opts, |r| {
        seen.push(r.clone());
        if cfg.checkpoint_every > 0 && r.step % cfg.checkpoint_every == 0 {
            let sr = r.sr.map_or("none".to_string(), |v| format!("{v:.4}"));
            log::info!("step {} episode {} sr {sr} alpha {:.4}", r.step, r.episode, r.alpha);
            if let Err(e) = write_log(&log_path, &seen, n_params) {
                write_err.get_or_insert(e);
            }
        }
    });
    if let Some(e) = write_err {
        return Err(e);
    }
    let log = result?;
    write_log(&log_path, &log.records, n_params)?;

    if let Some(best) = log.records.iter().filter(|r| r.sr.is_some()).max_by(|a, b| a.sr.partial_cmp(&b.sr).expect("finite")) {
        println!("best training SR: {} at step {} params {}", best.sr.expect("filtered"), best.step, crate::format_list(&best.params));
    }
    println!("steps: {}, checkpoints: {}", log.records.len(), log.checkpoints.len());
    Ok(TrainOutcome { out_dir: out, benchmark, records: log.records, checkpoints: log.checkpoints })
}
