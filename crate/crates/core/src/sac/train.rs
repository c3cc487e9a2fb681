use std::path::{Path, PathBuf};

use rand::Rng;

use super::agent::SacAgent;
use super::buffer::{ReplayBuffer, Transition};
use super::checkpoint::checkpoint_name;
use crate::binio;
use crate::env::Environment;
use crate::seed;
use crate::{Error, Result};

#[derive(Clone, Debug, PartialEq)]
pub struct TrainOptions {
    pub total_steps: u64,
    /// Zero disables checkpoints.
    pub checkpoint_every: u64,
    pub checkpoint_dir: Option<PathBuf>,
    /// Seeds the episode resets.
    pub seed: u64,
}

/// One row of the training log.
#[derive(Clone, Debug, PartialEq)]
pub struct StepRecord {
    /// Global step, counted from 1.
    pub step: u64,
    pub episode: u64,
    pub params: Vec<f64>,
    pub sr: Option<f64>,
    pub reward: f64,
    pub critic1_loss: Option<f64>,
    pub critic2_loss: Option<f64>,
    pub actor_loss: Option<f64>,
    pub alpha: f64,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct TrainLog {
    pub records: Vec<StepRecord>,
    pub checkpoints: Vec<PathBuf>,
}

/// Act, step, store, learn. `on_step` sees every record as it is produced.
pub fn train_loop<E: Environment + ?Sized>(
    agent: &mut SacAgent,
    env: &mut E,
    opts: &TrainOptions,
    mut on_step: impl FnMut(&StepRecord),
) -> Result<TrainLog> {
    if env.state_dim() != agent.state_dim() || env.action_dim() != agent.action_dim() {
        return Err(Error::Shape(format!(
            "agent expects state {} / action {}, environment has {} / {}",
            agent.state_dim(),
            agent.action_dim(),
            env.state_dim(),
            env.action_dim()
        )));
    }
    if opts.checkpoint_every > 0 && opts.checkpoint_dir.is_none() && opts.total_steps > 0 {
        return Err(Error::Config("checkpoint_every set without a checkpoint directory".into()));
    }
    let hyper = agent.hyper.clone();
    let mut buffer = ReplayBuffer::new(hyper.buffer_capacity)?;
    let mut log = TrainLog::default();
    let mut state: Option<Vec<f64>> = None;
    let mut episode = 0u64;

    for _ in 0..opts.total_steps {
        let step = agent.global_step + 1;
        let env_err = |e: Error| match e {
            Error::Env { .. } => e,
            e => Error::Env { step, source: Box::new(e) },
        };
        let s = match state.take() {
            Some(s) => s,
            None => {
                let s = env.reset(seed::derive(opts.seed, seed::TAG_EPISODE, episode)).map_err(env_err)?;
                episode += 1;
                s
            }
        };
        let action = if hyper.random_warmup && (agent.global_step as usize) < hyper.learning_starts {
            let d = agent.action_dim();
            (0..d).map(|_| agent.rng_mut().random_range(-1.0..=1.0)).collect()
        } else {
            agent.sample_action(&s, false)?.0
        };
        let outcome = env.step(&action).map_err(env_err)?;
        buffer.push(Transition {
            state: s,
            action,
            reward: outcome.reward * hyper.reward_scale,
            next_state: outcome.state.clone(),
            done: outcome.done && !hyper.bootstrap_on_timeout,
        })?;
        agent.global_step = step;

        let mut stats = None;
        if buffer.len() >= hyper.batch_size
            && step as usize >= hyper.learning_starts
            && step.is_multiple_of(hyper.train_freq as u64)
        {
            for _ in 0..hyper.gradient_steps {
                let batch = buffer.sample(hyper.batch_size, agent.rng_mut())?;
                stats = Some(agent.gradient_step(&batch)?);
            }
        }

        let record = StepRecord {
            step,
            episode: episode - 1,
            params: outcome.params.values().to_vec(),
            sr: outcome.info.sr,
            reward: outcome.reward,
            critic1_loss: stats.map(|s| s.critic1_loss),
            critic2_loss: stats.map(|s| s.critic2_loss),
            actor_loss: stats.map(|s| s.actor_loss),
            alpha: agent.alpha(),
        };
        on_step(&record);
        log.records.push(record);

        if opts.checkpoint_every > 0 && step.is_multiple_of(opts.checkpoint_every) {
            let dir = opts.checkpoint_dir.as_deref().expect("checked above");
            let path = dir.join(checkpoint_name(step));
            agent.save(&path)?;
            log.checkpoints.push(path);
        }
        if !outcome.done {
            state = Some(outcome.state);
        }
    }
    Ok(log)
}

pub fn log_header(n_params: usize) -> Vec<String> {
    let mut h = vec!["step".to_string(), "episode".to_string()];
    h.extend((1..=n_params).map(|i| format!("param_{i}")));
    for c in ["sr", "reward", "critic1_loss", "critic2_loss", "actor_loss", "alpha"] {
        h.push(c.to_string());
    }
    h
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

pub fn log_to_csv(records: &[StepRecord], n_params: usize) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(log_header(n_params))?;
    for r in records {
        if r.params.len() != n_params {
            return Err(Error::Shape(format!("record has {} params, log has {n_params}", r.params.len())));
        }
        let mut row = vec![r.step.to_string(), r.episode.to_string()];
        row.extend(r.params.iter().map(|p| p.to_string()));
        row.push(opt(r.sr));
        row.push(r.reward.to_string());
        row.push(opt(r.critic1_loss));
        row.push(opt(r.critic2_loss));
        row.push(opt(r.actor_loss));
        row.push(r.alpha.to_string());
        w.write_record(&row)?;
    }
    w.into_inner().map_err(|e| Error::Usage(e.to_string()))
}

pub fn write_log(path: &Path, records: &[StepRecord], n_params: usize) -> Result<()> {
    binio::write_atomic(path, &log_to_csv(records, n_params)?)
}

pub fn read_log(path: &Path) -> Result<Vec<StepRecord>> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    parse_log(&bytes)
}

pub fn parse_log(bytes: &[u8]) -> Result<Vec<StepRecord>> {
    let bad = |m: String| Error::format("training log", m);
    let mut r = csv::Reader::from_reader(bytes);
    let header = r.headers()?.clone();
    let n_params = header.len().checked_sub(8).ok_or_else(|| bad("too few columns".into()))?;
    if header.iter().collect::<Vec<_>>() != log_header(n_params) {
        return Err(bad("unexpected header".into()));
    }
    let num = |s: &str, line: usize| s.parse::<f64>().map_err(|_| bad(format!("line {line}: bad number {s:?}")));
    let maybe = |s: &str, line: usize| if s.is_empty() { Ok(None) } else { num(s, line).map(Some) };
    let mut out = Vec::new();
    for (i, row) in r.records().enumerate() {
        let row = row?;
        let line = i + 2;
        let int = |s: &str| s.parse::<u64>().map_err(|_| bad(format!("line {line}: bad integer {s:?}")));
        let params = (0..n_params).map(|k| num(&row[2 + k], line)).collect::<Result<Vec<_>>>()?;
        let b = 2 + n_params;
        out.push(StepRecord {
            step: int(&row[0])?,
            episode: int(&row[1])?,
            params,
            sr: maybe(&row[b], line)?,
            reward: num(&row[b + 1], line)?,
            critic1_loss: maybe(&row[b + 2], line)?,
            critic2_loss: maybe(&row[b + 3], line)?,
            actor_loss: maybe(&row[b + 4], line)?,
            alpha: num(&row[b + 5], line)?,
        });
    }
    Ok(out)
}
