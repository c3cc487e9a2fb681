use std::path::PathBuf;

use clap::Args;

use scfind_tuner::env::{Evaluation, PatchScore, PipelineEvaluator};
use scfind_tuner::finder::write_detections;
use scfind_tuner::{binio, exec, Error, Result};

use super::eval::EvalResult;
use super::train::CONFIG_FILE;
use super::{benchmark_params, load, select_patches};
use crate::config::{read_json, RunConfig};
use crate::{parse_list, NumList};

pub const APPLY_FILE: &str = "apply.csv";
pub const COMPARISON_FILE: &str = "comparison.csv";

#[derive(Args, Debug, Clone, Default)]
pub struct ApplyArgs {
    /// Parameter values, comma separated, in parameter-space order.
    #[arg(long, value_parser = parse_list, conflicts_with = "from_eval")]
    pub params: Option<NumList>,
    /// Take the best parameters from an eval result.
    #[arg(long)]
    pub from_eval: Option<PathBuf>,
    /// Training output directory whose config to use.
    #[arg(long)]
    pub run: Option<PathBuf>,
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Cube file to process (truth read from `<stem>_truth.csv`); repeatable.
    #[arg(long = "patch")]
    pub patches: Vec<PathBuf>,
    /// Also score the finder defaults and flag the winner per patch.
    #[arg(long)]
    pub compare_benchmark: bool,
    /// Write each patch's detection catalog.
    #[arg(long)]
    pub write_catalogs: bool,
    #[arg(long, default_value = "apply")]
    pub out: PathBuf,
}

#[derive(Clone, Debug)]
pub struct ApplyOutcome {
    pub params: Vec<f64>,
    pub evaluation: Evaluation,
    pub benchmark: Option<Evaluation>,
}

fn score_rows(eval: &Evaluation) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["patch", "n_truth", "n_detected", "n_matched", "n_false", "total", "sr"])?;
    let row = |p: &PatchScore| {
        vec![
            p.name.clone(),
            p.n_truth.to_string(),
            p.n_detected.to_string(),
            p.n_matched.to_string(),
            p.n_false.to_string(),
            p.total.to_string(),
            p.sr.to_string(),
        ]
    };
    for p in &eval.patches {
        w.write_record(row(p))?;
    }
    let n_false = eval.patches.iter().map(|p| p.n_false).sum::<usize>();
    w.write_record([
        "total".to_string(),
        eval.n_truth.to_string(),
        eval.n_detected.to_string(),
        eval.n_matched.to_string(),
        n_false.to_string(),
        eval.total.to_string(),
        eval.sr.map_or(String::new(), |s| s.to_string()),
    ])?;
    w.into_inner().map_err(|e| Error::Usage(e.to_string()))
}

fn winner(derived: f64, bench: f64) -> &'static str {
    if derived > bench {
        "derived"
    } else if derived < bench {
        "benchmark"
    } else {
        "tie"
    }
}

fn comparison_rows(derived: &Evaluation, bench: &Evaluation) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["patch", "sr", "benchmark_sr", "winner"])?;
    for (d, b) in derived.patches.iter().zip(&bench.patches) {
        w.write_record([d.name.clone(), d.sr.to_string(), b.sr.to_string(), winner(d.sr, b.sr).to_string()])?;
    }
    let (d, b) = (derived.sr.unwrap_or(f64::NEG_INFINITY), bench.sr.unwrap_or(f64::NEG_INFINITY));
    w.write_record([
        "total".to_string(),
        derived.sr.map_or(String::new(), |s| s.to_string()),
        bench.sr.map_or(String::new(), |s| s.to_string()),
        winner(d, b).to_string(),
    ])?;
    w.into_inner().map_err(|e| Error::Usage(e.to_string()))
}

/// Run the finder with fixed parameters on every patch and aggregate.
pub fn apply(args: &ApplyArgs) -> Result<ApplyOutcome> {
    let config_path = args.config.clone().or_else(|| args.run.as_ref().map(|r| r.join(CONFIG_FILE)));
    let mut cfg = match &config_path {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    cfg.env.patches = select_patches(&args.patches, &cfg.env.patches);
    let space = cfg.env.space.clone();
    let values = match (&args.params, &args.from_eval) {
        (Some(p), _) => p.clone(),
        (None, Some(path)) => read_json::<EvalResult>(path)?.best_params,
        (None, None) => return Err(Error::Usage("give --params or --from-eval".into())),
    };
    if values.len() != space.dim() {
        return Err(Error::Usage(format!("expected {} parameters, got {}", space.dim(), values.len())));
    }
    for (v, b) in values.iter().zip(space.bounds()) {
        if !(b.lower..=b.upper).contains(v) {
            return Err(Error::Usage(format!("{} = {v} is outside [{}, {}]", b.name, b.lower, b.upper)));
        }
    }
    cfg.env.finder.validate()?;
    cfg.env.scorer.validate()?;
    let params = space.vector(&values)?;

    let evaluator = PipelineEvaluator::new(cfg.env.finder.clone(), cfg.env.scorer.clone(), load(&cfg.env.patches)?)?;
    use scfind_tuner::env::Evaluator;
    let evaluation = evaluator.evaluate(&space, &params)?;
    let benchmark = if args.compare_benchmark {
        Some(evaluator.evaluate(&space, &benchmark_params(&space)?)?)
    } else {
        None
    };

    std::fs::create_dir_all(&args.out).map_err(|e| Error::io(&args.out, e))?;
    binio::write_atomic(&args.out.join(APPLY_FILE), &score_rows(&evaluation)?)?;
    if let Some(b) = &benchmark {
        binio::write_atomic(&args.out.join(COMPARISON_FILE), &comparison_rows(&evaluation, b)?)?;
    }
    if args.write_catalogs {
        let mut finder = cfg.env.finder.clone();
        for (name, &v) in space.names().into_iter().zip(params.values()) {
            finder.set_param(name, v)?;
        }
        let written = exec::map(&evaluator.patches, |p| {
            let det = p.cube.run(&finder)?;
            write_detections(&args.out.join(format!("{}_detections.csv", p.name)), &det)
        });
        written.into_iter().collect::<Result<Vec<()>>>()?;
    }

    for p in &evaluation.patches {
        println!("{}: SR {}", p.name, p.sr);
    }
    match evaluation.sr {
        Some(sr) => println!("aggregate SR: {sr}"),
        None => println!("aggregate SR: none (no detections)"),
    }
    if let Some(b) = &benchmark {
        println!("benchmark aggregate SR: {}", b.sr.map_or("none".to_string(), |s| s.to_string()));
    }
    Ok(ApplyOutcome { params: values, evaluation, benchmark })
}
