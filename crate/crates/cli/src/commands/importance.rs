use std::path::PathBuf;

use clap::Args;
use ndarray::Array2;

use scfind_tuner::env::ParamSpace;
use scfind_tuner::forest::{importance_csv, ranked, ForestConfig, RandomForest, MIN_SAMPLES};
use scfind_tuner::sac::read_log;
use scfind_tuner::{binio, Error, Result};

#[derive(Args, Debug, Clone)]
pub struct ImportanceArgs {
    /// Training log CSV.
    #[arg(long)]
    pub log: PathBuf,
    /// Ignore rows before this step.
    #[arg(long, default_value_t = 0)]
    pub min_step: u64,
    #[arg(long, default_value_t = 100)]
    pub trees: usize,
    /// Also write permutation importances here.
    #[arg(long)]
    pub permutation: Option<PathBuf>,
    #[arg(long, default_value = "importance.csv")]
    pub out: PathBuf,
}

/// Parameter names for a log with `n` parameter columns.
pub(crate) fn param_names(n: usize) -> Vec<String> {
    let space = ParamSpace::default();
    if space.dim() == n {
        space.names().into_iter().map(String::from).collect()
    } else {
        (1..=n).map(|i| format!("param_{i}")).collect()
    }
}

/// Fit a forest from logged parameters to SR and write ranked impurity
/// importances. Rows without an SR are skipped.
pub fn importance(args: &ImportanceArgs, seed: u64) -> Result<Vec<(String, f64)>> {
    let records = read_log(&args.log)?;
    let rows: Vec<_> = records.iter().filter(|r| r.step >= args.min_step && r.sr.is_some()).collect();
    if rows.len() < MIN_SAMPLES {
        return Err(Error::Usage(format!(
            "need at least {MIN_SAMPLES} usable rows (step >= {} with a score), found {}",
            args.min_step,
            rows.len()
        )));
    }
    let d = rows[0].params.len();
    let x = Array2::from_shape_fn((rows.len(), d), |(i, j)| rows[i].params[j]);
    let y: Vec<f64> = rows.iter().map(|r| r.sr.expect("filtered")).collect();
    let mut forest = RandomForest::new(ForestConfig { n_trees: args.trees, seed, ..ForestConfig::default() })?;
    forest.fit(&x, &y)?;
    let names = param_names(d);
    let imp = forest.importances()?;
    let out = ranked(&names, &imp.values);
    binio::write_atomic(&args.out, &importance_csv(&out)?)?;
    if let Some(p) = &args.permutation {
        let perm = forest.permutation_importance(&x, &y, 5, seed)?;
        binio::write_atomic(p, &importance_csv(&ranked(&names, &perm))?)?;
    }
    for (n, v) in &out {
        println!("{n}: {v:.4}");
    }
    Ok(out)
}
