//! Random-forest regression over logged (parameters, score) pairs, used to
//! rank how much each parameter drives the score.

mod tree;

use ndarray::Array2;
use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::{exec, seed, Error, Result};
use tree::TreeParams;
pub use tree::{Node, NodeKind, RegressionTree};

pub const MIN_SAMPLES: usize = 10;
pub const IMPORTANCE_HEADER: &str = "feature,importance";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ForestConfig {
    pub n_trees: usize,
    /// Unlimited when absent.
    pub max_depth: Option<usize>,
    pub min_samples_leaf: usize,
    pub bootstrap: bool,
    /// Candidate features per split; all when absent.
    pub max_features: Option<usize>,
    pub seed: u64,
}

impl Default for ForestConfig {
    fn default() -> Self {
        Self { n_trees: 100, max_depth: None, min_samples_leaf: 1, bootstrap: true, max_features: None, seed: 0 }
    }
}

impl ForestConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_trees == 0 {
            return Err(Error::Config("forest needs at least one tree".into()));
        }
        if self.min_samples_leaf == 0 {
            return Err(Error::Config("min_samples_leaf must be positive".into()));
        }
        if self.max_features == Some(0) {
            return Err(Error::Config("max_features must be positive".into()));
        }
        Ok(())
    }
}

/// Normalised impurity importances.
#[derive(Clone, Debug, PartialEq)]
pub struct Importances {
    pub values: Vec<f64>,
    /// No tree contained a split; `values` is uniform.
    pub degenerate: bool,
}

#[derive(Clone, Debug, PartialEq)]
pub struct RandomForest {
    config: ForestConfig,
    trees: Vec<RegressionTree>,
    n_features: usize,
}

impl RandomForest {
    pub fn new(config: ForestConfig) -> Result<Self> {
        config.validate()?;
        Ok(Self { config, trees: Vec::new(), n_features: 0 })
    }

    pub fn config(&self) -> &ForestConfig {
        &self.config
    }

    pub fn is_fitted(&self) -> bool {
        !self.trees.is_empty()
    }

    pub fn trees(&self) -> &[RegressionTree] {
        &self.trees
    }

    /// Fit on rows of `x` against `y`. Rows are put in a canonical order
    /// first, so the result does not depend on how the samples were listed.
    pub fn fit(&mut self, x: &Array2<f64>, y: &[f64]) -> Result<()> {
        let (n, d) = x.dim();
        if n != y.len() {
            return Err(Error::Shape(format!("{n} feature rows but {} targets", y.len())));
        }
        if n < MIN_SAMPLES {
            return Err(Error::Usage(format!("need at least {MIN_SAMPLES} samples, got {n}")));
        }
        if d == 0 {
            return Err(Error::Shape("no features".into()));
        }
        if x.iter().chain(y).any(|v| !v.is_finite()) {
            return Err(Error::Usage("features and targets must be finite".into()));
        }
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&a, &b| {
            x.row(a)
                .iter()
                .zip(x.row(b).iter())
                .map(|(p, q)| p.total_cmp(q))
                .find(|o| o.is_ne())
                .unwrap_or(std::cmp::Ordering::Equal)
                .then(y[a].total_cmp(&y[b]))
        });
        let xs = x.select(ndarray::Axis(0), &order);
        let ys: Vec<f64> = order.iter().map(|&i| y[i]).collect();

        let params = TreeParams {
            max_depth: self.config.max_depth,
            min_samples_leaf: self.config.min_samples_leaf,
            max_features: self.config.max_features.unwrap_or(d).min(d),
        };
        let (bootstrap, base) = (self.config.bootstrap, self.config.seed);
        self.trees = exec::map_range(self.config.n_trees, |t| {
            let mut rng = seed::rng(seed::derive(base, seed::TAG_TREE, t as u64));
            let sample: Vec<usize> =
                if bootstrap { (0..n).map(|_| rng.random_range(0..n)).collect() } else { (0..n).collect() };
            RegressionTree::fit(&xs, &ys, sample, params, &mut rng)
        });
        self.n_features = d;
        Ok(())
    }

    fn check_fitted(&self) -> Result<()> {
        if self.trees.is_empty() {
            return Err(Error::Usage("forest has not been fitted".into()));
        }
        Ok(())
    }

    pub fn predict(&self, x: &[f64]) -> Result<f64> {
        self.check_fitted()?;
        if x.len() != self.n_features {
            return Err(Error::Shape(format!("expected {} features, got {}", self.n_features, x.len())));
        }
        Ok(self.trees.iter().map(|t| t.predict(x)).sum::<f64>() / self.trees.len() as f64)
    }

    pub fn predict_rows(&self, x: &Array2<f64>) -> Result<Vec<f64>> {
        x.rows().into_iter().map(|r| self.predict(&r.to_vec())).collect()
    }

    /// Per-tree normalised SSE decrease, averaged over trees that split at
    /// all, then renormalised.
    pub fn importances(&self) -> Result<Importances> {
        self.check_fitted()?;
        let d = self.n_features;
        let mut acc = vec![0.0; d];
        let mut used = 0usize;
        for t in &self.trees {
            let raw = t.raw_importances();
            let total: f64 = raw.iter().sum();
            if total > 0.0 {
                used += 1;
                for (a, r) in acc.iter_mut().zip(&raw) {
                    *a += r / total;
                }
            }
        }
        let total: f64 = acc.iter().sum();
        if used == 0 || total <= 0.0 {
            log::warn!("no tree split on any feature; reporting uniform importances");
            return Ok(Importances { values: vec![1.0 / d as f64; d], degenerate: true });
        }
        Ok(Importances { values: acc.iter().map(|a| a / total).collect(), degenerate: false })
    }

    /// Mean increase in squared error when one feature column is shuffled.
    pub fn permutation_importance(&self, x: &Array2<f64>, y: &[f64], repeats: usize, seed_: u64) -> Result<Vec<f64>> {
        self.check_fitted()?;
        if x.nrows() != y.len() || x.ncols() != self.n_features {
            return Err(Error::Shape("permutation data does not match the forest".into()));
        }
        if repeats == 0 {
            return Err(Error::Usage("repeats must be positive".into()));
        }
        let mse = |x: &Array2<f64>| -> Result<f64> {
            let p = self.predict_rows(x)?;
            Ok(p.iter().zip(y).map(|(a, b)| (a - b).powi(2)).sum::<f64>() / y.len() as f64)
        };
        let base = mse(x)?;
        let mut rng = seed::rng(seed_);
        let mut out = Vec::with_capacity(self.n_features);
        for f in 0..self.n_features {
            let mut acc = 0.0;
            for _ in 0..repeats {
                let mut col: Vec<f64> = x.column(f).to_vec();
                col.shuffle(&mut rng);
                let mut xp = x.clone();
                xp.column_mut(f).assign(&ndarray::Array1::from(col));
                acc += mse(&xp)? - base;
            }
            out.push(acc / repeats as f64);
        }
        Ok(out)
    }
}

/// Pair names with values, largest first. Ties keep the input order.
pub fn ranked(names: &[String], values: &[f64]) -> Vec<(String, f64)> {
    let mut out: Vec<(String, f64)> = names.iter().cloned().zip(values.iter().copied()).collect();
    out.sort_by(|a, b| b.1.total_cmp(&a.1));
    out
}

pub fn importance_csv(rows: &[(String, f64)]) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(IMPORTANCE_HEADER.split(','))?;
    for (name, v) in rows {
        w.write_record([name.as_str(), &v.to_string()])?;
    }
    w.into_inner().map_err(|e| Error::Usage(e.to_string()))
}
