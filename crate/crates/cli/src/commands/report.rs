use std::path::{Path, PathBuf};

use clap::Args;

use scfind_tuner::cube::{read_catalog, SourceRecord};
use scfind_tuner::env::ParamSpace;
use scfind_tuner::sac::read_log;
use scfind_tuner::{binio, Error, Result};

use super::apply::{APPLY_FILE, COMPARISON_FILE};
use super::eval::EvalResult;
use super::importance::param_names;
use super::train::{BenchmarkRecord, BENCHMARK_FILE};
use crate::config::read_json;
use crate::svg;

#[derive(Args, Debug, Clone, Default)]
pub struct ReportArgs {
    /// Training log CSV.
    #[arg(long)]
    pub log: PathBuf,
    /// Benchmark record; defaults to `benchmark.json` next to the log.
    #[arg(long)]
    pub benchmark: Option<PathBuf>,
    /// Eval result JSON; repeatable.
    #[arg(long = "eval")]
    pub evals: Vec<PathBuf>,
    /// Output directory of an `apply` run.
    #[arg(long)]
    pub apply: Option<PathBuf>,
    /// Emit parameter histograms over steps at or after this one.
    #[arg(long)]
    pub hist_min_step: Option<u64>,
    #[arg(long, default_value_t = 20)]
    pub bins: usize,
    /// Truth catalog for property histograms (needs --detections).
    #[arg(long, requires = "detections")]
    pub truth: Option<PathBuf>,
    /// Detection catalog for property histograms (needs --truth).
    #[arg(long, requires = "truth")]
    pub detections: Option<PathBuf>,
    /// Also render SVG charts.
    #[arg(long)]
    pub svg: bool,
    #[arg(long, default_value = "report")]
    pub out: PathBuf,
}

/// Equal-width bins over `[lo, hi]`. Values outside fall into the edge
/// bins, so the counts always sum to `values.len()`.
pub fn histogram(values: &[f64], lo: f64, hi: f64, bins: usize) -> Vec<(f64, f64, usize)> {
    let width = (hi - lo) / bins as f64;
    let mut counts = vec![0usize; bins];
    for &v in values {
        let k = if width > 0.0 { ((v - lo) / width).floor() } else { 0.0 };
        counts[(k.max(0.0) as usize).min(bins - 1)] += 1;
    }
    counts.into_iter().enumerate().map(|(k, c)| (lo + k as f64 * width, lo + (k + 1) as f64 * width, c)).collect()
}

fn data_range(values: &[f64]) -> (f64, f64) {
    let lo = values.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if lo.is_finite() {
        (lo, hi)
    } else {
        (0.0, 1.0)
    }
}

struct Out<'a> {
    dir: &'a Path,
    written: Vec<PathBuf>,
}

impl Out<'_> {
    fn csv(&mut self, name: &str, header: &[&str], rows: Vec<Vec<String>>) -> Result<()> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(header)?;
        for r in rows {
            w.write_record(r)?;
        }
        let bytes = w.into_inner().map_err(|e| Error::Usage(e.to_string()))?;
        self.file(name, &bytes)
    }

    fn file(&mut self, name: &str, bytes: &[u8]) -> Result<()> {
        let path = self.dir.join(name);
        binio::write_atomic(&path, bytes)?;
        self.written.push(path);
        Ok(())
    }
}

fn opt(v: Option<f64>) -> String {
    v.map_or(String::new(), |x| x.to_string())
}

type Getter = fn(&SourceRecord) -> f64;

const PROPERTIES: [(&str, Getter); 6] = [
    ("z", |r| r.z),
    ("flux", |r| r.flux),
    ("size", |r| r.size),
    ("pa", |r| r.pa),
    ("incl", |r| r.incl),
    ("w20", |r| r.w20),
];

/// Tidy CSVs (and optional SVGs) behind the usual result figures. Returns
/// the files written.
pub fn report(args: &ReportArgs) -> Result<Vec<PathBuf>> {
    if args.bins == 0 {
        return Err(Error::Usage("--bins must be at least 1".into()));
    }
    let records = read_log(&args.log)?;
    let bench_path = args.benchmark.clone().or_else(|| {
        let p = args.log.parent().unwrap_or(Path::new("")).join(BENCHMARK_FILE);
        p.is_file().then_some(p)
    });
    let bench_sr = match &bench_path {
        Some(p) => read_json::<BenchmarkRecord>(p)?.sr,
        None => None,
    };
    std::fs::create_dir_all(&args.out).map_err(|e| Error::io(&args.out, e))?;
    let mut out = Out { dir: &args.out, written: Vec::new() };

    let rows = records.iter().map(|r| vec![r.step.to_string(), opt(r.sr), opt(bench_sr)]).collect();
    out.csv("score_vs_step.csv", &["step", "sr", "benchmark_sr"], rows)?;
    if args.svg {
        let pts: Vec<(f64, f64)> = records.iter().filter_map(|r| r.sr.map(|s| (r.step as f64, s))).collect();
        out.file("score_vs_step.svg", svg::line_chart("Score ratio during training", "step", "SR", &pts, bench_sr).as_bytes())?;
    }

    if !args.evals.is_empty() {
        let mut rows = Vec::new();
        for p in &args.evals {
            let e: EvalResult = read_json(p)?;
            for (i, sr) in e.trace.iter().enumerate() {
                rows.push(vec![e.checkpoint.clone(), (i + 1).to_string(), opt(*sr)]);
            }
        }
        out.csv("eval_traces.csv", &["checkpoint", "eval_step", "sr"], rows)?;
    }

    if let Some(min_step) = args.hist_min_step {
        let kept: Vec<_> = records.iter().filter(|r| r.step >= min_step).collect();
        let d = records.first().map_or(0, |r| r.params.len());
        let names = param_names(d);
        let space = ParamSpace::default();
        let mut rows = Vec::new();
        for (j, name) in names.iter().enumerate() {
            let vals: Vec<f64> = kept.iter().map(|r| r.params[j]).collect();
            let (lo, hi) = match space.bounds().iter().find(|b| &b.name == name) {
                Some(b) => (b.lower, b.upper),
                None => data_range(&vals),
            };
            for (a, b, c) in histogram(&vals, lo, hi, args.bins) {
                rows.push(vec![name.clone(), a.to_string(), b.to_string(), c.to_string()]);
            }
        }
        out.csv("param_hist.csv", &["parameter", "bin_lo", "bin_hi", "count"], rows)?;
    }

    if let Some(dir) = &args.apply {
        let cmp = dir.join(COMPARISON_FILE);
        let (labels, derived, bench) = if cmp.is_file() {
            let mut r = csv::Reader::from_path(&cmp).map_err(|e| Error::format("comparison", e.to_string()))?;
            let mut l = Vec::new();
            let (mut d, mut b) = (Vec::new(), Vec::new());
            for row in r.records() {
                let row = row?;
                if &row[0] == "total" {
                    continue;
                }
                l.push(row[0].to_string());
                d.push(row[1].parse::<f64>().map_err(|e| Error::format("comparison", e.to_string()))?);
                b.push(Some(row[2].parse::<f64>().map_err(|e| Error::format("comparison", e.to_string()))?));
            }
            (l, d, b)
        } else {
            let path = dir.join(APPLY_FILE);
            let mut r = csv::Reader::from_path(&path).map_err(|e| Error::format("apply", format!("{}: {e}", path.display())))?;
            let mut l = Vec::new();
            let mut d = Vec::new();
            for row in r.records() {
                let row = row?;
                if &row[0] == "total" {
                    continue;
                }
                l.push(row[0].to_string());
                d.push(row[6].parse::<f64>().map_err(|e| Error::format("apply", e.to_string()))?);
            }
            let n = l.len();
            (l, d, vec![None; n])
        };
        let rows = labels
            .iter()
            .zip(&derived)
            .zip(&bench)
            .map(|((l, d), b)| {
                let win = match b {
                    Some(b) if d > b => "derived",
                    Some(b) if d < b => "benchmark",
                    Some(_) => "tie",
                    None => "",
                };
                vec![l.clone(), d.to_string(), opt(*b), win.to_string()]
            })
            .collect();
        out.csv("patch_scores.csv", &["patch", "sr", "benchmark_sr", "winner"], rows)?;
        if args.svg {
            let mut series = vec![("derived", derived.clone())];
            if bench.iter().all(Option::is_some) {
                series.push(("benchmark", bench.iter().map(|b| b.expect("checked")).collect()));
            }
            out.file("patch_scores.svg", svg::bar_chart("Score ratio per patch", "SR", &labels, &series).as_bytes())?;
        }
    }

    if let (Some(t), Some(d)) = (&args.truth, &args.detections) {
        let truth = read_catalog(t)?;
        let det = read_catalog(d)?;
        let mut rows = Vec::new();
        for (name, get) in PROPERTIES {
            let tv: Vec<f64> = truth.iter().map(get).collect();
            let dv: Vec<f64> = det.iter().map(get).collect();
            let all: Vec<f64> = tv.iter().chain(&dv).copied().collect();
            let (lo, hi) = data_range(&all);
            for (label, vals) in [("truth", &tv), ("detected", &dv)] {
                for (a, b, c) in histogram(vals, lo, hi, args.bins) {
                    rows.push(vec![name.to_string(), label.to_string(), a.to_string(), b.to_string(), c.to_string()]);
                }
            }
        }
        out.csv("property_hist.csv", &["property", "catalog", "bin_lo", "bin_hi", "count"], rows)?;
    }

    for p in &out.written {
        println!("wrote {}", p.display());
    }
    Ok(out.written)
}
