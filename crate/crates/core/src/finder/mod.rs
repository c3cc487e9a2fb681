//! Parameterised smooth-and-clip source finder.
//!
//! The pipeline runs noise normalisation, multi-scale thresholding on both
//! polarities, linking, measurement and a reliability filter. Because the
//! smoothed significance of each voxel does not depend on the tuned
//! parameters, [`PreparedCube`] computes it once and every later run only
//! re-thresholds.

pub mod link;
pub mod measure;
pub mod noise;
pub mod reliability;
pub mod scfind;
pub mod smooth;

use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::cube::{Cube, SourceRecord};
use crate::error::{Error, Result};

pub use link::{link, Component, LinkConfig};
pub use measure::{measure, Measurement};
pub use noise::{normalize_noise, Normalized};
pub use scfind::{sc_find, MaskCube, Polarity, Significance};

/// Names of the four parameters exposed to tuning, in vector order.
pub const TUNED_PARAMS: [&str; 4] =
    ["scfind.threshold", "reliability.threshold", "reliability.scaleKernel", "reliability.minSNR"];

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FinderConfig {
    #[serde(rename = "scfind.threshold")]
    pub scfind_threshold: f64,
    #[serde(rename = "scfind.kernelsXY")]
    pub kernels_xy: Vec<f64>,
    #[serde(rename = "scfind.kernelsZ")]
    pub kernels_z: Vec<usize>,
    #[serde(rename = "linker.radiusXY")]
    pub linker_radius_xy: usize,
    #[serde(rename = "linker.radiusZ")]
    pub linker_radius_z: usize,
    #[serde(rename = "linker.minSizeXY")]
    pub linker_min_size_xy: usize,
    #[serde(rename = "linker.minSizeZ")]
    pub linker_min_size_z: usize,
    #[serde(rename = "reliability.threshold")]
    pub reliability_threshold: f64,
    #[serde(rename = "reliability.scaleKernel")]
    pub reliability_scale_kernel: f64,
    #[serde(rename = "reliability.minSNR")]
    pub reliability_min_snr: f64,
    #[serde(rename = "scaleNoise.perChannel")]
    pub noise_per_channel: bool,
}

impl Default for FinderConfig {
    fn default() -> Self {
        Self {
            scfind_threshold: 3.8,
            kernels_xy: vec![0.0, 3.0, 6.0],
            kernels_z: vec![0, 3, 7, 15, 31],
            linker_radius_xy: 2,
            linker_radius_z: 2,
            linker_min_size_xy: 3,
            linker_min_size_z: 3,
            reliability_threshold: 0.1,
            reliability_scale_kernel: 0.3,
            reliability_min_snr: 1.5,
            noise_per_channel: true,
        }
    }
}

impl FinderConfig {
    pub fn link_config(&self) -> LinkConfig {
        LinkConfig {
            radius_xy: self.linker_radius_xy,
            radius_z: self.linker_radius_z,
            min_size_xy: self.linker_min_size_xy,
            min_size_z: self.linker_min_size_z,
        }
    }

    /// Set a tuned parameter by its dotted name.
    pub fn set_param(&mut self, name: &str, value: f64) -> Result<()> {
        *self.param_mut(name)? = value;
        Ok(())
    }

    pub fn get_param(&self, name: &str) -> Result<f64> {
        let mut c = self.clone();
        Ok(*c.param_mut(name)?)
    }

    fn param_mut(&mut self, name: &str) -> Result<&mut f64> {
        Ok(match name {
            "scfind.threshold" => &mut self.scfind_threshold,
            "reliability.threshold" => &mut self.reliability_threshold,
            "reliability.scaleKernel" => &mut self.reliability_scale_kernel,
            "reliability.minSNR" => &mut self.reliability_min_snr,
            _ => return Err(Error::Config(format!("unknown tunable parameter '{name}'"))),
        })
    }

    /// Copy of this config with the tuned parameters replaced, in
    /// [`TUNED_PARAMS`] order.
    pub fn with_tuned(&self, values: &[f64]) -> Result<Self> {
        if values.len() != TUNED_PARAMS.len() {
            return Err(Error::Shape(format!("expected {} parameters, got {}", TUNED_PARAMS.len(), values.len())));
        }
        let mut c = self.clone();
        for (name, &v) in TUNED_PARAMS.iter().zip(values) {
            c.set_param(name, v)?;
        }
        Ok(c)
    }

    pub fn validate(&self) -> Result<()> {
        let finite = [
            self.scfind_threshold,
            self.reliability_threshold,
            self.reliability_scale_kernel,
            self.reliability_min_snr,
        ];
        if finite.iter().any(|v| !v.is_finite()) {
            return Err(Error::Config("finder parameters must be finite".into()));
        }
        if self.reliability_scale_kernel <= 0.0 {
            return Err(Error::Config("reliability.scaleKernel must be positive".into()));
        }
        if self.kernels_z.iter().any(|&k| k != 0 && k % 2 == 0) {
            return Err(Error::Config("boxcar widths in scfind.kernelsZ must be odd".into()));
        }
        Ok(())
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: Self = serde_json::from_str(text).map_err(|e| Error::Config(format!("finder config: {e}")))?;
        cfg.validate()?;
        Ok(cfg)
    }
}

/// A linked and measured source candidate.
#[derive(Clone, Debug, PartialEq)]
pub struct Detection {
    pub voxels: Vec<usize>,
    pub polarity: Polarity,
    /// Properties measured on the input cube. `record.id` is the catalog id.
    pub record: SourceRecord,
    /// Signed sum and peak on the noise-normalised cube.
    pub sum: f64,
    pub peak: f64,
    pub snr: f64,
    /// Reliability; 1 until the filter runs.
    pub rel: f64,
    pub degenerate: bool,
}

impl Detection {
    pub fn n_voxels(&self) -> usize {
        self.voxels.len()
    }
}

/// Input cube with its normalised copy and the threshold-independent
/// significance maps.
#[derive(Clone, Debug)]
pub struct PreparedCube {
    raw: Cube,
    normalized: Normalized,
    significance: Significance,
    kernels_xy: Vec<f64>,
    kernels_z: Vec<usize>,
    per_channel: bool,
    /// Ascending `(voxel, significance)` at or above [`POOL_FLOOR`], per
    /// polarity, with significance sign-corrected.
    pool: [Vec<(usize, f64)>; 2],
}

/// Thresholds at or above this re-threshold from a cached voxel pool.
pub const POOL_FLOOR: f64 = 3.0;

impl PreparedCube {
    pub fn new(cube: &Cube, cfg: &FinderConfig) -> Result<Self> {
        cfg.validate()?;
        let normalized = if cfg.noise_per_channel {
            normalize_noise(cube)?
        } else {
            let rms = noise::robust_rms(&cube.data).unwrap_or(1.0);
            Normalized { cube: cube.scaled(1.0 / rms), rms: vec![rms; cube.nz], flagged: Vec::new() }
        };
        let significance = Significance::compute(&normalized.cube, &cfg.kernels_xy, &cfg.kernels_z)?;
        let pool_of = |polarity: Polarity| {
            let map = match polarity {
                Polarity::Positive => &significance.peak,
                Polarity::Negative => &significance.trough,
            };
            let sign = polarity.sign();
            map.iter().enumerate().map(|(i, &s)| (i, sign * s)).filter(|&(_, s)| s >= POOL_FLOOR).collect()
        };
        let pool = [pool_of(Polarity::Positive), pool_of(Polarity::Negative)];
        Ok(Self {
            raw: cube.clone(),
            normalized,
            significance,
            kernels_xy: cfg.kernels_xy.clone(),
            kernels_z: cfg.kernels_z.clone(),
            per_channel: cfg.noise_per_channel,
            pool,
        })
    }

    pub fn raw(&self) -> &Cube {
        &self.raw
    }

    pub fn normalized(&self) -> &Normalized {
        &self.normalized
    }

    pub fn significance(&self) -> &Significance {
        &self.significance
    }

    fn check_compatible(&self, cfg: &FinderConfig) -> Result<()> {
        if cfg.kernels_xy != self.kernels_xy || cfg.kernels_z != self.kernels_z || cfg.noise_per_channel != self.per_channel {
            return Err(Error::Usage("finder config differs from the one the cube was prepared with".into()));
        }
        cfg.validate()
    }

    pub fn mask(&self, cfg: &FinderConfig, polarity: Polarity) -> Result<MaskCube> {
        self.check_compatible(cfg)?;
        Ok(MaskCube::from_voxels(self.raw.dims(), &self.masked(cfg.scfind_threshold, polarity), polarity))
    }

    /// Same voxels as [`Significance::masked`].
    fn masked(&self, threshold: f64, polarity: Polarity) -> Vec<usize> {
        if threshold < POOL_FLOOR {
            return self.significance.masked(threshold, polarity);
        }
        let pool = &self.pool[(polarity == Polarity::Negative) as usize];
        pool.iter().filter(|&&(_, s)| s > threshold).map(|&(i, _)| i).collect()
    }

    /// Linked and measured detections of one polarity, before reliability.
    pub fn candidates(&self, cfg: &FinderConfig, polarity: Polarity) -> Result<Vec<Detection>> {
        self.check_compatible(cfg)?;
        let voxels = self.masked(cfg.scfind_threshold, polarity);
        let components = link(&voxels, self.raw.dims(), &cfg.link_config());
        let sign = polarity.sign();
        let norm = &self.normalized.cube;
        Ok(components
            .into_iter()
            .enumerate()
            .map(|(i, c)| {
                let m = measure(&c.voxels, &self.raw, sign);
                let sum: f64 = c.voxels.iter().map(|&v| sign * norm.data[v]).sum();
                let peak = c.voxels.iter().map(|&v| sign * norm.data[v]).fold(f64::NEG_INFINITY, f64::max);
                let snr = sum / (c.voxels.len() as f64).sqrt();
                let mut record = m.record;
                record.id = i as u32 + 1;
                Detection { voxels: c.voxels, polarity, record, sum, peak, snr, rel: 1.0, degenerate: m.degenerate }
            })
            .collect())
    }

    /// Full pipeline: positive detections surviving the reliability filter.
    pub fn run(&self, cfg: &FinderConfig) -> Result<Vec<Detection>> {
        let positives = self.candidates(cfg, Polarity::Positive)?;
        let negatives = self.candidates(cfg, Polarity::Negative)?;
        Ok(reliability_filter(positives, &negatives, cfg))
    }
}

/// Assign reliabilities to `positives` and keep those passing both cuts.
/// Surviving detections are renumbered from 1.
pub fn reliability_filter(mut positives: Vec<Detection>, negatives: &[Detection], cfg: &FinderConfig) -> Vec<Detection> {
    let feats = |d: &Detection| reliability::features(d.sum, d.peak, d.n_voxels());
    let pos_f: Vec<_> = positives.iter().map(feats).collect();
    let neg_f: Vec<_> = negatives.iter().map(feats).collect();
    let (scores, defined) = reliability::reliability_scores(&pos_f, &neg_f, cfg.reliability_scale_kernel);
    if !defined && !positives.is_empty() {
        log::debug!(
            "only {} usable negative detections; reliability undefined, all positives pass",
            neg_f.iter().flatten().count()
        );
    }
    for (d, r) in positives.iter_mut().zip(scores) {
        d.rel = r;
    }
    let pass_all = cfg.reliability_threshold <= 0.0 && cfg.reliability_min_snr <= 0.0;
    if !pass_all {
        positives.retain(|d| {
            d.sum > 0.0 && d.rel >= cfg.reliability_threshold && d.snr >= cfg.reliability_min_snr
        });
    }
    for (i, d) in positives.iter_mut().enumerate() {
        d.record.id = i as u32 + 1;
    }
    positives
}

/// One-shot pipeline on a cube.
pub fn run_pipeline(cube: &Cube, cfg: &FinderConfig) -> Result<Vec<Detection>> {
    PreparedCube::new(cube, cfg)?.run(cfg)
}

pub const DETECTION_HEADER: [&str; 12] =
    ["id", "x", "y", "z", "flux", "size", "pa", "incl", "w20", "rel", "snr", "n_vox"];

pub fn records(detections: &[Detection]) -> Vec<SourceRecord> {
    detections.iter().map(|d| d.record.clone()).collect()
}

pub fn detections_to_csv<W: Write>(detections: &[Detection], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(DETECTION_HEADER)?;
    for d in detections {
        let r = &d.record;
        w.write_record([
            r.id.to_string(),
            r.x.to_string(),
            r.y.to_string(),
            r.z.to_string(),
            r.flux.to_string(),
            r.size.to_string(),
            r.pa.to_string(),
            r.incl.to_string(),
            r.w20.to_string(),
            d.rel.to_string(),
            d.snr.to_string(),
            d.n_voxels().to_string(),
        ])?;
    }
    w.flush().map_err(|e| Error::io("<detection catalog>", e))?;
    Ok(())
}

pub fn write_detections(path: &Path, detections: &[Detection]) -> Result<()> {
    let mut buf = Vec::new();
    detections_to_csv(detections, &mut buf)?;
    crate::binio::write_atomic(path, &buf)
}
