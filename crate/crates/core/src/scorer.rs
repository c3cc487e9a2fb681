//! Catalog cross-matching and detection scoring.
//!
//! Detections are paired one-to-one with truth sources by ascending scaled
//! distance. Each match scores the mean of five property accuracies, each a
//! linear ramp from 1 (exact) to 0 (error at or beyond tolerance). Unmatched
//! detections cost a fixed penalty.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::cube::SourceRecord;
use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MatchConfig {
    /// Spatial match radius in pixels.
    pub tol_xy: f64,
    /// Spectral match radius in channels.
    pub tol_z: f64,
    /// Relative tolerance on size.
    pub tol_size: f64,
    /// Relative tolerance on flux.
    pub tol_flux: f64,
    /// Degrees.
    pub tol_pa: f64,
    /// Degrees.
    pub tol_incl: f64,
    /// Relative tolerance on w20.
    pub tol_w20: f64,
    pub false_positive_penalty: f64,
}

impl Default for MatchConfig {
    fn default() -> Self {
        Self {
            tol_xy: 3.0,
            tol_z: 10.0,
            tol_size: 0.5,
            tol_flux: 0.5,
            tol_pa: 30.0,
            tol_incl: 30.0,
            tol_w20: 0.5,
            false_positive_penalty: 1.0,
        }
    }
}

impl MatchConfig {
    pub fn validate(&self) -> Result<()> {
        let tols = [self.tol_xy, self.tol_z, self.tol_size, self.tol_flux, self.tol_pa, self.tol_incl, self.tol_w20];
        if tols.iter().any(|t| !(*t > 0.0 && t.is_finite())) {
            return Err(Error::Config("match tolerances must be positive and finite".into()));
        }
        if !(self.false_positive_penalty >= 0.0 && self.false_positive_penalty.is_finite()) {
            return Err(Error::Config("false_positive_penalty must be non-negative".into()));
        }
        Ok(())
    }

    /// Scaled match distance; pairs with distance above 1 never match.
    pub fn distance(&self, a: &SourceRecord, b: &SourceRecord) -> f64 {
        let dxy2 = (a.x - b.x).powi(2) + (a.y - b.y).powi(2);
        let dz = a.z - b.z;
        (dxy2 / (self.tol_xy * self.tol_xy) + dz * dz / (self.tol_z * self.tol_z)).sqrt()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Accuracies {
    pub size: f64,
    pub flux: f64,
    pub pa: f64,
    pub incl: f64,
    pub w20: f64,
}

impl Accuracies {
    pub fn mean(&self) -> f64 {
        (self.size + self.flux + self.pa + self.incl + self.w20) / 5.0
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Match {
    pub truth_id: u32,
    pub detection_id: u32,
    pub distance: f64,
    pub accuracies: Accuracies,
    pub score: f64,
    /// Properties scored 0 because the truth value was not positive.
    #[serde(skip_serializing_if = "Vec::is_empty", default)]
    pub flagged: Vec<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScoreReport {
    pub n_truth: usize,
    pub n_detected: usize,
    pub n_matched: usize,
    pub n_false: usize,
    pub total: f64,
    pub sr: f64,
    pub matches: Vec<Match>,
}

pub const SUMMARY_HEADER: &str = "n_truth,n_detected,n_matched,n_false,total,sr";

impl ScoreReport {
    /// One CSV row matching [`SUMMARY_HEADER`].
    pub fn summary_row(&self) -> String {
        format!("{},{},{},{},{},{}", self.n_truth, self.n_detected, self.n_matched, self.n_false, self.total, self.sr)
    }

    pub fn write_summary<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "{SUMMARY_HEADER}")?;
        writeln!(out, "{}", self.summary_row())
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

/// Greedy one-to-one assignment. Returns `(truth index, detection index,
/// distance)` in the order pairs were accepted.
pub fn cross_match(truth: &[SourceRecord], detected: &[SourceRecord], cfg: &MatchConfig) -> Vec<(usize, usize, f64)> {
    let mut pairs = Vec::new();
    for (ti, t) in truth.iter().enumerate() {
        for (di, d) in detected.iter().enumerate() {
            let dist = cfg.distance(t, d);
            if dist <= 1.0 {
                pairs.push((dist, di, ti));
            }
        }
    }
    pairs.sort_by(|a, b| {
        a.0.total_cmp(&b.0)
            .then(detected[a.1].id.cmp(&detected[b.1].id))
            .then(truth[a.2].id.cmp(&truth[b.2].id))
    });
    let mut truth_used = vec![false; truth.len()];
    let mut det_used = vec![false; detected.len()];
    let mut out = Vec::new();
    for (dist, di, ti) in pairs {
        if !truth_used[ti] && !det_used[di] {
            truth_used[ti] = true;
            det_used[di] = true;
            out.push((ti, di, dist));
        }
    }
    out
}

fn ramp(error: f64, tol: f64) -> f64 {
    (1.0 - error / tol).max(0.0)
}

/// Acute difference between two position angles, in `[0, 90]`.
pub fn angle_difference(a: f64, b: f64) -> f64 {
    let d = (a - b).rem_euclid(180.0);
    d.min(180.0 - d)
}

/// Per-property accuracies and the names of properties that could not be
/// scored.
pub fn property_accuracy(truth: &SourceRecord, det: &SourceRecord, cfg: &MatchConfig) -> (Accuracies, Vec<String>) {
    let mut flagged = Vec::new();
    let mut relative = |name: &str, t: f64, d: f64, tol: f64| {
        if t > 0.0 {
            ramp((d - t).abs() / t, tol)
        } else {
            flagged.push(name.to_string());
            0.0
        }
    };
    let size = relative("size", truth.size, det.size, cfg.tol_size);
    let flux = relative("flux", truth.flux, det.flux, cfg.tol_flux);
    let w20 = relative("w20", truth.w20, det.w20, cfg.tol_w20);
    let acc = Accuracies {
        size,
        flux,
        pa: ramp(angle_difference(truth.pa, det.pa), cfg.tol_pa),
        incl: ramp((truth.incl - det.incl).abs(), cfg.tol_incl),
        w20,
    };
    (acc, flagged)
}

pub fn score(truth: &[SourceRecord], detected: &[SourceRecord], cfg: &MatchConfig) -> Result<ScoreReport> {
    if truth.is_empty() {
        return Err(Error::Usage("cannot score against an empty truth catalog".into()));
    }
    let assignment = cross_match(truth, detected, cfg);
    let mut matches: Vec<Match> = assignment
        .into_iter()
        .map(|(ti, di, distance)| {
            let (accuracies, flagged) = property_accuracy(&truth[ti], &detected[di], cfg);
            Match {
                truth_id: truth[ti].id,
                detection_id: detected[di].id,
                distance,
                score: accuracies.mean(),
                accuracies,
                flagged,
            }
        })
        .collect();
    matches.sort_by_key(|m| (m.truth_id, m.detection_id));
    let n_matched = matches.len();
    let n_false = detected.len() - n_matched;
    let total = matches.iter().map(|m| m.score).sum::<f64>() - cfg.false_positive_penalty * n_false as f64;
    Ok(ScoreReport {
        n_truth: truth.len(),
        n_detected: detected.len(),
        n_matched,
        n_false,
        total,
        sr: total / truth.len() as f64,
        matches,
    })
}
