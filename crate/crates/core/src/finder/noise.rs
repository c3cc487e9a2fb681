//! Robust noise measurement and per-channel normalisation.

use crate::cube::Cube;
use crate::{Error, Result};

/// Scale factor turning a median absolute deviation into a Gaussian sigma.
pub const MAD_TO_SIGMA: f64 = 1.4826;

pub const MIN_CHANNEL_VOXELS: usize = 64;

fn median_in_place(v: &mut [f64]) -> f64 {
    let n = v.len();
    debug_assert!(n > 0);
    let mid = n / 2;
    let (left, m, _) = v.select_nth_unstable_by(mid, f64::total_cmp);
    let upper = *m;
    if n % 2 == 1 {
        upper
    } else {
        let lower = left.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        0.5 * (lower + upper)
    }
}

/// `1.4826 * median(|x - median(x)|)`. Reorders `values`.
pub fn mad_rms(values: &mut [f64]) -> f64 {
    if values.is_empty() {
        return 0.0;
    }
    let med = median_in_place(values);
    values.iter_mut().for_each(|v| *v = (*v - med).abs());
    MAD_TO_SIGMA * median_in_place(values)
}

pub fn std_dev(values: &[f64]) -> f64 {
    if values.is_empty() {
        return 0.0;
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n).sqrt()
}

/// Robust RMS with fallbacks: MAD, then standard deviation. Returns `None`
/// when both are zero (constant data).
pub fn robust_rms(values: &[f64]) -> Option<f64> {
    let mut scratch = values.to_vec();
    let mad = mad_rms(&mut scratch);
    if mad > 0.0 {
        return Some(mad);
    }
    let sd = std_dev(values);
    (sd > 0.0).then_some(sd)
}

#[derive(Clone, Debug)]
pub struct Normalized {
    pub cube: Cube,
    /// Divisor applied to each channel (1.0 for flagged channels).
    pub rms: Vec<f64>,
    /// Channels with zero spread, left unscaled.
    pub flagged: Vec<usize>,
}

/// Divide every spectral channel by its robust RMS.
pub fn normalize_noise(cube: &Cube) -> Result<Normalized> {
    let per_channel = cube.nx * cube.ny;
    if per_channel < MIN_CHANNEL_VOXELS {
        return Err(Error::Usage(format!(
            "channels have {per_channel} voxels, need at least {MIN_CHANNEL_VOXELS}"
        )));
    }
    let mut rms = Vec::with_capacity(cube.nz);
    let mut flagged = Vec::new();
    for z in 0..cube.nz {
        match robust_rms(&cube.channel(z)) {
            Some(r) => rms.push(r),
            None => {
                rms.push(1.0);
                flagged.push(z);
            }
        }
    }
    if !flagged.is_empty() {
        log::warn!("{} constant channel(s) left unscaled", flagged.len());
    }
    let nz = cube.nz;
    let data = cube.data.iter().enumerate().map(|(i, v)| v / rms[i % nz]).collect();
    Ok(Normalized { cube: Cube { data, ..*cube }, rms, flagged })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::seed;
    use rand_distr::{Distribution, Normal};

    #[test]
    fn median_even_and_odd() {
        assert_eq!(median_in_place(&mut [3.0, 1.0, 2.0]), 2.0);
        assert_eq!(median_in_place(&mut [4.0, 1.0, 3.0, 2.0]), 2.5);
    }

    #[test]
    fn mad_of_gaussian_recovers_sigma() {
        let mut rng = seed::rng(4);
        let d = Normal::new(0.0, 3.0).unwrap();
        let mut v: Vec<f64> = (0..10_000).map(|_| d.sample(&mut rng)).collect();
        let r = mad_rms(&mut v);
        assert!((r / 3.0 - 1.0).abs() < 0.03, "{r}");
    }

    #[test]
    fn normalised_channel_has_unit_robust_rms() {
        let mut rng = seed::rng(8);
        let d = Normal::new(0.0, 3.0).unwrap();
        let (nx, ny, nz) = (100, 100, 2);
        let data = (0..nx * ny * nz).map(|_| d.sample(&mut rng)).collect();
        let cube = Cube::from_data(nx, ny, nz, data).unwrap();
        let n = normalize_noise(&cube).unwrap();
        for z in 0..nz {
            let r = robust_rms(&n.cube.channel(z)).unwrap();
            assert!((r - 1.0).abs() < 0.02, "channel {z}: {r}");
        }
    }

    #[test]
    fn constant_channel_is_flagged() {
        let mut cube = Cube::zeros(8, 8, 3);
        for x in 0..8 {
            for y in 0..8 {
                cube.set(x, y, 0, (x * 8 + y) as f64);
            }
        }
        let n = normalize_noise(&cube).unwrap();
        assert_eq!(n.flagged, vec![1, 2]);
        assert_eq!(n.rms[1], 1.0);
    }

    #[test]
    fn sparse_channel_falls_back_to_std() {
        let mut v = vec![0.0; 100];
        v[0] = 10.0;
        assert_eq!(robust_rms(&v), Some(std_dev(&v)));
        assert_eq!(robust_rms(&[0.0; 10]), None);
    }

    #[test]
    fn too_few_voxels_per_channel() {
        assert!(normalize_noise(&Cube::zeros(4, 4, 40)).is_err());
    }

    #[test]
    fn normalisation_is_scale_invariant() {
        let mut rng = seed::rng(2);
        let d = Normal::new(0.0, 1.0).unwrap();
        let data = (0..16 * 16 * 4).map(|_| d.sample(&mut rng)).collect();
        let cube = Cube::from_data(16, 16, 4, data).unwrap();
        let a = normalize_noise(&cube).unwrap().cube;
        // Powers of two scale exactly.
        assert_eq!(normalize_noise(&cube.scaled(4.0)).unwrap().cube, a);
        let b = normalize_noise(&cube.scaled(3.7)).unwrap().cube;
        for (u, v) in a.data.iter().zip(&b.data) {
            assert!((u - v).abs() <= 1e-12 * u.abs().max(1.0));
        }
    }
}
