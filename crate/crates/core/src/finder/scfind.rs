//! Multi-scale smooth-and-clip finding.
//!
//! For every (spatial, spectral) kernel pair the normalised cube is
//! smoothed, its robust RMS re-measured, and voxels above `threshold * rms`
//! are ORed into the mask. A voxel is therefore masked iff its largest
//! significance over all kernel pairs exceeds the threshold, so the
//! per-voxel maximum (and minimum, for the negated cube) is computed once
//! and every later threshold is a single comparison.

use super::noise::robust_rms;
use super::smooth::{smooth_spatial, smooth_spectral};
use crate::cube::Cube;
use crate::{exec, Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Polarity {
    Positive,
    Negative,
}

impl Polarity {
    pub fn sign(self) -> f64 {
        match self {
            Polarity::Positive => 1.0,
            Polarity::Negative => -1.0,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct MaskCube {
    pub nx: usize,
    pub ny: usize,
    pub nz: usize,
    pub mask: Vec<bool>,
    pub polarity: Polarity,
}

impl MaskCube {
    pub fn empty(dims: (usize, usize, usize), polarity: Polarity) -> Self {
        let (nx, ny, nz) = dims;
        Self { nx, ny, nz, mask: vec![false; nx * ny * nz], polarity }
    }

    pub fn from_voxels(dims: (usize, usize, usize), voxels: &[usize], polarity: Polarity) -> Self {
        let mut m = Self::empty(dims, polarity);
        voxels.iter().for_each(|&v| m.mask[v] = true);
        m
    }

    pub fn dims(&self) -> (usize, usize, usize) {
        (self.nx, self.ny, self.nz)
    }

    /// Masked voxel indices in ascending order.
    pub fn voxels(&self) -> Vec<usize> {
        self.mask.iter().enumerate().filter(|(_, &m)| m).map(|(i, _)| i).collect()
    }

    pub fn count(&self) -> usize {
        self.mask.iter().filter(|&&m| m).count()
    }

    pub fn is_subset_of(&self, other: &MaskCube) -> bool {
        self.mask.iter().zip(&other.mask).all(|(&a, &b)| !a || b)
    }
}

pub fn validate_kernels(dims: (usize, usize, usize), kernels_xy: &[f64], kernels_z: &[usize]) -> Result<()> {
    let (nx, ny, nz) = dims;
    if kernels_xy.is_empty() || kernels_z.is_empty() {
        return Err(Error::Config("kernel lists must not be empty".into()));
    }
    for &k in kernels_xy {
        if !(k >= 0.0 && k.is_finite()) {
            return Err(Error::Config(format!("spatial kernel {k} must be a non-negative FWHM")));
        }
        if k > nx.min(ny) as f64 {
            return Err(Error::Config(format!(
                "spatial kernel {k} exceeds the {nx}x{ny} sky plane"
            )));
        }
    }
    for &k in kernels_z {
        if k != 0 && k % 2 == 0 {
            return Err(Error::Config(format!("boxcar width {k} must be odd")));
        }
        if k > nz {
            return Err(Error::Config(format!("boxcar width {k} exceeds {nz} channels")));
        }
    }
    Ok(())
}

/// Per-voxel extreme significance over all kernel pairs.
#[derive(Clone, Debug)]
pub struct Significance {
    dims: (usize, usize, usize),
    /// Max over kernels of `smoothed / rms`.
    pub peak: Vec<f64>,
    /// Min over kernels of `smoothed / rms`.
    pub trough: Vec<f64>,
}

impl Significance {
    pub fn compute(cube: &Cube, kernels_xy: &[f64], kernels_z: &[usize]) -> Result<Self> {
        validate_kernels(cube.dims(), kernels_xy, kernels_z)?;
        let n = cube.len();
        let partials = exec::map(kernels_xy, |&kxy| {
            let spatial = smooth_spatial(cube, kxy);
            let mut peak = vec![f64::NEG_INFINITY; n];
            let mut trough = vec![f64::INFINITY; n];
            for &kz in kernels_z {
                let smoothed = smooth_spectral(&spatial, kz);
                // A constant smoothed cube has no noise to clip against.
                let Some(rms) = robust_rms(&smoothed.data) else { continue };
                for ((p, t), v) in peak.iter_mut().zip(trough.iter_mut()).zip(&smoothed.data) {
                    let s = v / rms;
                    *p = p.max(s);
                    *t = t.min(s);
                }
            }
            (peak, trough)
        });
        let mut peak = vec![f64::NEG_INFINITY; n];
        let mut trough = vec![f64::INFINITY; n];
        for (p, t) in partials {
            peak.iter_mut().zip(&p).for_each(|(a, b)| *a = a.max(*b));
            trough.iter_mut().zip(&t).for_each(|(a, b)| *a = a.min(*b));
        }
        Ok(Self { dims: cube.dims(), peak, trough })
    }

    pub fn dims(&self) -> (usize, usize, usize) {
        self.dims
    }

    /// Ascending indices of voxels exceeding `threshold` for `polarity`.
    pub fn masked(&self, threshold: f64, polarity: Polarity) -> Vec<usize> {
        match polarity {
            Polarity::Positive => self
                .peak
                .iter()
                .enumerate()
                .filter(|(_, &s)| s > threshold)
                .map(|(i, _)| i)
                .collect(),
            Polarity::Negative => self
                .trough
                .iter()
                .enumerate()
                .filter(|(_, &s)| -s > threshold)
                .map(|(i, _)| i)
                .collect(),
        }
    }

    pub fn mask(&self, threshold: f64, polarity: Polarity) -> MaskCube {
        MaskCube::from_voxels(self.dims, &self.masked(threshold, polarity), polarity)
    }
}

/// Smooth-and-clip mask of an already normalised cube.
pub fn sc_find(
    cube: &Cube,
    threshold: f64,
    kernels_xy: &[f64],
    kernels_z: &[usize],
    polarity: Polarity,
) -> Result<MaskCube> {
    Ok(Significance::compute(cube, kernels_xy, kernels_z)?.mask(threshold, polarity))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_cube_masks_nothing() {
        let c = Cube::zeros(16, 16, 32);
        let m = sc_find(&c, 3.8, &[0.0, 3.0], &[0, 3], Polarity::Positive).unwrap();
        assert_eq!(m.count(), 0);
    }

    #[test]
    fn single_bright_voxel_is_the_whole_mask() {
        let mut c = Cube::zeros(16, 16, 32);
        c.set(7, 9, 11, 100.0);
        let m = sc_find(&c, 3.8, &[0.0], &[1], Polarity::Positive).unwrap();
        assert_eq!(m.voxels(), vec![c.index(7, 9, 11)]);
        let neg = sc_find(&c, 3.8, &[0.0], &[1], Polarity::Negative).unwrap();
        assert_eq!(neg.count(), 0);
    }

    #[test]
    fn kernel_validation() {
        let d = (16, 16, 32);
        assert!(validate_kernels(d, &[0.0, 3.0, 6.0], &[0, 3, 7, 15, 31]).is_ok());
        assert!(validate_kernels(d, &[0.0], &[4]).is_err());
        assert!(validate_kernels(d, &[17.0], &[0]).is_err());
        assert!(validate_kernels(d, &[0.0], &[33]).is_err());
        assert!(validate_kernels(d, &[], &[0]).is_err());
    }

    #[test]
    fn negative_polarity_is_the_negated_cube() {
        let mut c = Cube::zeros(16, 16, 32);
        c.set(3, 3, 3, -50.0);
        c.set(10, 10, 20, 40.0);
        let sig = Significance::compute(&c, &[0.0, 3.0], &[0, 3]).unwrap();
        let neg_sig = Significance::compute(&c.negated(), &[0.0, 3.0], &[0, 3]).unwrap();
        assert_eq!(sig.masked(3.8, Polarity::Negative), neg_sig.masked(3.8, Polarity::Positive));
    }
}
