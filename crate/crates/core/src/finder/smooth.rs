//! Separable smoothing: Gaussian in the sky plane, boxcar along the
//! spectral axis, both with symmetric (half-sample) reflection at edges.

use crate::cube::{Cube, FWHM_PER_SIGMA};
use crate::exec;

/// Fold any index into `0..n` by mirroring about the array edges.
#[inline]
pub fn reflect(i: isize, n: usize) -> usize {
    let period = 2 * n as isize;
    let m = i.rem_euclid(period) as usize;
    if m < n {
        m
    } else {
        2 * n - 1 - m
    }
}

/// Normalised Gaussian taps for a kernel of the given FWHM, truncated at
/// four sigma. FWHM 0 yields the identity `[1.0]`.
pub fn gaussian_taps(fwhm: f64) -> Vec<f64> {
    if fwhm <= 0.0 {
        return vec![1.0];
    }
    let sigma = fwhm / FWHM_PER_SIGMA;
    let radius = (4.0 * sigma).ceil() as isize;
    let taps: Vec<f64> = (-radius..=radius)
        .map(|k| (-0.5 * (k as f64 / sigma).powi(2)).exp())
        .collect();
    let total: f64 = taps.iter().sum();
    taps.into_iter().map(|t| t / total).collect()
}

fn smooth_x(src: &Cube, taps: &[f64]) -> Cube {
    let (nx, ny, nz) = src.dims();
    let slab = ny * nz;
    let r = (taps.len() / 2) as isize;
    let mut out = Cube::zeros(nx, ny, nz);
    exec::for_each_chunk_mut(&mut out.data, slab, |x, dst| {
        for (k, &w) in taps.iter().enumerate() {
            let sx = reflect(x as isize + k as isize - r, nx);
            let s = &src.data[sx * slab..(sx + 1) * slab];
            dst.iter_mut().zip(s).for_each(|(d, v)| *d += w * v);
        }
    });
    out
}

fn smooth_y(src: &Cube, taps: &[f64]) -> Cube {
    let (nx, ny, nz) = src.dims();
    let slab = ny * nz;
    let r = (taps.len() / 2) as isize;
    let mut out = Cube::zeros(nx, ny, nz);
    exec::for_each_chunk_mut(&mut out.data, slab, |x, dst| {
        let s = &src.data[x * slab..(x + 1) * slab];
        for y in 0..ny {
            let row = &mut dst[y * nz..(y + 1) * nz];
            for (k, &w) in taps.iter().enumerate() {
                let sy = reflect(y as isize + k as isize - r, ny);
                row.iter_mut().zip(&s[sy * nz..(sy + 1) * nz]).for_each(|(d, v)| *d += w * v);
            }
        }
    });
    out
}

/// Gaussian smoothing in x and y with the given FWHM in pixels.
pub fn smooth_spatial(cube: &Cube, fwhm: f64) -> Cube {
    if fwhm <= 0.0 {
        return cube.clone();
    }
    let taps = gaussian_taps(fwhm);
    smooth_y(&smooth_x(cube, &taps), &taps)
}

/// Boxcar average along z over `width` channels (odd). Widths 0 and 1 are
/// the identity.
pub fn smooth_spectral(cube: &Cube, width: usize) -> Cube {
    if width <= 1 {
        return cube.clone();
    }
    let (_, ny, nz) = cube.dims();
    let r = (width / 2) as isize;
    let inv = 1.0 / width as f64;
    let mut out = Cube::zeros(cube.nx, ny, nz);
    exec::for_each_chunk_mut(&mut out.data, ny * nz, |x, dst| {
        let mut padded = vec![0.0; nz + 2 * r as usize];
        for y in 0..ny {
            let base = (x * ny + y) * nz;
            let line = &cube.data[base..base + nz];
            for (j, p) in padded.iter_mut().enumerate() {
                *p = line[reflect(j as isize - r, nz)];
            }
            // Direct window sums: a running sum would leave round-off
            // residue where the input is exactly zero.
            let row = &mut dst[y * nz..(y + 1) * nz];
            for (z, out) in row.iter_mut().enumerate() {
                *out = padded[z..z + width].iter().sum::<f64>() * inv;
            }
        }
    });
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reflect_is_half_sample_symmetric() {
        let got: Vec<usize> = (-3..7).map(|i| reflect(i, 4)).collect();
        assert_eq!(got, vec![2, 1, 0, 0, 1, 2, 3, 3, 2, 1]);
        // Folds repeatedly for radii wider than the axis.
        assert_eq!(reflect(-9, 4), 0);
        assert_eq!(reflect(12, 4), 3);
    }

    #[test]
    fn taps_sum_to_one_and_cover_four_sigma() {
        let t = gaussian_taps(6.0);
        assert!((t.iter().sum::<f64>() - 1.0).abs() < 1e-14);
        let sigma = 6.0 / FWHM_PER_SIGMA;
        assert_eq!(t.len(), 2 * (4.0 * sigma).ceil() as usize + 1);
        assert_eq!(gaussian_taps(0.0), vec![1.0]);
    }

    #[test]
    fn constant_cube_is_a_fixed_point() {
        let mut c = Cube::zeros(10, 9, 20);
        c.data.iter_mut().for_each(|v| *v = 2.5);
        for v in smooth_spectral(&smooth_spatial(&c, 3.0), 7).data {
            assert!((v - 2.5).abs() < 1e-12);
        }
    }

    #[test]
    fn boxcar_matches_direct_average() {
        let mut c = Cube::zeros(1, 1, 12);
        for z in 0..12 {
            c.set(0, 0, z, (z * z) as f64);
        }
        let s = smooth_spectral(&c, 5);
        for z in 0..12isize {
            let direct: f64 =
                (-2..=2).map(|k| c.get(0, 0, reflect(z + k, 12))).sum::<f64>() / 5.0;
            assert!((s.get(0, 0, z as usize) - direct).abs() < 1e-9);
        }
    }

    #[test]
    fn smoothing_conserves_interior_flux() {
        let mut c = Cube::zeros(40, 40, 4);
        c.set(20, 20, 1, 1.0);
        let s = smooth_spatial(&c, 6.0);
        assert!((s.sum() - 1.0).abs() < 1e-12);
        assert!(s.get(20, 20, 1) > s.get(21, 20, 1));
        assert!((s.get(21, 20, 1) - s.get(20, 21, 1)).abs() < 1e-15);
    }
}
