//! Source parameterisation from masked voxels.

use crate::cube::{Cube, SourceRecord, FWHM_PER_SIGMA};

/// Floor on the moment-derived spatial sigmas, in pixels.
pub const SIGMA_FLOOR: f64 = 0.5;

#[derive(Clone, Debug, PartialEq)]
pub struct Measurement {
    pub record: SourceRecord,
    /// The moment ellipse hit the sigma floor.
    pub degenerate: bool,
}

/// Measure a source from its voxels. `sign` is -1 for sources found in the
/// negated cube so that their flux reads positive.
pub fn measure(voxels: &[usize], cube: &Cube, sign: f64) -> Measurement {
    assert!(!voxels.is_empty(), "cannot measure an empty detection");
    let coords: Vec<(usize, usize, usize)> = voxels.iter().map(|&v| cube.coords(v)).collect();
    let values: Vec<f64> = voxels.iter().map(|&v| sign * cube.data[v]).collect();

    let flux: f64 = values.iter().sum();

    // Flux-weighted centroid over positive voxels, geometric if none.
    let mut wsum = 0.0;
    let mut c = [0.0; 3];
    for (&(x, y, z), &v) in coords.iter().zip(&values) {
        let w = v.max(0.0);
        wsum += w;
        c[0] += w * x as f64;
        c[1] += w * y as f64;
        c[2] += w * z as f64;
    }
    if wsum > 0.0 {
        c.iter_mut().for_each(|v| *v /= wsum);
    } else {
        let n = coords.len() as f64;
        c = [0.0; 3];
        for &(x, y, z) in &coords {
            c[0] += x as f64 / n;
            c[1] += y as f64 / n;
            c[2] += z as f64 / n;
        }
    }

    let (x0, x1) = min_max(coords.iter().map(|c| c.0));
    let (y0, y1) = min_max(coords.iter().map(|c| c.1));
    let (z0, z1) = min_max(coords.iter().map(|c| c.2));
    let (bx, by, bz) = (x1 - x0 + 1, y1 - y0 + 1, z1 - z0 + 1);

    // z-integrated moment map and spectral profile over the bounding box.
    let mut map = vec![0.0; bx * by];
    let mut present = vec![false; bx * by];
    let mut profile = vec![0.0; bz];
    for (&(x, y, z), &v) in coords.iter().zip(&values) {
        let k = (x - x0) * by + (y - y0);
        map[k] += v;
        present[k] = true;
        profile[z - z0] += v;
    }

    let (sigma_major, sigma_minor, pa, degenerate) = moment_ellipse(&map, &present, by, x0, y0);
    let incl = (sigma_minor / sigma_major).clamp(0.0, 1.0).acos().to_degrees();
    let w20 = width_at_fraction(&profile, 0.2);

    Measurement {
        record: SourceRecord {
            id: 0,
            x: c[0],
            y: c[1],
            z: c[2],
            flux,
            size: FWHM_PER_SIGMA * sigma_major,
            pa,
            incl,
            w20,
        },
        degenerate,
    }
}

fn min_max(it: impl Iterator<Item = usize>) -> (usize, usize) {
    it.fold((usize::MAX, 0), |(lo, hi), v| (lo.min(v), hi.max(v)))
}

/// Returns `(sigma_major, sigma_minor, position angle in [0, 180), floored)`.
fn moment_ellipse(map: &[f64], present: &[bool], by: usize, x0: usize, y0: usize) -> (f64, f64, f64, bool) {
    let mut w: Vec<f64> = map.iter().map(|v| v.max(0.0)).collect();
    let mut total: f64 = w.iter().sum();
    if total <= 0.0 {
        w = present.iter().map(|&p| if p { 1.0 } else { 0.0 }).collect();
        total = w.iter().sum();
    }
    let pos = |k: usize| ((x0 + k / by) as f64, (y0 + k % by) as f64);
    let (mut mx, mut my) = (0.0, 0.0);
    for (k, &wk) in w.iter().enumerate() {
        let (x, y) = pos(k);
        mx += wk * x;
        my += wk * y;
    }
    mx /= total;
    my /= total;
    let (mut cxx, mut cyy, mut cxy) = (0.0, 0.0, 0.0);
    for (k, &wk) in w.iter().enumerate() {
        let (x, y) = pos(k);
        let (dx, dy) = (x - mx, y - my);
        cxx += wk * dx * dx;
        cyy += wk * dy * dy;
        cxy += wk * dx * dy;
    }
    cxx /= total;
    cyy /= total;
    cxy /= total;

    let half_tr = 0.5 * (cxx + cyy);
    let disc = (0.25 * (cxx - cyy).powi(2) + cxy * cxy).sqrt();
    let l1 = (half_tr + disc).max(0.0);
    let l2 = (half_tr - disc).max(0.0);
    let pa = (0.5 * (2.0 * cxy).atan2(cxx - cyy)).to_degrees().rem_euclid(180.0);

    let raw_major = l1.sqrt();
    let raw_minor = l2.sqrt();
    let degenerate = raw_major < SIGMA_FLOOR || raw_minor < SIGMA_FLOOR;
    let major = raw_major.max(SIGMA_FLOOR);
    let minor = raw_minor.max(SIGMA_FLOOR).min(major);
    (major, minor, pa, degenerate)
}

/// Width of a sampled profile at `fraction` of its peak. Crossings are
/// interpolated linearly between channel centres; if the profile is still
/// above the level at its first or last channel, that channel's outer edge
/// is used instead.
pub fn width_at_fraction(profile: &[f64], fraction: f64) -> f64 {
    let (ipk, &peak) = profile
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.total_cmp(b.1).then(b.0.cmp(&a.0)))
        .expect("non-empty profile");
    if !(peak > 0.0) {
        return profile.len() as f64;
    }
    let level = fraction * peak;

    let mut j = ipk;
    while j > 0 && profile[j - 1] >= level {
        j -= 1;
    }
    let left = if j == 0 {
        -0.5
    } else {
        let (a, b) = (profile[j - 1], profile[j]);
        (j - 1) as f64 + (level - a) / (b - a)
    };

    let mut j = ipk;
    while j + 1 < profile.len() && profile[j + 1] >= level {
        j += 1;
    }
    let right = if j + 1 == profile.len() {
        j as f64 + 0.5
    } else {
        let (a, b) = (profile[j], profile[j + 1]);
        j as f64 + (a - level) / (a - b)
    };
    right - left
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cube::{inject_source, SourceShape};

    #[test]
    fn single_voxel_uses_floors() {
        let mut c = Cube::zeros(8, 8, 8);
        c.set(2, 3, 4, 5.0);
        let m = measure(&[c.index(2, 3, 4)], &c, 1.0);
        assert!(m.degenerate);
        assert_eq!((m.record.x, m.record.y, m.record.z), (2.0, 3.0, 4.0));
        assert_eq!(m.record.size, FWHM_PER_SIGMA * SIGMA_FLOOR);
        assert_eq!(m.record.incl, 0.0);
        assert_eq!(m.record.w20, 1.0);
        assert_eq!(m.record.flux, 5.0);
    }

    #[test]
    fn width_interpolates_crossings() {
        // Linear ramp 0..4..0: 20% of 4 is 0.8, crossed 0.8 channels past each end.
        let p = [0.0, 2.0, 4.0, 2.0, 0.0];
        let w = width_at_fraction(&p, 0.2);
        assert!((w - (3.6 - 0.4)).abs() < 1e-12, "{w}");
        assert_eq!(width_at_fraction(&[1.0, 1.0, 1.0], 0.2), 3.0);
    }

    fn render(shape: &SourceShape) -> (Cube, Vec<usize>) {
        let mut c = Cube::zeros(64, 64, 96);
        inject_source(&mut c, shape);
        let cut = 0.01 * shape.amplitude;
        let vox = (0..c.len()).filter(|&i| c.data[i] > cut).collect();
        (c, vox)
    }

    fn gaussian() -> SourceShape {
        SourceShape {
            x: 31.4,
            y: 30.7,
            z: 47.3,
            amplitude: 5.0,
            sigma_major: 3.5,
            axis_ratio: 0.5,
            pa_deg: 30.0,
            sigma_z: 5.0,
        }
    }

    #[test]
    fn recovers_noiseless_gaussian() {
        let s = gaussian();
        let (c, vox) = render(&s);
        let m = measure(&vox, &c, 1.0).record;
        assert!((m.x - s.x).abs() < 0.1 && (m.y - s.y).abs() < 0.1 && (m.z - s.z).abs() < 0.1);
        let dpa = (m.pa - s.pa_deg).abs();
        assert!(dpa.min(180.0 - dpa) < 5.0, "pa {}", m.pa);
        let q = (m.incl.to_radians()).cos();
        assert!((q - s.axis_ratio).abs() < 0.05, "q {q}");
    }

    #[test]
    fn rotation_advances_position_angle() {
        let s = gaussian();
        let (c, vox) = render(&s);
        let before = measure(&vox, &c, 1.0).record.pa;
        let r = c.rotated_90();
        let vox_r: Vec<usize> = (0..r.len()).filter(|&i| r.data[i] > 0.01 * s.amplitude).collect();
        let after = measure(&vox_r, &r, 1.0).record.pa;
        let expect = (before + 90.0) % 180.0;
        let d = (after - expect).abs();
        assert!(d.min(180.0 - d) < 1e-6, "{before} -> {after}");
    }

    #[test]
    fn negative_sign_reads_positive_flux() {
        let mut c = Cube::zeros(8, 8, 8);
        c.set(4, 4, 4, -3.0);
        c.set(4, 4, 5, -1.0);
        let vox = [c.index(4, 4, 4), c.index(4, 4, 5)];
        let m = measure(&vox, &c, -1.0).record;
        assert_eq!(m.flux, 4.0);
        assert!((m.z - 4.25).abs() < 1e-12);
    }
}
