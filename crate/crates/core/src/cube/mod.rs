//! Synthetic HI-like cubes: anisotropic Gaussian sources on Gaussian noise,
//! with an exact truth catalog.
//!
//! Axes are `(x, y, z)` with `z` spectral; data is stored z-fastest, i.e.
//! voxel `(x, y, z)` lives at `(x * ny + y) * nz + z`.

mod io;

pub use io::{read_catalog, read_cube, write_catalog, write_cube, CATALOG_HEADER};

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::{seed, Error, Result};

/// `2 * sqrt(2 ln 2)`: FWHM of a unit-sigma Gaussian.
pub const FWHM_PER_SIGMA: f64 = 2.354_820_045_030_949_4;

#[derive(Clone, Debug, PartialEq)]
pub struct Cube {
    pub nx: usize,
    pub ny: usize,
    pub nz: usize,
    pub data: Vec<f64>,
}

impl Cube {
    pub fn zeros(nx: usize, ny: usize, nz: usize) -> Self {
        Self { nx, ny, nz, data: vec![0.0; nx * ny * nz] }
    }

    pub fn from_data(nx: usize, ny: usize, nz: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != nx * ny * nz {
            return Err(Error::Shape(format!(
                "{} values for a {nx}x{ny}x{nz} cube",
                data.len()
            )));
        }
        Ok(Self { nx, ny, nz, data })
    }

    pub fn dims(&self) -> (usize, usize, usize) {
        (self.nx, self.ny, self.nz)
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    #[inline]
    pub fn index(&self, x: usize, y: usize, z: usize) -> usize {
        (x * self.ny + y) * self.nz + z
    }

    #[inline]
    pub fn coords(&self, idx: usize) -> (usize, usize, usize) {
        let z = idx % self.nz;
        let xy = idx / self.nz;
        (xy / self.ny, xy % self.ny, z)
    }

    pub fn get(&self, x: usize, y: usize, z: usize) -> f64 {
        self.data[self.index(x, y, z)]
    }

    pub fn set(&mut self, x: usize, y: usize, z: usize, v: f64) {
        let i = self.index(x, y, z);
        self.data[i] = v;
    }

    /// Copy of spectral channel `z` as a flat vector.
    pub fn channel(&self, z: usize) -> Vec<f64> {
        self.data.iter().skip(z).step_by(self.nz).copied().collect()
    }

    pub fn negated(&self) -> Cube {
        Cube { data: self.data.iter().map(|v| -v).collect(), ..*self }
    }

    pub fn scaled(&self, c: f64) -> Cube {
        Cube { data: self.data.iter().map(|v| c * v).collect(), ..*self }
    }

    /// Rotate the sky plane by 90 degrees: `(x, y) -> (ny - 1 - y, x)`.
    /// A direction at angle `a` from the +x axis ends up at `a + 90`.
    pub fn rotated_90(&self) -> Cube {
        let mut out = Cube::zeros(self.ny, self.nx, self.nz);
        for x in 0..self.nx {
            for y in 0..self.ny {
                let (nx2, ny2) = (self.ny - 1 - y, x);
                let src = self.index(x, y, 0);
                let dst = out.index(nx2, ny2, 0);
                out.data[dst..dst + self.nz].copy_from_slice(&self.data[src..src + self.nz]);
            }
        }
        out
    }

    pub fn sum(&self) -> f64 {
        self.data.iter().sum()
    }
}

impl std::ops::Add<&Cube> for Cube {
    type Output = Cube;

    fn add(mut self, rhs: &Cube) -> Cube {
        assert_eq!(self.dims(), rhs.dims());
        self.data.iter_mut().zip(&rhs.data).for_each(|(a, b)| *a += b);
        self
    }
}

/// One catalog entry. Units are pixels and channels; angles are degrees.
#[derive(Clone, Debug, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct SourceRecord {
    pub id: u32,
    pub x: f64,
    pub y: f64,
    /// Spectral centroid (channel), the stand-in for frequency.
    pub z: f64,
    pub flux: f64,
    /// Spatial FWHM of the major axis.
    pub size: f64,
    /// Major-axis position angle from +x toward +y, in `[0, 180)`.
    pub pa: f64,
    /// `arccos(minor / major)`, in `[0, 90]`.
    pub incl: f64,
    /// Spectral width at 20% of peak.
    pub w20: f64,
}

/// Geometry of an injected source.
#[derive(Clone, Debug, PartialEq)]
pub struct SourceShape {
    pub x: f64,
    pub y: f64,
    pub z: f64,
    /// Peak value.
    pub amplitude: f64,
    pub sigma_major: f64,
    /// Minor / major sigma ratio in `(0, 1]`.
    pub axis_ratio: f64,
    pub pa_deg: f64,
    pub sigma_z: f64,
}

impl SourceShape {
    /// Integral of the (untruncated) Gaussian.
    pub fn total_flux(&self) -> f64 {
        let two_pi = std::f64::consts::TAU;
        self.amplitude
            * two_pi.powf(1.5)
            * self.sigma_major
            * self.sigma_major
            * self.axis_ratio
            * self.sigma_z
    }

    pub fn record(&self, id: u32) -> SourceRecord {
        SourceRecord {
            id,
            x: self.x,
            y: self.y,
            z: self.z,
            flux: self.total_flux(),
            size: FWHM_PER_SIGMA * self.sigma_major,
            pa: self.pa_deg.rem_euclid(180.0),
            incl: incl_from_axis_ratio(self.axis_ratio).expect("axis ratio validated"),
            w20: truth_w20(self.sigma_z).expect("sigma validated"),
        }
    }
}

/// Width at which a Gaussian line profile drops to 20% of its peak:
/// `exp(-w^2 / (8 sigma^2)) = 0.2`.
pub fn truth_w20(sigma_z: f64) -> Result<f64> {
    if !(sigma_z > 0.0) {
        return Err(Error::Usage(format!("spectral sigma must be positive, got {sigma_z}")));
    }
    Ok(2.0 * sigma_z * (2.0 * 5f64.ln()).sqrt())
}

/// Thin-disk inclination in degrees for axis ratio `q`.
pub fn incl_from_axis_ratio(q: f64) -> Result<f64> {
    if !(q > 0.0 && q <= 1.0) {
        return Err(Error::Usage(format!("axis ratio must lie in (0, 1], got {q}")));
    }
    Ok(q.acos().to_degrees())
}

/// Narrowest spatial sigma, in sub-samples, at which point sampling still
/// sums to the analytic flux (aliasing error about `2 exp(-2 pi^2 s^2)`).
const MIN_SAMPLED_SIGMA: f64 = 0.75;

/// Add a truncated (±5 sigma per axis) Gaussian to `cube`. Pixels are
/// averaged over an `n x n` sub-grid when the minor axis is too narrow to
/// point-sample.
pub fn inject_source(cube: &mut Cube, s: &SourceShape) {
    let sa = s.sigma_major;
    let sb = s.sigma_major * s.axis_ratio;
    let isotropic = s.axis_ratio == 1.0;
    let (sin_t, cos_t) = s.pa_deg.to_radians().sin_cos();
    let n = if sb >= MIN_SAMPLED_SIGMA { 1 } else { (MIN_SAMPLED_SIGMA / sb).ceil() as usize };
    let offsets: Vec<f64> = (0..n).map(|i| (i as f64 + 0.5) / n as f64 - 0.5).collect();
    let weight = s.amplitude / (n * n) as f64;

    let span = |c: f64, half: f64, n: usize| -> (usize, usize) {
        let lo = (c - half).ceil().max(0.0);
        let hi = (c + half).floor().min(n as f64 - 1.0);
        if hi < lo {
            (0, 0)
        } else {
            (lo as usize, hi as usize + 1)
        }
    };
    let (x0, x1) = span(s.x, 5.0 * sa, cube.nx);
    let (y0, y1) = span(s.y, 5.0 * sa, cube.ny);
    let (z0, z1) = span(s.z, 5.0 * s.sigma_z, cube.nz);
    if x0 >= x1 || y0 >= y1 || z0 >= z1 {
        return;
    }

    let profile: Vec<f64> = (z0..z1)
        .map(|z| {
            let dz = (z as f64 - s.z) / s.sigma_z;
            (-0.5 * dz * dz).exp()
        })
        .collect();

    for x in x0..x1 {
        let dx = x as f64 - s.x;
        for y in y0..y1 {
            let dy = y as f64 - s.y;
            let mut spatial = 0.0;
            for ox in &offsets {
                for oy in &offsets {
                    let (ex, ey) = (dx + ox, dy + oy);
                    let r2 = if isotropic {
                        (ex * ex + ey * ey) / (sa * sa)
                    } else {
                        let u = ex * cos_t + ey * sin_t;
                        let v = -ex * sin_t + ey * cos_t;
                        u * u / (sa * sa) + v * v / (sb * sb)
                    };
                    spatial += (-0.5 * r2).exp();
                }
            }
            spatial *= weight;
            let base = cube.index(x, y, z0);
            for (k, p) in profile.iter().enumerate() {
                cube.data[base + k] += spatial * p;
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum NoiseProfile {
    Flat,
    /// `1 + amplitude * sin(2 pi periods z / nz)`.
    Sinusoid { amplitude: f64, periods: f64 },
}

impl NoiseProfile {
    pub fn values(&self, nz: usize) -> Vec<f64> {
        match *self {
            NoiseProfile::Flat => vec![1.0; nz],
            NoiseProfile::Sinusoid { amplitude, periods } => (0..nz)
                .map(|z| {
                    let phase = std::f64::consts::TAU * periods * z as f64 / nz as f64;
                    1.0 + amplitude * phase.sin()
                })
                .collect(),
        }
    }
}

/// Everything needed to synthesise one patch.
#[derive(Clone, Debug, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(default)]
pub struct SkyConfig {
    pub dims: [usize; 3],
    pub n_sources: usize,
    /// Peak amplitudes are drawn log-uniform in this range, in units of the
    /// noise sigma. Smoothing by the largest finder kernels gains roughly a
    /// factor 10 in signal to noise, so the default straddles the detection
    /// limit of the smoothed cube rather than of single voxels.
    pub amplitude_range: [f64; 2],
    pub sigma_major_range: [f64; 2],
    pub axis_ratio_range: [f64; 2],
    pub sigma_z_range: [f64; 2],
    pub noise_sigma: f64,
    pub noise_profile: NoiseProfile,
    /// Two sources conflict when closer than this in the sky plane *and*
    /// closer than `min_separation_z` in channels.
    pub min_separation_xy: f64,
    pub min_separation_z: f64,
    pub seed: u64,
}

impl Default for SkyConfig {
    fn default() -> Self {
        Self {
            dims: [96, 96, 192],
            n_sources: 30,
            amplitude_range: [0.5, 4.0],
            sigma_major_range: [1.5, 4.0],
            axis_ratio_range: [0.3, 1.0],
            sigma_z_range: [2.0, 10.0],
            noise_sigma: 1.0,
            noise_profile: NoiseProfile::Sinusoid { amplitude: 0.2, periods: 1.5 },
            min_separation_xy: 10.0,
            min_separation_z: 40.0,
            seed: 0,
        }
    }
}

pub const MIN_DIMS: [usize; 3] = [16, 16, 32];
const PLACEMENT_ATTEMPTS: usize = 10_000;

impl SkyConfig {
    pub fn validate(&self) -> Result<()> {
        let [nx, ny, nz] = self.dims;
        if nx < MIN_DIMS[0] || ny < MIN_DIMS[1] || nz < MIN_DIMS[2] {
            return Err(Error::Config(format!(
                "cube dims {:?} below minimum {MIN_DIMS:?}",
                self.dims
            )));
        }
        let range_ok = |r: [f64; 2]| r[0] > 0.0 && r[0] <= r[1] && r[1].is_finite();
        if !range_ok(self.amplitude_range)
            || !range_ok(self.sigma_major_range)
            || !range_ok(self.sigma_z_range)
            || !range_ok(self.axis_ratio_range)
            || self.axis_ratio_range[1] > 1.0
        {
            return Err(Error::Config("source property ranges must be positive and ordered".into()));
        }
        if !(self.noise_sigma > 0.0) {
            return Err(Error::Config("noise sigma must be positive".into()));
        }
        if self.noise_profile.values(nz).iter().any(|&p| !(p > 0.0)) {
            return Err(Error::Config("noise profile must be strictly positive".into()));
        }
        Ok(())
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }
}

fn uniform(rng: &mut impl Rng, r: [f64; 2]) -> f64 {
    if r[0] == r[1] {
        r[0]
    } else {
        rng.random_range(r[0]..r[1])
    }
}

/// Draw source shapes with rejection sampling on separation.
pub fn draw_sources(cfg: &SkyConfig, rng: &mut impl Rng) -> Result<Vec<SourceShape>> {
    let [nx, ny, nz] = cfg.dims;
    let mut placed: Vec<SourceShape> = Vec::with_capacity(cfg.n_sources);
    for _ in 0..cfg.n_sources {
        let mut ok = None;
        for _ in 0..PLACEMENT_ATTEMPTS {
            let sigma_major = uniform(rng, cfg.sigma_major_range);
            let axis_ratio = uniform(rng, cfg.axis_ratio_range);
            let sigma_z = uniform(rng, cfg.sigma_z_range);
            let pa_deg = rng.random_range(0.0..180.0);
            let [alo, ahi] = cfg.amplitude_range;
            let amplitude = cfg.noise_sigma * (uniform(rng, [alo.ln(), ahi.ln()])).exp();
            // Keep three sigma of the profile inside the cube where possible.
            let pos = |rng: &mut _, sigma: f64, n: usize| {
                let margin = (3.0 * sigma).min(n as f64 / 4.0);
                uniform(rng, [margin, n as f64 - 1.0 - margin])
            };
            let x = pos(rng, sigma_major, nx);
            let y = pos(rng, sigma_major, ny);
            let z = pos(rng, sigma_z, nz);
            let clash = placed.iter().any(|p| {
                let dxy = ((p.x - x).powi(2) + (p.y - y).powi(2)).sqrt();
                dxy < cfg.min_separation_xy && (p.z - z).abs() < cfg.min_separation_z
            });
            if !clash {
                ok = Some(SourceShape { x, y, z, amplitude, sigma_major, axis_ratio, pa_deg, sigma_z });
                break;
            }
        }
        match ok {
            Some(s) => placed.push(s),
            None => {
                return Err(Error::Placement { placed: placed.len(), requested: cfg.n_sources })
            }
        }
    }
    Ok(placed)
}

/// A generated patch: noisy cube plus truth.
#[derive(Clone, Debug)]
pub struct Patch {
    pub cube: Cube,
    pub truth: Vec<SourceRecord>,
    pub shapes: Vec<SourceShape>,
}

pub fn generate_cube(cfg: &SkyConfig) -> Result<Patch> {
    cfg.validate()?;
    let mut rng = seed::rng(cfg.seed);
    let shapes = draw_sources(cfg, &mut rng)?;
    let [nx, ny, nz] = cfg.dims;
    let mut cube = Cube::zeros(nx, ny, nz);
    for s in &shapes {
        inject_source(&mut cube, s);
    }
    let profile = cfg.noise_profile.values(nz);
    for (i, v) in cube.data.iter_mut().enumerate() {
        let n: f64 = StandardNormal.sample(&mut rng);
        *v += n * cfg.noise_sigma * profile[i % nz];
    }
    let truth = shapes.iter().enumerate().map(|(i, s)| s.record(i as u32)).collect();
    Ok(Patch { cube, truth, shapes })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn noiseless(shapes: &[SourceShape], dims: [usize; 3]) -> Cube {
        let mut c = Cube::zeros(dims[0], dims[1], dims[2]);
        shapes.iter().for_each(|s| inject_source(&mut c, s));
        c
    }

    fn shape() -> SourceShape {
        SourceShape {
            x: 30.3,
            y: 28.7,
            z: 60.2,
            amplitude: 2.0,
            sigma_major: 3.0,
            axis_ratio: 0.5,
            pa_deg: 35.0,
            sigma_z: 6.0,
        }
    }

    #[test]
    fn w20_closed_form() {
        let w = truth_w20(1.0).unwrap();
        assert!((w - 3.588_245_156).abs() < 1e-9);
        // Solves exp(-w^2 / 8) = 0.2.
        assert!(((-w * w / 8.0).exp() - 0.2).abs() < 1e-12);
        assert!((truth_w20(2.5).unwrap() - 2.5 * w).abs() < 1e-12);
        assert!(truth_w20(0.0).is_err());
    }

    #[test]
    fn w20_matches_dense_sampling() {
        // Scan a finely sampled sigma=4 profile for its 20% crossings.
        let sigma = 4.0;
        let step = 1e-3;
        let f = |z: f64| (-0.5 * (z / sigma).powi(2)).exp();
        let mut z = 0.0;
        while f(z) >= 0.2 {
            z += step;
        }
        let measured = 2.0 * z;
        assert!((measured - truth_w20(sigma).unwrap()).abs() < 0.5);
    }

    #[test]
    fn inclination_from_axis_ratio() {
        assert_eq!(incl_from_axis_ratio(1.0).unwrap(), 0.0);
        assert!((incl_from_axis_ratio(0.5).unwrap() - 60.0).abs() < 1e-12);
        assert!(incl_from_axis_ratio(0.0).is_err());
        assert!(incl_from_axis_ratio(1.01).is_err());
        let grid: Vec<f64> =
            (1..=100).map(|k| incl_from_axis_ratio(k as f64 / 100.0).unwrap()).collect();
        assert!(grid.windows(2).all(|w| w[1] < w[0]));
    }

    #[test]
    fn injected_flux_is_conserved() {
        let s = shape();
        let c = noiseless(std::slice::from_ref(&s), [64, 64, 128]);
        let rel = (c.sum() - s.total_flux()).abs() / s.total_flux();
        assert!(rel < 0.01, "relative flux error {rel}");
    }

    #[test]
    fn face_on_source_ignores_position_angle() {
        let mut a = shape();
        a.axis_ratio = 1.0;
        a.pa_deg = 0.0;
        let mut b = a.clone();
        b.pa_deg = 90.0;
        assert_eq!(noiseless(&[a], [48, 48, 96]), noiseless(&[b], [48, 48, 96]));
    }

    #[test]
    fn pure_noise_channel_rms_tracks_profile() {
        let cfg = SkyConfig { n_sources: 0, dims: [96, 96, 64], seed: 11, ..SkyConfig::default() };
        let patch = generate_cube(&cfg).unwrap();
        assert!(patch.truth.is_empty());
        let profile = cfg.noise_profile.values(64);
        for z in 0..64 {
            let ch = patch.cube.channel(z);
            let rms = (ch.iter().map(|v| v * v).sum::<f64>() / ch.len() as f64).sqrt();
            let want = cfg.noise_sigma * profile[z];
            assert!((rms / want - 1.0).abs() < 0.05, "channel {z}: {rms} vs {want}");
        }
    }

    #[test]
    fn generation_is_deterministic() {
        let cfg = SkyConfig { dims: [32, 32, 64], n_sources: 4, seed: 5, ..SkyConfig::default() };
        let a = generate_cube(&cfg).unwrap();
        let b = generate_cube(&cfg).unwrap();
        assert_eq!(a.cube, b.cube);
        assert_eq!(a.truth, b.truth);
        let c = generate_cube(&cfg.clone().with_seed(6)).unwrap();
        assert_ne!(a.truth, c.truth);
    }

    #[test]
    fn truth_records_respect_ranges() {
        let patch = generate_cube(&SkyConfig { seed: 3, ..SkyConfig::default() }).unwrap();
        assert_eq!(patch.truth.len(), 30);
        for t in &patch.truth {
            assert!(t.flux > 0.0 && t.w20 > 0.0);
            assert!((0.0..180.0).contains(&t.pa));
            assert!((0.0..=90.0).contains(&t.incl));
        }
    }

    #[test]
    fn overcrowding_is_a_placement_error() {
        let cfg = SkyConfig {
            dims: [16, 16, 32],
            n_sources: 50,
            min_separation_xy: 20.0,
            min_separation_z: 100.0,
            ..SkyConfig::default()
        };
        assert!(matches!(generate_cube(&cfg), Err(Error::Placement { placed: 1, requested: 50 })));
    }

    #[test]
    fn rotation_maps_index_as_documented() {
        let mut c = Cube::zeros(4, 3, 2);
        c.set(1, 0, 1, 5.0);
        let r = c.rotated_90();
        assert_eq!(r.dims(), (3, 4, 2));
        assert_eq!(r.get(2, 1, 1), 5.0);
    }
}
