//! Reliability from the density of positive versus negative detections.
//!
//! Each detection is placed in a 3-d feature space of
//! `(log10 peak, log10 sum, log10 mean)`. Densities of positive (`P`) and
//! negative (`N`) detections are estimated with a Gaussian kernel whose
//! covariance is the negatives' sample covariance scaled by the kernel
//! scale squared; reliability is `P / (P + N)`.

pub const MIN_NEGATIVES: usize = 3;

/// Feature vector, or `None` when sum or peak is not positive.
pub fn features(sum: f64, peak: f64, n_voxels: usize) -> Option<[f64; 3]> {
    if !(sum > 0.0 && peak > 0.0) || n_voxels == 0 {
        return None;
    }
    Some([peak.log10(), sum.log10(), (sum / n_voxels as f64).log10()])
}

type Mat3 = [[f64; 3]; 3];

fn covariance(points: &[[f64; 3]]) -> Mat3 {
    let n = points.len() as f64;
    let mut mean = [0.0; 3];
    for p in points {
        for k in 0..3 {
            mean[k] += p[k] / n;
        }
    }
    let mut c = [[0.0; 3]; 3];
    for p in points {
        for i in 0..3 {
            for j in 0..3 {
                c[i][j] += (p[i] - mean[i]) * (p[j] - mean[j]) / (n - 1.0);
            }
        }
    }
    c
}

fn det(m: &Mat3) -> f64 {
    m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1]) - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
        + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0])
}

fn inverse(m: &Mat3) -> Option<Mat3> {
    let d = det(m);
    if !(d.abs() > 0.0) || !d.is_finite() {
        return None;
    }
    let mut inv = [[0.0; 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            let (a1, a2) = ((j + 1) % 3, (j + 2) % 3);
            let (b1, b2) = ((i + 1) % 3, (i + 2) % 3);
            inv[i][j] = (m[a1][b1] * m[a2][b2] - m[a1][b2] * m[a2][b1]) / d;
        }
    }
    Some(inv)
}

/// Inverse kernel covariance, regularised if the negatives are degenerate.
fn kernel_precision(negatives: &[[f64; 3]], scale: f64) -> Mat3 {
    let mut h = covariance(negatives);
    let s2 = scale.max(1e-6).powi(2);
    h.iter_mut().flatten().for_each(|v| *v *= s2);
    let trace = h[0][0] + h[1][1] + h[2][2];
    let ridge = 1e-6 * (trace / 3.0).max(1e-12);
    let mut reg = h;
    for _ in 0..8 {
        if det(&reg) > 1e-12 * (trace / 3.0).max(1e-12).powi(3) {
            if let Some(inv) = inverse(&reg) {
                return inv;
            }
        }
        for k in 0..3 {
            reg[k][k] += ridge;
        }
    }
    let mut eye = [[0.0; 3]; 3];
    (0..3).for_each(|k| eye[k][k] = 1.0 / (ridge + 1e-12));
    eye
}

fn kernel(prec: &Mat3, a: &[f64; 3], b: &[f64; 3]) -> f64 {
    let d = [a[0] - b[0], a[1] - b[1], a[2] - b[2]];
    let mut q = 0.0;
    for i in 0..3 {
        for j in 0..3 {
            q += d[i] * prec[i][j] * d[j];
        }
    }
    (-0.5 * q).exp()
}

/// Reliability of each positive detection. Positives without features get
/// 0. With fewer than [`MIN_NEGATIVES`] usable negatives every positive is
/// returned as 1 and the second element is false.
pub fn reliability_scores(
    positives: &[Option<[f64; 3]>],
    negatives: &[Option<[f64; 3]>],
    scale_kernel: f64,
) -> (Vec<f64>, bool) {
    let neg: Vec<[f64; 3]> = negatives.iter().flatten().copied().collect();
    if neg.len() < MIN_NEGATIVES {
        return (vec![1.0; positives.len()], false);
    }
    let pos: Vec<[f64; 3]> = positives.iter().flatten().copied().collect();
    let prec = kernel_precision(&neg, scale_kernel);
    let scores = positives
        .iter()
        .map(|p| match p {
            None => 0.0,
            Some(x) => {
                let dp: f64 = pos.iter().map(|q| kernel(&prec, x, q)).sum();
                let dn: f64 = neg.iter().map(|q| kernel(&prec, x, q)).sum();
                if dp + dn > 0.0 {
                    dp / (dp + dn)
                } else {
                    0.0
                }
            }
        })
        .collect();
    (scores, true)
}
