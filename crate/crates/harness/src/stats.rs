//! Summary statistics for trial outputs.

use serde::{Deserialize, Serialize};

/// Values below this are floored before taking logarithms.
pub const LOG_FLOOR: f64 = 1e-16;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GeoStats {
    pub geo_mean: f64,
    /// `exp` of the standard deviation of the logs (population form).
    pub geo_sd: f64,
    /// Number of values raised to [`LOG_FLOOR`].
    pub floored: usize,
}

pub fn geometric_stats(values: &[f64]) -> Option<GeoStats> {
    if values.is_empty() {
        return None;
    }
    let mut floored = 0;
    let logs: Vec<f64> = values
        .iter()
        .map(|&v| {
            if v < LOG_FLOOR {
                floored += 1;
                LOG_FLOOR.ln()
            } else {
                v.ln()
            }
        })
        .collect();
    let n = logs.len() as f64;
    let mean = logs.iter().sum::<f64>() / n;
    let var = logs.iter().map(|l| (l - mean).powi(2)).sum::<f64>() / n;
    Some(GeoStats {
        geo_mean: mean.exp(),
        geo_sd: var.sqrt().exp(),
        floored,
    })
}

/// `sqrt(p (1 - p) / trials)`.
pub fn binomial_se(p: f64, trials: usize) -> f64 {
    (p * (1.0 - p) / trials as f64).sqrt()
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LinearFit {
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
}

/// Ordinary least squares `y ~ slope * x + intercept`.
pub fn linear_fit(x: &[f64], y: &[f64]) -> Option<LinearFit> {
    if x.len() != y.len() || x.len() < 2 {
        return None;
    }
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxx: f64 = x.iter().map(|a| (a - mx).powi(2)).sum();
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let syy: f64 = y.iter().map(|b| (b - my).powi(2)).sum();
    if sxx == 0.0 {
        return None;
    }
    let slope = sxy / sxx;
    let r_squared = if syy == 0.0 { 1.0 } else { sxy * sxy / (sxx * syy) };
    Some(LinearFit {
        slope,
        intercept: my - slope * mx,
        r_squared,
    })
}

/// Eigenvalues of a real symmetric matrix (row-major, `dim x dim`) by cyclic Jacobi.
pub fn symmetric_eigenvalues(a: &[f64], dim: usize) -> Vec<f64> {
    assert_eq!(a.len(), dim * dim);
    let mut m = a.to_vec();
    for _sweep in 0..100 {
        let off: f64 = (0..dim)
            .flat_map(|i| (0..dim).filter(move |&j| j != i).map(move |j| (i, j)))
            .map(|(i, j)| m[i * dim + j].powi(2))
            .sum();
        let scale: f64 = m.iter().map(|v| v * v).sum();
        if off <= 1e-30 * scale.max(f64::MIN_POSITIVE) {
            break;
        }
        for p in 0..dim {
            for q in p + 1..dim {
                let apq = m[p * dim + q];
                if apq == 0.0 {
                    continue;
                }
                let theta = (m[q * dim + q] - m[p * dim + p]) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for r in 0..dim {
                    let arp = m[r * dim + p];
                    let arq = m[r * dim + q];
                    m[r * dim + p] = c * arp - s * arq;
                    m[r * dim + q] = s * arp + c * arq;
                }
                for r in 0..dim {
                    let apr = m[p * dim + r];
                    let aqr = m[q * dim + r];
                    m[p * dim + r] = c * apr - s * aqr;
                    m[q * dim + r] = s * apr + c * aqr;
                }
            }
        }
    }
    (0..dim).map(|i| m[i * dim + i]).collect()
}

/// Spectral norm of a Hermitian matrix given as real and imaginary parts,
/// via the real symmetric embedding `[[re, -im], [im, re]]`.
pub fn hermitian_spectral_norm(re: &[f64], im: &[f64], dim: usize) -> f64 {
    let d2 = 2 * dim;
    let mut big = vec![0.0; d2 * d2];
    for i in 0..dim {
        for j in 0..dim {
            let (r, c) = (re[i * dim + j], im[i * dim + j]);
            big[i * d2 + j] = r;
            big[i * d2 + dim + j] = -c;
            big[(dim + i) * d2 + j] = c;
            big[(dim + i) * d2 + dim + j] = r;
        }
    }
    symmetric_eigenvalues(&big, d2)
        .into_iter()
        .fold(0.0, |acc: f64, v| acc.max(v.abs()))
}
