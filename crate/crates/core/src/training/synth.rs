//! Seeded synthetic data with low-dimensional structure.

use crate::linops::RealMatrix;
use crate::rng::{derive_seed, gaussian_matrix, gaussian_vec, rng_from_seed};

use super::Dataset;

pub const SYNTH_NOISE: f64 = 0.01;

/// Standard deviation of the pre-activations `B z`. Large enough that many
/// pixels saturate, as in handwritten-digit images.
pub const SYNTH_GAIN: f64 = 3.0;

/// `clamp01(sigmoid(B z) + noise * xi)` with `B` an `n x k_true` Gaussian
/// matrix of variance `SYNTH_GAIN^2 / k_true` and `z, xi` standard normal.
pub fn synth_dataset(n: usize, k_true: usize, count: usize, seed: u64) -> Dataset {
    synth_dataset_with_noise(n, k_true, count, SYNTH_NOISE, seed)
}

pub fn synth_dataset_with_noise(n: usize, k_true: usize, count: usize, noise: f64, seed: u64) -> Dataset {
    assert!(k_true >= 1 && k_true <= n, "synth_dataset needs 1 <= k_true <= n");
    let basis: RealMatrix =
        gaussian_matrix(&mut rng_from_seed(derive_seed(seed, 0)), n, k_true).scaled(SYNTH_GAIN / (k_true as f64).sqrt());
    let mut rng = rng_from_seed(derive_seed(seed, 1));
    let samples = (0..count)
        .map(|_| {
            let z = gaussian_vec(&mut rng, k_true);
            let xi = gaussian_vec(&mut rng, n);
            basis
                .matvec(&z)
                .expect("shapes agree")
                .iter()
                .zip(&xi)
                .map(|(&a, &e)| (crate::gnn::sigmoid(a) + noise * e).clamp(0.0, 1.0))
                .collect()
        })
        .collect();
    Dataset {
        samples,
        n,
        labels: None,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linops::qr_thin;

    #[test]
    fn empty_and_deterministic() {
        assert!(synth_dataset(10, 2, 0, 1).samples.is_empty());
        let a = synth_dataset(16, 3, 20, 5);
        assert_eq!(a.samples, synth_dataset(16, 3, 20, 5).samples);
        assert_ne!(a.samples, synth_dataset(16, 3, 20, 6).samples);
        assert!(a.samples.iter().flatten().all(|&v| (0.0..=1.0).contains(&v)));
    }

    /// Fraction of variance captured by the top-`k` principal subspace, found
    /// by orthogonal iteration on the sample covariance.
    fn pca_energy(data: &Dataset, k: usize) -> f64 {
        let n = data.n;
        let cnt = data.samples.len() as f64;
        let mean: Vec<f64> = (0..n)
            .map(|j| data.samples.iter().map(|s| s[j]).sum::<f64>() / cnt)
            .collect();
        let cov = RealMatrix::from_fn(n, n, |i, j| {
            data.samples.iter().map(|s| (s[i] - mean[i]) * (s[j] - mean[j])).sum::<f64>() / cnt
        });
        let total: f64 = (0..n).map(|i| cov[(i, i)]).sum();
        let mut q = RealMatrix::from_fn(n, k, |i, j| ((i * 7 + j * 13) % 11) as f64 - 5.0);
        for _ in 0..500 {
            q = qr_thin(&cov.matmul(&q).unwrap()).unwrap().q;
        }
        let captured: f64 = (0..k)
            .map(|j| {
                let c = q.column(j);
                let cc = cov.matvec(&c).unwrap();
                c.iter().zip(&cc).map(|(a, b)| a * b).sum::<f64>()
            })
            .sum();
        captured / total
    }

    #[test]
    fn low_rank_energy() {
        let d = synth_dataset(64, 4, 2000, 11);
        let e = pca_energy(&d, 4);
        assert!(e >= 0.9, "energy {e}");
    }
}
