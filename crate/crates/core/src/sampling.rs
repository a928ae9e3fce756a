//! Subsampled isometries: random row subsets of a unitary operator, rescaled
//! by `sqrt(n/m)`, plus the closed-form tail bounds used to audit them.
//!
//! Two sampling models are supported. `Bernoulli` keeps each row independently
//! with probability `m/n`, so the number of rows is random with mean `m`.
//! `FixedPermutation` keeps the first `m` entries of a uniform random
//! permutation, so every draw has exactly `m` rows. Realized index sets are
//! always stored sorted.

use std::sync::Arc;

use num_complex::Complex64;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{dim_mismatch, GcsError, Result};
use crate::linops::{AnyMatrix, ComplexMatrix, RealMatrix, Scalar};
use crate::rng::{derive_seed, rng_from_seed};
use crate::transforms::UnitaryOperator;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SamplingModel {
    Bernoulli,
    #[serde(rename = "fixed")]
    FixedPermutation,
}

impl std::str::FromStr for SamplingModel {
    type Err = GcsError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "bernoulli" => Ok(SamplingModel::Bernoulli),
            "fixed" => Ok(SamplingModel::FixedPermutation),
            other => Err(GcsError::Domain(format!(
                "unknown sampling model '{other}', expected bernoulli or fixed"
            ))),
        }
    }
}

/// A realized `(m, U)`-subsampled isometry.
#[derive(Clone, Debug)]
pub struct SubsampledIsometry {
    base: Arc<UnitaryOperator>,
    model: SamplingModel,
    m: usize,
    indices: Vec<usize>,
    seed: u64,
    /// Selected rows of `U`, already multiplied by `sqrt(n/m)`.
    rows: AnyMatrix,
}

/// Draws a Bernoulli-model isometry: row `j` is kept iff `theta_j = 1` with
/// `theta_j ~ Ber(m/n)` independent. Empty draws are kept as they are.
pub fn sample_bernoulli(u: Arc<UnitaryOperator>, m: usize, seed: u64) -> Result<SubsampledIsometry> {
    let n = u.n();
    if m < 2 || m > n {
        return Err(GcsError::InvalidM { m, n });
    }
    let p = m as f64 / n as f64;
    let mut rng = rng_from_seed(seed);
    let indices: Vec<usize> = (0..n).filter(|_| rng.random::<f64>() < p).collect();
    Ok(SubsampledIsometry::from_indices(u, SamplingModel::Bernoulli, m, indices, seed))
}

/// Draws a fixed-size isometry from the first `m` entries of a uniform random
/// permutation of the row indices.
pub fn sample_fixed(u: Arc<UnitaryOperator>, m: usize, seed: u64) -> Result<SubsampledIsometry> {
    let n = u.n();
    if m < 1 || m > n {
        return Err(GcsError::InvalidM { m, n });
    }
    let mut rng = rng_from_seed(seed);
    let mut perm: Vec<usize> = (0..n).collect();
    // Partial Fisher-Yates: the first m slots are a uniform m-subset in random order.
    for i in 0..m {
        let j = rng.random_range(i..n);
        perm.swap(i, j);
    }
    perm.truncate(m);
    perm.sort_unstable();
    Ok(SubsampledIsometry::from_indices(u, SamplingModel::FixedPermutation, m, perm, seed))
}

pub fn sample(
    model: SamplingModel,
    u: Arc<UnitaryOperator>,
    m: usize,
    seed: u64,
) -> Result<SubsampledIsometry> {
    match model {
        SamplingModel::Bernoulli => sample_bernoulli(u, m, seed),
        SamplingModel::FixedPermutation => sample_fixed(u, m, seed),
    }
}

impl SubsampledIsometry {
    /// Builds the isometry for a given sorted index set.
    pub fn from_indices(
        base: Arc<UnitaryOperator>,
        model: SamplingModel,
        m: usize,
        indices: Vec<usize>,
        seed: u64,
    ) -> Self {
        let n = base.n();
        debug_assert!(indices.windows(2).all(|w| w[0] < w[1]));
        let scale = (n as f64 / m as f64).sqrt();
        let rows = match base.real_matrix() {
            Some(real) => AnyMatrix::Real(RealMatrix::from_fn(indices.len(), n, |i, j| {
                scale * real[(indices[i], j)]
            })),
            None => {
                let full = base.to_complex_matrix();
                AnyMatrix::Complex(ComplexMatrix::from_fn(indices.len(), n, |i, j| {
                    full[(indices[i], j)].scale(scale)
                }))
            }
        };
        Self {
            base,
            model,
            m,
            indices,
            seed,
            rows,
        }
    }

    pub fn base(&self) -> &Arc<UnitaryOperator> {
        &self.base
    }

    pub fn model(&self) -> SamplingModel {
        self.model
    }

    /// Nominal measurement count `m`.
    pub fn m(&self) -> usize {
        self.m
    }

    /// Realized number of rows `|J|`.
    pub fn num_rows(&self) -> usize {
        self.indices.len()
    }

    pub fn n(&self) -> usize {
        self.base.n()
    }

    pub fn indices(&self) -> &[usize] {
        &self.indices
    }

    pub fn scale(&self) -> f64 {
        (self.n() as f64 / self.m as f64).sqrt()
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// The scaled rows as a dense matrix.
    pub fn matrix(&self) -> &AnyMatrix {
        &self.rows
    }

    /// `Ax`, of length `|J|`.
    pub fn apply<T: Scalar>(&self, x: &[T]) -> Result<Vec<Complex64>> {
        let n = self.n();
        if x.len() != n {
            return Err(dim_mismatch("isometry input", n, x.len()));
        }
        let out = match &self.rows {
            AnyMatrix::Real(m) => (0..m.rows())
                .map(|i| {
                    m.row(i)
                        .iter()
                        .zip(x)
                        .fold(Complex64::new(0.0, 0.0), |acc, (&a, &b)| acc + b.to_c64() * a)
                })
                .collect(),
            AnyMatrix::Complex(m) => (0..m.rows())
                .map(|i| {
                    m.row(i)
                        .iter()
                        .zip(x)
                        .fold(Complex64::new(0.0, 0.0), |acc, (&a, &b)| acc + a * b.to_c64())
                })
                .collect(),
        };
        Ok(out)
    }

    /// `A* y`, of length `n`.
    pub fn apply_adjoint(&self, y: &[Complex64]) -> Result<Vec<Complex64>> {
        if y.len() != self.num_rows() {
            return Err(dim_mismatch("isometry adjoint input", self.num_rows(), y.len()));
        }
        match &self.rows {
            AnyMatrix::Real(m) => {
                let mut out = vec![Complex64::new(0.0, 0.0); m.cols()];
                for (i, &yi) in y.iter().enumerate() {
                    for (o, &a) in out.iter_mut().zip(m.row(i)) {
                        *o += yi * a;
                    }
                }
                Ok(out)
            }
            AnyMatrix::Complex(m) => m.adjoint_matvec(y),
        }
    }

    /// `Re(A* y)`.
    pub fn apply_adjoint_real(&self, y: &[Complex64]) -> Result<Vec<f64>> {
        Ok(self.apply_adjoint(y)?.into_iter().map(|c| c.re).collect())
    }

    /// `Re(A* A)`, the Hessian of `x -> ||Ax - b||^2 / 2` on real `x`.
    pub fn real_gram(&self) -> RealMatrix {
        let n = self.n();
        let mut g = RealMatrix::zeros(n, n);
        match &self.rows {
            AnyMatrix::Real(m) => {
                for i in 0..m.rows() {
                    let r = m.row(i);
                    for a in 0..n {
                        let ra = r[a];
                        if ra == 0.0 {
                            continue;
                        }
                        for (gb, &rb) in g.row_mut(a).iter_mut().zip(r) {
                            *gb += ra * rb;
                        }
                    }
                }
            }
            AnyMatrix::Complex(m) => {
                for i in 0..m.rows() {
                    let r = m.row(i);
                    for a in 0..n {
                        let ra = r[a];
                        for (gb, rb) in g.row_mut(a).iter_mut().zip(r) {
                            *gb += ra.re * rb.re + ra.im * rb.im;
                        }
                    }
                }
            }
        }
        g
    }
}

/// `||mean_t A_t* A_t - I||_F` over `trials` fresh Bernoulli draws, trial `t`
/// using seed `derive_seed(seed, t)`.
///
/// Uses `A*A - I = U* diag(w - 1) U` with `w_j = (n/m) [j in J]`, which is exact
/// for unitary `U`; in particular the result is exactly zero when `m = n`.
pub fn isotropy_error(u: &Arc<UnitaryOperator>, m: usize, trials: usize, seed: u64) -> Result<f64> {
    let n = u.n();
    if m < 2 || m > n {
        return Err(GcsError::InvalidM { m, n });
    }
    if trials == 0 {
        return Err(GcsError::Domain("isotropy_error needs at least one trial".into()));
    }
    let p = m as f64 / n as f64;
    let mut counts = vec![0usize; n];
    for t in 0..trials {
        let mut rng = rng_from_seed(derive_seed(seed, t as u64));
        for c in counts.iter_mut() {
            if rng.random::<f64>() < p {
                *c += 1;
            }
        }
    }
    let scale = n as f64 / m as f64;
    let weights: Vec<f64> = counts
        .iter()
        .map(|&c| scale * (c as f64 / trials as f64) - 1.0)
        .collect();
    let full = u.to_complex_matrix();
    let mut acc = ComplexMatrix::zeros(n, n);
    for (j, &w) in weights.iter().enumerate() {
        if w == 0.0 {
            continue;
        }
        let row = full.row(j);
        for a in 0..n {
            let ca = row[a].conj().scale(w);
            for (o, &rb) in acc.row_mut(a).iter_mut().zip(row) {
                *o += ca * rb;
            }
        }
    }
    Ok(acc.frobenius_norm())
}

/// Cramér–Chernoff tail for `P{ ||A xi||^2 >= t }` with `R = n ||xi||_U^2`:
/// `exp(-m (u ln u - u + 1))`, `u = t / R`. Returns 1 when `u <= 1`, where the
/// Chernoff bound carries no information.
pub fn cramer_chernoff_tail(t: f64, m: usize, r: f64) -> Result<f64> {
    if !(t > 1.0) || !(r > 0.0) {
        return Err(GcsError::Domain(format!(
            "cramer_chernoff_tail needs t > 1 and R > 0, got t = {t}, R = {r}"
        )));
    }
    let u = t / r;
    if u <= 1.0 {
        return Ok(1.0);
    }
    let exponent = m as f64 * (u * u.ln() - u + 1.0);
    Ok((-exponent).exp().clamp(0.0, 1.0))
}

/// Matrix Bernstein tail `2 dim exp(-(gamma^2/2) / (tau^2 + K gamma / 3))`,
/// unclamped.
pub fn bernstein_tail_raw(gamma: f64, tau_sq: f64, k_bound: f64, dim: usize) -> Result<f64> {
    if !(gamma >= 0.0) || !(tau_sq >= 0.0) || !(k_bound > 0.0) {
        return Err(GcsError::Domain(format!(
            "bernstein_tail needs gamma >= 0, tau^2 >= 0, K > 0; got {gamma}, {tau_sq}, {k_bound}"
        )));
    }
    let prefactor = 2.0 * dim as f64;
    if gamma == 0.0 {
        return Ok(prefactor);
    }
    let exponent = (gamma * gamma / 2.0) / (tau_sq + k_bound * gamma / 3.0);
    Ok(prefactor * (-exponent).exp())
}

/// Matrix Bernstein tail clamped to `[0, 1]`.
pub fn bernstein_tail(gamma: f64, tau_sq: f64, k_bound: f64, dim: usize) -> Result<f64> {
    Ok(bernstein_tail_raw(gamma, tau_sq, k_bound, dim)?.clamp(0.0, 1.0))
}
