//! Coherence of structure sets with respect to a measurement norm.
//!
//! * [`subspace_coherence`] is exact for a subspace with orthonormal basis `Q`:
//!   `sup_{v in range(Q), |v| = 1} ||Uv||_inf = ||UQ||_{2->inf}`.
//! * [`network_coherence_heuristic`] applies this to the range of the final
//!   weight matrix, which contains every chord of the network's range.
//! * [`chord_coherence_mc`] samples chords `G(z1) - G(z2)` and so gives a
//!   lower bound on the coherence of `range(G) - range(G)`.

use serde::{Deserialize, Serialize};

use crate::error::{dim_mismatch, GcsError, Result};
use crate::gnn::{log_region_bound, FinalActivation, GenerativeNetwork};
use crate::linops::{norm2, qr_thin, AnyMatrix, RealMatrix, ORTHONORMAL_TOL};
use crate::rng::{derive_seed, gaussian_vec, rng_from_seed};
use crate::transforms::{measurement_norm, OperatorKind, UnitaryOperator};

/// Chords shorter than this are discarded by the Monte-Carlo estimate.
pub const CHORD_TOL: f64 = 1e-10;

/// Frobenius term of the regularizer below which its gradient is set to zero.
const REG_FROB_TOL: f64 = 1e-12;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CoherenceReport {
    pub alpha_heuristic: f64,
    pub alpha_mc: f64,
    pub mc_samples: usize,
    /// `sqrt(k/n)` for the latent dimension `k`.
    pub lower_bound: f64,
    /// Typical-coherence formula at `gamma = 0`, up to an absolute constant.
    pub typical_bound: Option<f64>,
    pub seed: u64,
    pub k: usize,
    pub n: usize,
    pub unitary: String,
    pub latent_distribution: String,
    /// Whether `alpha_mc <= alpha_heuristic` is guaranteed (linear final layer).
    pub heuristic_is_upper_bound: bool,
}

/// `||U Q||_{2->inf}` for `Q` with orthonormal columns.
///
/// Exact for real `U`. For complex `U` the supremum runs over complex
/// coefficients, so it upper-bounds the coherence of the real subspace.
pub fn subspace_coherence(u: &UnitaryOperator, q: &RealMatrix) -> Result<f64> {
    if q.rows() != u.n() {
        return Err(dim_mismatch("subspace basis rows", u.n(), q.rows()));
    }
    let defect = q.orthonormality_defect();
    if defect > ORTHONORMAL_TOL {
        return Err(GcsError::NotOrthonormal { defect });
    }
    Ok(u.mul_real(q)?.two_to_inf_norm())
}

/// `||D Q_1||_{2->inf}` where `Q_1` is the thin-QR orthonormal basis of `range(W)`.
pub fn matrix_coherence_heuristic(w: &RealMatrix, d_op: &UnitaryOperator) -> Result<f64> {
    if w.rows() != d_op.n() {
        return Err(dim_mismatch("final layer rows", d_op.n(), w.rows()));
    }
    let f = qr_thin(w)?;
    Ok(d_op.mul_real(&f.q)?.two_to_inf_norm())
}

/// Coherence heuristic of a network computed from its final weight matrix.
///
/// For a linear final layer this upper-bounds the coherence of the piecewise
/// linear expansion of `range(G) - range(G)`. Networks ending in a sigmoid are
/// rejected unless `allow_nonlinear_final` is set, in which case the value is a
/// diagnostic only.
pub fn network_coherence_heuristic(
    g: &GenerativeNetwork,
    d_op: &UnitaryOperator,
    allow_nonlinear_final: bool,
) -> Result<f64> {
    if g.final_activation() != FinalActivation::None && !allow_nonlinear_final {
        return Err(GcsError::Unsupported(
            "coherence heuristic of a network with a final activation".into(),
        ));
    }
    matrix_coherence_heuristic(g.final_weight(), d_op)
}

/// Monte-Carlo lower bound on the coherence of `range(G) - range(G)`.
///
/// Chord `i` draws `z1, z2 ~ N(0, I_k)` from seed `derive_seed(seed, i)`.
pub fn chord_coherence_mc(
    g: &GenerativeNetwork,
    u: &UnitaryOperator,
    samples: usize,
    seed: u64,
) -> Result<f64> {
    if samples == 0 {
        return Err(GcsError::Domain("chord_coherence_mc needs at least one sample".into()));
    }
    if g.output_dim() != u.n() {
        return Err(dim_mismatch("network output", u.n(), g.output_dim()));
    }
    let k = g.latent_dim();
    let mut best: Option<f64> = None;
    for i in 0..samples {
        let mut rng = rng_from_seed(derive_seed(seed, i as u64));
        let z1 = gaussian_vec(&mut rng, k);
        let z2 = gaussian_vec(&mut rng, k);
        let x1 = g.forward(&z1)?;
        let x2 = g.forward(&z2)?;
        let chord: Vec<f64> = x1.iter().zip(&x2).map(|(a, b)| a - b).collect();
        let len = norm2(&chord);
        if len <= CHORD_TOL {
            continue;
        }
        let unit: Vec<f64> = chord.iter().map(|c| c / len).collect();
        let v = measurement_norm(u, &unit)?;
        best = Some(best.map_or(v, |b: f64| b.max(v)));
    }
    best.ok_or(GcsError::DegenerateRange(CHORD_TOL))
}

/// `sqrt(k/n)`, the smallest possible coherence of a `k`-dimensional subspace.
pub fn coherence_lower_bound(k: usize, n: usize) -> Result<f64> {
    if k == 0 || k > n {
        return Err(GcsError::Domain(format!(
            "coherence_lower_bound needs 1 <= k <= n, got k = {k}, n = {n}"
        )));
    }
    Ok((k as f64 / n as f64).sqrt())
}

/// Typical coherence for a Gaussian last layer, up to an absolute constant:
/// `sqrt(k/n) + sqrt(ln n / n) + sqrt((k/n) sum ln(2e k_i/k)) + gamma / sqrt(n)`.
pub fn typical_coherence_bound(widths: &[usize], gamma: f64) -> Result<f64> {
    if widths.len() < 2 || widths[0] == 0 || !(gamma >= 0.0) {
        return Err(GcsError::Domain(format!(
            "typical_coherence_bound needs a width chain and gamma >= 0, got {widths:?}, {gamma}"
        )));
    }
    let k = widths[0] as f64;
    let n = *widths.last().expect("nonempty") as f64;
    Ok((k / n).sqrt()
        + (n.ln() / n).sqrt()
        + (log_region_bound(widths) / n).sqrt()
        + gamma / n.sqrt())
}

/// `rho(W) = ||DW||_{2->inf} + lambda ||W^T W - I||_F` and a subgradient.
///
/// The `2->inf` term is differentiated through the maximizing row (smallest
/// index on ties). The Frobenius term contributes
/// `2 lambda W (W^T W - I) / ||W^T W - I||_F`, or zero when the norm is below
/// `1e-12`.
pub fn regularizer(w: &RealMatrix, d_op: &UnitaryOperator, lambda: f64) -> Result<(f64, RealMatrix)> {
    if w.rows() != d_op.n() {
        return Err(dim_mismatch("regularized matrix rows", d_op.n(), w.rows()));
    }
    if !(lambda >= 0.0) {
        return Err(GcsError::Domain(format!("lambda must be nonnegative, got {lambda}")));
    }
    let (n, k) = w.shape();
    let dw = d_op.mul_real(w)?;
    let norms = dw.row_norms();
    let mut best = 0;
    for (i, &v) in norms.iter().enumerate() {
        if v > norms[best] {
            best = i;
        }
    }
    let row_norm = norms[best];
    let mut grad = RealMatrix::zeros(n, k);
    if row_norm > 0.0 {
        match (&dw, d_op.real_matrix()) {
            (AnyMatrix::Real(dw), Some(d)) => {
                let r = dw.row(best);
                for l in 0..n {
                    let dl = d[(best, l)];
                    for (g, &rj) in grad.row_mut(l).iter_mut().zip(r) {
                        *g = dl * rj / row_norm;
                    }
                }
            }
            _ => {
                let dw = dw.to_complex();
                let r = dw.row(best);
                let drow = d_op.row(best);
                for l in 0..n {
                    let dl = drow[l].conj();
                    for (g, rj) in grad.row_mut(l).iter_mut().zip(r) {
                        *g = (dl * rj).re / row_norm;
                    }
                }
            }
        }
    }

    let gram = w.transpose().matmul(w)?;
    let e = gram.sub(&RealMatrix::identity(k))?;
    let frob = e.frobenius_norm();
    if lambda > 0.0 && frob >= REG_FROB_TOL {
        let we = w.matmul(&e)?;
        let s = 2.0 * lambda / frob;
        for (g, &v) in grad.data_mut().iter_mut().zip(we.data()) {
            *g += s * v;
        }
    }
    Ok((row_norm + lambda * frob, grad))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ComplexityKind {
    /// Restricted isometry on `range(G)`.
    Rip,
    /// Restricted isometry on `range(G) - range(G)`.
    DiffRip,
    /// Recovery guarantee; uses `delta = 1/3`.
    Gcs,
}

/// `c (alpha^2 n / delta^2) (f k sum ln(2e k_i/k) + ln(g k / eps))` with
/// `(f, g) = (1, 2)` for `Rip` and `(2, 4)` otherwise. The absolute constant
/// `c` is the caller's choice.
pub fn sample_complexity(
    alpha: f64,
    widths: &[usize],
    epsilon: f64,
    delta: f64,
    kind: ComplexityKind,
    c: f64,
) -> Result<f64> {
    let delta = if kind == ComplexityKind::Gcs { 1.0 / 3.0 } else { delta };
    if !(alpha > 0.0 && epsilon > 0.0 && delta > 0.0 && c > 0.0) || widths.len() < 2 || widths[0] == 0 {
        return Err(GcsError::Domain(format!(
            "sample_complexity needs positive alpha, epsilon, delta, c and a width chain; \
             got alpha = {alpha}, epsilon = {epsilon}, delta = {delta}, c = {c}, widths = {widths:?}"
        )));
    }
    let k = widths[0] as f64;
    let n = *widths.last().expect("nonempty") as f64;
    let (factor, mult) = match kind {
        ComplexityKind::Rip => (1.0, 2.0),
        ComplexityKind::DiffRip | ComplexityKind::Gcs => (2.0, 4.0),
    };
    let bracket = factor * log_region_bound(widths) + (mult * k / epsilon).ln();
    Ok(c * alpha * alpha * n / (delta * delta) * bracket)
}

fn unitary_label(u: &UnitaryOperator) -> String {
    match u.kind() {
        OperatorKind::Dft => "dft",
        OperatorKind::Dct2 => "dct",
        OperatorKind::Explicit => "explicit",
    }
    .to_string()
}

/// Heuristic, Monte-Carlo and analytic coherence figures for a network.
pub fn coherence_report(
    g: &GenerativeNetwork,
    u: &UnitaryOperator,
    mc_samples: usize,
    seed: u64,
) -> Result<CoherenceReport> {
    let linear_final = g.final_activation() == FinalActivation::None;
    let widths = g.widths();
    let k = g.latent_dim();
    let n = g.output_dim();
    Ok(CoherenceReport {
        alpha_heuristic: network_coherence_heuristic(g, u, true)?,
        alpha_mc: chord_coherence_mc(g, u, mc_samples, seed)?,
        mc_samples,
        lower_bound: coherence_lower_bound(k, n)?,
        typical_bound: if linear_final {
            Some(typical_coherence_bound(&widths, 0.0)?)
        } else {
            None
        },
        seed,
        k,
        n,
        unitary: unitary_label(u),
        latent_distribution: "standard_normal".into(),
        heuristic_is_upper_bound: linear_final,
    })
}
