//! Latent-code recovery: `min_z ||b - A G(z)||_2` by Adam on the squared residual.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{dim_mismatch, GcsError, Result};
use crate::gnn::{objective_value_grad, GenerativeNetwork};
use crate::linops::norm2;
use crate::rng::{derive_seed, gaussian_vec, rng_from_seed};
use crate::sampling::SubsampledIsometry;
use crate::training::{adam_step, AdamConfig, AdamState};

/// Recovery counts as successful when the relative error is below this.
pub const SUCCESS_RRE: f64 = 1e-5;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RecoveryConfig {
    pub learning_rate: f64,
    pub max_iters: usize,
    pub grad_tol: f64,
    pub restarts: usize,
    pub seed: u64,
}

impl Default for RecoveryConfig {
    fn default() -> Self {
        Self {
            learning_rate: 0.1,
            max_iters: 5000,
            grad_tol: 1e-7,
            restarts: 1,
            seed: 0,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Termination {
    GradTol,
    MaxIters,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RecoveryResult {
    pub z_hat: Vec<f64>,
    pub x_hat: Vec<f64>,
    /// Filled by [`RecoveryResult::score`]; absent for a zero target.
    pub rre: Option<f64>,
    pub iterations: usize,
    pub termination: Termination,
    /// `||A x_hat - b||_2`, recomputed from `x_hat`.
    pub residual: f64,
    /// Restart that produced this result.
    pub restart: usize,
    /// Restarts abandoned on a non-finite objective.
    pub failed_restarts: Vec<usize>,
    pub init: String,
}

impl RecoveryResult {
    /// Records `rre(x0, x_hat)`, or nothing when `x0 = 0`.
    pub fn score(&mut self, x0: &[f64]) -> Result<()> {
        self.rre = match rre(x0, &self.x_hat) {
            Ok(v) => Some(v),
            Err(GcsError::ZeroSignal) => None,
            Err(e) => return Err(e),
        };
        Ok(())
    }

    pub fn success(&self) -> bool {
        self.rre.is_some_and(|r| r < SUCCESS_RRE)
    }
}

/// `||x0 - x_hat||_2 / ||x0||_2`.
pub fn rre(x0: &[f64], x_hat: &[f64]) -> Result<f64> {
    if x0.len() != x_hat.len() {
        return Err(dim_mismatch("estimate", x0.len(), x_hat.len()));
    }
    let denom = norm2(x0);
    if denom == 0.0 {
        return Err(GcsError::ZeroSignal);
    }
    let diff: Vec<f64> = x0.iter().zip(x_hat).map(|(a, b)| a - b).collect();
    Ok(norm2(&diff) / denom)
}

fn residual_norm(a: &SubsampledIsometry, x: &[f64], b: &[Complex64]) -> Result<f64> {
    let ax = a.apply(x)?;
    let r: Vec<Complex64> = ax.iter().zip(b).map(|(p, q)| p - q).collect();
    Ok(norm2(&r))
}

struct Run {
    z: Vec<f64>,
    iterations: usize,
    termination: Termination,
}

fn run_restart(
    g: &GenerativeNetwork,
    a: &SubsampledIsometry,
    b: &[Complex64],
    config: &RecoveryConfig,
    seed: u64,
) -> Result<Option<Run>> {
    let mut z = gaussian_vec(&mut rng_from_seed(seed), g.latent_dim());
    let mut state = AdamState::new(z.len());
    let adam = AdamConfig::with_lr(config.learning_rate);
    for it in 0..config.max_iters {
        let (value, grad) = objective_value_grad(g, a, b, &z)?;
        if !value.is_finite() || grad.iter().any(|v| !v.is_finite()) {
            return Ok(None);
        }
        if norm2(&grad) <= config.grad_tol {
            return Ok(Some(Run {
                z,
                iterations: it,
                termination: Termination::GradTol,
            }));
        }
        adam_step(&mut z, &grad, &mut state, &adam)?;
    }
    Ok(Some(Run {
        z,
        iterations: config.max_iters,
        termination: Termination::MaxIters,
    }))
}

/// Runs Adam on `1/2 ||A G(z) - b||^2` from `z ~ N(0, I)` for each restart and
/// keeps the restart with the smallest residual (earliest on ties). Restart `r`
/// draws its start from `derive_seed(config.seed, r)`.
pub fn recover(
    g: &GenerativeNetwork,
    a: &SubsampledIsometry,
    b: &[Complex64],
    config: &RecoveryConfig,
) -> Result<RecoveryResult> {
    if g.output_dim() != a.n() {
        return Err(dim_mismatch("measurement operator width", g.output_dim(), a.n()));
    }
    if b.len() != a.num_rows() {
        return Err(dim_mismatch("measurement vector", a.num_rows(), b.len()));
    }
    if !(config.learning_rate > 0.0 && config.grad_tol > 0.0) || config.max_iters == 0 || config.restarts == 0 {
        return Err(GcsError::Domain("recovery settings must all be positive".into()));
    }
    let mut best: Option<RecoveryResult> = None;
    let mut failed = Vec::new();
    for r in 0..config.restarts {
        let Some(run) = run_restart(g, a, b, config, derive_seed(config.seed, r as u64))? else {
            failed.push(r);
            continue;
        };
        let x_hat = g.forward(&run.z)?;
        let residual = residual_norm(a, &x_hat, b)?;
        if best.as_ref().is_none_or(|cur| residual < cur.residual) {
            best = Some(RecoveryResult {
                z_hat: run.z,
                x_hat,
                rre: None,
                iterations: run.iterations,
                termination: run.termination,
                residual,
                restart: r,
                failed_restarts: Vec::new(),
                init: "standard_normal".into(),
            });
        }
    }
    let mut result = best.ok_or(GcsError::NonfiniteObjective(config.restarts))?;
    result.failed_restarts = failed;
    Ok(result)
}

/// Both sides of `||x_hat - x0|| <= ||x_perp|| + 3 ||A x_perp|| + 3 ||eta|| + (3/2) eps_hat`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoundAudit {
    pub left: f64,
    pub right: f64,
    pub satisfied: bool,
}

/// `x_perp` is the caller's model-mismatch component of `x0` (zero for targets
/// in the range of the network); `eps_hat` the residual gap of the solver.
pub fn recovery_bound_audit(
    result: &RecoveryResult,
    x0: &[f64],
    x_perp: &[f64],
    eta: &[Complex64],
    a: &SubsampledIsometry,
    eps_hat: f64,
) -> Result<BoundAudit> {
    let n = a.n();
    for (what, len) in [("target", x0.len()), ("mismatch", x_perp.len()), ("estimate", result.x_hat.len())] {
        if len != n {
            return Err(dim_mismatch(what, n, len));
        }
    }
    if eta.len() != a.num_rows() {
        return Err(dim_mismatch("noise", a.num_rows(), eta.len()));
    }
    let diff: Vec<f64> = result.x_hat.iter().zip(x0).map(|(p, q)| p - q).collect();
    let left = norm2(&diff);
    let right = norm2(x_perp) + 3.0 * norm2(&a.apply(x_perp)?) + 3.0 * norm2(eta) + 1.5 * eps_hat.max(0.0);
    Ok(BoundAudit {
        left,
        right,
        satisfied: left <= right,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gnn::random_network;
    use crate::sampling::sample_fixed;
    use crate::transforms::dct2_operator;
    use std::sync::Arc;

    fn measure(a: &SubsampledIsometry, x: &[f64]) -> Vec<Complex64> {
        a.apply(x).unwrap()
    }

    #[test]
    fn rre_examples() {
        let x = [3.0, -4.0];
        assert_eq!(rre(&x, &x).unwrap(), 0.0);
        assert_eq!(rre(&x, &[0.0, 0.0]).unwrap(), 1.0);
        assert!((rre(&[1.0, 0.0], &[0.0, 1.0]).unwrap() - 2f64.sqrt()).abs() < 1e-15);
        assert!(matches!(rre(&[0.0, 0.0], &x), Err(GcsError::ZeroSignal)));
        assert!(rre(&x, &[1.0]).is_err());
    }

    #[test]
    fn full_measurement_recovers() {
        let g = random_network(&[4, 16, 32], 5).unwrap();
        let a = sample_fixed(Arc::new(dct2_operator(32)), 32, 1).unwrap();
        let mut ok = 0;
        for t in 0..5 {
            let z0 = gaussian_vec(&mut rng_from_seed(100 + t), 4);
            let x0 = g.forward(&z0).unwrap();
            let cfg = RecoveryConfig {
                seed: 200 + t,
                ..RecoveryConfig::default()
            };
            let mut r = recover(&g, &a, &measure(&a, &x0), &cfg).unwrap();
            r.score(&x0).unwrap();
            assert_eq!(r.x_hat, g.forward(&r.z_hat).unwrap());
            if r.termination == Termination::GradTol {
                let (_, grad) = objective_value_grad(&g, &a, &measure(&a, &x0), &r.z_hat).unwrap();
                assert!(norm2(&grad) <= cfg.grad_tol);
            }
            ok += usize::from(r.success());
        }
        assert!(ok >= 4, "{ok}/5 recovered");
    }

    #[test]
    fn zero_target() {
        let g = random_network(&[2, 4, 8], 1).unwrap();
        let a = sample_fixed(Arc::new(dct2_operator(8)), 4, 1).unwrap();
        let b = vec![Complex64::new(0.0, 0.0); 4];
        let (value, _) = objective_value_grad(&g, &a, &b, &[0.0, 0.0]).unwrap();
        assert_eq!(value, 0.0);
        let mut r = recover(&g, &a, &b, &RecoveryConfig::default()).unwrap();
        r.score(&[0.0; 8]).unwrap();
        assert_eq!(r.rre, None);
        assert!(!r.success());
    }

    #[test]
    fn deterministic_and_monotone_in_restarts() {
        let g = random_network(&[3, 8, 16], 2).unwrap();
        let a = sample_fixed(Arc::new(dct2_operator(16)), 6, 3).unwrap();
        let x0 = g.forward(&[0.5, -1.0, 0.3]).unwrap();
        let b = measure(&a, &x0);
        let cfg = |restarts| RecoveryConfig {
            restarts,
            max_iters: 300,
            seed: 7,
            ..RecoveryConfig::default()
        };
        assert_eq!(recover(&g, &a, &b, &cfg(2)).unwrap(), recover(&g, &a, &b, &cfg(2)).unwrap());
        let mut prev = f64::INFINITY;
        for r in 1..=4 {
            let res = recover(&g, &a, &b, &cfg(r)).unwrap().residual;
            assert!(res <= prev);
            prev = res;
        }
    }

    #[test]
    fn dimension_errors() {
        let g = random_network(&[2, 4, 8], 1).unwrap();
        let a = sample_fixed(Arc::new(dct2_operator(8)), 4, 1).unwrap();
        assert!(matches!(
            recover(&g, &a, &[Complex64::new(0.0, 0.0); 3], &RecoveryConfig::default()),
            Err(GcsError::DimensionMismatch(_))
        ));
        let a16 = sample_fixed(Arc::new(dct2_operator(16)), 4, 1).unwrap();
        assert!(recover(&g, &a16, &[Complex64::new(0.0, 0.0); 4], &RecoveryConfig::default()).is_err());
    }

    #[test]
    fn audit_cases() {
        let g = random_network(&[2, 6, 12], 4).unwrap();
        let a = sample_fixed(Arc::new(dct2_operator(12)), 12, 0).unwrap();
        let x0 = g.forward(&[1.0, -0.5]).unwrap();
        let b = measure(&a, &x0);
        let zeros = vec![0.0; 12];
        let eta = vec![Complex64::new(0.0, 0.0); 12];
        let mut exact = recover(&g, &a, &b, &RecoveryConfig::default()).unwrap();
        exact.x_hat = x0.clone();
        let au = recovery_bound_audit(&exact, &x0, &zeros, &eta, &a, 0.0).unwrap();
        assert_eq!(au.left, 0.0);
        assert!(au.satisfied);

        // with A unitary and x0 in range, the right side is 1.5 times the residual
        let mut off = exact.clone();
        off.x_hat = x0.iter().map(|v| v + 0.01).collect();
        off.residual = residual_norm(&a, &off.x_hat, &b).unwrap();
        let au = recovery_bound_audit(&off, &x0, &zeros, &eta, &a, off.residual).unwrap();
        assert!((au.right - 1.5 * off.residual).abs() < 1e-15);
        assert!((au.left - off.residual).abs() < 1e-12);
        assert!(au.satisfied);
        assert!(recovery_bound_audit(&off, &x0[..5], &zeros, &eta, &a, 0.0).is_err());
    }
}
