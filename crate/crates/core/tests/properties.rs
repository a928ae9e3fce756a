use std::sync::Arc;

use gcs_core::coherence::{chord_coherence_mc, network_coherence_heuristic, subspace_coherence};
use gcs_core::gnn::{difference_network, log_region_bound, objective_value_grad, random_network};
use gcs_core::linops::{norm2, qr_thin, two_to_inf_norm, RealMatrix};
use gcs_core::recovery::{recover, RecoveryConfig, Termination};
use gcs_core::rng::{gaussian_matrix, gaussian_vec, rng_from_seed, unit_sphere};
use gcs_core::sampling::{sample, SamplingModel};
use gcs_core::transforms::{dct2_operator, dft_operator, measurement_norm, UnitaryOperator};
use proptest::prelude::*;

fn operator(kind: u8, n: usize) -> UnitaryOperator {
    match kind % 3 {
        0 => dft_operator(n),
        1 => dct2_operator(n),
        _ => UnitaryOperator::identity(n),
    }
}

fn model(bernoulli: bool) -> SamplingModel {
    if bernoulli {
        SamplingModel::Bernoulli
    } else {
        SamplingModel::FixedPermutation
    }
}

// power iteration on M^T M
fn spectral_norm(m: &RealMatrix) -> f64 {
    let mut v = vec![1.0; m.cols()];
    let mut s = 0.0;
    for _ in 0..500 {
        let w = m.adjoint_matvec(&m.matvec(&v).unwrap()).unwrap();
        let nw = norm2(&w);
        if nw == 0.0 {
            return 0.0;
        }
        v = w.iter().map(|x| x / nw).collect();
        s = nw.sqrt();
    }
    s
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn qr_round_trip(n in 2usize..24, k in 1usize..8, seed in any::<u64>()) {
        let k = k.min(n);
        let w = gaussian_matrix(&mut rng_from_seed(seed), n, k);
        let f = qr_thin(&w).unwrap();
        let err = f.q.matmul(&f.r).unwrap().sub(&w).unwrap().frobenius_norm() / w.frobenius_norm();
        prop_assert!(err <= 1e-10);
        prop_assert!(f.q.orthonormality_defect() <= 1e-10);
    }

    #[test]
    fn orthonormal_rows_reach_the_floor(n in 1usize..40, k in 1usize..10, seed in any::<u64>()) {
        let k = k.min(n);
        let q = qr_thin(&gaussian_matrix(&mut rng_from_seed(seed), n, k)).unwrap().q;
        prop_assert!(two_to_inf_norm(&q) >= (k as f64 / n as f64).sqrt() - 1e-12);
    }

    #[test]
    fn two_to_inf_sandwich(rows in 1usize..12, cols in 1usize..12, seed in any::<u64>()) {
        let m = gaussian_matrix(&mut rng_from_seed(seed), rows, cols);
        let t = two_to_inf_norm(&m);
        let s = spectral_norm(&m);
        prop_assert!(t <= s * (1.0 + 1e-8));
        prop_assert!(s <= (rows as f64).sqrt() * t * (1.0 + 1e-8));
    }

    #[test]
    fn measurement_norm_sandwich_and_parseval(kind in 0u8..3, n in 1usize..65, seed in any::<u64>()) {
        let u = operator(kind, n);
        let x = unit_sphere(&mut rng_from_seed(seed), n);
        let v = measurement_norm(&u, &x).unwrap();
        prop_assert!(v >= 1.0 / (n as f64).sqrt() - 1e-12);
        prop_assert!(v <= 1.0 + 1e-12);
        prop_assert!((norm2(&u.apply(&x).unwrap()) - 1.0).abs() <= 1e-10);
    }

    #[test]
    fn full_sampling_preserves_norm(kind in 0u8..3, n in 2usize..40, bern in any::<bool>(), seed in any::<u64>()) {
        let u = Arc::new(operator(kind, n));
        let a = sample(model(bern), u, n, seed).unwrap();
        let x = gaussian_vec(&mut rng_from_seed(seed ^ 1), n);
        prop_assert!((norm2(&a.apply(&x).unwrap()) - norm2(&x)).abs() <= 1e-10 * (1.0 + norm2(&x)));
    }

    #[test]
    fn realized_rows_are_scaled(kind in 0u8..3, n in 2usize..40, frac in 0.1f64..1.0, bern in any::<bool>(), seed in any::<u64>()) {
        let m = ((n as f64 * frac) as usize).clamp(2, n);
        let u = Arc::new(operator(kind, n));
        let a = sample(model(bern), u.clone(), m, seed).unwrap();
        let scale = (n as f64 / m as f64).sqrt();
        for &j in a.indices() {
            let r: f64 = u.row(j).iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt() * a.scale();
            prop_assert!((r - scale).abs() <= 1e-10);
        }
        let again = sample(model(bern), u, m, seed).unwrap();
        prop_assert_eq!(a.indices(), again.indices());
    }

    #[test]
    fn positive_homogeneity(k in 2usize..5, h in 0usize..3, c in 0.0f64..10.0, seed in any::<u64>()) {
        let g = random_network(&[k, k + 3, k + 3 + h, 12], seed).unwrap();
        let z = gaussian_vec(&mut rng_from_seed(seed ^ 2), k);
        let cz: Vec<f64> = z.iter().map(|v| c * v).collect();
        let lhs = g.forward(&cz).unwrap();
        let rhs: Vec<f64> = g.forward(&z).unwrap().iter().map(|v| c * v).collect();
        for (a, b) in lhs.iter().zip(&rhs) {
            prop_assert!((a - b).abs() <= 1e-12 * (1.0 + b.abs()));
        }
    }

    #[test]
    fn difference_network_region_bound(k in 2usize..5, k1 in 0usize..6, k2 in 0usize..6) {
        let widths = [k, k + k1, k + k1 + k2, 20];
        let g = random_network(&widths, 0).unwrap();
        let d = log_region_bound(&difference_network(&g).unwrap().widths());
        let kf = k as f64;
        let expect = 2.0 * kf * widths[1..3]
            .iter()
            .map(|&w| (2.0 * std::f64::consts::E * w as f64 / kf).ln())
            .sum::<f64>();
        prop_assert!((d - expect).abs() <= 1e-12 * (1.0 + expect));
    }

    #[test]
    fn coherence_floor_and_ceiling(kind in 0u8..3, n in 2usize..40, k in 1usize..6, seed in any::<u64>()) {
        let k = k.min(n);
        let u = operator(kind, n);
        let q = qr_thin(&gaussian_matrix(&mut rng_from_seed(seed), n, k)).unwrap().q;
        let a = subspace_coherence(&u, &q).unwrap();
        prop_assert!(a >= (k as f64 / n as f64).sqrt() - 1e-12);
        prop_assert!(a <= 1.0 + 1e-12);
    }

    #[test]
    fn mc_never_exceeds_heuristic(kind in 0u8..3, k in 2usize..5, seed in any::<u64>()) {
        let g = random_network(&[k, 8, 16], seed).unwrap();
        let u = operator(kind, 16);
        let mc = chord_coherence_mc(&g, &u, 200, seed).unwrap();
        let h = network_coherence_heuristic(&g, &u, false).unwrap();
        prop_assert!(mc <= h + 1e-10);
        prop_assert!(h <= 1.0 + 1e-12);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn recovery_is_deterministic_and_restarts_help(seed in any::<u64>(), m in 6usize..16) {
        let g = random_network(&[2, 6, 16], seed).unwrap();
        let a = sample(SamplingModel::FixedPermutation, Arc::new(dct2_operator(16)), m, seed).unwrap();
        let x0 = g.forward(&gaussian_vec(&mut rng_from_seed(seed ^ 3), 2)).unwrap();
        let b = a.apply(&x0).unwrap();
        let base = RecoveryConfig { max_iters: 600, seed, ..RecoveryConfig::default() };
        let first = recover(&g, &a, &b, &base).unwrap();
        prop_assert_eq!(&first, &recover(&g, &a, &b, &base).unwrap());
        let mut prev = first.residual;
        for restarts in 2..4 {
            let r = recover(&g, &a, &b, &RecoveryConfig { restarts, ..base.clone() }).unwrap();
            prop_assert!(r.residual <= prev);
            prev = r.residual;
        }
        if first.termination == Termination::GradTol {
            let (_, grad) = objective_value_grad(&g, &a, &b, &first.z_hat).unwrap();
            prop_assert!(norm2(&grad) <= base.grad_tol);
        }
    }
}
