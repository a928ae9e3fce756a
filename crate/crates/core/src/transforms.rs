//! Unitary reference operators and the measurement norm `||x||_U = ||Ux||_inf`.
//!
//! Operators are stored as dense matrices and applied in `O(n^2)`.
//! Formulas below use 0-based `i, j`:
//!
//! * DFT: `F_ij = exp(2 pi i * i j / n) / sqrt(n)`
//! * orthonormal DCT-II: `D_0j = 1 / sqrt(n)`, `D_ij = sqrt(2/n) cos(pi i (2j + 1) / (2n))`

use std::f64::consts::PI;

use num_complex::Complex64;

use crate::error::{dim_mismatch, GcsError, Result};
use crate::linops::{two_to_inf_norm, AnyMatrix, ComplexMatrix, RealMatrix, Scalar};

/// Tolerance on `||U*U - I||_F` for explicit operators.
pub const UNITARY_TOL: f64 = 1e-8;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum OperatorKind {
    Dft,
    Dct2,
    Explicit,
}

#[derive(Clone, Debug, PartialEq)]
enum Entries {
    Real(RealMatrix),
    Complex(ComplexMatrix),
}

/// An `n x n` unitary matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct UnitaryOperator {
    kind: OperatorKind,
    entries: Entries,
}

/// Result of multiplying an operator with a real matrix.
pub type OperatorProduct = AnyMatrix;

impl AnyMatrix {
    pub fn shape(&self) -> (usize, usize) {
        match self {
            AnyMatrix::Real(m) => m.shape(),
            AnyMatrix::Complex(m) => m.shape(),
        }
    }

    pub fn two_to_inf_norm(&self) -> f64 {
        match self {
            AnyMatrix::Real(m) => two_to_inf_norm(m),
            AnyMatrix::Complex(m) => two_to_inf_norm(m),
        }
    }

    pub fn row_norms(&self) -> Vec<f64> {
        match self {
            AnyMatrix::Real(m) => m.row_norms(),
            AnyMatrix::Complex(m) => m.row_norms(),
        }
    }

    pub fn to_complex(&self) -> ComplexMatrix {
        match self {
            AnyMatrix::Real(m) => m.to_complex(),
            AnyMatrix::Complex(m) => m.clone(),
        }
    }
}

/// Discrete Fourier transform matrix.
pub fn dft_operator(n: usize) -> UnitaryOperator {
    assert!(n >= 1, "operator dimension must be positive");
    let s = 1.0 / (n as f64).sqrt();
    let m = ComplexMatrix::from_fn(n, n, |i, j| {
        // Reduce i*j mod n before forming the angle to keep it accurate.
        let angle = 2.0 * PI * ((i * j) % n) as f64 / n as f64;
        Complex64::from_polar(s, angle)
    });
    UnitaryOperator {
        kind: OperatorKind::Dft,
        entries: Entries::Complex(m),
    }
}

/// Orthonormal DCT-II matrix.
pub fn dct2_operator(n: usize) -> UnitaryOperator {
    assert!(n >= 1, "operator dimension must be positive");
    let first = 1.0 / (n as f64).sqrt();
    let rest = (2.0 / n as f64).sqrt();
    let m = RealMatrix::from_fn(n, n, |i, j| {
        if i == 0 {
            first
        } else {
            let phase = (i * (2 * j + 1)) % (4 * n);
            rest * (PI * phase as f64 / (2 * n) as f64).cos()
        }
    });
    UnitaryOperator {
        kind: OperatorKind::Dct2,
        entries: Entries::Real(m),
    }
}

impl UnitaryOperator {
    /// Wraps an explicit real orthogonal matrix.
    pub fn explicit_real(m: RealMatrix) -> Result<Self> {
        Self::check_unitary(m.shape(), m.orthonormality_defect())?;
        Ok(Self {
            kind: OperatorKind::Explicit,
            entries: Entries::Real(m),
        })
    }

    /// Wraps an explicit complex unitary matrix.
    pub fn explicit_complex(m: ComplexMatrix) -> Result<Self> {
        Self::check_unitary(m.shape(), m.orthonormality_defect())?;
        Ok(Self {
            kind: OperatorKind::Explicit,
            entries: Entries::Complex(m),
        })
    }

    pub fn explicit(m: AnyMatrix) -> Result<Self> {
        match m {
            AnyMatrix::Real(m) => Self::explicit_real(m),
            AnyMatrix::Complex(m) => Self::explicit_complex(m),
        }
    }

    pub fn identity(n: usize) -> Self {
        Self {
            kind: OperatorKind::Explicit,
            entries: Entries::Real(RealMatrix::identity(n)),
        }
    }

    fn check_unitary((rows, cols): (usize, usize), defect: f64) -> Result<()> {
        if rows != cols || rows == 0 {
            return Err(GcsError::DimensionMismatch(format!(
                "unitary operator must be square and nonempty, got {rows}x{cols}"
            )));
        }
        if defect > UNITARY_TOL {
            return Err(GcsError::NotOrthonormal { defect });
        }
        Ok(())
    }

    pub fn kind(&self) -> OperatorKind {
        self.kind
    }

    pub fn n(&self) -> usize {
        match &self.entries {
            Entries::Real(m) => m.rows(),
            Entries::Complex(m) => m.rows(),
        }
    }

    pub fn is_real(&self) -> bool {
        matches!(self.entries, Entries::Real(_))
    }

    /// The real matrix, when the operator is real.
    pub fn real_matrix(&self) -> Option<&RealMatrix> {
        match &self.entries {
            Entries::Real(m) => Some(m),
            Entries::Complex(_) => None,
        }
    }

    pub fn to_complex_matrix(&self) -> ComplexMatrix {
        match &self.entries {
            Entries::Real(m) => m.to_complex(),
            Entries::Complex(m) => m.clone(),
        }
    }

    /// Row `i` as a length-`n` vector.
    pub fn row(&self, i: usize) -> Vec<Complex64> {
        match &self.entries {
            Entries::Real(m) => m.row(i).iter().map(|&x| Complex64::new(x, 0.0)).collect(),
            Entries::Complex(m) => m.row(i).to_vec(),
        }
    }

    /// `Ux`.
    pub fn apply<T: Scalar>(&self, x: &[T]) -> Result<Vec<Complex64>> {
        let n = self.n();
        if x.len() != n {
            return Err(dim_mismatch("operator input", n, x.len()));
        }
        let out = match &self.entries {
            Entries::Real(m) => (0..n)
                .map(|i| {
                    m.row(i)
                        .iter()
                        .zip(x)
                        .fold(Complex64::new(0.0, 0.0), |acc, (&a, &b)| acc + b.to_c64() * a)
                })
                .collect(),
            Entries::Complex(m) => (0..n)
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

    /// `U* y`.
    pub fn apply_adjoint(&self, y: &[Complex64]) -> Result<Vec<Complex64>> {
        match &self.entries {
            Entries::Real(m) => {
                if y.len() != m.rows() {
                    return Err(dim_mismatch("adjoint input", m.rows(), y.len()));
                }
                let mut out = vec![Complex64::new(0.0, 0.0); m.cols()];
                for (i, &yi) in y.iter().enumerate() {
                    for (o, &a) in out.iter_mut().zip(m.row(i)) {
                        *o += yi * a;
                    }
                }
                Ok(out)
            }
            Entries::Complex(m) => m.adjoint_matvec(y),
        }
    }

    /// `U W` for a real `W` with `n` rows.
    pub fn mul_real(&self, w: &RealMatrix) -> Result<OperatorProduct> {
        match &self.entries {
            Entries::Real(m) => m.matmul(w).map(AnyMatrix::Real),
            Entries::Complex(m) => m.mul_real(w).map(AnyMatrix::Complex),
        }
    }
}

/// `||Ux||_inf = max_i |<U_i, x>|`.
pub fn measurement_norm<T: Scalar>(u: &UnitaryOperator, x: &[T]) -> Result<f64> {
    Ok(u.apply(x)?.into_iter().map(|c| c.re.hypot(c.im)).fold(0.0, f64::max))
}

/// Parses the `--unitary` argument: `dft`, `dct`, or `file:<path>` holding a
/// matrix in the JSON encoding.
pub fn parse_unitary(spec: &str, n: usize) -> Result<UnitaryOperator> {
    match spec {
        "dft" => Ok(dft_operator(n)),
        "dct" => Ok(dct2_operator(n)),
        other => {
            let Some(path) = other.strip_prefix("file:") else {
                return Err(GcsError::Domain(format!(
                    "unknown unitary '{other}', expected dft, dct or file:<path>"
                )));
            };
            let text = std::fs::read_to_string(path)?;
            let m: AnyMatrix = serde_json::from_str(&text)?;
            let op = UnitaryOperator::explicit(m)?;
            if op.n() != n {
                return Err(dim_mismatch("explicit unitary dimension", n, op.n()));
            }
            Ok(op)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linops::norm2;
    use crate::rng::{gaussian_vec, rng_from_seed, unit_sphere};

    fn all_kinds(n: usize) -> Vec<UnitaryOperator> {
        let mut rng = rng_from_seed(3);
        let g = crate::rng::gaussian_matrix(&mut rng, n, n);
        let q = crate::linops::qr_thin(&g).unwrap().q;
        vec![dft_operator(n), dct2_operator(n), UnitaryOperator::explicit_real(q).unwrap()]
    }

    #[test]
    fn dft_small_cases() {
        let f1 = dft_operator(1).to_complex_matrix();
        assert!((f1[(0, 0)] - Complex64::new(1.0, 0.0)).norm() < 1e-15);
        let f2 = dft_operator(2).to_complex_matrix();
        let s = 1.0 / 2f64.sqrt();
        let expect = [s, s, s, -s];
        for (e, x) in expect.iter().zip(f2.data()) {
            assert!((x - Complex64::new(*e, 0.0)).norm() < 1e-15);
        }
    }

    #[test]
    fn dft_is_unitary() {
        for n in [3, 8, 17] {
            assert!(dft_operator(n).to_complex_matrix().orthonormality_defect() <= 1e-12);
        }
    }

    #[test]
    fn dct_rows() {
        assert_eq!(dct2_operator(1).real_matrix().unwrap()[(0, 0)], 1.0);
        for n in [2, 5, 16] {
            let d = dct2_operator(n);
            let m = d.real_matrix().unwrap();
            for j in 0..n {
                assert!((m[(0, j)] - 1.0 / (n as f64).sqrt()).abs() < 1e-15);
            }
        }
        let d16 = dct2_operator(16);
        assert!(d16.real_matrix().unwrap().orthonormality_defect() <= 1e-12);
        // spot check against the direct formula
        let m = d16.real_matrix().unwrap();
        let direct = (2.0f64 / 16.0).sqrt() * (PI * 3.0 * 11.0 / 32.0).cos();
        assert!((m[(3, 5)] - direct).abs() < 1e-15);
    }

    #[test]
    fn measurement_norm_examples() {
        let id = UnitaryOperator::identity(3);
        assert_eq!(measurement_norm(&id, &[3.0, -4.0, 0.0]).unwrap(), 4.0);
        for n in [4, 9] {
            let f = dft_operator(n);
            let mut e1 = vec![0.0; n];
            e1[0] = 1.0;
            let v = measurement_norm(&f, &e1).unwrap();
            assert!((v - 1.0 / (n as f64).sqrt()).abs() < 1e-14);
            let flat = vec![1.0 / (n as f64).sqrt(); n];
            assert!((measurement_norm(&f, &flat).unwrap() - 1.0).abs() < 1e-12);
        }
        assert!(matches!(
            measurement_norm(&id, &[1.0, 2.0]),
            Err(GcsError::DimensionMismatch(_))
        ));
    }

    #[test]
    fn norm_sandwich_and_parseval() {
        let n = 12;
        let mut rng = rng_from_seed(11);
        for u in all_kinds(n) {
            for _ in 0..50 {
                let x = unit_sphere(&mut rng, n);
                let v = measurement_norm(&u, &x).unwrap();
                assert!(v >= 1.0 / (n as f64).sqrt() - 1e-12 && v <= 1.0 + 1e-12);
                let y = gaussian_vec(&mut rng, n);
                let uy = u.apply(&y).unwrap();
                assert!((norm2(&uy) - norm2(&y)).abs() <= 1e-10 * norm2(&y));
                let back = u.apply_adjoint(&uy).unwrap();
                for (a, b) in back.iter().zip(&y) {
                    assert!((a - Complex64::new(*b, 0.0)).norm() < 1e-10);
                }
            }
        }
    }

    #[test]
    fn explicit_rejects_non_unitary() {
        let m = RealMatrix::from_rows(&[vec![1.0, 0.0], vec![0.0, 2.0]]).unwrap();
        assert!(matches!(
            UnitaryOperator::explicit_real(m),
            Err(GcsError::NotOrthonormal { .. })
        ));
        assert!(UnitaryOperator::explicit_real(RealMatrix::zeros(2, 3)).is_err());
    }

    #[test]
    fn parse_unitary_file() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("u.json");
        let f = dft_operator(4).to_complex_matrix();
        std::fs::write(&path, serde_json::to_string(&f).unwrap()).unwrap();
        let op = parse_unitary(&format!("file:{}", path.display()), 4).unwrap();
        assert_eq!(op.kind(), OperatorKind::Explicit);
        assert!(parse_unitary(&format!("file:{}", path.display()), 5).is_err());
        assert_eq!(parse_unitary("dct", 6).unwrap().kind(), OperatorKind::Dct2);
        assert!(parse_unitary("wavelet", 6).is_err());
    }
}
