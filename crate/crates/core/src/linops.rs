//! Dense real and complex matrices, thin Householder QR and the norms used
//! throughout the crate.
//!
//! Complex scalars are `num_complex::Complex64`, i.e. explicit real/imaginary
//! pairs. Moduli go through `hypot`.

use std::fmt::Debug;
use std::ops::{Add, AddAssign, Index, IndexMut, Mul, Neg, Sub};

use num_complex::Complex64;
use serde::de::Error as _;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{dim_mismatch, GcsError, Result};

/// Tolerance on `||Q*Q - I||_F` for inputs that must have orthonormal columns.
pub const ORTHONORMAL_TOL: f64 = 1e-8;

/// Relative tolerance on `|R_ii|` below which a QR input counts as rank deficient.
pub const RANK_TOL: f64 = 1e-12;

/// Field of matrix entries: `f64` or `Complex64`.
pub trait Scalar:
    Copy
    + Debug
    + Default
    + PartialEq
    + Send
    + Sync
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
    + Neg<Output = Self>
    + AddAssign
    + 'static
{
    const IS_COMPLEX: bool;

    fn zero() -> Self;
    fn one() -> Self;
    fn from_real(x: f64) -> Self;
    fn re(self) -> f64;
    fn conj(self) -> Self;
    fn modulus(self) -> f64;
    fn scale(self, s: f64) -> Self;
    fn is_finite(self) -> bool;
    fn to_c64(self) -> Complex64;

    /// Appends the serialized components (1 for real, 2 for complex).
    fn push_components(self, out: &mut Vec<f64>);
    fn from_components(c: &[f64]) -> Self;
}

impl Scalar for f64 {
    const IS_COMPLEX: bool = false;

    fn zero() -> Self {
        0.0
    }
    fn one() -> Self {
        1.0
    }
    fn from_real(x: f64) -> Self {
        x
    }
    fn re(self) -> f64 {
        self
    }
    fn conj(self) -> Self {
        self
    }
    fn modulus(self) -> f64 {
        self.abs()
    }
    fn scale(self, s: f64) -> Self {
        self * s
    }
    fn is_finite(self) -> bool {
        f64::is_finite(self)
    }
    fn to_c64(self) -> Complex64 {
        Complex64::new(self, 0.0)
    }
    fn push_components(self, out: &mut Vec<f64>) {
        out.push(self);
    }
    fn from_components(c: &[f64]) -> Self {
        c[0]
    }
}

impl Scalar for Complex64 {
    const IS_COMPLEX: bool = true;

    fn zero() -> Self {
        Complex64::new(0.0, 0.0)
    }
    fn one() -> Self {
        Complex64::new(1.0, 0.0)
    }
    fn from_real(x: f64) -> Self {
        Complex64::new(x, 0.0)
    }
    fn re(self) -> f64 {
        self.re
    }
    fn conj(self) -> Self {
        Complex64::conj(&self)
    }
    fn modulus(self) -> f64 {
        self.re.hypot(self.im)
    }
    fn scale(self, s: f64) -> Self {
        Complex64::new(self.re * s, self.im * s)
    }
    fn is_finite(self) -> bool {
        self.re.is_finite() && self.im.is_finite()
    }
    fn to_c64(self) -> Complex64 {
        self
    }
    fn push_components(self, out: &mut Vec<f64>) {
        out.push(self.re);
        out.push(self.im);
    }
    fn from_components(c: &[f64]) -> Self {
        Complex64::new(c[0], c[1])
    }
}

/// Euclidean norm with scaling against overflow/underflow.
pub fn norm2<T: Scalar>(v: &[T]) -> f64 {
    let scale = v.iter().fold(0.0_f64, |acc, x| acc.max(x.modulus()));
    if scale == 0.0 || !scale.is_finite() {
        return scale;
    }
    let sum: f64 = v
        .iter()
        .map(|x| {
            let r = x.modulus() / scale;
            r * r
        })
        .sum();
    scale * sum.sqrt()
}

/// `sum_i conj(a_i) * b_i`.
pub fn dot<T: Scalar>(a: &[T], b: &[T]) -> T {
    a.iter()
        .zip(b)
        .fold(T::zero(), |acc, (&x, &y)| acc + x.conj() * y)
}

/// Row-major dense matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct DenseMatrix<T: Scalar = f64> {
    rows: usize,
    cols: usize,
    data: Vec<T>,
}

pub type RealMatrix = DenseMatrix<f64>;
pub type ComplexMatrix = DenseMatrix<Complex64>;

impl<T: Scalar> DenseMatrix<T> {
    /// Builds a matrix from row-major data, rejecting wrong lengths and
    /// non-finite entries.
    pub fn from_vec(rows: usize, cols: usize, data: Vec<T>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(dim_mismatch("matrix data length", rows * cols, data.len()));
        }
        if let Some(pos) = data.iter().position(|x| !x.is_finite()) {
            return Err(GcsError::NonFinite(pos));
        }
        Ok(Self { rows, cols, data })
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![T::zero(); rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = T::one();
        }
        m
    }

    /// Builds a matrix from `f(row, col)`. Panics if `f` produces a non-finite value.
    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> T) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                let v = f(i, j);
                assert!(v.is_finite(), "non-finite matrix entry at ({i}, {j})");
                data.push(v);
            }
        }
        Self { rows, cols, data }
    }

    /// Builds a matrix from equal-length rows.
    pub fn from_rows(rows: &[Vec<T>]) -> Result<Self> {
        let cols = rows.first().map_or(0, Vec::len);
        let mut data = Vec::with_capacity(rows.len() * cols);
        for r in rows {
            if r.len() != cols {
                return Err(dim_mismatch("row length", cols, r.len()));
            }
            data.extend_from_slice(r);
        }
        Self::from_vec(rows.len(), cols, data)
    }

    /// Builds a matrix whose columns are the given equal-length vectors.
    pub fn from_columns(columns: &[Vec<T>]) -> Result<Self> {
        let rows = columns.first().map_or(0, Vec::len);
        for c in columns {
            if c.len() != rows {
                return Err(dim_mismatch("column length", rows, c.len()));
            }
        }
        let m = Self::from_fn(rows, columns.len(), |i, j| columns[j][i]);
        Ok(m)
    }

    #[inline]
    pub fn rows(&self) -> usize {
        self.rows
    }

    #[inline]
    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    pub fn data(&self) -> &[T] {
        &self.data
    }

    /// Mutable access to the row-major storage. Callers must keep entries finite.
    pub fn data_mut(&mut self) -> &mut [T] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<T> {
        self.data
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[T] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    #[inline]
    pub fn row_mut(&mut self, i: usize) -> &mut [T] {
        &mut self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn column(&self, j: usize) -> Vec<T> {
        (0..self.rows).map(|i| self[(i, j)]).collect()
    }

    pub fn transpose(&self) -> Self {
        Self::from_fn(self.cols, self.rows, |i, j| self[(j, i)])
    }

    /// Conjugate transpose.
    pub fn adjoint(&self) -> Self {
        Self::from_fn(self.cols, self.rows, |i, j| self[(j, i)].conj())
    }

    pub fn scaled(&self, s: f64) -> Self {
        Self {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|x| x.scale(s)).collect(),
        }
    }

    pub fn matvec(&self, x: &[T]) -> Result<Vec<T>> {
        if x.len() != self.cols {
            return Err(dim_mismatch("matvec operand", self.cols, x.len()));
        }
        Ok((0..self.rows)
            .map(|i| {
                self.row(i)
                    .iter()
                    .zip(x)
                    .fold(T::zero(), |acc, (&a, &b)| acc + a * b)
            })
            .collect())
    }

    /// `self^* y`.
    pub fn adjoint_matvec(&self, y: &[T]) -> Result<Vec<T>> {
        if y.len() != self.rows {
            return Err(dim_mismatch("adjoint matvec operand", self.rows, y.len()));
        }
        let mut out = vec![T::zero(); self.cols];
        for (i, &yi) in y.iter().enumerate() {
            for (o, &a) in out.iter_mut().zip(self.row(i)) {
                *o += a.conj() * yi;
            }
        }
        Ok(out)
    }

    pub fn matmul(&self, rhs: &Self) -> Result<Self> {
        if self.cols != rhs.rows {
            return Err(dim_mismatch("matmul inner dimension", self.cols, rhs.rows));
        }
        let mut out = Self::zeros(self.rows, rhs.cols);
        for i in 0..self.rows {
            let orow = &mut out.data[i * rhs.cols..(i + 1) * rhs.cols];
            for (l, &a) in self.row(i).iter().enumerate() {
                if a == T::zero() {
                    continue;
                }
                for (o, &b) in orow.iter_mut().zip(rhs.row(l)) {
                    *o += a * b;
                }
            }
        }
        Ok(out)
    }

    /// Product with a real right-hand side.
    pub fn mul_real(&self, rhs: &RealMatrix) -> Result<Self> {
        if self.cols != rhs.rows {
            return Err(dim_mismatch("matmul inner dimension", self.cols, rhs.rows));
        }
        let mut out = Self::zeros(self.rows, rhs.cols);
        for i in 0..self.rows {
            let orow = &mut out.data[i * rhs.cols..(i + 1) * rhs.cols];
            for (l, &a) in self.row(i).iter().enumerate() {
                for (o, &b) in orow.iter_mut().zip(rhs.row(l)) {
                    *o += a.scale(b);
                }
            }
        }
        Ok(out)
    }

    pub fn sub(&self, rhs: &Self) -> Result<Self> {
        if self.shape() != rhs.shape() {
            return Err(GcsError::DimensionMismatch(format!(
                "matrix difference: {:?} vs {:?}",
                self.shape(),
                rhs.shape()
            )));
        }
        Ok(Self {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().zip(&rhs.data).map(|(&a, &b)| a - b).collect(),
        })
    }

    pub fn frobenius_norm(&self) -> f64 {
        norm2(&self.data)
    }

    /// Euclidean norm of every row.
    pub fn row_norms(&self) -> Vec<f64> {
        (0..self.rows).map(|i| norm2(self.row(i))).collect()
    }

    /// `||self^* self - I||_F`.
    pub fn orthonormality_defect(&self) -> f64 {
        let gram = self.adjoint().matmul(self).expect("shapes agree");
        gram.sub(&Self::identity(self.cols))
            .expect("shapes agree")
            .frobenius_norm()
    }
}

impl RealMatrix {
    pub fn to_complex(&self) -> ComplexMatrix {
        ComplexMatrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|&x| Complex64::new(x, 0.0)).collect(),
        }
    }

    /// The first `k` columns.
    pub fn leading_columns(&self, k: usize) -> RealMatrix {
        RealMatrix::from_fn(self.rows, k, |i, j| self[(i, j)])
    }
}

impl<T: Scalar> Index<(usize, usize)> for DenseMatrix<T> {
    type Output = T;

    #[inline]
    fn index(&self, (i, j): (usize, usize)) -> &T {
        debug_assert!(i < self.rows && j < self.cols);
        &self.data[i * self.cols + j]
    }
}

impl<T: Scalar> IndexMut<(usize, usize)> for DenseMatrix<T> {
    #[inline]
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut T {
        debug_assert!(i < self.rows && j < self.cols);
        &mut self.data[i * self.cols + j]
    }
}

/// On-disk form: `{rows, cols, complex, data}` with `data` row-major and
/// complex entries interleaved as `re, im`.
#[derive(Serialize, Deserialize)]
struct MatrixRepr {
    rows: usize,
    cols: usize,
    #[serde(default)]
    complex: bool,
    data: Vec<f64>,
}

impl<T: Scalar> Serialize for DenseMatrix<T> {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        let mut data = Vec::with_capacity(self.data.len() * if T::IS_COMPLEX { 2 } else { 1 });
        for &x in &self.data {
            x.push_components(&mut data);
        }
        MatrixRepr {
            rows: self.rows,
            cols: self.cols,
            complex: T::IS_COMPLEX,
            data,
        }
        .serialize(serializer)
    }
}

impl<'de, T: Scalar> Deserialize<'de> for DenseMatrix<T> {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let repr = MatrixRepr::deserialize(deserializer)?;
        if repr.complex && !T::IS_COMPLEX {
            return Err(D::Error::custom("expected a real matrix, found complex data"));
        }
        let width = if repr.complex { 2 } else { 1 };
        if repr.data.len() != repr.rows * repr.cols * width {
            return Err(D::Error::custom(format!(
                "matrix data length {} does not match {}x{}{}",
                repr.data.len(),
                repr.rows,
                repr.cols,
                if repr.complex { " complex" } else { "" }
            )));
        }
        let entries: Vec<T> = if repr.complex {
            repr.data.chunks_exact(2).map(T::from_components).collect()
        } else {
            repr.data.iter().map(|&x| T::from_real(x)).collect()
        };
        DenseMatrix::from_vec(repr.rows, repr.cols, entries).map_err(D::Error::custom)
    }
}

/// A real or complex matrix read from the JSON encoding.
#[derive(Clone, Debug, PartialEq)]
pub enum AnyMatrix {
    Real(RealMatrix),
    Complex(ComplexMatrix),
}

impl<'de> Deserialize<'de> for AnyMatrix {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let value = serde_json::Value::deserialize(deserializer)?;
        let complex = value
            .get("complex")
            .and_then(serde_json::Value::as_bool)
            .unwrap_or(false);
        if complex {
            ComplexMatrix::deserialize(value)
                .map(AnyMatrix::Complex)
                .map_err(D::Error::custom)
        } else {
            RealMatrix::deserialize(value)
                .map(AnyMatrix::Real)
                .map_err(D::Error::custom)
        }
    }
}

/// Thin QR factors: `q` is `n x k` with orthonormal columns and `r` is `k x k`
/// upper triangular with nonnegative diagonal.
#[derive(Clone, Debug)]
pub struct QrFactors {
    pub q: RealMatrix,
    pub r: RealMatrix,
}

/// Thin QR decomposition by Householder reflections.
///
/// The sign convention makes the diagonal of `R` nonnegative, so the factors are
/// unique for full-rank input. Fails with `RankDeficient` when some `|R_ii|`
/// falls below `RANK_TOL * ||W||_F`.
pub fn qr_thin(w: &RealMatrix) -> Result<QrFactors> {
    let (n, k) = w.shape();
    if k == 0 || n < k {
        return Err(GcsError::DimensionMismatch(format!(
            "thin QR needs rows >= cols >= 1, got {n}x{k}"
        )));
    }
    let tol = RANK_TOL * w.frobenius_norm();
    let mut r = w.clone();
    // Householder vectors, each of length n - j, normalized to unit length.
    let mut reflectors: Vec<Vec<f64>> = Vec::with_capacity(k);

    for j in 0..k {
        let mut v: Vec<f64> = (j..n).map(|i| r[(i, j)]).collect();
        let alpha = norm2(&v);
        if alpha == 0.0 {
            reflectors.push(Vec::new());
            continue;
        }
        let beta = if v[0] >= 0.0 { -alpha } else { alpha };
        v[0] -= beta;
        let vnorm = norm2(&v);
        for x in &mut v {
            *x /= vnorm;
        }
        for c in j..k {
            let proj: f64 = (j..n).map(|i| v[i - j] * r[(i, c)]).sum();
            for i in j..n {
                r[(i, c)] -= 2.0 * proj * v[i - j];
            }
        }
        reflectors.push(v);
    }

    // Q = H_0 H_1 ... H_{k-1} applied to the first k columns of the identity.
    let mut q = RealMatrix::from_fn(n, k, |i, j| if i == j { 1.0 } else { 0.0 });
    for (j, v) in reflectors.iter().enumerate().rev() {
        if v.is_empty() {
            continue;
        }
        for c in 0..k {
            let proj: f64 = (j..n).map(|i| v[i - j] * q[(i, c)]).sum();
            if proj != 0.0 {
                for i in j..n {
                    q[(i, c)] -= 2.0 * proj * v[i - j];
                }
            }
        }
    }

    let mut r_thin = RealMatrix::from_fn(k, k, |i, j| if j >= i { r[(i, j)] } else { 0.0 });
    for i in 0..k {
        if r_thin[(i, i)] < 0.0 {
            for c in 0..k {
                r_thin[(i, c)] = -r_thin[(i, c)];
            }
            for row in 0..n {
                q[(row, i)] = -q[(row, i)];
            }
        }
    }
    for i in 0..k {
        let d = r_thin[(i, i)];
        if d < tol || d == 0.0 {
            return Err(GcsError::RankDeficient {
                index: i,
                value: d,
                tolerance: tol,
            });
        }
    }
    Ok(QrFactors { q, r: r_thin })
}

/// `||M||_{2->inf}`: the largest Euclidean row norm.
pub fn two_to_inf_norm<T: Scalar>(m: &DenseMatrix<T>) -> f64 {
    (0..m.rows())
        .map(|i| norm2(m.row(i)))
        .fold(0.0, f64::max)
}

/// Checks that an `n x k` matrix with orthonormal columns has a row of norm at
/// least `sqrt(k / n)` (up to `1e-12`). This always holds; a `false` return
/// indicates a numerical problem upstream.
pub fn max_row_norm_bound_check<T: Scalar>(q: &DenseMatrix<T>) -> Result<bool> {
    let defect = q.orthonormality_defect();
    if defect > ORTHONORMAL_TOL {
        return Err(GcsError::NotOrthonormal { defect });
    }
    let (n, k) = q.shape();
    let floor = (k as f64 / n as f64).sqrt();
    Ok(two_to_inf_norm(q) >= floor - 1e-12)
}
