//! Dense complex double-precision linear algebra.
//!
//! Everything here is small-matrix, desk-scale code: Jacobi sweeps for the
//! SVD and the Hermitian eigenproblem, Gram-Schmidt for QR. Accuracy matters
//! more than speed, since the attack analysis compares quantities at the
//! 1e-9 level.

use std::fmt;
use std::ops::{Add, Index, IndexMut, Mul, Sub};

use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::ser::{Serialize, SerializeStruct, Serializer};
use thiserror::Error;

/// Largest row or column count a matrix produced by [`kron`] may have.
pub const DEFAULT_MAX_DIM: usize = 4096;

/// Relative eigenvalue size treated as zero by [`psd_sqrt`], per matrix dimension.
pub const EIG_NOISE: f64 = 8.0 * f64::EPSILON;

/// Eigenvalues of a PSD input down to this value are treated as rounding noise.
pub const PSD_CLIP: f64 = -1e-12;

/// Relative tolerance for Hermiticity and unitarity preconditions.
pub const STRUCTURE_TOL: f64 = 1e-9;

const MAX_SWEEPS: usize = 80;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum LinalgError {
    #[error("dimension overflow: {rows}x{cols} exceeds the cap of {cap} per side")]
    DimensionOverflow { rows: usize, cols: usize, cap: usize },
    #[error("shape mismatch: expected {expected}, got {got}")]
    ShapeMismatch { expected: String, got: String },
    #[error("matrix has a non-finite entry at ({row}, {col})")]
    NonFinite { row: usize, col: usize },
    #[error("matrix dimensions must be positive")]
    EmptyMatrix,
    #[error("{routine} did not converge within {sweeps} sweeps")]
    ConvergenceFailure { routine: &'static str, sweeps: usize },
    #[error("matrix is not Hermitian (deviation {deviation:.3e})")]
    NotHermitian { deviation: f64 },
    #[error("matrix is not positive semidefinite (eigenvalue {eigenvalue:.3e})")]
    NotPsd { eigenvalue: f64 },
}

/// Dense row-major complex matrix with finite entries.
#[derive(Clone, PartialEq)]
pub struct ComplexMatrix {
    rows: usize,
    cols: usize,
    data: Vec<Complex64>,
}

impl ComplexMatrix {
    pub fn new(rows: usize, cols: usize, data: Vec<Complex64>) -> Result<Self, LinalgError> {
        if rows == 0 || cols == 0 {
            return Err(LinalgError::EmptyMatrix);
        }
        if data.len() != rows * cols {
            return Err(LinalgError::ShapeMismatch {
                expected: format!("{} entries", rows * cols),
                got: format!("{} entries", data.len()),
            });
        }
        if let Some(pos) = data.iter().position(|z| !(z.re.is_finite() && z.im.is_finite())) {
            return Err(LinalgError::NonFinite {
                row: pos / cols,
                col: pos % cols,
            });
        }
        Ok(Self { rows, cols, data })
    }

    /// Builds a matrix from real entries given row by row.
    pub fn from_real_rows(rows: &[&[f64]]) -> Result<Self, LinalgError> {
        let r = rows.len();
        let c = rows.first().map_or(0, |row| row.len());
        if rows.iter().any(|row| row.len() != c) {
            return Err(LinalgError::ShapeMismatch {
                expected: format!("{c} columns in every row"),
                got: "ragged rows".into(),
            });
        }
        let data = rows
            .iter()
            .flat_map(|row| row.iter().map(|&x| Complex64::new(x, 0.0)))
            .collect();
        Self::new(r, c, data)
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> Complex64) -> Self {
        assert!(rows > 0 && cols > 0, "matrix dimensions must be positive");
        let mut data = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                data.push(f(i, j));
            }
        }
        Self { rows, cols, data }
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self::from_fn(rows, cols, |_, _| Complex64::new(0.0, 0.0))
    }

    pub fn identity(n: usize) -> Self {
        Self::from_fn(n, n, |i, j| if i == j { Complex64::new(1.0, 0.0) } else { Complex64::new(0.0, 0.0) })
    }

    pub fn from_diag(values: &[Complex64]) -> Self {
        let n = values.len();
        Self::from_fn(n, n, |i, j| if i == j { values[i] } else { Complex64::new(0.0, 0.0) })
    }

    pub fn from_real_diag(values: &[f64]) -> Self {
        let n = values.len();
        Self::from_fn(n, n, |i, j| Complex64::new(if i == j { values[i] } else { 0.0 }, 0.0))
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    /// Row-major entries.
    pub fn as_slice(&self) -> &[Complex64] {
        &self.data
    }

    pub fn into_vec(self) -> Vec<Complex64> {
        self.data
    }

    pub fn column(&self, j: usize) -> Vec<Complex64> {
        (0..self.rows).map(|i| self[(i, j)]).collect()
    }

    pub fn adjoint(&self) -> Self {
        Self::from_fn(self.cols, self.rows, |i, j| self[(j, i)].conj())
    }

    pub fn transpose(&self) -> Self {
        Self::from_fn(self.cols, self.rows, |i, j| self[(j, i)])
    }

    pub fn conj(&self) -> Self {
        Self {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|z| z.conj()).collect(),
        }
    }

    pub fn scale(&self, s: Complex64) -> Self {
        Self {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|z| z * s).collect(),
        }
    }

    pub fn trace(&self) -> Complex64 {
        (0..self.rows.min(self.cols)).map(|i| self[(i, i)]).sum()
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.data.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
    }

    /// Largest entrywise modulus of `self - other`; shapes must agree.
    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        assert_eq!(self.shape(), other.shape(), "shape mismatch in max_abs_diff");
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max)
    }

    pub fn matmul(&self, rhs: &Self) -> Result<Self, LinalgError> {
        if self.cols != rhs.rows {
            return Err(LinalgError::ShapeMismatch {
                expected: format!("{} rows on the right", self.cols),
                got: format!("{}x{}", rhs.rows, rhs.cols),
            });
        }
        let mut out = Self::zeros(self.rows, rhs.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self[(i, k)];
                if a == Complex64::new(0.0, 0.0) {
                    continue;
                }
                let row = &rhs.data[k * rhs.cols..(k + 1) * rhs.cols];
                let dst = &mut out.data[i * rhs.cols..(i + 1) * rhs.cols];
                for (d, b) in dst.iter_mut().zip(row) {
                    *d += a * b;
                }
            }
        }
        Ok(out)
    }

    /// Matrix-vector product.
    pub fn apply(&self, v: &[Complex64]) -> Vec<Complex64> {
        assert_eq!(v.len(), self.cols, "vector length mismatch");
        (0..self.rows)
            .map(|i| self.data[i * self.cols..(i + 1) * self.cols].iter().zip(v).map(|(a, b)| a * b).sum())
            .collect()
    }

    /// `‖self − self†‖_F`, or `None` for non-square input.
    pub fn hermitian_deviation(&self) -> Option<f64> {
        if !self.is_square() {
            return None;
        }
        let mut acc = 0.0;
        for i in 0..self.rows {
            for j in 0..self.cols {
                acc += (self[(i, j)] - self[(j, i)].conj()).norm_sqr();
            }
        }
        Some(acc.sqrt())
    }

    pub fn is_hermitian(&self, tol: f64) -> bool {
        self.hermitian_deviation()
            .is_some_and(|d| d <= tol * self.frobenius_norm().max(1.0))
    }

    /// `‖U†U − I‖_F`, or `None` for non-square input.
    pub fn unitarity_deviation(&self) -> Option<f64> {
        if !self.is_square() {
            return None;
        }
        let gram = self.adjoint().matmul(self).ok()?;
        Some((&gram - &Self::identity(self.rows)).frobenius_norm())
    }

    pub fn is_unitary(&self, tol: f64) -> bool {
        self.unitarity_deviation().is_some_and(|d| d <= tol)
    }
}

impl Index<(usize, usize)> for ComplexMatrix {
    type Output = Complex64;

    fn index(&self, (i, j): (usize, usize)) -> &Complex64 {
        assert!(i < self.rows && j < self.cols, "index out of bounds");
        &self.data[i * self.cols + j]
    }
}

impl IndexMut<(usize, usize)> for ComplexMatrix {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut Complex64 {
        assert!(i < self.rows && j < self.cols, "index out of bounds");
        &mut self.data[i * self.cols + j]
    }
}

impl fmt::Debug for ComplexMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "ComplexMatrix {}x{} [", self.rows, self.cols)?;
        for i in 0..self.rows {
            write!(f, "  ")?;
            for j in 0..self.cols {
                let z = self[(i, j)];
                write!(f, "{:+.6}{:+.6}i ", z.re, z.im)?;
            }
            writeln!(f)?;
        }
        write!(f, "]")
    }
}

/// Serialized as `{"rows", "cols", "entries"}` with row-major `[re, im]` pairs.
impl Serialize for ComplexMatrix {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        let entries: Vec<[f64; 2]> = self.data.iter().map(|z| [z.re, z.im]).collect();
        let mut st = serializer.serialize_struct("ComplexMatrix", 3)?;
        st.serialize_field("rows", &self.rows)?;
        st.serialize_field("cols", &self.cols)?;
        st.serialize_field("entries", &entries)?;
        st.end()
    }
}

impl Add for &ComplexMatrix {
    type Output = ComplexMatrix;

    fn add(self, rhs: &ComplexMatrix) -> ComplexMatrix {
        assert_eq!(self.shape(), rhs.shape(), "shape mismatch in add");
        ComplexMatrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().zip(&rhs.data).map(|(a, b)| a + b).collect(),
        }
    }
}

impl Sub for &ComplexMatrix {
    type Output = ComplexMatrix;

    fn sub(self, rhs: &ComplexMatrix) -> ComplexMatrix {
        assert_eq!(self.shape(), rhs.shape(), "shape mismatch in sub");
        ComplexMatrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().zip(&rhs.data).map(|(a, b)| a - b).collect(),
        }
    }
}

impl Mul for &ComplexMatrix {
    type Output = ComplexMatrix;

    /// Panics on inner-dimension mismatch; use [`ComplexMatrix::matmul`] for a checked product.
    fn mul(self, rhs: &ComplexMatrix) -> ComplexMatrix {
        self.matmul(rhs).expect("inner dimension mismatch")
    }
}

/// Thin singular value decomposition `A = left · diag(σ) · right_adjoint`.
#[derive(Debug, Clone)]
pub struct SvdResult {
    /// `m × k` with orthonormal columns, `k = min(m, n)`.
    pub left: ComplexMatrix,
    /// Non-increasing, non-negative.
    pub singular_values: Vec<f64>,
    /// `k × n` with orthonormal rows.
    pub right_adjoint: ComplexMatrix,
}

impl SvdResult {
    pub fn reconstruct(&self) -> ComplexMatrix {
        let sigma: Vec<Complex64> = self.singular_values.iter().map(|&s| Complex64::new(s, 0.0)).collect();
        let scaled = &self.left * &ComplexMatrix::from_diag(&sigma);
        &scaled * &self.right_adjoint
    }

    /// Number of singular values above `tol · max(1, σ₁)`.
    pub fn rank(&self, tol: f64) -> usize {
        let cutoff = tol * self.singular_values.first().copied().unwrap_or(0.0).max(1.0);
        self.singular_values.iter().filter(|&&s| s > cutoff).count()
    }
}

/// Kronecker product with the default dimension cap.
pub fn kron(a: &ComplexMatrix, b: &ComplexMatrix) -> Result<ComplexMatrix, LinalgError> {
    kron_with_cap(a, b, DEFAULT_MAX_DIM)
}

pub fn kron_with_cap(a: &ComplexMatrix, b: &ComplexMatrix, cap: usize) -> Result<ComplexMatrix, LinalgError> {
    let rows = a.rows.checked_mul(b.rows);
    let cols = a.cols.checked_mul(b.cols);
    match (rows, cols) {
        (Some(r), Some(c)) if r <= cap && c <= cap => Ok(ComplexMatrix::from_fn(r, c, |i, j| {
            a[(i / b.rows, j / b.cols)] * b[(i % b.rows, j % b.cols)]
        })),
        _ => Err(LinalgError::DimensionOverflow {
            rows: rows.unwrap_or(usize::MAX),
            cols: cols.unwrap_or(usize::MAX),
            cap,
        }),
    }
}

fn dot(a: &[Complex64], b: &[Complex64]) -> Complex64 {
    a.iter().zip(b).map(|(x, y)| x.conj() * y).sum()
}

fn norm(a: &[Complex64]) -> f64 {
    a.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

/// Extends the orthonormal columns in `basis` (each of length `dim`) to
/// `target` columns by orthogonalizing standard basis vectors in index order.
pub(crate) fn complete_orthonormal(basis: &mut Vec<Vec<Complex64>>, dim: usize, target: usize) {
    let mut e = 0;
    while basis.len() < target && e < dim {
        let mut v = vec![Complex64::new(0.0, 0.0); dim];
        v[e] = Complex64::new(1.0, 0.0);
        e += 1;
        // two passes of classical Gram-Schmidt
        for _ in 0..2 {
            for q in basis.iter() {
                let c = dot(q, &v);
                for (vi, qi) in v.iter_mut().zip(q) {
                    *vi -= c * qi;
                }
            }
        }
        let n = norm(&v);
        if n > 1e-6 {
            v.iter_mut().for_each(|z| *z /= n);
            basis.push(v);
        }
    }
}

fn columns_to_matrix(cols: &[Vec<Complex64>], rows: usize) -> ComplexMatrix {
    ComplexMatrix::from_fn(rows, cols.len(), |i, j| cols[j][i])
}

/// Singular value decomposition by one-sided (Hestenes) Jacobi rotations.
pub fn svd(a: &ComplexMatrix) -> Result<SvdResult, LinalgError> {
    if a.rows < a.cols {
        let t = svd_tall(&a.adjoint())?;
        return Ok(SvdResult {
            left: t.right_adjoint.adjoint(),
            singular_values: t.singular_values,
            right_adjoint: t.left.adjoint(),
        });
    }
    svd_tall(a)
}

fn svd_tall(a: &ComplexMatrix) -> Result<SvdResult, LinalgError> {
    let (m, n) = a.shape();
    // work column-wise
    let mut work: Vec<Vec<Complex64>> = (0..n).map(|j| a.column(j)).collect();
    let mut v: Vec<Vec<Complex64>> = (0..n)
        .map(|j| {
            let mut col = vec![Complex64::new(0.0, 0.0); n];
            col[j] = Complex64::new(1.0, 0.0);
            col
        })
        .collect();
    let tol = f64::EPSILON * (m as f64);
    // columns below this squared norm are numerically zero; rotating them only churns noise
    let fro2: f64 = work.iter().flatten().map(|z| z.norm_sqr()).sum();
    let null2 = (f64::EPSILON * f64::EPSILON * fro2).max(f64::MIN_POSITIVE);

    let mut converged = n < 2;
    for _ in 0..MAX_SWEEPS {
        if converged {
            break;
        }
        let mut rotated = false;
        for p in 0..n - 1 {
            for q in p + 1..n {
                let alpha = work[p].iter().map(|z| z.norm_sqr()).sum::<f64>();
                let beta = work[q].iter().map(|z| z.norm_sqr()).sum::<f64>();
                let gamma = dot(&work[p], &work[q]);
                let g = gamma.norm();
                if g <= tol * (alpha * beta).sqrt() || alpha <= null2 || beta <= null2 {
                    continue;
                }
                rotated = true;
                let phase = gamma / g;
                let zeta = (beta - alpha) / (2.0 * g);
                let t = zeta.signum() / (zeta.abs() + (1.0 + zeta * zeta).sqrt());
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = c * t;
                rotate_pair(&mut work, p, q, c, s, phase);
                rotate_pair(&mut v, p, q, c, s, phase);
            }
        }
        converged = !rotated;
    }
    if !converged {
        return Err(LinalgError::ConvergenceFailure {
            routine: "svd",
            sweeps: MAX_SWEEPS,
        });
    }

    let mut order: Vec<(usize, f64)> = work.iter().map(|c| norm(c)).enumerate().collect();
    // stable: ties keep index order
    order.sort_by(|x, y| y.1.partial_cmp(&x.1).expect("finite norms"));

    let sigma_max = order.first().map_or(0.0, |o| o.1);
    let null_cutoff = sigma_max.max(f64::MIN_POSITIVE) * f64::EPSILON * (m.max(n) as f64);
    let mut left_cols: Vec<Vec<Complex64>> = Vec::with_capacity(n);
    let mut singular_values = Vec::with_capacity(n);
    let mut right_cols = Vec::with_capacity(n);
    for &(j, s) in &order {
        if s > null_cutoff {
            left_cols.push(work[j].iter().map(|z| z / s).collect());
            singular_values.push(s);
        } else {
            singular_values.push(0.0);
        }
        right_cols.push(v[j].clone());
    }
    complete_orthonormal(&mut left_cols, m, n);
    debug_assert_eq!(left_cols.len(), n);

    Ok(SvdResult {
        left: columns_to_matrix(&left_cols, m),
        singular_values,
        right_adjoint: columns_to_matrix(&right_cols, n).adjoint(),
    })
}

/// Applies the 2×2 rotation `[[c, s], [−s·e^{−iφ}, c·e^{−iφ}]]` to columns `p`, `q`.
fn rotate_pair(cols: &mut [Vec<Complex64>], p: usize, q: usize, c: f64, s: f64, phase: Complex64) {
    let (lo, hi) = cols.split_at_mut(q);
    let cp = &mut lo[p];
    let cq = &mut hi[0];
    let pc = phase.conj();
    for (x, y) in cp.iter_mut().zip(cq.iter_mut()) {
        let yq = *y * pc;
        let nx = *x * c - yq * s;
        let ny = *x * s + yq * c;
        *x = nx;
        *y = ny;
    }
}

/// Eigen-decomposition of a Hermitian matrix by cyclic complex Jacobi.
///
/// Eigenvalues come back ascending (ties in stable index order) with the
/// matching orthonormal eigenvectors as columns.
pub fn herm_eig(h: &ComplexMatrix) -> Result<(Vec<f64>, ComplexMatrix), LinalgError> {
    let deviation = h.hermitian_deviation().ok_or_else(|| LinalgError::ShapeMismatch {
        expected: "square matrix".into(),
        got: format!("{}x{}", h.rows, h.cols),
    })?;
    if deviation > STRUCTURE_TOL * h.frobenius_norm().max(1.0) {
        return Err(LinalgError::NotHermitian { deviation });
    }
    let n = h.rows;
    // symmetrize so the iteration sees an exactly Hermitian matrix
    let mut a = ComplexMatrix::from_fn(n, n, |i, j| (h[(i, j)] + h[(j, i)].conj()) * 0.5);
    let mut v = ComplexMatrix::identity(n);

    let scale = a.frobenius_norm().max(f64::MIN_POSITIVE);
    let mut converged = n < 2;
    for _ in 0..MAX_SWEEPS {
        if converged {
            break;
        }
        let off: f64 = (0..n)
            .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
            .map(|(i, j)| a[(i, j)].norm_sqr())
            .sum::<f64>()
            .sqrt();
        if off <= f64::EPSILON * scale * 0.1 {
            converged = true;
            break;
        }
        for p in 0..n - 1 {
            for q in p + 1..n {
                let hpq = a[(p, q)];
                let g = hpq.norm();
                if g <= f64::EPSILON * 1e-3 * scale {
                    continue;
                }
                let phase = hpq / g;
                let app = a[(p, p)].re;
                let aqq = a[(q, q)].re;
                let theta = (aqq - app) / (2.0 * g);
                let t = if theta.is_infinite() {
                    0.0
                } else {
                    theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt())
                };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                let pc = phase.conj();
                // A ← A·G, columns p and q
                for i in 0..n {
                    let xp = a[(i, p)];
                    let xq = a[(i, q)] * pc;
                    a[(i, p)] = xp * c - xq * s;
                    a[(i, q)] = xp * s + xq * c;
                }
                // A ← G†·A, rows p and q
                for j in 0..n {
                    let xp = a[(p, j)];
                    let xq = a[(q, j)] * phase;
                    a[(p, j)] = xp * c - xq * s;
                    a[(q, j)] = xp * s + xq * c;
                }
                a[(p, q)] = Complex64::new(0.0, 0.0);
                a[(q, p)] = Complex64::new(0.0, 0.0);
                a[(p, p)].im = 0.0;
                a[(q, q)].im = 0.0;
                for i in 0..n {
                    let xp = v[(i, p)];
                    let xq = v[(i, q)] * pc;
                    v[(i, p)] = xp * c - xq * s;
                    v[(i, q)] = xp * s + xq * c;
                }
            }
        }
    }
    if !converged {
        return Err(LinalgError::ConvergenceFailure {
            routine: "herm_eig",
            sweeps: MAX_SWEEPS,
        });
    }

    let mut order: Vec<(usize, f64)> = (0..n).map(|i| (i, a[(i, i)].re)).collect();
    order.sort_by(|x, y| x.1.partial_cmp(&y.1).expect("finite eigenvalues"));
    let values = order.iter().map(|o| o.1).collect();
    let vectors = ComplexMatrix::from_fn(n, n, |i, j| v[(i, order[j].0)]);
    Ok((values, vectors))
}

/// Principal square root of a positive semidefinite matrix.
pub fn psd_sqrt(h: &ComplexMatrix) -> Result<ComplexMatrix, LinalgError> {
    let (values, vectors) = herm_eig(h)?;
    if let Some(&bad) = values.iter().find(|&&l| l < PSD_CLIP) {
        return Err(LinalgError::NotPsd { eigenvalue: bad });
    }
    // eigenvalues at roundoff level are zero; their square roots would not be
    let top = values.iter().fold(0.0f64, |m, l| m.max(l.abs()));
    let floor = EIG_NOISE * values.len() as f64 * top;
    let roots: Vec<Complex64> = values
        .iter()
        .map(|&l| Complex64::new(if l <= floor { 0.0 } else { l.sqrt() }, 0.0))
        .collect();
    let scaled = &vectors * &ComplexMatrix::from_diag(&roots);
    Ok(&scaled * &vectors.adjoint())
}

/// Sum of singular values.
pub fn trace_norm(a: &ComplexMatrix) -> Result<f64, LinalgError> {
    Ok(svd(a)?.singular_values.iter().sum())
}

/// Thin QR factorization by twice-iterated Gram-Schmidt.
///
/// `R` has a real non-negative diagonal. Columns of `a` that are dependent
/// on earlier ones get a completed orthonormal `Q` column and a zero pivot.
pub fn qr(a: &ComplexMatrix) -> Result<(ComplexMatrix, ComplexMatrix), LinalgError> {
    let (m, n) = a.shape();
    if m < n {
        return Err(LinalgError::ShapeMismatch {
            expected: "rows >= cols".into(),
            got: format!("{m}x{n}"),
        });
    }
    let mut q_cols: Vec<Vec<Complex64>> = Vec::with_capacity(n);
    let mut r = ComplexMatrix::zeros(n, n);
    for j in 0..n {
        let mut v = a.column(j);
        for _ in 0..2 {
            for (k, q) in q_cols.iter().enumerate() {
                let c = dot(q, &v);
                r[(k, j)] += c;
                for (vi, qi) in v.iter_mut().zip(q) {
                    *vi -= c * qi;
                }
            }
        }
        let nv = norm(&v);
        let scale = norm(&a.column(j)).max(f64::MIN_POSITIVE);
        if nv > 1e-13 * scale {
            r[(j, j)] = Complex64::new(nv, 0.0);
            q_cols.push(v.into_iter().map(|z| z / nv).collect());
        } else {
            let mut tmp = q_cols.clone();
            complete_orthonormal(&mut tmp, m, j + 1);
            q_cols.push(tmp.pop().expect("completion adds a column"));
        }
    }
    Ok((columns_to_matrix(&q_cols, m), r))
}

/// Haar-distributed random unitary from the QR factorization of a complex
/// Ginibre matrix; `R`'s diagonal is real positive so no phase fix is needed.
pub fn haar_unitary<R: Rng + ?Sized>(n: usize, rng: &mut R) -> ComplexMatrix {
    let g = ComplexMatrix::from_fn(n, n, |_, _| {
        Complex64::new(rng.sample::<f64, _>(StandardNormal), rng.sample::<f64, _>(StandardNormal))
    });
    qr(&g).expect("square input").0
}
