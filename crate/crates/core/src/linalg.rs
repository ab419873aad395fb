//! Dense complex linear algebra: Kronecker product, column-major vectorization,
//! compact SVD (one-sided Jacobi, with Householder QR preconditioning for tall
//! inputs), Moore–Penrose pseudoinverse and numerical rank.

use std::ops::{Add, Index, IndexMut, Mul, Neg, Sub};

use num_complex::Complex;
use num_traits::{One, Zero};

use crate::scalar::Real;

/// Singular values below `DEFAULT_RANK_TOL * sigma_max` are treated as zero.
pub const DEFAULT_RANK_TOL: f64 = 1e-12;

const MAX_SWEEPS: usize = 80;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum LinalgError {
    #[error("{op}: dimension mismatch ({lr}x{lc} vs {rr}x{rc})")]
    DimensionMismatch {
        op: &'static str,
        lr: usize,
        lc: usize,
        rr: usize,
        rc: usize,
    },
    #[error("matrix must have at least one row and one column, got {rows}x{cols}")]
    EmptyShape { rows: usize, cols: usize },
    #[error("expected {expected} entries, got {actual}")]
    LengthMismatch { expected: usize, actual: usize },
    #[error("matrix contains a non-finite entry at ({row}, {col})")]
    NonFinite { row: usize, col: usize },
    #[error("tolerance must be positive, got {0}")]
    InvalidTolerance(f64),
    #[error("Jacobi SVD did not converge after {sweeps} sweeps")]
    NonConvergence { sweeps: usize },
    #[error("matrix is not Hermitian positive definite (pivot {pivot})")]
    NotPositiveDefinite { pivot: usize },
}

/// Dense complex matrix stored row-major.
///
/// User-facing constructors reject empty shapes and non-finite entries.
/// Zero-width matrices only arise internally, e.g. as the factors of a
/// rank-zero compact SVD.
#[derive(Debug, Clone, PartialEq)]
pub struct Matrix<T: Real> {
    rows: usize,
    cols: usize,
    data: Vec<Complex<T>>,
}

impl<T: Real> Matrix<T> {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![Complex::zero(); rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = Complex::one();
        }
        m
    }

    /// Builds a matrix from row-major entries.
    pub fn from_vec(rows: usize, cols: usize, data: Vec<Complex<T>>) -> Result<Self, LinalgError> {
        if rows == 0 || cols == 0 {
            return Err(LinalgError::EmptyShape { rows, cols });
        }
        if data.len() != rows * cols {
            return Err(LinalgError::LengthMismatch {
                expected: rows * cols,
                actual: data.len(),
            });
        }
        if let Some(k) = data.iter().position(|z| !(z.re.is_finite() && z.im.is_finite())) {
            return Err(LinalgError::NonFinite {
                row: k / cols,
                col: k % cols,
            });
        }
        Ok(Self { rows, cols, data })
    }

    pub fn from_rows(rows: &[Vec<Complex<T>>]) -> Result<Self, LinalgError> {
        let r = rows.len();
        let c = rows.first().map_or(0, Vec::len);
        let mut data = Vec::with_capacity(r * c);
        for row in rows {
            if row.len() != c {
                return Err(LinalgError::LengthMismatch {
                    expected: c,
                    actual: row.len(),
                });
            }
            data.extend_from_slice(row);
        }
        Self::from_vec(r, c, data)
    }

    /// Builds a real-valued matrix from row-major entries.
    pub fn from_real(rows: usize, cols: usize, data: &[T]) -> Result<Self, LinalgError> {
        Self::from_vec(
            rows,
            cols,
            data.iter().map(|&x| Complex::new(x, T::zero())).collect(),
        )
    }

    pub fn column_vector(entries: Vec<Complex<T>>) -> Result<Self, LinalgError> {
        let n = entries.len();
        Self::from_vec(n, 1, entries)
    }

    pub fn from_diag(diag: &[Complex<T>]) -> Self {
        let n = diag.len();
        let mut m = Self::zeros(n, n);
        for (i, &d) in diag.iter().enumerate() {
            m[(i, i)] = d;
        }
        m
    }

    pub fn from_real_diag(diag: &[T]) -> Self {
        let n = diag.len();
        let mut m = Self::zeros(n, n);
        for (i, &d) in diag.iter().enumerate() {
            m[(i, i)] = Complex::new(d, T::zero());
        }
        m
    }

    /// Builds a matrix from column vectors of equal length.
    pub fn from_columns(rows: usize, columns: &[Vec<Complex<T>>]) -> Self {
        let cols = columns.len();
        let mut m = Self::zeros(rows, cols);
        for (j, col) in columns.iter().enumerate() {
            debug_assert_eq!(col.len(), rows);
            for (i, &z) in col.iter().enumerate() {
                m.data[i * cols + j] = z;
            }
        }
        m
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

    /// Row-major entries.
    pub fn as_slice(&self) -> &[Complex<T>] {
        &self.data
    }

    pub fn row(&self, i: usize) -> &[Complex<T>] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn column(&self, j: usize) -> Vec<Complex<T>> {
        (0..self.rows).map(|i| self.data[i * self.cols + j]).collect()
    }

    pub fn columns(&self) -> Vec<Vec<Complex<T>>> {
        (0..self.cols).map(|j| self.column(j)).collect()
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|z| z.re.is_finite() && z.im.is_finite())
    }

    pub fn transpose(&self) -> Self {
        let mut t = Self::zeros(self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                t.data[j * self.rows + i] = self.data[i * self.cols + j];
            }
        }
        t
    }

    pub fn conj(&self) -> Self {
        Self {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(Complex::conj).collect(),
        }
    }

    /// Conjugate transpose.
    pub fn adjoint(&self) -> Self {
        let mut t = Self::zeros(self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                t.data[j * self.rows + i] = self.data[i * self.cols + j].conj();
            }
        }
        t
    }

    pub fn scale(&self, c: Complex<T>) -> Self {
        Self {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|&z| z * c).collect(),
        }
    }

    pub fn scale_real(&self, c: T) -> Self {
        Self {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|&z| z * c).collect(),
        }
    }

    /// `self · diag(d)`.
    pub fn scale_columns(&self, d: &[Complex<T>]) -> Self {
        assert_eq!(d.len(), self.cols, "scale_columns: length mismatch");
        let mut out = self.clone();
        for row in out.data.chunks_mut(self.cols) {
            for (z, &s) in row.iter_mut().zip(d) {
                *z = *z * s;
            }
        }
        out
    }

    /// `diag(d) · self`.
    pub fn scale_rows(&self, d: &[Complex<T>]) -> Self {
        assert_eq!(d.len(), self.rows, "scale_rows: length mismatch");
        let mut out = self.clone();
        for (row, &s) in out.data.chunks_mut(self.cols).zip(d) {
            for z in row {
                *z = *z * s;
            }
        }
        out
    }

    pub fn frobenius_norm_sq(&self) -> T {
        self.data.iter().map(|z| z.norm_sqr()).sum()
    }

    pub fn frobenius_norm(&self) -> T {
        self.frobenius_norm_sq().sqrt()
    }

    pub fn max_abs(&self) -> T {
        self.data
            .iter()
            .map(|z| z.norm())
            .fold(T::zero(), |a, b| a.max(b))
    }

    /// Checked product, for call sites that surface dimension errors.
    pub fn try_mul(&self, rhs: &Self) -> Result<Self, LinalgError> {
        if self.cols != rhs.rows {
            return Err(self.mismatch("mul", rhs));
        }
        Ok(self.mul_unchecked(rhs))
    }

    pub fn try_add(&self, rhs: &Self) -> Result<Self, LinalgError> {
        if self.shape() != rhs.shape() {
            return Err(self.mismatch("add", rhs));
        }
        Ok(self.zip_with(rhs, |a, b| a + b))
    }

    pub fn try_sub(&self, rhs: &Self) -> Result<Self, LinalgError> {
        if self.shape() != rhs.shape() {
            return Err(self.mismatch("sub", rhs));
        }
        Ok(self.zip_with(rhs, |a, b| a - b))
    }

    fn mismatch(&self, op: &'static str, rhs: &Self) -> LinalgError {
        LinalgError::DimensionMismatch {
            op,
            lr: self.rows,
            lc: self.cols,
            rr: rhs.rows,
            rc: rhs.cols,
        }
    }

    fn zip_with(&self, rhs: &Self, f: impl Fn(Complex<T>, Complex<T>) -> Complex<T>) -> Self {
        Self {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().zip(&rhs.data).map(|(&a, &b)| f(a, b)).collect(),
        }
    }

    fn mul_unchecked(&self, rhs: &Self) -> Self {
        let (n, k, m) = (self.rows, self.cols, rhs.cols);
        let mut out = Self::zeros(n, m);
        for i in 0..n {
            let out_row = &mut out.data[i * m..(i + 1) * m];
            for p in 0..k {
                let a = self.data[i * k + p];
                if a.is_zero() {
                    continue;
                }
                let rhs_row = &rhs.data[p * m..(p + 1) * m];
                for (o, &b) in out_row.iter_mut().zip(rhs_row) {
                    *o = *o + a * b;
                }
            }
        }
        out
    }

    /// Stacks `blocks` vertically; all blocks must share a column count.
    pub fn vstack(blocks: &[Self]) -> Result<Self, LinalgError> {
        let first = blocks.first().ok_or(LinalgError::EmptyShape { rows: 0, cols: 0 })?;
        let cols = first.cols;
        let mut data = Vec::new();
        let mut rows = 0;
        for b in blocks {
            if b.cols != cols {
                return Err(first.mismatch("vstack", b));
            }
            rows += b.rows;
            data.extend_from_slice(&b.data);
        }
        Ok(Self { rows, cols, data })
    }

    /// The leading `rows x cols` block.
    pub fn leading(&self, rows: usize, cols: usize) -> Result<Self, LinalgError> {
        if rows == 0 || cols == 0 || rows > self.rows || cols > self.cols {
            return Err(LinalgError::DimensionMismatch {
                op: "leading block",
                lr: self.rows,
                lc: self.cols,
                rr: rows,
                rc: cols,
            });
        }
        let data = (0..rows)
            .flat_map(|i| self.row(i)[..cols].iter().copied())
            .collect();
        Ok(Self { rows, cols, data })
    }

    /// Inner product `<a, b> = a^H b` of two equal-length column vectors.
    pub fn dot(a: &[Complex<T>], b: &[Complex<T>]) -> Complex<T> {
        a.iter()
            .zip(b)
            .fold(Complex::zero(), |acc, (x, y)| acc + x.conj() * y)
    }
}

impl<T: Real> Index<(usize, usize)> for Matrix<T> {
    type Output = Complex<T>;
    #[inline]
    fn index(&self, (i, j): (usize, usize)) -> &Complex<T> {
        &self.data[i * self.cols + j]
    }
}

impl<T: Real> IndexMut<(usize, usize)> for Matrix<T> {
    #[inline]
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut Complex<T> {
        &mut self.data[i * self.cols + j]
    }
}

impl<T: Real> Mul for &Matrix<T> {
    type Output = Matrix<T>;
    fn mul(self, rhs: &Matrix<T>) -> Matrix<T> {
        assert_eq!(
            self.cols, rhs.rows,
            "matrix product: {}x{} * {}x{}",
            self.rows, self.cols, rhs.rows, rhs.cols
        );
        self.mul_unchecked(rhs)
    }
}

impl<T: Real> Add for &Matrix<T> {
    type Output = Matrix<T>;
    fn add(self, rhs: &Matrix<T>) -> Matrix<T> {
        assert_eq!(self.shape(), rhs.shape(), "matrix sum shape mismatch");
        self.zip_with(rhs, |a, b| a + b)
    }
}

impl<T: Real> Sub for &Matrix<T> {
    type Output = Matrix<T>;
    fn sub(self, rhs: &Matrix<T>) -> Matrix<T> {
        assert_eq!(self.shape(), rhs.shape(), "matrix difference shape mismatch");
        self.zip_with(rhs, |a, b| a - b)
    }
}

impl<T: Real> Neg for &Matrix<T> {
    type Output = Matrix<T>;
    fn neg(self) -> Matrix<T> {
        self.scale_real(-T::one())
    }
}

/// Kronecker product: block `(i, j)` of the result is `a[i, j] * b`.
pub fn kron<T: Real>(a: &Matrix<T>, b: &Matrix<T>) -> Matrix<T> {
    let (ar, ac) = a.shape();
    let (br, bc) = b.shape();
    let cols = ac * bc;
    let mut out = Matrix::zeros(ar * br, cols);
    for i in 0..ar {
        for j in 0..ac {
            let s = a[(i, j)];
            for p in 0..br {
                for q in 0..bc {
                    out.data[(i * br + p) * cols + j * bc + q] = s * b[(p, q)];
                }
            }
        }
    }
    out
}

/// Column-major vectorization: stacks the columns of `a` top to bottom.
pub fn vec<T: Real>(a: &Matrix<T>) -> Matrix<T> {
    let mut data = Vec::with_capacity(a.rows * a.cols);
    for j in 0..a.cols {
        for i in 0..a.rows {
            data.push(a[(i, j)]);
        }
    }
    Matrix {
        rows: a.rows * a.cols,
        cols: 1,
        data,
    }
}

/// Inverse of [`vec`]: reshapes a column-major vector into `rows x cols`.
pub fn unvec<T: Real>(v: &Matrix<T>, rows: usize, cols: usize) -> Result<Matrix<T>, LinalgError> {
    let n = v.rows * v.cols;
    if n != rows * cols {
        return Err(LinalgError::LengthMismatch {
            expected: rows * cols,
            actual: n,
        });
    }
    let mut out = Matrix::zeros(rows, cols);
    for j in 0..cols {
        for i in 0..rows {
            out[(i, j)] = v.data[j * rows + i];
        }
    }
    Ok(out)
}

/// Compact SVD `A = U · diag(xi) · V^H` keeping only the `rank` singular
/// values above the threshold.
#[derive(Debug, Clone, PartialEq)]
pub struct CompactSvd<T: Real> {
    pub u: Matrix<T>,
    pub singular_values: Vec<T>,
    pub v: Matrix<T>,
    pub rank: usize,
}

impl<T: Real> CompactSvd<T> {
    pub fn largest(&self) -> T {
        self.singular_values.first().copied().unwrap_or_else(T::zero)
    }

    /// Reassembles `U · diag(xi) · V^H`.
    pub fn reconstruct(&self) -> Matrix<T> {
        let d: Vec<Complex<T>> = self
            .singular_values
            .iter()
            .map(|&s| Complex::new(s, T::zero()))
            .collect();
        &self.u.scale_columns(&d) * &self.v.adjoint()
    }

    /// `diag(xi) · V^H`, the factor that carries the spectrum of `A · X`.
    pub fn xi_vh(&self) -> Matrix<T> {
        let d: Vec<Complex<T>> = self
            .singular_values
            .iter()
            .map(|&s| Complex::new(s, T::zero()))
            .collect();
        self.v.adjoint().scale_rows(&d)
    }
}

/// Column-major working storage for the Jacobi iteration.
type Columns<T> = Vec<Vec<Complex<T>>>;

fn column_norm_sq<T: Real>(c: &[Complex<T>]) -> T {
    c.iter().map(|z| z.norm_sqr()).sum()
}

/// Thin Householder QR of a tall matrix given as columns: returns `(Q, R)`
/// with `Q` as `n` orthonormal columns of length `m` and `R` upper
/// triangular `n x n`.
fn thin_qr_columns<T: Real>(mut a: Columns<T>, m: usize) -> (Columns<T>, Columns<T>) {
    let n = a.len();
    let mut reflectors: Vec<Vec<Complex<T>>> = Vec::with_capacity(n);
    for k in 0..n {
        let norm_x = column_norm_sq(&a[k][k..]).sqrt();
        let mut v: Vec<Complex<T>> = a[k][k..].to_vec();
        if norm_x == T::zero() {
            reflectors.push(vec![Complex::zero(); m - k]);
            continue;
        }
        let x0 = v[0];
        let phase = if x0.norm() == T::zero() {
            Complex::one()
        } else {
            x0 / x0.norm()
        };
        let alpha = -phase * norm_x;
        v[0] = v[0] - alpha;
        let vn = column_norm_sq(&v).sqrt();
        for z in &mut v {
            *z = *z / vn;
        }
        // Apply H = I - 2 v v^H to the trailing columns.
        for col in a.iter_mut().skip(k) {
            let proj = Matrix::dot(&v, &col[k..]);
            let two_proj = proj * T::lit(2.0);
            for (z, &vi) in col[k..].iter_mut().zip(&v) {
                *z = *z - vi * two_proj;
            }
        }
        reflectors.push(v);
    }
    let mut r: Columns<T> = vec![vec![Complex::zero(); n]; n];
    for j in 0..n {
        for i in 0..=j.min(n - 1) {
            r[j][i] = a[j][i];
        }
    }
    // Q = H_0 H_1 ... H_{n-1} applied to the first n columns of the identity.
    let mut q: Columns<T> = (0..n)
        .map(|j| {
            let mut e = vec![Complex::zero(); m];
            e[j] = Complex::one();
            e
        })
        .collect();
    for k in (0..n).rev() {
        let v = &reflectors[k];
        for col in q.iter_mut() {
            let proj = Matrix::dot(v, &col[k..]);
            let two_proj = proj * T::lit(2.0);
            for (z, &vi) in col[k..].iter_mut().zip(v) {
                *z = *z - vi * two_proj;
            }
        }
    }
    (q, r)
}

/// One-sided (Hestenes) Jacobi on the columns of `w` (`m x n`, `m >= n`).
/// On success `A · V = W` with mutually orthogonal columns of `W`.
fn jacobi_columns<T: Real>(
    w: &mut Columns<T>,
    mut v: Option<&mut Columns<T>>,
    m: usize,
) -> Result<(), LinalgError> {
    let n = w.len();
    let tol = T::epsilon() * T::from_count(m.max(1)).sqrt();
    for _sweep in 0..MAX_SWEEPS {
        let mut rotated = false;
        for p in 0..n {
            for q in (p + 1)..n {
                let alpha = column_norm_sq(&w[p]);
                let beta = column_norm_sq(&w[q]);
                if alpha == T::zero() || beta == T::zero() {
                    continue;
                }
                let gamma = Matrix::dot(&w[p], &w[q]);
                let g = gamma.norm();
                if g <= tol * (alpha * beta).sqrt() {
                    continue;
                }
                rotated = true;
                let phase_conj = (gamma / g).conj();
                let zeta = (beta - alpha) / (T::lit(2.0) * g);
                let sign = if zeta >= T::zero() { T::one() } else { -T::one() };
                let t = sign / (zeta.abs() + (T::one() + zeta * zeta).sqrt());
                let c = T::one() / (T::one() + t * t).sqrt();
                let s = c * t;
                rotate_pair(w, p, q, phase_conj, c, s);
                if let Some(v) = v.as_deref_mut() {
                    rotate_pair(v, p, q, phase_conj, c, s);
                }
            }
        }
        if !rotated {
            return Ok(());
        }
    }
    Err(LinalgError::NonConvergence { sweeps: MAX_SWEEPS })
}

#[inline]
fn rotate_pair<T: Real>(cols: &mut Columns<T>, p: usize, q: usize, phase_conj: Complex<T>, c: T, s: T) {
    let (left, right) = cols.split_at_mut(q);
    let cp = &mut left[p];
    let cq = &mut right[0];
    for (zp, zq) in cp.iter_mut().zip(cq.iter_mut()) {
        let xp = *zp;
        let xq = *zq * phase_conj;
        *zp = xp * c - xq * s;
        *zq = xp * s + xq * c;
    }
}

struct RawSvd<T: Real> {
    /// Left singular directions scaled by their singular value (`U · diag(xi)`).
    w: Columns<T>,
    v: Option<Columns<T>>,
}

/// Full Jacobi SVD of a tall (`m >= n`) matrix given as columns.
fn tall_svd<T: Real>(cols: Columns<T>, m: usize, want_vectors: bool) -> Result<RawSvd<T>, LinalgError> {
    let n = cols.len();
    let identity = || -> Columns<T> {
        (0..n)
            .map(|j| {
                let mut e = vec![Complex::zero(); n];
                e[j] = Complex::one();
                e
            })
            .collect()
    };
    if m >= 2 * n && n > 0 {
        let (q, mut r) = thin_qr_columns(cols, m);
        let mut v = want_vectors.then(identity);
        jacobi_columns(&mut r, v.as_mut(), n)?;
        let w = if want_vectors {
            // Left factor of A is Q times the left factor of R.
            r.iter()
                .map(|rc| {
                    let mut out = vec![Complex::zero(); m];
                    for (k, &coef) in rc.iter().enumerate() {
                        if coef.is_zero() {
                            continue;
                        }
                        for (o, &qz) in out.iter_mut().zip(&q[k]) {
                            *o = *o + qz * coef;
                        }
                    }
                    out
                })
                .collect()
        } else {
            r
        };
        Ok(RawSvd { w, v })
    } else {
        let mut w = cols;
        let mut v = want_vectors.then(identity);
        jacobi_columns(&mut w, v.as_mut(), m)?;
        Ok(RawSvd { w, v })
    }
}

fn check_tol(tol: f64) -> Result<(), LinalgError> {
    if tol > 0.0 && tol.is_finite() {
        Ok(())
    } else {
        Err(LinalgError::InvalidTolerance(tol))
    }
}

/// All `min(rows, cols)` singular values in descending order.
pub fn singular_values<T: Real>(a: &Matrix<T>) -> Result<Vec<T>, LinalgError> {
    let tall = if a.rows >= a.cols { a.clone() } else { a.adjoint() };
    let m = tall.rows;
    let raw = tall_svd(tall.columns(), m, false)?;
    let mut s: Vec<T> = raw.w.iter().map(|c| column_norm_sq(c).sqrt()).collect();
    s.sort_by(|x, y| y.partial_cmp(x).expect("finite singular values"));
    Ok(s)
}

/// Largest singular value (spectral norm); `0` for the zero matrix.
pub fn largest_singular<T: Real>(a: &Matrix<T>) -> Result<T, LinalgError> {
    Ok(singular_values(a)?.first().copied().unwrap_or_else(T::zero))
}

/// Number of singular values at or above `tol * sigma_max`.
pub fn rank<T: Real>(a: &Matrix<T>, tol: f64) -> Result<usize, LinalgError> {
    check_tol(tol)?;
    let s = singular_values(a)?;
    let smax = s.first().copied().unwrap_or_else(T::zero);
    if smax == T::zero() {
        return Ok(0);
    }
    let cut = smax * T::lit(tol);
    Ok(s.iter().filter(|&&x| x >= cut).count())
}

/// Compact SVD. Singular values below `tol * sigma_max` are dropped. Each
/// right singular vector is rotated so its largest-magnitude entry is real
/// and positive, making the factorization deterministic.
pub fn compact_svd<T: Real>(a: &Matrix<T>, tol: f64) -> Result<CompactSvd<T>, LinalgError> {
    check_tol(tol)?;
    let transposed = a.rows < a.cols;
    let tall = if transposed { a.adjoint() } else { a.clone() };
    let raw = tall_svd(tall.columns(), tall.rows(), true)?;
    let v_cols = raw.v.expect("vectors requested");

    let mut order: Vec<(T, usize)> = raw
        .w
        .iter()
        .enumerate()
        .map(|(j, c)| (column_norm_sq(c).sqrt(), j))
        .collect();
    order.sort_by(|x, y| y.0.partial_cmp(&x.0).expect("finite singular values").then(x.1.cmp(&y.1)));
    let smax = order.first().map_or(T::zero(), |x| x.0);
    let cut = smax * T::lit(tol);

    let mut left: Columns<T> = Vec::new();
    let mut right: Columns<T> = Vec::new();
    let mut sv = Vec::new();
    for &(s, j) in &order {
        if smax == T::zero() || s < cut || s == T::zero() {
            break;
        }
        left.push(raw.w[j].iter().map(|&z| z / s).collect());
        right.push(v_cols[j].clone());
        sv.push(s);
    }
    // For the adjoint route A^H = U' S V'^H, so A = V' S U'^H.
    let (mut u_cols, mut v_cols, u_len, v_len) = if transposed {
        (right, left, a.rows, a.cols)
    } else {
        (left, right, a.rows, a.cols)
    };
    for (uc, vc) in u_cols.iter_mut().zip(v_cols.iter_mut()) {
        let mut best = 0;
        let mut best_abs = T::zero();
        for (i, z) in vc.iter().enumerate() {
            let m = z.norm();
            if m > best_abs {
                best_abs = m;
                best = i;
            }
        }
        if best_abs > T::zero() {
            let phase = (vc[best] / best_abs).conj();
            for z in vc.iter_mut() {
                *z = *z * phase;
            }
            vc[best] = Complex::new(vc[best].re, T::zero());
            for z in uc.iter_mut() {
                *z = *z * phase;
            }
        }
    }
    let rank = sv.len();
    Ok(CompactSvd {
        u: Matrix::from_columns(u_len, &u_cols),
        singular_values: sv,
        v: Matrix::from_columns(v_len, &v_cols),
        rank,
    })
}

/// Moore–Penrose pseudoinverse `V · diag(1/xi) · U^H` over singular values
/// at or above `tol * sigma_max`.
pub fn pinv<T: Real>(a: &Matrix<T>, tol: f64) -> Result<Matrix<T>, LinalgError> {
    let svd = compact_svd(a, tol)?;
    if svd.rank == 0 {
        return Ok(Matrix::zeros(a.cols, a.rows));
    }
    let inv: Vec<Complex<T>> = svd
        .singular_values
        .iter()
        .map(|&s| Complex::new(T::one() / s, T::zero()))
        .collect();
    Ok(&svd.v.scale_columns(&inv) * &svd.u.adjoint())
}

/// Thin QR of a tall or square matrix (`rows >= cols`): `A = Q · R` with
/// `Q^H Q = I`.
pub fn thin_qr<T: Real>(a: &Matrix<T>) -> Result<(Matrix<T>, Matrix<T>), LinalgError> {
    if a.rows < a.cols {
        return Err(LinalgError::DimensionMismatch {
            op: "thin_qr (needs rows >= cols)",
            lr: a.rows,
            lc: a.cols,
            rr: a.rows,
            rc: a.cols,
        });
    }
    let (q, r) = thin_qr_columns(a.columns(), a.rows);
    Ok((Matrix::from_columns(a.rows, &q), Matrix::from_columns(a.cols, &r)))
}

/// Cholesky factor `A = L L^H` of a Hermitian positive-definite matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Cholesky<T: Real> {
    l: Matrix<T>,
}

impl<T: Real> Cholesky<T> {
    /// Factors `a`, reading only its lower triangle.
    pub fn new(a: &Matrix<T>) -> Result<Self, LinalgError> {
        let n = a.rows;
        if a.cols != n {
            return Err(LinalgError::DimensionMismatch {
                op: "cholesky (needs a square matrix)",
                lr: a.rows,
                lc: a.cols,
                rr: a.rows,
                rc: a.cols,
            });
        }
        let mut l = Matrix::zeros(n, n);
        for j in 0..n {
            let mut d = a[(j, j)].re;
            for k in 0..j {
                d -= l[(j, k)].norm_sqr();
            }
            if !(d > T::zero()) {
                return Err(LinalgError::NotPositiveDefinite { pivot: j });
            }
            let djj = d.sqrt();
            l[(j, j)] = Complex::new(djj, T::zero());
            for i in j + 1..n {
                let mut s = a[(i, j)];
                for k in 0..j {
                    s = s - l[(i, k)] * l[(j, k)].conj();
                }
                l[(i, j)] = s / djj;
            }
        }
        Ok(Self { l })
    }

    pub fn factor(&self) -> &Matrix<T> {
        &self.l
    }

    /// `ln det A`.
    pub fn log_det(&self) -> T {
        let two = T::one() + T::one();
        (0..self.l.rows).map(|i| self.l[(i, i)].re.ln()).sum::<T>() * two
    }

    /// Solves `L y = b` by forward substitution.
    pub fn solve_lower(&self, b: &[Complex<T>]) -> Vec<Complex<T>> {
        let n = self.l.rows;
        assert_eq!(b.len(), n, "right-hand side length");
        let mut y = b.to_vec();
        for i in 0..n {
            let row = self.l.row(i);
            let mut s = y[i];
            for k in 0..i {
                s = s - row[k] * y[k];
            }
            y[i] = s / row[i].re;
        }
        y
    }

    /// `z^H A^{-1} z`.
    pub fn quad_form(&self, z: &[Complex<T>]) -> T {
        self.solve_lower(z).iter().map(|c| c.norm_sqr()).sum()
    }

    /// `A^{-1}`, assembled column by column.
    pub fn inverse(&self) -> Matrix<T> {
        let n = self.l.rows;
        let mut cols = Vec::with_capacity(n);
        for j in 0..n {
            let mut e = vec![Complex::zero(); n];
            e[j] = Complex::one();
            let y = self.solve_lower(&e);
            cols.push(self.solve_upper(&y));
        }
        Matrix::from_columns(n, &cols)
    }

    /// Solves `L^H x = y` by back substitution.
    fn solve_upper(&self, y: &[Complex<T>]) -> Vec<Complex<T>> {
        let n = self.l.rows;
        let mut x = y.to_vec();
        for i in (0..n).rev() {
            let mut s = x[i];
            for k in i + 1..n {
                s = s - self.l[(k, i)].conj() * x[k];
            }
            x[i] = s / self.l[(i, i)].re;
        }
        x
    }
}
