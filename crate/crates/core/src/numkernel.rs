//! Dense real matrices, a cyclic Jacobi symmetric eigensolver and a
//! normal-equations least-squares solver.
//!
//! This is the only module that does floating-point linear algebra. Matrices
//! are small here (the MCA eigenproblem is J×J with J the total category
//! count, AR design matrices have a handful of columns), so the algorithms
//! favour accuracy and simplicity over asymptotic speed.

use std::fmt;
use std::ops::{Index, IndexMut};

use crate::error::{Error, Result};

/// Default convergence tolerance for [`sym_eigen`].
pub const DEFAULT_EIGEN_TOL: f64 = 1e-10;

/// Maximum number of Jacobi sweeps before giving up.
pub const MAX_SWEEPS: usize = 100;

/// Relative tolerance used to accept an input as symmetric.
const SYMMETRY_TOL: f64 = 1e-12;

/// Pivot threshold (relative to the column's own squared norm) below which a
/// least-squares column is treated as linearly dependent on earlier ones.
const RANK_TOL: f64 = 1e-10;

/// Row-major dense matrix of finite `f64` values.
#[derive(Clone, PartialEq)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn new(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::schema(format!(
                "matrix data has {} entries, expected {rows}×{cols}",
                data.len()
            )));
        }
        if let Some(pos) = data.iter().position(|v| !v.is_finite()) {
            return Err(Error::schema(format!(
                "matrix entry ({}, {}) is not finite",
                pos / cols.max(1),
                pos % cols.max(1)
            )));
        }
        Ok(Matrix { rows, cols, data })
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Matrix {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Matrix::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = 1.0;
        }
        m
    }

    pub fn from_diag(diag: &[f64]) -> Result<Self> {
        let n = diag.len();
        let mut data = vec![0.0; n * n];
        for (i, &d) in diag.iter().enumerate() {
            data[i * n + i] = d;
        }
        Matrix::new(n, n, data)
    }

    /// Builds a matrix from equally sized rows.
    pub fn from_rows<R: AsRef<[f64]>>(rows: &[R]) -> Result<Self> {
        let cols = rows.first().map_or(0, |r| r.as_ref().len());
        let mut data = Vec::with_capacity(rows.len() * cols);
        for (i, r) in rows.iter().enumerate() {
            let r = r.as_ref();
            if r.len() != cols {
                return Err(Error::schema(format!(
                    "row {i} has {} entries, expected {cols}",
                    r.len()
                )));
            }
            data.extend_from_slice(r);
        }
        Matrix::new(rows.len(), cols, data)
    }

    #[inline]
    pub fn rows(&self) -> usize {
        self.rows
    }

    #[inline]
    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        (0..self.rows).map(|i| self[(i, j)]).collect()
    }

    pub fn transpose(&self) -> Matrix {
        let mut t = Matrix::zeros(self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                t[(j, i)] = self[(i, j)];
            }
        }
        t
    }

    pub fn matmul(&self, other: &Matrix) -> Result<Matrix> {
        if self.cols != other.rows {
            return Err(Error::schema(format!(
                "cannot multiply {}×{} by {}×{}",
                self.rows, self.cols, other.rows, other.cols
            )));
        }
        let mut out = Matrix::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self[(i, k)];
                if a == 0.0 {
                    continue;
                }
                let orow = other.row(k);
                let dst = &mut out.data[i * other.cols..(i + 1) * other.cols];
                for (d, &b) in dst.iter_mut().zip(orow) {
                    *d += a * b;
                }
            }
        }
        Ok(out)
    }

    pub fn mat_vec(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.cols {
            return Err(Error::schema(format!(
                "vector of length {} does not match {} columns",
                x.len(),
                self.cols
            )));
        }
        Ok((0..self.rows)
            .map(|i| self.row(i).iter().zip(x).map(|(a, b)| a * b).sum())
            .collect())
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.data.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    pub fn trace(&self) -> f64 {
        (0..self.rows.min(self.cols)).map(|i| self[(i, i)]).sum()
    }

    /// Largest absolute asymmetry `|m[i,j] - m[j,i]|`; `None` when not square.
    pub fn asymmetry(&self) -> Option<f64> {
        if !self.is_square() {
            return None;
        }
        let mut worst = 0.0_f64;
        for i in 0..self.rows {
            for j in (i + 1)..self.cols {
                worst = worst.max((self[(i, j)] - self[(j, i)]).abs());
            }
        }
        Some(worst)
    }
}

impl Index<(usize, usize)> for Matrix {
    type Output = f64;

    #[inline]
    fn index(&self, (i, j): (usize, usize)) -> &f64 {
        &self.data[i * self.cols + j]
    }
}

impl IndexMut<(usize, usize)> for Matrix {
    #[inline]
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut f64 {
        &mut self.data[i * self.cols + j]
    }
}

impl fmt::Debug for Matrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "Matrix {}×{} [", self.rows, self.cols)?;
        for i in 0..self.rows {
            writeln!(f, "  {:?}", self.row(i))?;
        }
        write!(f, "]")
    }
}

/// Eigendecomposition of a symmetric matrix.
///
/// `eigenvalues` are sorted descending and column `s` of `eigenvectors` pairs
/// with `eigenvalues[s]`. Each eigenvector is signed so that its
/// largest-magnitude entry is positive (lowest index wins among entries whose
/// magnitudes agree to within 1e-9 relative).
#[derive(Clone, Debug)]
pub struct SymEigen {
    pub eigenvalues: Vec<f64>,
    pub eigenvectors: Matrix,
    /// Number of Jacobi sweeps performed.
    pub sweeps: usize,
}

impl SymEigen {
    /// `V·diag(λ)·Vᵀ`.
    pub fn reconstruct(&self) -> Matrix {
        let n = self.eigenvalues.len();
        let v = &self.eigenvectors;
        let mut out = Matrix::zeros(n, n);
        for s in 0..n {
            let lambda = self.eigenvalues[s];
            for i in 0..n {
                let vi = v[(i, s)] * lambda;
                if vi == 0.0 {
                    continue;
                }
                for j in 0..n {
                    out[(i, j)] += vi * v[(j, s)];
                }
            }
        }
        out
    }
}

fn off_diagonal_norm(a: &Matrix) -> f64 {
    let n = a.rows();
    let mut sum = 0.0;
    for i in 0..n {
        for j in 0..n {
            if i != j {
                sum += a[(i, j)] * a[(i, j)];
            }
        }
    }
    sum.sqrt()
}

/// Eigendecomposition of a real symmetric matrix by cyclic Jacobi rotations.
///
/// Iterates until the off-diagonal Frobenius norm is at most `tol·‖m‖_F`,
/// for at most [`MAX_SWEEPS`] sweeps.
pub fn sym_eigen(m: &Matrix, tol: f64) -> Result<SymEigen> {
    if !m.is_square() {
        return Err(Error::schema(format!(
            "eigendecomposition needs a square matrix, got {}×{}",
            m.rows(),
            m.cols()
        )));
    }
    if tol.is_nan() || tol <= 0.0 {
        return Err(Error::precondition("eigensolver tolerance must be positive"));
    }
    let n = m.rows();
    let norm = m.frobenius_norm();
    let asym = m.asymmetry().unwrap_or(0.0);
    if asym > SYMMETRY_TOL * norm.max(f64::MIN_POSITIVE) {
        return Err(Error::schema(format!(
            "matrix is not symmetric (max asymmetry {asym:e})"
        )));
    }

    // Work on the exactly symmetrised copy so rounding in the input cannot
    // leak into the rotations.
    let mut a = m.clone();
    for i in 0..n {
        for j in (i + 1)..n {
            let avg = 0.5 * (a[(i, j)] + a[(j, i)]);
            a[(i, j)] = avg;
            a[(j, i)] = avg;
        }
    }
    let mut v = Matrix::identity(n);
    let threshold = tol * norm;

    let mut sweeps = 0;
    loop {
        let off = off_diagonal_norm(&a);
        if off <= threshold {
            break;
        }
        if sweeps == MAX_SWEEPS {
            return Err(Error::Convergence {
                sweeps,
                residual: off,
            });
        }
        sweeps += 1;
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = a[(p, q)];
                if apq == 0.0 {
                    continue;
                }
                let theta = (a[(q, q)] - a[(p, p)]) / (2.0 * apq);
                let t = if theta.abs() > 1e150 {
                    0.5 / theta
                } else {
                    theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt())
                };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                rotate(&mut a, &mut v, p, q, c, s);
            }
        }
    }

    let mut order: Vec<usize> = (0..n).collect();
    // Stable sort keeps index order among equal eigenvalues.
    order.sort_by(|&i, &j| a[(j, j)].total_cmp(&a[(i, i)]));
    let eigenvalues: Vec<f64> = order.iter().map(|&i| a[(i, i)]).collect();
    let mut vectors = Matrix::zeros(n, n);
    for (dst, &src) in order.iter().enumerate() {
        for i in 0..n {
            vectors[(i, dst)] = v[(i, src)];
        }
    }
    normalize_signs(&mut vectors);
    Ok(SymEigen {
        eigenvalues,
        eigenvectors: vectors,
        sweeps,
    })
}

/// Applies the plane rotation `A ← PᵀAP`, `V ← VP` that zeroes `a[p,q]`.
fn rotate(a: &mut Matrix, v: &mut Matrix, p: usize, q: usize, c: f64, s: f64) {
    let n = a.rows();
    for k in 0..n {
        let akp = a[(k, p)];
        let akq = a[(k, q)];
        a[(k, p)] = c * akp - s * akq;
        a[(k, q)] = s * akp + c * akq;
    }
    for k in 0..n {
        let apk = a[(p, k)];
        let aqk = a[(q, k)];
        a[(p, k)] = c * apk - s * aqk;
        a[(q, k)] = s * apk + c * aqk;
    }
    a[(p, q)] = 0.0;
    a[(q, p)] = 0.0;
    for k in 0..n {
        let vkp = v[(k, p)];
        let vkq = v[(k, q)];
        v[(k, p)] = c * vkp - s * vkq;
        v[(k, q)] = s * vkp + c * vkq;
    }
}

/// Flips each column so its largest-magnitude entry is positive.
pub fn normalize_signs(vectors: &mut Matrix) {
    for s in 0..vectors.cols() {
        let col = vectors.column(s);
        let max = col.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
        if max == 0.0 {
            continue;
        }
        let pivot = col
            .iter()
            .position(|v| v.abs() >= max * (1.0 - 1e-9))
            .expect("max is attained");
        if col[pivot] < 0.0 {
            for i in 0..vectors.rows() {
                vectors[(i, s)] = -vectors[(i, s)];
            }
        }
    }
}

/// Solution of a linear least-squares problem.
#[derive(Clone, Debug, PartialEq)]
pub struct LeastSquares {
    pub x: Vec<f64>,
    /// Columns judged linearly dependent on earlier columns; their
    /// coefficients are zero.
    pub dropped: Vec<usize>,
}

impl LeastSquares {
    pub fn rank_deficient(&self) -> bool {
        !self.dropped.is_empty()
    }
}

/// Minimises `‖a·x − b‖₂` through the normal equations `aᵀa·x = aᵀb`.
///
/// The Cholesky factorisation skips any column whose pivot collapses
/// relative to its own squared norm; those columns get coefficient zero and
/// are listed in [`LeastSquares::dropped`].
pub fn solve_least_squares(a: &Matrix, b: &[f64]) -> Result<LeastSquares> {
    let (n, k) = (a.rows(), a.cols());
    if b.len() != n {
        return Err(Error::schema(format!(
            "right-hand side has length {}, expected {n}",
            b.len()
        )));
    }
    if n < k {
        return Err(Error::schema(format!(
            "least squares needs rows ≥ cols, got {n}×{k}"
        )));
    }

    let mut gram = Matrix::zeros(k, k);
    let mut rhs = vec![0.0; k];
    for i in 0..n {
        let row = a.row(i);
        for p in 0..k {
            let rp = row[p];
            if rp == 0.0 {
                continue;
            }
            rhs[p] += rp * b[i];
            for q in p..k {
                gram[(p, q)] += rp * row[q];
            }
        }
    }
    for p in 0..k {
        for q in 0..p {
            gram[(p, q)] = gram[(q, p)];
        }
    }

    // Cholesky G = L·Lᵀ over the kept columns only.
    let mut l = Matrix::zeros(k, k);
    let mut kept: Vec<usize> = Vec::with_capacity(k);
    let mut dropped = Vec::new();
    for j in 0..k {
        let diag = gram[(j, j)];
        let d = diag - kept.iter().map(|&m| l[(j, m)] * l[(j, m)]).sum::<f64>();
        if diag <= 0.0 || d <= RANK_TOL * diag {
            dropped.push(j);
            continue;
        }
        let ljj = d.sqrt();
        l[(j, j)] = ljj;
        for i in (j + 1)..k {
            let s = gram[(i, j)] - kept.iter().map(|&m| l[(i, m)] * l[(j, m)]).sum::<f64>();
            l[(i, j)] = s / ljj;
        }
        kept.push(j);
    }

    // Forward substitution L·y = rhs, then back substitution Lᵀ·x = y.
    let mut y = vec![0.0; k];
    for (idx, &j) in kept.iter().enumerate() {
        let s = rhs[j] - kept[..idx].iter().map(|&m| l[(j, m)] * y[m]).sum::<f64>();
        y[j] = s / l[(j, j)];
    }
    let mut x = vec![0.0; k];
    for (idx, &j) in kept.iter().enumerate().rev() {
        let s = y[j] - kept[idx + 1..].iter().map(|&m| l[(m, j)] * x[m]).sum::<f64>();
        x[j] = s / l[(j, j)];
    }
    Ok(LeastSquares { x, dropped })
}
