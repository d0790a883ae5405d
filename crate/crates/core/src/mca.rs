//! Multiple correspondence analysis through the Burt matrix.
//!
//! With `Z` the N×J indicator matrix of a [`CategoricalTable`] and
//! `B = ZᵀZ` its Burt matrix, the fit forms
//!
//! ```text
//! P = B / (N·Q²)          c_j = n_j / (N·Q)
//! S = D_c^{-1/2} (P − c·cᵀ) D_c^{-1/2}
//! ```
//!
//! `S` is exactly the Gram matrix of the standardized residuals of `Z`, so its
//! eigenvalues are the indicator-matrix principal inertias. They sum to
//! `(J − Q)/Q`, and the discrimination measures of a dimension average over
//! variables to its inertia. Only the J×J matrix is ever materialised, which
//! keeps memory independent of N.

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::numkernel::{sym_eigen, Matrix, DEFAULT_EIGEN_TOL};
use crate::tabular::CategoricalTable;

/// Eigenvalues below this are treated as zero inertia.
pub const INERTIA_FLOOR: f64 = 1e-12;

const BURT_CHUNK: usize = 8_192;

/// Pairwise category co-occurrence counts.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct BurtMatrix {
    n: usize,
    q: usize,
    j: usize,
    offsets: Vec<usize>,
    counts: Vec<u64>,
    labels: Vec<(String, String)>,
    variable_names: Vec<String>,
}

impl BurtMatrix {
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn q(&self) -> usize {
        self.q
    }

    pub fn j(&self) -> usize {
        self.j
    }

    pub fn offsets(&self) -> &[usize] {
        &self.offsets
    }

    pub fn count(&self, a: usize, b: usize) -> u64 {
        self.counts[a * self.j + b]
    }

    /// Row-major J×J counts.
    pub fn counts(&self) -> &[u64] {
        &self.counts
    }

    /// Marginal count of every category (the diagonal).
    pub fn category_counts(&self) -> Vec<u64> {
        (0..self.j).map(|a| self.count(a, a)).collect()
    }

    /// `(variable, category)` for each of the J categories.
    pub fn labels(&self) -> &[(String, String)] {
        &self.labels
    }

    pub fn variable_names(&self) -> &[String] {
        &self.variable_names
    }

    /// Category index range of variable `k`.
    pub fn block(&self, k: usize) -> std::ops::Range<usize> {
        let end = self.offsets.get(k + 1).copied().unwrap_or(self.j);
        self.offsets[k]..end
    }
}

/// Accumulates the Burt matrix in one pass over the rows.
///
/// Row shards are summed as integers, so the result does not depend on how
/// rayon splits the work.
pub fn build_burt(t: &CategoricalTable) -> Result<BurtMatrix> {
    if t.n() == 0 {
        return Err(Error::precondition("cannot build a Burt matrix from an empty table"));
    }
    let q = t.q();
    let j = t.j();
    let offsets = t.offsets();
    let counts = t
        .codes()
        .par_chunks(q * BURT_CHUNK)
        .fold(
            || vec![0u64; j * j],
            |mut acc, chunk| {
                let mut idx = vec![0usize; q];
                for row in chunk.chunks_exact(q) {
                    for (k, &c) in row.iter().enumerate() {
                        idx[k] = offsets[k] + c as usize;
                    }
                    for &a in &idx {
                        let base = a * j;
                        for &b in &idx {
                            acc[base + b] += 1;
                        }
                    }
                }
                acc
            },
        )
        .reduce(
            || vec![0u64; j * j],
            |mut a, b| {
                for (x, y) in a.iter_mut().zip(b) {
                    *x += y;
                }
                a
            },
        );
    Ok(BurtMatrix {
        n: t.n(),
        q,
        j,
        offsets,
        counts,
        labels: t.category_labels(),
        variable_names: t.variables().iter().map(|v| v.name.clone()).collect(),
    })
}

/// A fitted MCA.
#[derive(Clone, Debug)]
pub struct McaModel {
    n: usize,
    q: usize,
    j: usize,
    masses: Vec<f64>,
    inertias: Vec<f64>,
    retained: Vec<f64>,
    standard: Matrix,
    principal: Matrix,
    labels: Vec<(String, String)>,
    variable_names: Vec<String>,
    offsets: Vec<usize>,
}

impl McaModel {
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn q(&self) -> usize {
        self.q
    }

    pub fn j(&self) -> usize {
        self.j
    }

    /// Category masses `c_j = n_j/(N·Q)`.
    pub fn masses(&self) -> &[f64] {
        &self.masses
    }

    /// Every nonzero principal inertia, descending.
    pub fn inertias(&self) -> &[f64] {
        &self.inertias
    }

    /// Inertias of the retained dimensions (zero-padded when fewer than
    /// `dims` inertias are nonzero).
    pub fn retained_inertias(&self) -> &[f64] {
        &self.retained
    }

    pub fn dims(&self) -> usize {
        self.retained.len()
    }

    /// Total inertia `(J − Q)/Q`.
    pub fn total_inertia(&self) -> f64 {
        (self.j - self.q) as f64 / self.q as f64
    }

    /// J×dims standard coordinates.
    pub fn standard_coordinates(&self) -> &Matrix {
        &self.standard
    }

    /// J×dims principal coordinates (standard scaled by √λ).
    pub fn principal_coordinates(&self) -> &Matrix {
        &self.principal
    }

    pub fn labels(&self) -> &[(String, String)] {
        &self.labels
    }

    pub fn variable_names(&self) -> &[String] {
        &self.variable_names
    }

    fn block(&self, k: usize) -> std::ops::Range<usize> {
        let end = self.offsets.get(k + 1).copied().unwrap_or(self.j);
        self.offsets[k]..end
    }

    /// Percentage of total inertia per nonzero dimension.
    pub fn percentages(&self) -> Vec<f64> {
        let total = self.total_inertia();
        self.inertias.iter().map(|l| 100.0 * l / total).collect()
    }

    /// Benzécri-adjusted percentages, one per nonzero inertia. Inertias at or
    /// below `1/Q` get zero. `None` for a single variable.
    pub fn benzecri_percentages(&self) -> Option<Vec<f64>> {
        if self.q < 2 {
            return None;
        }
        let q = self.q as f64;
        let adjusted: Vec<f64> = self
            .inertias
            .iter()
            .map(|&l| {
                if l > 1.0 / q {
                    (q / (q - 1.0) * (l - 1.0 / q)).powi(2)
                } else {
                    0.0
                }
            })
            .collect();
        let total: f64 = adjusted.iter().sum();
        if total == 0.0 {
            return Some(vec![0.0; adjusted.len()]);
        }
        Some(adjusted.iter().map(|a| 100.0 * a / total).collect())
    }
}

/// Builds the standardized residual matrix `S` and the category masses.
pub fn standardized_residual(b: &BurtMatrix) -> Result<(Matrix, Vec<f64>)> {
    let (n, q, j) = (b.n as f64, b.q as f64, b.j);
    if b.n == 0 || b.q == 0 {
        return Err(Error::precondition("Burt matrix has no observations"));
    }
    let masses: Vec<f64> = b.category_counts().iter().map(|&c| c as f64 / (n * q)).collect();
    if let Some(z) = masses.iter().position(|&m| m == 0.0) {
        let (var, cat) = &b.labels[z];
        return Err(Error::DegenerateMass {
            category: format!("{var}={cat}"),
        });
    }
    let root: Vec<f64> = masses.iter().map(|m| m.sqrt()).collect();
    let scale = n * q * q;
    let mut s = Matrix::zeros(j, j);
    for a in 0..j {
        for c in 0..j {
            let p = b.count(a, c) as f64 / scale;
            s[(a, c)] = p / (root[a] * root[c]) - root[a] * root[c];
        }
    }
    Ok((s, masses))
}

/// Fits an MCA retaining `dims` dimensions.
pub fn mca_fit(b: &BurtMatrix, dims: usize) -> Result<McaModel> {
    let max_dims = b.j - b.q;
    if dims == 0 || dims > max_dims {
        return Err(Error::precondition(format!(
            "requested {dims} dimensions, the table supports 1..={max_dims} (J − Q)"
        )));
    }
    let (s, masses) = standardized_residual(b)?;
    let eig = sym_eigen(&s, DEFAULT_EIGEN_TOL)?;

    let clamped: Vec<f64> = eig.eigenvalues.iter().map(|l| l.clamp(0.0, 1.0)).collect();
    let inertias: Vec<f64> = clamped.iter().copied().take_while(|&l| l >= INERTIA_FLOOR).collect();
    let retained: Vec<f64> = (0..dims)
        .map(|s| inertias.get(s).copied().unwrap_or(0.0))
        .collect();

    let j = b.j;
    let mut standard = Matrix::zeros(j, dims);
    let mut principal = Matrix::zeros(j, dims);
    for a in 0..j {
        let inv_root = 1.0 / masses[a].sqrt();
        for (s, &lambda) in retained.iter().enumerate() {
            let f = eig.eigenvectors[(a, s)] * inv_root;
            standard[(a, s)] = f;
            principal[(a, s)] = f * lambda.sqrt();
        }
    }
    Ok(McaModel {
        n: b.n,
        q: b.q,
        j,
        masses,
        inertias,
        retained,
        standard,
        principal,
        labels: b.labels.clone(),
        variable_names: b.variable_names.clone(),
        offsets: b.offsets.clone(),
    })
}

/// Discrimination measure of every variable on every retained dimension.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DiscriminationTable {
    pub variables: Vec<String>,
    pub dims: usize,
    /// Row-major Q×dims.
    pub values: Vec<f64>,
}

impl DiscriminationTable {
    pub fn get(&self, variable: usize, dim: usize) -> f64 {
        self.values[variable * self.dims + dim]
    }

    pub fn row(&self, variable: usize) -> &[f64] {
        &self.values[variable * self.dims..(variable + 1) * self.dims]
    }

    /// Variable indices ordered by their best single-dimension measure among
    /// the first `top_dims` dimensions, most representable first.
    pub fn ranking(&self, top_dims: usize) -> Vec<usize> {
        let top = top_dims.min(self.dims).max(1);
        let best = |k: usize| self.row(k)[..top].iter().copied().fold(0.0, f64::max);
        let mut order: Vec<usize> = (0..self.variables.len()).collect();
        order.sort_by(|&a, &b| best(b).total_cmp(&best(a)));
        order
    }
}

/// `disc[q,s] = Q · Σ_{j ∈ q} c_j · g_{j,s}²`.
pub fn discrimination_measures(m: &McaModel, b: &BurtMatrix) -> Result<DiscriminationTable> {
    if b.j != m.j || b.q != m.q || b.n != m.n {
        return Err(Error::precondition("model and Burt matrix come from different tables"));
    }
    let q = m.q as f64;
    let g = &m.principal;
    let mut values = Vec::with_capacity(m.q * m.dims());
    for k in 0..m.q {
        for s in 0..m.dims() {
            let v: f64 = m.block(k).map(|a| m.masses[a] * g[(a, s)] * g[(a, s)]).sum();
            values.push(q * v);
        }
    }
    Ok(DiscriminationTable {
        variables: m.variable_names.clone(),
        dims: m.dims(),
        values,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum CoordinateKind {
    #[default]
    Principal,
    Standard,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CategoryPoint {
    pub variable: String,
    pub category: String,
    pub x: f64,
    pub y: f64,
}

impl CategoryPoint {
    pub fn label(&self) -> String {
        format!("{}={}", self.variable, self.category)
    }
}

/// One labelled point per category on dimensions `(s1, s2)`, in
/// variable-then-category order, using principal coordinates.
pub fn category_coordinates(m: &McaModel, dims: (usize, usize)) -> Result<Vec<CategoryPoint>> {
    category_points(m, dims, CoordinateKind::Principal)
}

pub fn category_points(
    m: &McaModel,
    (s1, s2): (usize, usize),
    kind: CoordinateKind,
) -> Result<Vec<CategoryPoint>> {
    if s1 >= m.dims() || s2 >= m.dims() {
        return Err(Error::precondition(format!(
            "dimensions ({s1}, {s2}) out of range; {} retained",
            m.dims()
        )));
    }
    let coords = match kind {
        CoordinateKind::Principal => &m.principal,
        CoordinateKind::Standard => &m.standard,
    };
    Ok(m.labels
        .iter()
        .enumerate()
        .map(|(a, (var, cat))| CategoryPoint {
            variable: var.clone(),
            category: cat.clone(),
            x: coords[(a, s1)],
            y: coords[(a, s2)],
        })
        .collect())
}

/// Row principal coordinates on dimension `dim` via the transition formula
/// `score_i = (1/(Q·√λ)) · Σ_{j held by i} g_{j,dim}`.
pub fn observation_scores(t: &CategoricalTable, m: &McaModel, dim: usize) -> Result<Vec<f64>> {
    if dim >= m.dims() {
        return Err(Error::precondition(format!("dimension {dim} not retained")));
    }
    if t.j() != m.j || t.q() != m.q || t.n() != m.n {
        return Err(Error::precondition("table does not match the fitted model"));
    }
    let lambda = m.retained[dim];
    if lambda <= 0.0 {
        return Err(Error::Degenerate(format!(
            "dimension {dim} has zero inertia; observation scores are undefined"
        )));
    }
    let factor = 1.0 / (m.q as f64 * lambda.sqrt());
    let g = &m.principal;
    Ok((0..t.n())
        .map(|i| {
            t.row(i)
                .iter()
                .enumerate()
                .map(|(k, &c)| g[(m.offsets[k] + c as usize, dim)])
                .sum::<f64>()
                * factor
        })
        .collect())
}
