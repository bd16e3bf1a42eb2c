//! Maximum likelihood estimation in the Gaussian DAG model.
//!
//! For each vertex `i` the edge weights are the coefficients of the parent
//! columns in the orthogonal projection of column `i` onto their span, and the
//! variance is the mean squared residual. The mean is taken to be zero.

use std::collections::BTreeMap;
use std::fmt;

use crate::error::{Error, Result};
use crate::graph::Dag;
use crate::linalg::{self, Matrix, Vector};

/// An `n x m` sample: rows are observations, columns are variables.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleMatrix(Matrix);

impl SampleMatrix {
    pub fn new(data: Matrix) -> Result<Self> {
        if data.nrows() == 0 || data.ncols() == 0 {
            return Err(Error::Shape("sample must have at least one row and one column".into()));
        }
        if data.iter().any(|x| !x.is_finite()) {
            return Err(Error::NonFinite("sample"));
        }
        Ok(Self(data))
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let n = rows.len();
        let m = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != m) {
            return Err(Error::Shape("ragged sample rows".into()));
        }
        Self::new(Matrix::from_fn(n, m, |r, c| rows[r][c]))
    }

    /// Builds a sample from its variable columns.
    pub fn from_columns(cols: &[Vec<f64>]) -> Result<Self> {
        let m = cols.len();
        let n = cols.first().map_or(0, Vec::len);
        if cols.iter().any(|c| c.len() != n) {
            return Err(Error::Shape("columns of different length".into()));
        }
        Self::new(Matrix::from_fn(n, m, |r, c| cols[c][r]))
    }

    pub fn n(&self) -> usize {
        self.0.nrows()
    }

    pub fn m(&self) -> usize {
        self.0.ncols()
    }

    pub fn matrix(&self) -> &Matrix {
        &self.0
    }

    pub fn into_matrix(self) -> Matrix {
        self.0
    }

    /// Column of variable `i` (1-indexed).
    pub fn column(&self, i: usize) -> Vector {
        self.0.column(i - 1).into_owned()
    }

    /// Sample covariance `Y^T Y / n`.
    pub fn covariance(&self) -> Matrix {
        self.0.transpose() * &self.0 / self.n() as f64
    }

    pub fn rows(&self) -> Vec<Vec<f64>> {
        self.0.row_iter().map(|r| r.iter().copied().collect()).collect()
    }
}

/// Selects columns (0-indexed) of `m`.
pub(crate) fn select_columns(m: &Matrix, idx: &[usize]) -> Matrix {
    Matrix::from_fn(m.nrows(), idx.len(), |r, c| m[(r, idx[c])])
}

/// Outcome of maximum likelihood estimation for a sample.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Classification {
    Nonexistent,
    ExistsNonUnique,
    ExistsUnique,
}

impl Classification {
    pub fn label(self) -> &'static str {
        match self {
            Classification::Nonexistent => "nonexistent",
            Classification::ExistsNonUnique => "exists-non-unique",
            Classification::ExistsUnique => "exists-unique",
        }
    }

    /// Stability label under the group action associated with the DAG.
    pub fn git_label(self) -> &'static str {
        match self {
            Classification::Nonexistent => "unstable",
            Classification::ExistsNonUnique => "polystable",
            Classification::ExistsUnique => "stable",
        }
    }
}

impl fmt::Display for Classification {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

/// Edge weights. `lambda[(i, j)]` is the weight of `j -> i` (1-indexed).
#[derive(Debug, Clone, PartialEq)]
pub struct LambdaEstimate {
    pub lambda: BTreeMap<(usize, usize), f64>,
    /// Dimension of the affine solution set at each vertex (index `i - 1`).
    pub kernel_dims: Vec<usize>,
}

/// A full estimate: edge weights plus per-vertex variances.
#[derive(Debug, Clone, PartialEq)]
pub struct MleEstimate {
    pub lambda: BTreeMap<(usize, usize), f64>,
    pub lambda_kernel_dims: Vec<usize>,
    /// `None` where the residual vanishes and no variance estimate exists.
    pub omega: Vec<Option<f64>>,
}

impl MleEstimate {
    pub fn from_parts(lambda: LambdaEstimate, omega: Vec<Option<f64>>) -> Self {
        Self { lambda: lambda.lambda, lambda_kernel_dims: lambda.kernel_dims, omega }
    }

    pub fn m(&self) -> usize {
        self.omega.len()
    }

    pub fn exists_omega(&self, i: usize) -> bool {
        self.omega[i - 1].is_some()
    }

    pub fn unique_lambda(&self, i: usize) -> bool {
        self.lambda_kernel_dims[i - 1] == 0
    }

    /// True when every vertex has a variance estimate.
    pub fn is_complete(&self) -> bool {
        self.omega.iter().all(Option::is_some)
    }

    /// Weights into vertex `i`, in ascending parent order.
    pub fn lambda_vector(&self, g: &Dag, i: usize) -> Vector {
        let ps = g.parents0(i - 1);
        Vector::from_iterator(ps.len(), ps.iter().map(|&j| self.lambda.get(&(i, j + 1)).copied().unwrap_or(0.0)))
    }

    /// The `m x m` matrix with entry `(i, j)` equal to the weight of `j -> i`.
    pub fn lambda_matrix(&self) -> Matrix {
        let m = self.m();
        let mut out = Matrix::zeros(m, m);
        for (&(i, j), &w) in &self.lambda {
            out[(i - 1, j - 1)] = w;
        }
        out
    }

    /// Like [`MleEstimate::max_abs_diff`] but ignoring the variances of source
    /// vertices, which a perturbation of the sample always changes.
    pub fn max_abs_diff_on_children(&self, other: &MleEstimate, g: &Dag) -> f64 {
        let mut a = self.clone();
        let mut b = other.clone();
        for i in 0..g.m() {
            if g.parents0(i).is_empty() {
                a.omega[i] = None;
                b.omega[i] = None;
            }
        }
        a.max_abs_diff(&b)
    }

    /// Largest entrywise difference between two estimates on the same graph,
    /// `inf` if variance existence differs.
    pub fn max_abs_diff(&self, other: &MleEstimate) -> f64 {
        let mut d = 0.0_f64;
        for (k, v) in &self.lambda {
            d = d.max((v - other.lambda.get(k).copied().unwrap_or(f64::NAN)).abs());
        }
        for (a, b) in self.omega.iter().zip(&other.omega) {
            match (a, b) {
                (Some(x), Some(y)) => d = d.max((x - y).abs()),
                (None, None) => {}
                _ => return f64::INFINITY,
            }
        }
        if d.is_nan() {
            f64::INFINITY
        } else {
            d
        }
    }
}

fn check_shape(y: &SampleMatrix, g: &Dag) -> Result<()> {
    if y.m() != g.m() {
        return Err(Error::Shape(format!("sample has {} columns but graph has {} vertices", y.m(), g.m())));
    }
    Ok(())
}

/// Parent columns and target column at vertex `i` (0-indexed).
pub(crate) fn vertex_system(y: &Matrix, g: &Dag, i: usize) -> (Matrix, Vector) {
    (select_columns(y, g.parents0(i)), y.column(i).into_owned())
}

/// Whether the residual of `b` against `span(a)` counts as zero.
pub(crate) fn residual_vanishes(residual: f64, b: &Vector, tol: f64) -> bool {
    residual <= tol * (1.0 + b.norm())
}

/// Minimum-norm edge weights at every vertex.
pub fn lambda_mle(y: &SampleMatrix, g: &Dag, tol: f64) -> Result<LambdaEstimate> {
    check_shape(y, g)?;
    let mut lambda = BTreeMap::new();
    let mut kernel_dims = vec![0; g.m()];
    for (i, dim) in kernel_dims.iter_mut().enumerate() {
        let ps = g.parents0(i);
        if ps.is_empty() {
            continue;
        }
        let (a, b) = vertex_system(y.matrix(), g, i);
        let x = linalg::min_norm_solve(&a, &b, tol);
        *dim = ps.len() - linalg::rank(&a, tol);
        for (k, &j) in ps.iter().enumerate() {
            lambda.insert((i + 1, j + 1), x[k]);
        }
    }
    Ok(LambdaEstimate { lambda, kernel_dims })
}

/// Orthonormal basis of the directions along which the weights into vertex
/// `i` can move without changing the fit.
pub fn lambda_kernel_basis(y: &SampleMatrix, g: &Dag, i: usize, tol: f64) -> Result<Matrix> {
    check_shape(y, g)?;
    g.parents(i)?;
    let (a, _) = vertex_system(y.matrix(), g, i - 1);
    Ok(linalg::kernel_basis(&a, tol))
}

/// Per-vertex variance estimates: mean squared residual after projecting
/// onto the parent span. `None` when the residual vanishes.
pub fn omega_mle(y: &SampleMatrix, g: &Dag, tol: f64) -> Result<Vec<Option<f64>>> {
    check_shape(y, g)?;
    let n = y.n() as f64;
    Ok((0..g.m())
        .map(|i| {
            let (a, b) = vertex_system(y.matrix(), g, i);
            let resid = &b - linalg::project(&b, &a, tol);
            let r = resid.norm();
            if residual_vanishes(r, &b, tol) {
                None
            } else {
                Some(r * r / n)
            }
        })
        .collect())
}

/// Classification with the vertices that witness it.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ClassificationReport {
    pub classification: Classification,
    /// First vertex responsible for nonexistence or non-uniqueness.
    pub witness: Option<usize>,
    /// Vertices whose column lies in the span of their parents.
    pub nonexistent_at: Vec<usize>,
    /// Vertices whose parent columns are linearly dependent.
    pub non_unique_at: Vec<usize>,
}

pub fn classify(y: &SampleMatrix, g: &Dag, tol: f64) -> Result<ClassificationReport> {
    check_shape(y, g)?;
    let omega = omega_mle(y, g, tol)?;
    let mut nonexistent_at = Vec::new();
    let mut non_unique_at = Vec::new();
    for (i, w) in omega.iter().enumerate() {
        if w.is_none() {
            nonexistent_at.push(i + 1);
        }
        let ps = g.parents0(i);
        if !ps.is_empty() {
            let (a, _) = vertex_system(y.matrix(), g, i);
            if linalg::rank(&a, tol) < ps.len() {
                non_unique_at.push(i + 1);
            }
        }
    }
    let (classification, witness) = if let Some(&w) = nonexistent_at.first() {
        (Classification::Nonexistent, Some(w))
    } else if let Some(&w) = non_unique_at.first() {
        (Classification::ExistsNonUnique, Some(w))
    } else {
        (Classification::ExistsUnique, None)
    };
    Ok(ClassificationReport { classification, witness, nonexistent_at, non_unique_at })
}

/// Edge weights and variances together.
pub fn full_mle(y: &SampleMatrix, g: &Dag, tol: f64) -> Result<MleEstimate> {
    Ok(MleEstimate::from_parts(lambda_mle(y, g, tol)?, omega_mle(y, g, tol)?))
}

/// `(I - Lambda)^-1 Omega (I - Lambda)^-T`.
pub fn covariance(est: &MleEstimate, g: &Dag) -> Result<Matrix> {
    let m = g.m();
    if est.m() != m {
        return Err(Error::Shape("estimate and graph sizes differ".into()));
    }
    for &(i, j) in est.lambda.keys() {
        if !g.has_edge(j, i) {
            return Err(Error::LambdaOffEdge(i, j));
        }
    }
    let mut omega = Matrix::zeros(m, m);
    for (i, w) in est.omega.iter().enumerate() {
        omega[(i, i)] = w.ok_or(Error::MissingOmega(i + 1))?;
    }
    let i_minus = Matrix::identity(m, m) - est.lambda_matrix();
    let inv = i_minus.try_inverse().expect("I - Lambda is unipotent up to reordering for a DAG");
    Ok(&inv * omega * inv.transpose())
}

/// `-log det Sigma - tr(Sigma^-1 S_Y)`: the log-likelihood up to additive and
/// positive multiplicative constants.
pub fn loglik(sigma: &Matrix, y: &SampleMatrix, tol: f64) -> Result<f64> {
    let m = y.m();
    if sigma.shape() != (m, m) {
        return Err(Error::Shape(format!("covariance must be {m} x {m}")));
    }
    if sigma.iter().any(|x| !x.is_finite()) {
        return Err(Error::NonFinite("covariance"));
    }
    let scale = linalg::max_abs(sigma).max(f64::MIN_POSITIVE);
    if linalg::max_abs(&(sigma - sigma.transpose())) > 1e-12 * scale {
        return Err(Error::NotPositiveDefinite);
    }
    let eig = sigma.clone().symmetric_eigen();
    let max = eig.eigenvalues.max();
    let min = eig.eigenvalues.min();
    if max <= 0.0 || min <= tol * max {
        return Err(Error::NotPositiveDefinite);
    }
    let chol = sigma.clone().cholesky().ok_or(Error::NotPositiveDefinite)?;
    let log_det: f64 = chol.l().diagonal().iter().map(|d| 2.0 * d.ln()).sum();
    let trace = chol.solve(&y.covariance()).trace();
    Ok(-log_det - trace)
}

/// Stacks `y` on top of itself `k` times.
pub fn duplicate(y: &SampleMatrix, k: usize) -> Result<SampleMatrix> {
    if k == 0 {
        return Err(Error::Shape("duplication factor must be at least 1".into()));
    }
    let n = y.n();
    let src = y.matrix();
    SampleMatrix::new(Matrix::from_fn(k * n, y.m(), |r, c| src[(r % n, c)]))
}

/// Duplicates with the smallest `k` such that `k n >= m`; returns the factor used.
pub fn duplicate_to_cover(y: &SampleMatrix) -> (SampleMatrix, usize) {
    let k = y.m().div_ceil(y.n()).max(1);
    (duplicate(y, k).expect("k >= 1"), k)
}
