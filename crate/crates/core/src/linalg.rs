//! Dense linear algebra over `f64`: ranks, orthonormal bases, projections,
//! minimum-norm solves and the polynomial expansion of the pencil
//! `C'(eps) = A^T A + eps E^T E`.
//!
//! Every routine takes an explicit relative tolerance. Singular values are
//! treated as zero when they do not exceed `tol * sigma_max`.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

pub type Matrix = DMatrix<f64>;
pub type Vector = DVector<f64>;

/// Default relative tolerance for rank decisions.
pub const DEFAULT_TOL: f64 = 1e-10;

/// Thin SVD with singular values sorted in decreasing order.
///
/// Returns `(U, sigma, V)` with `U` of size `rows x k`, `V` of size `cols x k`
/// and `k = min(rows, cols)`.
fn sorted_svd(m: &Matrix) -> (Matrix, Vec<f64>, Matrix) {
    let (r, c) = m.shape();
    let k = r.min(c);
    if k == 0 {
        return (Matrix::zeros(r, 0), Vec::new(), Matrix::zeros(c, 0));
    }
    let fm = faer::Mat::<f64>::from_fn(r, c, |i, j| m[(i, j)]);
    let svd = fm.thin_svd().expect("svd converges");
    let (fu, fs, fv) = (svd.U(), svd.S().column_vector(), svd.V());
    let u = Matrix::from_fn(r, k, |i, j| fu[(i, j)]);
    let v = Matrix::from_fn(c, k, |i, j| fv[(i, j)]);
    let s: Vec<f64> = (0..k).map(|j| fs[j]).collect();

    let mut order: Vec<usize> = (0..k).collect();
    order.sort_by(|&a, &b| s[b].total_cmp(&s[a]));

    let mut us = Matrix::zeros(r, k);
    let mut vs = Matrix::zeros(c, k);
    let mut sig = Vec::with_capacity(k);
    for (dst, &src) in order.iter().enumerate() {
        us.set_column(dst, &u.column(src));
        vs.set_column(dst, &v.column(src));
        sig.push(s[src]);
    }
    (us, sig, vs)
}

fn numerical_rank(sigma: &[f64], tol: f64) -> usize {
    let max = sigma.first().copied().unwrap_or(0.0);
    if max <= 0.0 {
        return 0;
    }
    sigma.iter().filter(|&&s| s > tol * max).count()
}

/// Number of singular values above `tol * sigma_max`.
pub fn rank(m: &Matrix, tol: f64) -> usize {
    let (_, s, _) = sorted_svd(m);
    numerical_rank(&s, tol)
}

/// Orthonormal basis of the column space.
pub fn image_basis(m: &Matrix, tol: f64) -> Matrix {
    let (u, s, _) = sorted_svd(m);
    let r = numerical_rank(&s, tol);
    u.columns(0, r).into_owned()
}

/// Orthonormal basis of the null space.
pub fn kernel_basis(m: &Matrix, tol: f64) -> Matrix {
    let row_space = image_basis(&m.transpose(), tol);
    orth_complement(&row_space, m.ncols(), tol)
}

/// Orthonormal basis of the orthogonal complement of `span(b)` in `R^d`.
///
/// The columns of `b` need not be orthonormal. An empty span yields a basis of
/// the whole space.
pub fn orth_complement(b: &Matrix, d: usize, tol: f64) -> Matrix {
    assert_eq!(b.nrows(), d, "basis vectors must live in R^{d}");
    let q = image_basis(b, tol);
    let k = q.ncols();
    if k == 0 {
        return Matrix::identity(d, d);
    }
    if k >= d {
        return Matrix::zeros(d, 0);
    }
    let proj = Matrix::identity(d, d) - &q * q.transpose();
    let (u, _, _) = sorted_svd(&proj);
    let mut basis = u.columns(0, d - k).into_owned();
    // re-orthogonalise against q to clean up rounding
    basis -= &q * (q.transpose() * &basis);
    for mut col in basis.column_iter_mut() {
        let n = col.norm();
        col /= n;
    }
    basis
}

/// Orthogonal projection of `v` onto the column space of `b`.
///
/// Projection onto the span of no vectors is the zero vector.
pub fn project(v: &Vector, b: &Matrix, tol: f64) -> Vector {
    assert_eq!(v.len(), b.nrows(), "vector and basis dimensions differ");
    let q = image_basis(b, tol);
    if q.ncols() == 0 {
        return Vector::zeros(v.len());
    }
    &q * (q.transpose() * v)
}

/// Minimum 2-norm solution of `A x = pi_A(b)`, i.e. `x = A^+ b`.
pub fn min_norm_solve(a: &Matrix, b: &Vector, tol: f64) -> Vector {
    assert_eq!(a.nrows(), b.len(), "right-hand side has wrong length");
    let (u, s, v) = sorted_svd(a);
    let r = numerical_rank(&s, tol);
    let mut x = Vector::zeros(a.ncols());
    for (k, sk) in s.iter().take(r).enumerate() {
        let coef = u.column(k).dot(b) / sk;
        x.axpy(coef, &v.column(k), 1.0);
    }
    x
}

/// Moore-Penrose pseudo-inverse.
pub fn pinv(a: &Matrix, tol: f64) -> Matrix {
    let (u, s, v) = sorted_svd(a);
    let r = numerical_rank(&s, tol);
    let mut out = Matrix::zeros(a.ncols(), a.nrows());
    for (k, sk) in s.iter().take(r).enumerate() {
        out += (v.column(k) * u.column(k).transpose()) / *sk;
    }
    out
}

/// Largest absolute entry, zero for empty matrices.
pub fn max_abs(m: &Matrix) -> f64 {
    m.iter().fold(0.0_f64, |acc, x| acc.max(x.abs()))
}

/// Adjugate (transposed cofactor matrix) via determinants of minors.
pub fn adjugate(c: &Matrix) -> Matrix {
    let p = c.nrows();
    assert_eq!(p, c.ncols(), "adjugate of a non-square matrix");
    if p == 0 {
        return Matrix::zeros(0, 0);
    }
    if p == 1 {
        return Matrix::from_element(1, 1, 1.0);
    }
    let mut adj = Matrix::zeros(p, p);
    for i in 0..p {
        for j in 0..p {
            let minor = c.clone().remove_row(i).remove_column(j);
            let sign = if (i + j) % 2 == 0 { 1.0 } else { -1.0 };
            // adj = cof^T
            adj[(j, i)] = sign * minor.determinant();
        }
    }
    adj
}

/// Monomial coefficients of the interpolating polynomial through
/// `(nodes[k], values[k])`, lowest degree first.
fn interpolate_monomial(nodes: &[f64], values: &[f64]) -> Vec<f64> {
    let n = nodes.len();
    // Newton divided differences
    let mut dd = values.to_vec();
    for level in 1..n {
        for k in (level..n).rev() {
            dd[k] = (dd[k] - dd[k - 1]) / (nodes[k] - nodes[k - level]);
        }
    }
    // Horner expansion of the Newton form into monomials
    let mut coeffs = vec![0.0; n];
    for k in (0..n).rev() {
        // coeffs <- coeffs * (x - nodes[k]) + dd[k]
        let mut next = vec![0.0; n];
        for d in 0..n {
            if coeffs[d] != 0.0 {
                if d + 1 < n {
                    next[d + 1] += coeffs[d];
                }
                next[d] -= coeffs[d] * nodes[k];
            }
        }
        next[0] += dd[k];
        coeffs = next;
    }
    coeffs
}

/// Polynomial expansion of `det C'(eps)` and `adj C'(eps)` for
/// `C'(eps) = A^T A + eps E^T E`.
///
/// Coefficients are Taylor coefficients: `det_coeffs[k]` multiplies `eps^k`
/// and equals `(1/k!) d^k/deps^k det C'(eps)` at zero. Likewise
/// `adj_coeffs[k] = (1/k!) d^k/deps^k adj C'(eps)` at zero.
///
/// Conversion to plain derivatives at zero:
///
/// | quantity                                  | expressed here            |
/// |-------------------------------------------|---------------------------|
/// | `d^k/deps^k det C'` at 0                  | `k! * det_coeffs[k]`      |
/// | `d^k/deps^k adj C'` at 0                  | `k! * adj_coeffs[k]`      |
/// | `tr(d^(k-1) adj C' . E^T E)` at 0 (Jacobi)| `k! * det_coeffs[k]`      |
#[derive(Debug, Clone)]
pub struct PencilExpansion {
    pub p: usize,
    pub det_coeffs: Vec<f64>,
    pub adj_coeffs: Vec<Matrix>,
    /// Smallest `k` with `|c_k| > tol * max_j |c_j|`.
    pub lead: usize,
    pub ata: Matrix,
    pub ete: Matrix,
}

impl PencilExpansion {
    pub fn det_at(&self, eps: f64) -> f64 {
        self.det_coeffs.iter().rev().fold(0.0, |acc, c| acc * eps + c)
    }

    pub fn adj_at(&self, eps: f64) -> Matrix {
        let mut acc = Matrix::zeros(self.p, self.p);
        for c in self.adj_coeffs.iter().rev() {
            acc = acc * eps + c;
        }
        acc
    }

    /// Taylor coefficient of `adj C'` with the convention that negative
    /// indices give the zero matrix.
    pub fn adj_coeff(&self, k: isize) -> Matrix {
        if k < 0 || k as usize >= self.adj_coeffs.len() {
            Matrix::zeros(self.p, self.p)
        } else {
            self.adj_coeffs[k as usize].clone()
        }
    }

    /// Leading determinant coefficient `c_l`.
    pub fn lead_coeff(&self) -> f64 {
        self.det_coeffs[self.lead]
    }
}

/// Expands the pencil `A^T A + eps E^T E`.
///
/// Requires `A` and `E` of equal shape with mutually orthogonal columns and
/// `A + E` of full column rank, so `det C'(1) != 0`.
pub fn pencil_expand(a: &Matrix, e: &Matrix, tol: f64) -> Result<PencilExpansion> {
    if a.shape() != e.shape() {
        return Err(Error::Shape(format!("pencil matrices {:?} and {:?} differ in shape", a.shape(), e.shape())));
    }
    let p = a.ncols();
    let cross = a.transpose() * e;
    let scale = 1.0_f64.max(a.norm() * e.norm());
    if max_abs(&cross) > tol * scale {
        return Err(Error::Pencil("columns of A are not orthogonal to columns of E".into()));
    }
    let sum = a + e;
    if rank(&sum, tol) < p {
        return Err(Error::Pencil("A + E is not of full column rank".into()));
    }

    let ata = a.transpose() * a;
    let ete = e.transpose() * e;
    if p == 0 {
        return Ok(PencilExpansion {
            p,
            det_coeffs: vec![1.0],
            adj_coeffs: vec![Matrix::zeros(0, 0)],
            lead: 0,
            ata,
            ete,
        });
    }

    let nodes: Vec<f64> = (0..=p).map(|k| k as f64).collect();
    let mut dets = Vec::with_capacity(p + 1);
    let mut adjs = Vec::with_capacity(p + 1);
    for &eps in &nodes {
        let c = &ata + &ete * eps;
        dets.push(c.determinant());
        adjs.push(adjugate(&c));
    }

    let det_coeffs = interpolate_monomial(&nodes, &dets);
    let mut adj_coeffs = vec![Matrix::zeros(p, p); p + 1];
    let mut entry_vals = vec![0.0; p + 1];
    for i in 0..p {
        for j in 0..p {
            for (k, adj) in adjs.iter().enumerate() {
                entry_vals[k] = adj[(i, j)];
            }
            let coeffs = interpolate_monomial(&nodes, &entry_vals);
            for (k, c) in coeffs.into_iter().enumerate() {
                adj_coeffs[k][(i, j)] = c;
            }
        }
    }
    // adj C' has entry degree at most p - 1
    adj_coeffs[p].fill(0.0);

    let cmax = det_coeffs.iter().fold(0.0_f64, |m, c| m.max(c.abs()));
    let lead = det_coeffs
        .iter()
        .position(|c| c.abs() > tol * cmax)
        .ok_or_else(|| Error::Pencil("determinant polynomial vanishes identically".into()))?;

    Ok(PencilExpansion { p, det_coeffs, adj_coeffs, lead, ata, ete })
}
