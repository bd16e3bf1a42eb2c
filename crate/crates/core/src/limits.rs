//! The path `f + eps f'` and the limit of its MLE as `eps -> 0`.
//!
//! At a vertex with parent columns `A` (from `f`) and `E` (from `f'`), target
//! column `b` and target perturbation `v`, the edge weights along the path
//! solve `(A^T A + d E^T E) x = A^T b + d E^T v` with `d = eps^2`. Writing
//! `adj C'(d) = sum_k M_k d^k` and `det C'(d) = sum_k c_k d^k`, the limit is
//! `D_l / c_l` where `l` is the first index with `c_l != 0` and
//! `D_l = M_l A^T b + M_(l-1) E^T v`.
//!
//! The numeric path evaluates the MLE on a decreasing grid of `eps` and
//! extrapolates in `eps^2`.

use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::graph::Dag;
use crate::linalg::{self, Matrix, Vector};
use crate::mle::{self, MleEstimate};
use crate::stabilise::{self, Perturbation};

/// Relative threshold for deciding which determinant coefficient leads.
pub const LEAD_TOL: f64 = 1e-9;

/// `1e-1, 1e-2, ..., 1e-6`.
pub fn default_epsilon_grid() -> Vec<f64> {
    (1..=6).map(|k| 10f64.powi(-k)).collect()
}

/// Accepts non-empty, strictly decreasing sequences of positive finite numbers.
pub fn validate_grid(grid: &[f64]) -> Result<()> {
    let ok = !grid.is_empty() && grid.iter().all(|e| e.is_finite() && *e > 0.0) && grid.windows(2).all(|w| w[1] < w[0]);
    if ok {
        Ok(())
    } else {
        Err(Error::BadEpsilonGrid)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LimitMethod {
    Analytic,
    Numeric,
}

impl LimitMethod {
    pub fn label(self) -> &'static str {
        match self {
            LimitMethod::Analytic => "analytic",
            LimitMethod::Numeric => "numeric",
        }
    }
}

/// Limit data at one vertex.
#[derive(Debug, Clone, PartialEq)]
pub struct VertexLimit {
    pub vertex: usize,
    /// Limit edge weights in ascending parent order; `None` if the numeric
    /// path diverged.
    pub lambda: Option<Vector>,
    /// Limit variance; `None` where the residual of `f` vanishes.
    pub omega: Option<f64>,
    pub epsilon_independent: bool,
    pub diverged: bool,
    /// Leading index `l` (analytic only).
    pub lead: Option<usize>,
    /// `c_l` (analytic only).
    pub lead_coeff: Option<f64>,
    /// `D_l` (analytic only).
    pub numerator: Option<Vector>,
    /// Smallest change between successive extrapolants (numeric only).
    pub spread: Option<f64>,
    /// `|A lambda - pi_A(b)|`, the failure to solve the degenerate system.
    pub system_residual: Option<f64>,
}

/// Limit of the MLE along `f + eps f'`.
#[derive(Debug, Clone, PartialEq)]
pub struct LimitResult {
    pub method: LimitMethod,
    pub vertices: Vec<VertexLimit>,
    /// Some variance limit is absent, so only the edge-weight limit is a
    /// meaningful statement about `f`.
    pub partial: bool,
    pub diverged: bool,
    /// Grid used by the numeric path, empty for the analytic path.
    pub epsilon_grid: Vec<f64>,
}

impl LimitResult {
    /// Limit edge weights into vertex `i` (1-indexed).
    pub fn lambda(&self, i: usize) -> Option<&Vector> {
        self.vertices[i - 1].lambda.as_ref()
    }

    pub fn omega(&self) -> Vec<Option<f64>> {
        self.vertices.iter().map(|v| v.omega).collect()
    }

    /// Edge-keyed weights, `(i, j)` for `j -> i`.
    pub fn lambda_map(&self, g: &Dag) -> BTreeMap<(usize, usize), f64> {
        let mut out = BTreeMap::new();
        for v in &self.vertices {
            if let Some(x) = &v.lambda {
                for (k, &j) in g.parents0(v.vertex - 1).iter().enumerate() {
                    out.insert((v.vertex, j + 1), x[k]);
                }
            }
        }
        out
    }

    /// Largest entrywise difference of the edge-weight limits; infinite if
    /// either side is missing a vertex.
    pub fn max_lambda_diff(&self, other: &LimitResult) -> f64 {
        let mut d = 0.0_f64;
        for (a, b) in self.vertices.iter().zip(&other.vertices) {
            match (&a.lambda, &b.lambda) {
                (Some(x), Some(y)) if x.len() == y.len() => d = d.max(max_norm(&(x - y))),
                _ => return f64::INFINITY,
            }
        }
        d
    }
}

fn check_graph(p: &Perturbation, g: &Dag) -> Result<()> {
    if p.base().m() != g.m() {
        return Err(Error::Shape(format!("sample has {} columns but graph has {} vertices", p.base().m(), g.m())));
    }
    Ok(())
}

/// Per-vertex pieces `(A, E, b, v)`.
fn vertex_pieces(p: &Perturbation, g: &Dag, i: usize) -> (Matrix, Matrix, Vector, Vector) {
    let ps = g.parents0(i);
    let f = p.base().matrix();
    let d = p.delta();
    (mle::select_columns(f, ps), mle::select_columns(d, ps), f.column(i).into_owned(), d.column(i).into_owned())
}

/// Full MLE given `f + eps f'`, which is unique for `eps != 0`.
pub fn mle_at_epsilon(p: &Perturbation, g: &Dag, eps: f64, tol: f64) -> Result<MleEstimate> {
    check_graph(p, g)?;
    let scaled = p.scaled(eps)?;
    let y = stabilise::stabilize(&scaled, tol)?;
    mle::full_mle(&y, g, tol)
}

/// Values of a single system along the grid and the extrapolated limit.
#[derive(Debug, Clone, PartialEq)]
pub struct NumericPath {
    pub limit: Option<Vector>,
    pub diverged: bool,
    pub spread: Option<f64>,
    pub values: Vec<Vector>,
}

fn max_norm(v: &Vector) -> f64 {
    v.iter().fold(0.0_f64, |m, x| m.max(x.abs()))
}

/// Three successive strictly increasing max-norms, growing by more than a
/// factor of 10 overall, starting above a noise floor.
fn diverges(values: &[Vector]) -> bool {
    let norms: Vec<f64> = values.iter().map(max_norm).collect();
    let Some(&first) = norms.first() else { return false };
    let floor = 1e-6 * (1.0 + first);
    norms.windows(3).any(|w| w[0] > floor && w[0] < w[1] && w[1] < w[2] && w[2] > 10.0 * w[0])
}

/// Two-term Richardson extrapolation in `eps^2` on successive pairs; keeps the
/// extrapolant that changes least from its successor.
fn extrapolate(grid: &[f64], values: &[Vector]) -> (Vector, Option<f64>) {
    if values.len() == 1 {
        return (values[0].clone(), None);
    }
    let rich: Vec<Vector> = (0..values.len() - 1)
        .map(|k| {
            let (d0, d1) = (grid[k] * grid[k], grid[k + 1] * grid[k + 1]);
            (&values[k + 1] * d0 - &values[k] * d1) / (d0 - d1)
        })
        .collect();
    if rich.len() == 1 {
        return (rich[0].clone(), None);
    }
    let (best, spread) = (0..rich.len() - 1)
        .map(|k| (k, max_norm(&(&rich[k + 1] - &rich[k]))))
        .min_by(|a, b| a.1.total_cmp(&b.1))
        .expect("at least two extrapolants");
    (rich[best].clone(), Some(spread))
}

fn numeric_path(grid: &[f64], values: Vec<Vector>) -> NumericPath {
    if diverges(&values) {
        return NumericPath { limit: None, diverged: true, spread: None, values };
    }
    let (limit, spread) = extrapolate(grid, &values);
    NumericPath { limit: Some(limit), diverged: false, spread, values }
}

/// Numeric limit of `(A + eps E)^+ (b + eps v)` with no orthogonality checks,
/// so that paths violating the hypotheses can be explored.
pub fn limit_numeric_raw(
    a: &Matrix,
    e: &Matrix,
    b: &Vector,
    v: &Vector,
    grid: &[f64],
    tol: f64,
) -> Result<NumericPath> {
    validate_grid(grid)?;
    if a.shape() != e.shape() || b.len() != a.nrows() || v.len() != a.nrows() {
        return Err(Error::Shape("A, E, b and v have inconsistent shapes".into()));
    }
    let values = grid.iter().map(|&eps| linalg::min_norm_solve(&(a + e * eps), &(b + v * eps), tol)).collect();
    Ok(numeric_path(grid, values))
}

fn is_constant(values: &[Vector]) -> bool {
    let scale = 1.0 + values.iter().map(max_norm).fold(0.0, f64::max);
    values.windows(2).all(|w| max_norm(&(&w[1] - &w[0])) <= 1e-9 * scale)
}

fn system_residual(a: &Matrix, b: &Vector, x: &Vector, tol: f64) -> f64 {
    (a * x - linalg::project(b, a, tol)).norm()
}

/// Limit by evaluating the MLE along `grid` and extrapolating.
pub fn limit_mle_numeric(p: &Perturbation, g: &Dag, grid: &[f64], tol: f64) -> Result<LimitResult> {
    check_graph(p, g)?;
    validate_grid(grid)?;
    let ests = grid.iter().map(|&eps| mle_at_epsilon(p, g, eps, tol)).collect::<Result<Vec<_>>>()?;
    let omega_f = mle::omega_mle(p.base(), g, tol)?;

    let mut vertices = Vec::with_capacity(g.m());
    for i in 1..=g.m() {
        let lambdas: Vec<Vector> = ests.iter().map(|e| e.lambda_vector(g, i)).collect();
        let constant = is_constant(&lambdas);
        let path = numeric_path(grid, lambdas);
        let omega = omega_f[i - 1].map(|_| {
            let ws: Vec<Vector> =
                ests.iter().map(|e| Vector::from_element(1, e.omega[i - 1].expect("stabilised MLE exists"))).collect();
            extrapolate(grid, &ws).0[0]
        });
        let (a, _, b, _) = vertex_pieces(p, g, i - 1);
        vertices.push(VertexLimit {
            vertex: i,
            system_residual: path.limit.as_ref().map(|x| system_residual(&a, &b, x, tol)),
            lambda: path.limit,
            omega,
            epsilon_independent: constant && !path.diverged,
            diverged: path.diverged,
            lead: None,
            lead_coeff: None,
            numerator: None,
            spread: path.spread,
        });
    }
    let diverged = vertices.iter().any(|v| v.diverged);
    let partial = vertices.iter().any(|v| v.omega.is_none());
    Ok(LimitResult { method: LimitMethod::Numeric, vertices, partial, diverged, epsilon_grid: grid.to_vec() })
}

/// Leading index, `c_l` and `D_l / c_l` at one vertex.
fn analytic_vertex(a: &Matrix, e: &Matrix, b: &Vector, v: &Vector, tol: f64) -> Result<(usize, f64, Vector, Vector)> {
    let p = a.ncols();
    if p == 0 {
        return Ok((0, 1.0, Vector::zeros(0), Vector::zeros(0)));
    }
    let exp = linalg::pencil_expand(a, e, tol)?;
    let cmax = exp.det_coeffs.iter().fold(0.0_f64, |m, c| m.max(c.abs()));
    let l = exp
        .det_coeffs
        .iter()
        .position(|c| c.abs() > LEAD_TOL * cmax)
        .ok_or_else(|| Error::Pencil("determinant polynomial vanishes identically".into()))?;
    let c_l = exp.det_coeffs[l];
    let fbar = linalg::project(b, a, tol);
    let vbar = linalg::project(v, e, tol);
    let rhs_a = a.transpose() * fbar;
    let rhs_e = e.transpose() * vbar;
    let d_l = exp.adj_coeff(l as isize) * rhs_a + exp.adj_coeff(l as isize - 1) * rhs_e;
    let x = &d_l / c_l;
    Ok((l, c_l, d_l, x))
}

fn analytic(p: &Perturbation, g: &Dag, tol: f64) -> Result<LimitResult> {
    check_graph(p, g)?;
    let omega = mle::omega_mle(p.base(), g, tol)?;
    let independent = check_lambda_condition(p, g, tol)?;
    let mut vertices = Vec::with_capacity(g.m());
    for i in 0..g.m() {
        let (a, e, b, v) = vertex_pieces(p, g, i);
        let (l, c_l, d_l, x) = analytic_vertex(&a, &e, &b, &v, tol)?;
        vertices.push(VertexLimit {
            vertex: i + 1,
            system_residual: Some(system_residual(&a, &b, &x, tol)),
            lambda: Some(x),
            omega: omega[i],
            epsilon_independent: independent[i],
            diverged: false,
            lead: Some(l),
            lead_coeff: Some(c_l),
            numerator: Some(d_l),
            spread: None,
        });
    }
    let partial = vertices.iter().any(|v| v.omega.is_none());
    Ok(LimitResult { method: LimitMethod::Analytic, vertices, partial, diverged: false, epsilon_grid: Vec::new() })
}

/// Closed-form limit of the edge weights; variances are those of `f`.
pub fn limit_lambda_analytic(p: &Perturbation, g: &Dag, tol: f64) -> Result<LimitResult> {
    analytic(p, g, tol)
}

/// Limit MLE. When an MLE given `f` exists the assembled limit is checked to
/// be one.
pub fn limit_mle(p: &Perturbation, g: &Dag, tol: f64) -> Result<LimitResult> {
    let res = analytic(p, g, tol)?;
    if !res.partial {
        for (i, v) in res.vertices.iter().enumerate() {
            let (a, _, b, _) = vertex_pieces(p, g, i);
            let scale = 1.0 + linalg::project(&b, &a, tol).norm();
            let r = v.system_residual.unwrap_or(0.0);
            if r > tol.sqrt() * scale {
                return Err(Error::NotAnMle(format!(
                    "limit at vertex {} misses the parent projection by {r:e}",
                    i + 1
                )));
            }
        }
    }
    Ok(res)
}

fn in_span(x: &Vector, span: &Matrix, tol: f64) -> bool {
    let r = (x - linalg::project(x, span, tol)).norm();
    mle::residual_vanishes(r, x, tol)
}

/// Per vertex: whether `pi_A(f_i) + pi_E(v_i)` lies in the span of the
/// stabilised parent columns. All true iff the edge weights given `f + f'`
/// are edge weights of an MLE given `f`.
pub fn check_lambda_condition(p: &Perturbation, g: &Dag, tol: f64) -> Result<Vec<bool>> {
    check_graph(p, g)?;
    Ok((0..g.m())
        .map(|i| {
            let (a, e, b, v) = vertex_pieces(p, g, i);
            let target = linalg::project(&b, &a, tol) + linalg::project(&v, &e, tol);
            in_span(&target, &(a + e), tol)
        })
        .collect())
}

/// Per vertex: whether `v_i` lies in the span of the parent perturbation
/// columns and `pi_A(f_i) + v_i` in the span of the stabilised parent
/// columns. All true iff the MLE given `f + f'` agrees with an MLE given `f`
/// at every child vertex. Source vertices are reported as `true`.
pub fn check_full_condition(p: &Perturbation, g: &Dag, tol: f64) -> Result<Vec<bool>> {
    check_graph(p, g)?;
    Ok((0..g.m())
        .map(|i| {
            if g.parents0(i).is_empty() {
                return true;
            }
            let (a, e, b, v) = vertex_pieces(p, g, i);
            let target = linalg::project(&b, &a, tol) + &v;
            in_span(&v, &e, tol) && in_span(&target, &(a + e), tol)
        })
        .collect())
}

/// Per vertex: whether `v_i = sum_j lambda_ij v_j`. When `lambda` is the
/// edge-weight part of an MLE `alpha` given `f`, all true iff the MLE given
/// `f + f'` agrees with `alpha` at every child vertex. Source vertices are
/// reported as `true`; missing edges count as weight zero.
pub fn check_alpha_fixed(
    delta: &Matrix,
    lambda: &BTreeMap<(usize, usize), f64>,
    g: &Dag,
    tol: f64,
) -> Result<Vec<bool>> {
    if delta.ncols() != g.m() {
        return Err(Error::Shape(format!(
            "perturbation has {} columns but graph has {} vertices",
            delta.ncols(),
            g.m()
        )));
    }
    for &(i, j) in lambda.keys() {
        if i == 0 || j == 0 || i > g.m() || j > g.m() || !g.has_edge(j, i) {
            return Err(Error::LambdaOffEdge(i, j));
        }
    }
    Ok((0..g.m())
        .map(|i| {
            if g.parents0(i).is_empty() {
                return true;
            }
            let vi = delta.column(i).into_owned();
            let mut r = vi.clone();
            for &j in g.parents0(i) {
                let w = lambda.get(&(i + 1, j + 1)).copied().unwrap_or(0.0);
                r -= delta.column(j) * w;
            }
            r.norm() <= tol * (1.0 + vi.norm())
        })
        .collect())
}

/// `(l, c_l, D_l)` at vertex `i` (1-indexed).
pub(crate) fn analytic_diagnostics(p: &Perturbation, g: &Dag, i: usize, tol: f64) -> Result<(usize, f64, Vector)> {
    let (a, e, b, v) = vertex_pieces(p, g, i - 1);
    let (l, c, d, _) = analytic_vertex(&a, &e, &b, &v, tol)?;
    Ok((l, c, d))
}
