//! Membership tests for the spaces of perturbations.
//!
//! `X_f` is the set of `f`-perturbations. `X_{f,alpha}` holds those whose
//! stabilisation has MLE `alpha`; `X_{f,alpha}^lim` those whose limit MLE has
//! edge weights equal to those of `alpha`. These are point predicates, not
//! emptiness tests.

use crate::error::{Error, Result};
use crate::graph::Dag;
use crate::limits;
use crate::linalg::{self, Matrix};
use crate::mle::{self, Classification, MleEstimate, SampleMatrix};
use crate::stabilise::{self, Perturbation};

/// A candidate perturbation together with the data needed to test it.
#[derive(Debug, Clone, Copy)]
pub struct VarietyQuery<'a> {
    pub f: &'a SampleMatrix,
    pub candidate: &'a Matrix,
    pub alpha: Option<&'a MleEstimate>,
    pub g: &'a Dag,
    pub tol: f64,
}

impl VarietyQuery<'_> {
    fn alpha(&self) -> Result<&MleEstimate> {
        self.alpha.ok_or_else(|| Error::NotAnMle("no candidate estimate supplied".into()))
    }

    fn check_shapes(&self) -> Result<()> {
        if self.f.m() != self.g.m() {
            return Err(Error::Shape(format!(
                "sample has {} columns but graph has {} vertices",
                self.f.m(),
                self.g.m()
            )));
        }
        if let Some(a) = self.alpha {
            if a.m() != self.g.m() {
                return Err(Error::Shape("estimate and graph sizes differ".into()));
            }
            for &(i, j) in a.lambda.keys() {
                if i == 0 || j == 0 || i > self.g.m() || j > self.g.m() || !self.g.has_edge(j, i) {
                    return Err(Error::LambdaOffEdge(i, j));
                }
            }
        }
        Ok(())
    }
}

fn loose(tol: f64) -> f64 {
    tol.sqrt()
}

/// Checks that the edge weights of `alpha` solve every parent system of `f`.
pub fn verify_lambda_mle(f: &SampleMatrix, g: &Dag, alpha: &MleEstimate, tol: f64) -> Result<()> {
    for i in 1..=g.m() {
        let (a, b) = mle::vertex_system(f.matrix(), g, i - 1);
        let fbar = linalg::project(&b, &a, tol);
        let r = (&a * alpha.lambda_vector(g, i) - &fbar).norm();
        if r > loose(tol) * (1.0 + fbar.norm()) {
            return Err(Error::NotAnMle(format!("edge weights into vertex {i} miss the parent projection by {r:e}")));
        }
    }
    Ok(())
}

/// Checks that `alpha` is an MLE given `f`: edge weights solve the parent
/// systems and variances match the residuals.
pub fn verify_mle(f: &SampleMatrix, g: &Dag, alpha: &MleEstimate, tol: f64) -> Result<()> {
    let report = mle::classify(f, g, tol)?;
    if report.classification == Classification::Nonexistent {
        return Err(Error::MleDoesNotExist(report.witness.expect("nonexistence has a witness")));
    }
    verify_lambda_mle(f, g, alpha, tol)?;
    let omega = mle::omega_mle(f, g, tol)?;
    for (i, (want, got)) in omega.iter().zip(&alpha.omega).enumerate() {
        let want = want.expect("MLE exists");
        match got {
            Some(w) if (w - want).abs() <= loose(tol) * (1.0 + want) => {}
            Some(w) => {
                return Err(Error::NotAnMle(format!(
                    "variance at vertex {} is {w} but the residual gives {want}",
                    i + 1
                )))
            }
            None => return Err(Error::MissingOmega(i + 1)),
        }
    }
    Ok(())
}

/// Membership in `X_f`: the candidate is an `f`-perturbation.
pub fn in_xf(q: &VarietyQuery) -> Result<bool> {
    q.check_shapes()?;
    Ok(stabilise::is_perturbation(q.f, q.candidate, q.tol)?.holds())
}

/// Membership in `X_{f,alpha}`: the MLE given `f + candidate` agrees with
/// `alpha` at every child vertex. Errors unless `alpha` is an MLE given `f`.
pub fn in_xf_alpha(q: &VarietyQuery) -> Result<bool> {
    q.check_shapes()?;
    let alpha = q.alpha()?;
    verify_mle(q.f, q.g, alpha, q.tol)?;
    if !in_xf(q)? {
        return Ok(false);
    }
    let fixed = limits::check_alpha_fixed(q.candidate, &alpha.lambda, q.g, q.tol)?;
    Ok(fixed.iter().all(|&b| b))
}

/// Membership in `X_{f,alpha}^lim`: the limit edge weights along
/// `f + eps candidate` equal those of `alpha`. Only the edge weights of
/// `alpha` are used; they must solve the parent systems of `f`.
pub fn in_xf_alpha_lim(q: &VarietyQuery) -> Result<bool> {
    q.check_shapes()?;
    let alpha = q.alpha()?;
    verify_lambda_mle(q.f, q.g, alpha, q.tol)?;
    if !in_xf(q)? {
        return Ok(false);
    }
    let p = Perturbation::new(q.f.clone(), q.candidate.clone(), q.tol)?;
    for i in q.g.child_vertices() {
        let (_, c_l, d_l) = limits::analytic_diagnostics(&p, q.g, i, q.tol)?;
        let lam = alpha.lambda_vector(q.g, i);
        let r = (&lam * c_l - &d_l).norm();
        if r > q.tol * (c_l.abs() * lam.norm() + d_l.norm() + 1.0) {
            return Ok(false);
        }
    }
    Ok(true)
}

/// The minimum-norm MLE for a star-shaped graph, which every stabilisation
/// reproduces at the child vertex.
pub fn star_min_norm_mle(f: &SampleMatrix, g: &Dag, tol: f64) -> Result<MleEstimate> {
    if !g.is_star() {
        return Err(Error::NotStar);
    }
    let report = mle::classify(f, g, tol)?;
    if report.classification == Classification::Nonexistent {
        return Err(Error::MleDoesNotExist(report.witness.expect("nonexistence has a witness")));
    }
    mle::full_mle(f, g, tol)
}
