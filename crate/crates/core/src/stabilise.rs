//! Sample perturbations and stabilisations.
//!
//! An `f`-perturbation is a matrix `f'` whose columns are orthogonal to the
//! image of `f` and whose kernel is exactly the row space of `f`. Adding it
//! to `f` yields a sample of full column rank. Perturbations are built from
//! affine lifts of complete collineations: a chain of maps, each defined on
//! the kernel left over by the previous one and landing in what is left of
//! the cokernel.
//!
//! Random lifts use `ChaCha8Rng::seed_from_u64` and draw stage maps with
//! independent standard normal entries.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::linalg::{self, Matrix};
use crate::mle::SampleMatrix;

fn require_tall(f: &SampleMatrix) -> Result<()> {
    if f.n() < f.m() {
        return Err(Error::TooFewSamples { n: f.n(), m: f.m() });
    }
    Ok(())
}

fn frob_scale(m: &Matrix) -> f64 {
    1.0_f64.max(m.norm())
}

/// Outcome of checking the two defining conditions of an `f`-perturbation.
#[derive(Debug, Clone, PartialEq)]
pub struct PerturbationCheck {
    pub rank_f: usize,
    pub rank_delta: usize,
    /// `m - rank f`.
    pub expected_rank: usize,
    /// Largest entry of `f^T f'`, relative to `max(1, |f| |f'|)`.
    pub cross_residual: f64,
    /// Largest entry of `f'` applied to an orthonormal basis of the row space
    /// of `f`, relative to `max(1, |f'|)`.
    pub row_space_residual: f64,
    pub orthogonal_image: bool,
    pub rank_condition: bool,
    pub vanishes_on_row_space: bool,
}

impl PerturbationCheck {
    pub fn holds(&self) -> bool {
        self.orthogonal_image && self.rank_condition && self.vanishes_on_row_space
    }

    /// Human-readable names of the violated conditions.
    pub fn violations(&self) -> Vec<String> {
        let mut out = Vec::new();
        if !self.orthogonal_image {
            out.push(format!("columns of f' not orthogonal to im f (residual {:e})", self.cross_residual));
        }
        if !self.rank_condition {
            out.push(format!("rank f' = {} but m - rank f = {}", self.rank_delta, self.expected_rank));
        }
        if !self.vanishes_on_row_space {
            out.push(format!("f' does not vanish on the row space of f (residual {:e})", self.row_space_residual));
        }
        out
    }
}

/// Checks whether `fp` is an `f`-perturbation.
pub fn is_perturbation(f: &SampleMatrix, fp: &Matrix, tol: f64) -> Result<PerturbationCheck> {
    require_tall(f)?;
    let fm = f.matrix();
    if fp.shape() != fm.shape() {
        return Err(Error::Shape(format!("perturbation is {:?} but sample is {:?}", fp.shape(), fm.shape())));
    }
    if fp.iter().any(|x| !x.is_finite()) {
        return Err(Error::NonFinite("perturbation"));
    }
    let m = f.m();
    let rank_f = linalg::rank(fm, tol);
    let rank_delta = linalg::rank(fp, tol);

    let cross_residual = linalg::max_abs(&(fm.transpose() * fp)) / 1.0_f64.max(fm.norm() * fp.norm());
    let row_space = linalg::image_basis(&fm.transpose(), tol);
    let row_space_residual = linalg::max_abs(&(fp * &row_space)) / frob_scale(fp);

    Ok(PerturbationCheck {
        rank_f,
        rank_delta,
        expected_rank: m - rank_f,
        cross_residual,
        row_space_residual,
        orthogonal_image: cross_residual <= tol,
        rank_condition: rank_delta == m - rank_f,
        vanishes_on_row_space: row_space_residual <= tol,
    })
}

/// A validated `f`-perturbation together with its base sample.
#[derive(Debug, Clone, PartialEq)]
pub struct Perturbation {
    base: SampleMatrix,
    delta: Matrix,
}

impl Perturbation {
    pub fn new(base: SampleMatrix, delta: Matrix, tol: f64) -> Result<Self> {
        let check = is_perturbation(&base, &delta, tol)?;
        if !check.holds() {
            return Err(Error::InvalidPerturbation(check.violations().join("; ")));
        }
        Ok(Self { base, delta })
    }

    /// The zero perturbation, valid only when `f` has full column rank.
    pub fn trivial(base: SampleMatrix, tol: f64) -> Result<Self> {
        let delta = Matrix::zeros(base.n(), base.m());
        Self::new(base, delta, tol)
    }

    pub fn base(&self) -> &SampleMatrix {
        &self.base
    }

    pub fn delta(&self) -> &Matrix {
        &self.delta
    }

    /// `eps f'`, again an `f`-perturbation for `eps != 0`.
    pub fn scaled(&self, eps: f64) -> Result<Self> {
        if eps == 0.0 {
            return Err(Error::ZeroEpsilon);
        }
        if !eps.is_finite() {
            return Err(Error::NonFinite("epsilon"));
        }
        Ok(Self { base: self.base.clone(), delta: &self.delta * eps })
    }

    /// `f + f'`.
    pub fn stabilised_matrix(&self) -> Matrix {
        self.base.matrix() + &self.delta
    }
}

/// One map of a complete collineation beyond the first, in coordinates.
#[derive(Debug, Clone, PartialEq)]
pub struct LiftStage {
    /// `m x d` orthonormal basis of the domain, a subspace of `ker f`.
    pub kernel_basis: Matrix,
    /// `n x c` orthonormal basis of the target, a subspace of `(im f)^perp`.
    pub cokernel_basis: Matrix,
    /// `c x d` matrix of the stage map in these bases.
    pub stage_map: Matrix,
}

impl LiftStage {
    pub fn domain_dim(&self) -> usize {
        self.kernel_basis.ncols()
    }

    pub fn target_dim(&self) -> usize {
        self.cokernel_basis.ncols()
    }

    /// The stage as a map `R^m -> R^n`.
    pub fn ambient(&self) -> Matrix {
        &self.cokernel_basis * &self.stage_map * self.kernel_basis.transpose()
    }
}

/// Affine lift of a complete collineation starting at `f`.
#[derive(Debug, Clone, PartialEq)]
pub struct CollineationLift {
    base: SampleMatrix,
    stages: Vec<LiftStage>,
    seed: Option<u64>,
}

fn orthonormal(b: &Matrix, tol: f64) -> bool {
    let k = b.ncols();
    linalg::max_abs(&(b.transpose() * b - Matrix::identity(k, k))) <= tol.sqrt()
}

fn contained_in(sub: &Matrix, sup: &Matrix, tol: f64) -> bool {
    linalg::max_abs(&(sup * (sup.transpose() * sub) - sub)) <= tol.sqrt()
}

impl CollineationLift {
    /// Validates and wraps the stages following `f`.
    pub fn new(base: SampleMatrix, stages: Vec<LiftStage>, tol: f64) -> Result<Self> {
        require_tall(&base)?;
        let (n, m) = (base.n(), base.m());
        let f = base.matrix();
        let r = linalg::rank(f, tol);
        let bad = |msg: String| Err(Error::MalformedLift(msg));

        if r == m {
            if !stages.is_empty() {
                return bad("f has full column rank, so no further stages are allowed".into());
            }
            return Ok(Self { base, stages, seed: None });
        }
        if stages.is_empty() {
            return bad(format!("f has rank {r} < {m} but the lift has no further stage"));
        }

        let loose = tol.sqrt();
        let fscale = frob_scale(f);
        for (idx, s) in stages.iter().enumerate() {
            let k = idx + 2;
            let (d, c) = (s.domain_dim(), s.target_dim());
            if s.kernel_basis.nrows() != m || s.cokernel_basis.nrows() != n || s.stage_map.shape() != (c, d) {
                return bad(format!("stage {k} has inconsistent shapes"));
            }
            if d == 0 {
                return bad(format!("stage {k} has an empty domain"));
            }
            if !orthonormal(&s.kernel_basis, tol) || !orthonormal(&s.cokernel_basis, tol) {
                return bad(format!("stage {k} bases are not orthonormal"));
            }
            if linalg::max_abs(&s.stage_map) == 0.0 {
                return bad(format!("stage {k} map is zero"));
            }
            if linalg::max_abs(&(f * &s.kernel_basis)) > loose * fscale {
                return bad(format!("stage {k} domain is not inside ker f"));
            }
            if linalg::max_abs(&(f.transpose() * &s.cokernel_basis)) > loose * fscale {
                return bad(format!("stage {k} target is not orthogonal to im f"));
            }
        }

        let first = &stages[0];
        if first.domain_dim() != m - r || first.target_dim() != n - r {
            return bad(format!("stage 2 must act from ker f (dim {}) to coker f (dim {})", m - r, n - r));
        }

        for (idx, pair) in stages.windows(2).enumerate() {
            let k = idx + 2;
            let (cur, next) = (&pair[0], &pair[1]);
            let rk = linalg::rank(&cur.stage_map, tol);
            if rk == cur.domain_dim() {
                return bad(format!("stage {k} is non-degenerate but is not the last stage"));
            }
            if next.domain_dim() != cur.domain_dim() - rk || next.target_dim() != cur.target_dim() - rk {
                return bad(format!("stage {} dimensions do not match the kernel and cokernel of stage {k}", k + 1));
            }
            if !contained_in(&next.kernel_basis, &cur.kernel_basis, tol)
                || !contained_in(&next.cokernel_basis, &cur.cokernel_basis, tol)
            {
                return bad(format!("stage {} bases are not nested in stage {k}", k + 1));
            }
            let scale = frob_scale(&cur.stage_map);
            let in_kernel = &cur.stage_map * (cur.kernel_basis.transpose() * &next.kernel_basis);
            if linalg::max_abs(&in_kernel) > loose * scale {
                return bad(format!("stage {} domain is not the kernel of stage {k}", k + 1));
            }
            let image = &cur.cokernel_basis * &cur.stage_map;
            if linalg::max_abs(&(image.transpose() * &next.cokernel_basis)) > loose * scale {
                return bad(format!("stage {} target meets the image of stage {k}", k + 1));
            }
        }

        let last = stages.last().expect("non-empty");
        if linalg::rank(&last.stage_map, tol) != last.domain_dim() {
            return bad(format!("final stage {} is degenerate", stages.len() + 1));
        }
        Ok(Self { base, stages, seed: None })
    }

    pub fn base(&self) -> &SampleMatrix {
        &self.base
    }

    pub fn stages(&self) -> &[LiftStage] {
        &self.stages
    }

    /// Number of maps in the collineation, counting `f` itself.
    pub fn length(&self) -> usize {
        self.stages.len() + 1
    }

    /// Seed actually used when the lift was drawn by [`random_lift`].
    pub fn seed(&self) -> Option<u64> {
        self.seed
    }

    /// `(domain, target)` dimensions of each stage after the first.
    pub fn stage_dims(&self) -> Vec<(usize, usize)> {
        self.stages.iter().map(|s| (s.domain_dim(), s.target_dim())).collect()
    }
}

/// Assembles `f' = sum_k Q_k S_k K_k^T` from a lift.
pub fn build_from_lift(lift: &CollineationLift, tol: f64) -> Result<Perturbation> {
    let base = lift.base.clone();
    let mut delta = Matrix::zeros(base.n(), base.m());
    for s in &lift.stages {
        delta += s.ambient();
    }
    Perturbation::new(base, delta, tol)
}

/// `f + f'`, checked to have full column rank.
pub fn stabilize(p: &Perturbation, tol: f64) -> Result<SampleMatrix> {
    let out = p.stabilised_matrix();
    let m = p.base.m();
    let rank = linalg::rank(&out, tol);
    if rank != m {
        return Err(Error::RankDeficientStabilisation { rank, m });
    }
    SampleMatrix::new(out)
}

/// Matrix with independent standard normal entries.
pub fn gaussian_matrix<R: Rng + ?Sized>(rng: &mut R, rows: usize, cols: usize) -> Matrix {
    Matrix::from_fn(rows, cols, |_, _| rng.sample::<f64, _>(StandardNormal))
}

fn draw_stages(f: &Matrix, rng: &mut ChaCha8Rng, tol: f64) -> Option<Vec<LiftStage>> {
    let n = f.nrows();
    let mut kernel = linalg::kernel_basis(f, tol);
    let mut coker = linalg::orth_complement(f, n, tol);
    let mut stages = Vec::new();
    while kernel.ncols() > 0 {
        let (d, c) = (kernel.ncols(), coker.ncols());
        let map = gaussian_matrix(rng, c, d);
        if linalg::max_abs(&map) == 0.0 {
            return None;
        }
        let stage_kernel = linalg::kernel_basis(&map, tol);
        let stage_coker = linalg::orth_complement(&map, c, tol);
        let next_kernel = &kernel * stage_kernel;
        let next_coker = &coker * stage_coker;
        stages.push(LiftStage { kernel_basis: kernel, cokernel_basis: coker, stage_map: map });
        kernel = next_kernel;
        coker = next_coker;
    }
    Some(stages)
}

/// Draws a lift with Gaussian stage maps, deterministic given `seed`.
///
/// Kernel and cokernel bases are singular-vector bases. An all-zero draw
/// restarts the whole lift from `seed + 1`; the seed finally used is stored.
pub fn random_lift(f: &SampleMatrix, seed: u64, tol: f64) -> Result<CollineationLift> {
    require_tall(f)?;
    let mut used = seed;
    loop {
        let mut rng = ChaCha8Rng::seed_from_u64(used);
        if let Some(stages) = draw_stages(f.matrix(), &mut rng, tol) {
            let mut lift = CollineationLift::new(f.clone(), stages, tol)?;
            lift.seed = Some(used);
            return Ok(lift);
        }
        used = used.wrapping_add(1);
    }
}

/// Convenience: a random perturbation of `f` from [`random_lift`].
pub fn random_perturbation(f: &SampleMatrix, seed: u64, tol: f64) -> Result<(Perturbation, CollineationLift)> {
    let lift = random_lift(f, seed, tol)?;
    Ok((build_from_lift(&lift, tol)?, lift))
}
