//! Acceptance checks, one line of output per criterion.

mod common;

use std::collections::BTreeSet;
use std::panic::{self, AssertUnwindSafe};
use std::time::{Duration, Instant};

use common::*;
use dagstab::limits::{self, default_epsilon_grid};
use dagstab::linalg::{self, Matrix, Vector, DEFAULT_TOL};
use dagstab::mle::{self, Classification};
use dagstab::stabilise::{self, Perturbation};
use dagstab::varieties::{self, VarietyQuery};
use dagstab::{Dag, MleEstimate, Regime, SampleMatrix};
use rand::Rng;

type Check = fn() -> Result<String, String>;

fn ensure(cond: bool, msg: impl Into<String>) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg.into())
    }
}

fn close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol
}

fn best_of<F: FnMut()>(runs: usize, mut f: F) -> Duration {
    (0..runs)
        .map(|_| {
            let t = Instant::now();
            f();
            t.elapsed()
        })
        .min()
        .expect("runs > 0")
}

fn worked_example() -> Result<String, String> {
    let g = collider();
    let tol = 1e-10;
    let y = SampleMatrix::from_columns(&[vec![1.0, 0.0], vec![0.0, 1.0], vec![1.0, 1.0]]).unwrap();
    let yp = SampleMatrix::from_columns(&[vec![1.0, 0.0], vec![1.0, 0.0], vec![0.0, 1.0]]).unwrap();
    let ypp = SampleMatrix::new(Matrix::identity(3, 3)).unwrap();

    let r = mle::classify(&y, &g, DEFAULT_TOL).unwrap();
    ensure(r.classification == Classification::Nonexistent, "Y should be nonexistent")?;
    let l = mle::full_mle(&y, &g, DEFAULT_TOL).unwrap().lambda_vector(&g, 3);
    ensure(close(l[0], 1.0, tol) && close(l[1], 1.0, tol), format!("Y lambda {l:?}"))?;

    let e = mle::full_mle(&yp, &g, DEFAULT_TOL).unwrap();
    ensure(e.omega.iter().all(|w| w.is_some_and(|w| close(w, 0.5, tol))), "Y' omega")?;
    ensure(e.lambda_kernel_dims[2] == 1, "Y' kernel dim")?;
    let l = e.lambda_vector(&g, 3);
    ensure(close(l[0], 0.0, tol) && close(l[1], 0.0, tol), "Y' min-norm lambda")?;

    let e = mle::full_mle(&ypp, &g, DEFAULT_TOL).unwrap();
    let l = e.lambda_vector(&g, 3);
    ensure(close(l[0], 0.0, tol) && close(l[1], 0.0, tol), "Y'' lambda")?;
    ensure(e.omega.iter().all(|w| w.is_some_and(|w| close(w, 1.0 / 3.0, tol))), "Y'' omega")?;

    let mut slowest = Duration::ZERO;
    for s in [&y, &yp, &ypp] {
        let t = best_of(20, || {
            let _ = mle::classify(s, &g, DEFAULT_TOL).unwrap();
            let _ = mle::full_mle(s, &g, DEFAULT_TOL).unwrap();
        });
        slowest = slowest.max(t);
    }
    ensure(slowest < Duration::from_millis(1), format!("slowest run took {slowest:?}"))?;
    Ok(format!("values match, slowest run {slowest:?}"))
}

fn raw_paths() -> Result<String, String> {
    let a = Matrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, 0.0]);
    let e = Matrix::from_row_slice(2, 2, &[0.0, 0.0, 0.0, 1.0]);
    let grid = default_epsilon_grid();
    let e2 = Vector::from_vec(vec![0.0, 1.0]);
    let works = limits::limit_numeric_raw(&a, &e, &Vector::zeros(2), &e2, &grid, DEFAULT_TOL).unwrap();
    let x = works.limit.ok_or("orthogonal path reported divergence")?;
    ensure(close(x[0], 0.0, 1e-8) && close(x[1], 1.0, 1e-8), format!("orthogonal path limit {x:?}"))?;
    let fails = limits::limit_numeric_raw(&a, &e, &e2, &Vector::zeros(2), &grid, DEFAULT_TOL).unwrap();
    ensure(fails.diverged && fails.limit.is_none(), "non-orthogonal path did not diverge")?;
    Ok("limit (0, 1) and divergence reported".into())
}

fn closed_form_path() -> Perturbation {
    let f = SampleMatrix::from_columns(&[vec![1.0, 0.0, 0.0, 0.0], vec![1.0, 1.0, 0.0, 0.0], vec![2.0, 1.0, 0.0, 0.0]])
        .unwrap();
    let mut d = Matrix::zeros(4, 3);
    d[(2, 0)] = -1.0;
    d[(2, 1)] = -1.0;
    d[(2, 2)] = 1.0;
    Perturbation::new(f, d, DEFAULT_TOL).unwrap()
}

fn closed_form() -> Result<String, String> {
    let p = closed_form_path();
    let g = collider();
    let mut worst = 0.0_f64;
    for eps in [0.5, 0.1, 0.01] {
        let x = limits::mle_at_epsilon(&p, &g, eps, DEFAULT_TOL).unwrap().lambda_vector(&g, 3);
        let e2 = eps * eps;
        worst = worst.max((x[0] - (1.0 - 2.0 * e2) / (1.0 + e2)).abs()).max((x[1] - 1.0).abs());
    }
    ensure(worst <= 1e-10, format!("path error {worst:e}"))?;
    let lim = limits::limit_lambda_analytic(&p, &g, DEFAULT_TOL).unwrap();
    let x = lim.lambda(3).unwrap();
    let err = (x[0] - 1.0).abs().max((x[1] - 1.0).abs());
    ensure(err <= 1e-12, format!("limit error {err:e}"))?;
    Ok(format!("path error {worst:.1e}, limit error {err:.1e}"))
}

fn quadric_variety() -> Result<String, String> {
    let g = collider();
    let n = 5;
    let mut f = Matrix::zeros(n, 3);
    f[(0, 0)] = 1.0;
    let f = sample(f);
    for seed in 0..50 {
        let mut r = rng(seed);
        let mut d = Matrix::zeros(n, 3);
        for k in 1..n {
            d[(k, 1)] = r.sample(rand_distr::StandardNormal);
            d[(k, 2)] = r.sample(rand_distr::StandardNormal);
        }
        let v2 = d.column(1).into_owned();
        let v3 = d.column(2).into_owned();
        let b = v2.dot(&v3) / v2.dot(&v2);
        for (bb, want) in [(b, true), (b + 0.01, false)] {
            let alpha = MleEstimate {
                lambda: [((3, 1), 0.0), ((3, 2), bb)].into_iter().collect(),
                lambda_kernel_dims: vec![0; 3],
                omega: vec![None; 3],
            };
            let q = VarietyQuery { f: &f, candidate: &d, alpha: Some(&alpha), g: &g, tol: 1e-8 };
            let got = varieties::in_xf_alpha_lim(&q).map_err(|e| format!("seed {seed}: {e}"))?;
            ensure(got == want, format!("seed {seed}, b offset {}: got {got}", bb - b))?;
        }
    }
    Ok("50 instances, exact split at b".into())
}

fn star_min_norm() -> Result<String, String> {
    let mut worst = 0.0_f64;
    for k in 0..30u64 {
        let mut r = rng(500 + k);
        let m = 3 + (k as usize % 3);
        let n = m + r.random_range(0..2);
        let rank = r.random_range(1..m - 1);
        let f = degenerate_star_sample(&mut r, n, m, rank);
        let g = Dag::star(m).unwrap();
        let c = mle::classify(&f, &g, DEFAULT_TOL).unwrap().classification;
        ensure(c == Classification::ExistsNonUnique, format!("instance {k} classified {c}"))?;
        let best = varieties::star_min_norm_mle(&f, &g, DEFAULT_TOL).unwrap();
        for s in 0..3 {
            let (p, _) = stabilise::random_perturbation(&f, 10_000 * k + s, DEFAULT_TOL).unwrap();
            let ft = stabilise::stabilize(&p, DEFAULT_TOL).unwrap();
            let est = mle::full_mle(&ft, &g, DEFAULT_TOL).unwrap();
            let d = est.max_abs_diff_on_children(&best, &g);
            worst = worst.max(d);
            ensure(d <= 1e-8, format!("instance {k}, lift {s}: difference {d:e}"))?;
        }
    }
    Ok(format!("90 stabilisations, worst difference {worst:.1e}"))
}

fn maximal_rank() -> Result<String, String> {
    let mut failures = 0;
    for k in 0..200u64 {
        let mut r = rng(900 + k);
        let m = 2 + (k as usize % 4);
        let n = if k % 2 == 0 { m } else { m + 2 };
        let rank = r.random_range(0..m);
        let f = sample(rank_r(&mut r, n, m, rank));
        let lift = stabilise::random_lift(&f, k, DEFAULT_TOL).unwrap();
        let p = stabilise::build_from_lift(&lift, DEFAULT_TOL).unwrap();
        let ft = p.stabilised_matrix();
        if linalg::rank(&ft, 1e-10) != m {
            failures += 1;
        }
    }
    ensure(failures == 0, format!("{failures} rank failures"))?;
    Ok("200 pairs, 0 failures".into())
}

fn cross_method() -> Result<String, String> {
    let grid = default_epsilon_grid();
    let mut worst = 0.0_f64;
    let mut max_lead = 0;
    for k in 0..100u64 {
        let mut r = rng(2000 + k);
        let g = match k % 3 {
            0 => Dag::star(3 + r.random_range(0..3)).unwrap(),
            1 => {
                let m = 3 + r.random_range(0..3);
                chain_with_shortcuts(&mut r, m)
            }
            _ => collider(),
        };
        let m = g.m();
        let n = m + r.random_range(0..2);
        let rank = r.random_range(1..m);
        let f = sample(rank_r(&mut r, n, m, rank));
        let (p, _) = stabilise::random_perturbation(&f, k, DEFAULT_TOL).unwrap();
        let a = limits::limit_lambda_analytic(&p, &g, DEFAULT_TOL).map_err(|e| format!("instance {k}: {e}"))?;
        let nmr = limits::limit_mle_numeric(&p, &g, &grid, DEFAULT_TOL).map_err(|e| format!("instance {k}: {e}"))?;
        ensure(!nmr.diverged, format!("instance {k}: numeric path diverged"))?;
        let d = a.max_lambda_diff(&nmr);
        worst = worst.max(d);
        max_lead = max_lead.max(a.vertices.iter().filter_map(|v| v.lead).max().unwrap_or(0));
        ensure(d <= 1e-6, format!("instance {k}: methods differ by {d:e}"))?;
    }
    Ok(format!("100 triples, worst difference {worst:.1e}, largest l = {max_lead}"))
}

fn duplication() -> Result<String, String> {
    let mut worst = 0.0_f64;
    for k in 0..20u64 {
        let mut r = rng(3000 + k);
        let m = 3 + r.random_range(0..4);
        let n = 1 + r.random_range(0..m + 2);
        let g = random_dag(&mut r, m, 0.5);
        let y = sample(gaussian(&mut r, n, m));
        let base = mle::full_mle(&y, &g, DEFAULT_TOL).unwrap();
        for dup in [2, 3] {
            let est = mle::full_mle(&mle::duplicate(&y, dup).unwrap(), &g, DEFAULT_TOL).unwrap();
            let d = est.max_abs_diff(&base);
            worst = worst.max(d);
            ensure(d <= 1e-10, format!("sample {k}, k = {dup}: difference {d:e}"))?;
        }
    }
    Ok(format!("40 comparisons, worst difference {worst:.1e}"))
}

/// Columns `g_{d(i)}` with `d(i)` the longest path out of `i`.
fn depth_sample(r: &mut rand_chacha::ChaCha8Rng, g: &Dag, n: usize) -> SampleMatrix {
    let d = g.longest_paths_from();
    let basis = gaussian(r, n, g.depth() + 1);
    let mut f = Matrix::zeros(n, g.m());
    for (i, &di) in d.iter().enumerate() {
        f.set_column(i, &basis.column(di));
    }
    sample(f)
}

fn with_zero_column(r: &mut rand_chacha::ChaCha8Rng, n: usize, m: usize) -> SampleMatrix {
    let mut f = gaussian(r, n, m);
    let c = r.random_range(0..m);
    f.column_mut(c).fill(0.0);
    sample(f)
}

fn collider_duplicate(r: &mut rand_chacha::ChaCha8Rng, g: &Dag, n: usize) -> SampleMatrix {
    let (j, _, k) = g.unshielded_colliders()[0];
    let mut f = gaussian(r, n, g.m());
    let col = f.column(j - 1).into_owned();
    f.set_column(k - 1, &col);
    sample(f)
}

fn regime_row(regime: Regime) -> Result<String, String> {
    let mut seen = BTreeSet::new();
    let mut dags = 0;
    let mut seed = 4000 + 1000 * regime as u64;
    while dags < 10 {
        seed += 1;
        let mut r = rng(seed);
        let m = 3 + r.random_range(0..5);
        let g = match regime {
            Regime::AboveNoColliders => arborescence_closure(&mut r, m),
            Regime::Between => random_transitive(&mut r, m, 0.25),
            _ => random_transitive(&mut r, m, 0.5),
        };
        let (d, mlt) = (g.depth(), g.mlt());
        let n = match regime {
            Regime::BelowDepth if d >= 1 => r.random_range(1..=d),
            Regime::Between if d + 1 < mlt => r.random_range(d + 1..mlt),
            Regime::AboveWithColliders if !g.unshielded_colliders().is_empty() => mlt + r.random_range(0..3),
            Regime::AboveNoColliders => mlt + r.random_range(0..3),
            _ => continue,
        };
        if g.regime(n).unwrap() != regime {
            return Err(format!("seed {seed}: regime mismatch"));
        }
        dags += 1;

        let mut samples = vec![sample(gaussian(&mut r, n, m)), with_zero_column(&mut r, n, m)];
        if n > d {
            samples.push(depth_sample(&mut r, &g, n));
        }
        if !g.unshielded_colliders().is_empty() {
            samples.push(collider_duplicate(&mut r, &g, n));
        }
        for s in samples {
            let c = mle::classify(&s, &g, DEFAULT_TOL).unwrap().classification;
            if !regime.outcomes().contains(&c) {
                return Err(format!("seed {seed}: outcome {c} not allowed in {regime}"));
            }
            seen.insert(c);
        }
    }
    let want: BTreeSet<Classification> = regime.outcomes().iter().copied().collect();
    ensure(seen == want, format!("{regime}: observed {seen:?}, expected {want:?}"))?;
    Ok(format!("{regime}: {}", want.iter().map(|c| c.label()).collect::<Vec<_>>().join("/")))
}

fn table_regimes() -> Result<String, String> {
    let rows = [Regime::BelowDepth, Regime::Between, Regime::AboveWithColliders, Regime::AboveNoColliders];
    let parts = rows.into_iter().map(regime_row).collect::<Result<Vec<_>, _>>()?;
    Ok(parts.join("; "))
}

/// Whether `est` is an MLE given `f` at every child vertex, by substituting
/// into the parent projection equations.
fn is_mle_on_children(f: &SampleMatrix, g: &Dag, est: &MleEstimate) -> bool {
    let omega_f = mle::omega_mle(f, g, DEFAULT_TOL).unwrap();
    g.child_vertices().into_iter().all(|i| {
        let ps: Vec<usize> = g.parents(i).unwrap();
        let a = Matrix::from_fn(f.n(), ps.len(), |r, c| f.matrix()[(r, ps[c] - 1)]);
        let b = f.column(i);
        let fbar = linalg::project(&b, &a, DEFAULT_TOL);
        let solves = (&a * est.lambda_vector(g, i) - &fbar).norm() <= 1e-8 * (1.0 + fbar.norm());
        let omega = match (omega_f[i - 1], est.omega[i - 1]) {
            (Some(x), Some(y)) => (x - y).abs() <= 1e-8 * (1.0 + x),
            _ => false,
        };
        solves && omega
    })
}

fn condition_equivalence() -> Result<String, String> {
    let mut counts = [0usize; 2];
    let start = Instant::now();
    for k in 0..50u64 {
        let mut r = rng(6000 + k);
        let (f, g) = match k % 4 {
            0 => {
                let m = 3 + r.random_range(0..3);
                let rank = r.random_range(1..m - 1);
                (degenerate_star_sample(&mut r, m + 1, m, rank), Dag::star(m).unwrap())
            }
            1 => {
                let m = 3 + r.random_range(0..3);
                let g = chain_with_shortcuts(&mut r, m);
                let rank = r.random_range(1..m);
                (sample(rank_r(&mut r, m + 1, m, rank)), g)
            }
            2 => {
                let m = 3 + r.random_range(0..3);
                (sample(gaussian(&mut r, m + 1, m)), random_dag(&mut r, m, 0.5))
            }
            _ => {
                let m = 3 + r.random_range(0..3);
                (with_zero_column(&mut r, m + 1, m), random_dag(&mut r, m, 0.6))
            }
        };
        let (p, _) = stabilise::random_perturbation(&f, k, DEFAULT_TOL).unwrap();
        let holds = limits::check_full_condition(&p, &g, DEFAULT_TOL).unwrap().iter().all(|&b| b);
        let ft = stabilise::stabilize(&p, DEFAULT_TOL).unwrap();
        let est = mle::full_mle(&ft, &g, DEFAULT_TOL).unwrap();
        let is_mle = is_mle_on_children(&f, &g, &est);
        ensure(holds == is_mle, format!("instance {k}: condition {holds}, MLE given f {is_mle}"))?;
        counts[holds as usize] += 1;
    }
    ensure(counts[0] > 0 && counts[1] > 0, format!("degenerate mix: {counts:?}"))?;
    let elapsed = start.elapsed();
    Ok(format!("{} hold, {} fail, all agree ({elapsed:?})", counts[1], counts[0]))
}

fn main() {
    let criteria: [(u32, &str, Check); 10] = [
        (1, "worked example values and runtime", worked_example),
        (2, "numeric limit and divergence examples", raw_paths),
        (3, "closed-form path and analytic limit", closed_form),
        (4, "limit variety split", quadric_variety),
        (5, "star graphs pick the minimum-norm MLE", star_min_norm),
        (6, "stabilisations have maximal rank", maximal_rank),
        (7, "analytic and numeric limits agree", cross_method),
        (8, "duplication invariance", duplication),
        (9, "regime table outcome sets", table_regimes),
        (10, "full condition matches MLE equality", condition_equivalence),
    ];
    panic::set_hook(Box::new(|_| {}));
    let suite = Instant::now();
    let mut failed = 0;
    for (id, name, check) in criteria {
        let outcome = panic::catch_unwind(AssertUnwindSafe(check))
            .unwrap_or_else(|e| Err(e.downcast_ref::<String>().cloned().unwrap_or_else(|| "panicked".into())));
        match outcome {
            Ok(detail) => println!("criterion {id:>2} PASS  {name}: {detail}"),
            Err(detail) => {
                failed += 1;
                println!("criterion {id:>2} FAIL  {name}: {detail}");
            }
        }
    }
    println!("acceptance: {} passed, {failed} failed in {:?}", 10 - failed, suite.elapsed());
    if failed > 0 {
        std::process::exit(1);
    }
}
