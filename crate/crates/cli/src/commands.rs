use std::collections::BTreeMap;

use dagstab::limits::{self, LimitResult};
use dagstab::linalg::{self, Matrix};
use dagstab::stabilise::{self, Perturbation};
use dagstab::varieties::{self, VarietyQuery};
use dagstab::{mle, Dag, MleEstimate, SampleMatrix};
use serde_json::{json, Map, Value};

use crate::problem::Problem;
use crate::Failure;

fn rows(m: &Matrix) -> Value {
    let out: Vec<Vec<f64>> = m.row_iter().map(|r| r.iter().copied().collect()).collect();
    json!(out)
}

fn lambda_entries(lambda: &BTreeMap<(usize, usize), f64>) -> Value {
    let out: Vec<Value> = lambda.iter().map(|(&(i, j), &v)| json!([i, j, v])).collect();
    json!(out)
}

fn omega_entries(omega: &[Option<f64>]) -> Value {
    let out: Vec<Value> = omega.iter().enumerate().map(|(k, w)| json!([k + 1, w])).collect();
    json!(out)
}

fn lambda_by_vertex(res: &LimitResult, g: &Dag) -> Value {
    let mut out = Map::new();
    for i in g.child_vertices() {
        let v = res.lambda(i).map(|x| x.iter().copied().collect::<Vec<f64>>());
        out.insert(i.to_string(), json!(v));
    }
    Value::Object(out)
}

/// The sample used for estimation, duplicated when it has fewer rows than
/// columns and no explicit perturbation pins its shape.
fn working_sample(p: &Problem) -> (SampleMatrix, usize) {
    if p.perturbation.is_none() {
        mle::duplicate_to_cover(&p.sample)
    } else {
        (p.sample.clone(), 1)
    }
}

fn header(name: &str, p: &Problem, k: usize) -> Map<String, Value> {
    let mut h = Map::new();
    h.insert("command".into(), json!(name));
    h.insert("tolerance".into(), json!(p.tol));
    h.insert("n".into(), json!(p.sample.n()));
    h.insert("m".into(), json!(p.graph.m()));
    h.insert("duplicated".into(), json!(k));
    h
}

struct Source {
    perturbation: Perturbation,
    seed: Option<u64>,
    stage_dims: Option<Vec<(usize, usize)>>,
}

fn perturbation(p: &Problem, f: &SampleMatrix) -> Result<Source, Failure> {
    if let Some(d) = &p.perturbation {
        let perturbation = Perturbation::new(f.clone(), d.clone(), p.tol)?;
        return Ok(Source { perturbation, seed: None, stage_dims: None });
    }
    let seed = p.seed.ok_or_else(|| Failure::Input("a perturbation or a seed is required".into()))?;
    let (perturbation, lift) = stabilise::random_perturbation(f, seed, p.tol)?;
    Ok(Source { perturbation, seed: lift.seed(), stage_dims: Some(lift.stage_dims()) })
}

fn source_fields(out: &mut Map<String, Value>, s: &Source) {
    out.insert("seed".into(), json!(s.seed));
    out.insert("stageDims".into(), json!(s.stage_dims));
}

pub fn classify(p: &Problem) -> Result<Value, Failure> {
    let (f, k) = working_sample(p);
    let g = &p.graph;
    let r = mle::classify(&f, g, p.tol)?;
    let mut out = header("classify", p, k);
    out.insert("classification".into(), json!(r.classification.label()));
    out.insert("gitLabel".into(), json!(r.classification.git_label()));
    out.insert("witness".into(), json!(r.witness));
    out.insert("nonexistentAt".into(), json!(r.nonexistent_at));
    out.insert("nonUniqueAt".into(), json!(r.non_unique_at));
    out.insert("mlt".into(), json!(g.mlt()));
    out.insert("depth".into(), json!(g.depth()));
    out.insert("transitive".into(), json!(g.is_transitive()));
    let regime = g.regime(p.sample.n()).ok();
    out.insert("regime".into(), json!(regime.map(|r| r.label())));
    let outcomes = regime.map(|r| r.outcomes().iter().map(|c| c.label()).collect::<Vec<_>>());
    out.insert("regimeOutcomes".into(), json!(outcomes));
    Ok(Value::Object(out))
}

fn estimate_fields(out: &mut Map<String, Value>, est: &MleEstimate) {
    out.insert("lambda".into(), lambda_entries(&est.lambda));
    out.insert("omega".into(), omega_entries(&est.omega));
    out.insert("kernelDims".into(), json!(est.lambda_kernel_dims));
    out.insert("complete".into(), json!(est.is_complete()));
}

pub fn estimate(p: &Problem) -> Result<Value, Failure> {
    let (f, k) = working_sample(p);
    let r = mle::classify(&f, &p.graph, p.tol)?;
    let est = mle::full_mle(&f, &p.graph, p.tol)?;
    let mut out = header("estimate", p, k);
    out.insert("classification".into(), json!(r.classification.label()));
    out.insert("gitLabel".into(), json!(r.classification.git_label()));
    estimate_fields(&mut out, &est);
    Ok(Value::Object(out))
}

pub fn stabilize(p: &Problem) -> Result<Value, Failure> {
    let (f, k) = working_sample(p);
    let s = perturbation(p, &f)?;
    let fixed = stabilise::stabilize(&s.perturbation, p.tol)?;
    let check = stabilise::is_perturbation(&f, s.perturbation.delta(), p.tol)?;
    let mut out = header("stabilize", p, k);
    source_fields(&mut out, &s);
    out.insert("perturbation".into(), rows(s.perturbation.delta()));
    out.insert("stabilised".into(), rows(fixed.matrix()));
    out.insert("rank".into(), json!(linalg::rank(fixed.matrix(), p.tol)));
    out.insert("sampleRank".into(), json!(check.rank_f));
    out.insert(
        "check".into(),
        json!({
            "orthogonalImage": check.orthogonal_image,
            "rankCondition": check.rank_condition,
            "vanishesOnRowSpace": check.vanishes_on_row_space,
        }),
    );
    Ok(Value::Object(out))
}

pub fn limit(p: &Problem) -> Result<Value, Failure> {
    let (f, k) = working_sample(p);
    let g = &p.graph;
    let s = perturbation(p, &f)?;
    let analytic = limits::limit_mle(&s.perturbation, g, p.tol)?;
    let numeric = limits::limit_mle_numeric(&s.perturbation, g, &p.grid, p.tol)?;
    let agreement = if numeric.diverged { None } else { Some(analytic.max_lambda_diff(&numeric)) };

    let analytic_vertices: Vec<Value> = g
        .child_vertices()
        .into_iter()
        .map(|i| {
            let v = &analytic.vertices[i - 1];
            json!({
                "vertex": i,
                "lead": v.lead,
                "leadCoeff": v.lead_coeff,
                "epsilonIndependent": v.epsilon_independent,
                "systemResidual": v.system_residual,
            })
        })
        .collect();
    let numeric_vertices: Vec<Value> = g
        .child_vertices()
        .into_iter()
        .map(|i| {
            let v = &numeric.vertices[i - 1];
            json!({ "vertex": i, "diverged": v.diverged, "spread": v.spread })
        })
        .collect();

    let mut out = header("limit", p, k);
    source_fields(&mut out, &s);
    out.insert("epsilonGrid".into(), json!(p.grid));
    out.insert("lambdaLimit".into(), lambda_by_vertex(&analytic, g));
    out.insert("omegaLimit".into(), omega_entries(&analytic.omega()));
    out.insert("partial".into(), json!(analytic.partial));
    out.insert("agreement".into(), json!(agreement));
    out.insert("diverged".into(), json!(numeric.diverged));
    out.insert(
        "analytic".into(),
        json!({
            "lambdaLimit": lambda_by_vertex(&analytic, g),
            "omega": omega_entries(&analytic.omega()),
            "vertices": analytic_vertices,
        }),
    );
    out.insert(
        "numeric".into(),
        json!({
            "lambdaLimit": lambda_by_vertex(&numeric, g),
            "omega": omega_entries(&numeric.omega()),
            "diverged": numeric.diverged,
            "vertices": numeric_vertices,
        }),
    );
    Ok(Value::Object(out))
}

pub fn check(p: &Problem) -> Result<Value, Failure> {
    let (f, k) = working_sample(p);
    let g = &p.graph;
    let s = perturbation(p, &f)?;
    let (lambda, alpha_source) = match &p.alpha {
        Some(a) => (a.lambda.clone(), "file"),
        None => (mle::full_mle(&f, g, p.tol)?.lambda, "mle"),
    };
    let cond = limits::check_lambda_condition(&s.perturbation, g, p.tol)?;
    let full = limits::check_full_condition(&s.perturbation, g, p.tol)?;
    let fixed = limits::check_alpha_fixed(s.perturbation.delta(), &lambda, g, p.tol)?;
    let vertices: Vec<Value> = (0..g.m())
        .map(|i| {
            json!({
                "vertex": i + 1,
                "lambdaCondition": cond[i],
                "fullCondition": full[i],
                "alphaFixed": fixed[i],
            })
        })
        .collect();
    let mut out = header("check", p, k);
    source_fields(&mut out, &s);
    out.insert("alphaSource".into(), json!(alpha_source));
    out.insert("vertices".into(), json!(vertices));
    out.insert("allLambdaCondition".into(), json!(cond.iter().all(|&b| b)));
    out.insert("allFullCondition".into(), json!(full.iter().all(|&b| b)));
    out.insert("allAlphaFixed".into(), json!(fixed.iter().all(|&b| b)));
    Ok(Value::Object(out))
}

pub fn membership(p: &Problem) -> Result<Value, Failure> {
    let alpha = p.alpha.as_ref().ok_or_else(|| Failure::Input("membership requires alpha".into()))?;
    let (f, k) = working_sample(p);
    let (candidate, seed, stage_dims) = match &p.perturbation {
        Some(d) => (d.clone(), None, None),
        None => {
            let seed = p.seed.ok_or_else(|| Failure::Input("a perturbation or a seed is required".into()))?;
            let (pert, lift) = stabilise::random_perturbation(&f, seed, p.tol)?;
            (pert.delta().clone(), lift.seed(), Some(lift.stage_dims()))
        }
    };
    let q = VarietyQuery { f: &f, candidate: &candidate, alpha: Some(alpha), g: &p.graph, tol: p.tol };
    let in_xf = varieties::in_xf(&q)?;
    let mut errors = Map::new();
    let mut predicate = |name: &str, r: dagstab::Result<bool>| match r {
        Ok(b) => Some(b),
        Err(e) => {
            errors.insert(name.into(), json!(e.to_string()));
            None
        }
    };
    let in_alpha = predicate("inXfAlpha", varieties::in_xf_alpha(&q));
    let in_lim = predicate("inXfAlphaLim", varieties::in_xf_alpha_lim(&q));
    let mut out = header("membership", p, k);
    out.insert("seed".into(), json!(seed));
    out.insert("stageDims".into(), json!(stage_dims));
    out.insert("inXf".into(), json!(in_xf));
    out.insert("inXfAlpha".into(), json!(in_alpha));
    out.insert("inXfAlphaLim".into(), json!(in_lim));
    out.insert("errors".into(), Value::Object(errors));
    Ok(Value::Object(out))
}
