use std::collections::BTreeMap;

use dagstab::limits::default_epsilon_grid;
use dagstab::linalg::Matrix;
use dagstab::{Dag, MleEstimate, SampleMatrix, DEFAULT_TOL};
use serde::Deserialize;

use crate::Failure;

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GraphSpec {
    pub m: usize,
    pub edges: Vec<[usize; 2]>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AlphaSpec {
    pub lambda: Vec<(usize, usize, f64)>,
    #[serde(default)]
    pub omega: Vec<(usize, Option<f64>)>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "camelCase")]
pub struct Settings {
    pub tol: Option<f64>,
    pub seed: Option<u64>,
    pub epsilon_grid: Option<Vec<f64>>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemFile {
    pub graph: GraphSpec,
    pub sample: Vec<Vec<f64>>,
    pub perturbation: Option<Vec<Vec<f64>>>,
    pub alpha: Option<AlphaSpec>,
    #[serde(default)]
    pub settings: Settings,
}

/// Command-line overrides for the file settings.
#[derive(Debug, Default, Clone)]
pub struct Overrides {
    pub tol: Option<f64>,
    pub seed: Option<u64>,
    pub eps_grid: Option<Vec<f64>>,
}

/// A parsed and validated problem.
#[derive(Debug)]
pub struct Problem {
    pub graph: Dag,
    pub sample: SampleMatrix,
    pub perturbation: Option<Matrix>,
    pub alpha: Option<MleEstimate>,
    pub tol: f64,
    pub seed: Option<u64>,
    pub grid: Vec<f64>,
}

pub fn parse(text: &str) -> Result<ProblemFile, Failure> {
    serde_json::from_str(text).map_err(|e| Failure::Input(format!("invalid problem file: {e}")))
}

fn matrix(rows: &[Vec<f64>], m: usize, what: &str) -> Result<Matrix, Failure> {
    if let Some((k, r)) = rows.iter().enumerate().find(|(_, r)| r.len() != m) {
        return Err(Failure::Semantic(format!("{what} row {} has {} entries, expected {m}", k + 1, r.len())));
    }
    let flat: Vec<f64> = rows.iter().flatten().copied().collect();
    Ok(Matrix::from_row_slice(rows.len(), m, &flat))
}

fn alpha(raw: &AlphaSpec, g: &Dag) -> Result<MleEstimate, Failure> {
    let m = g.m();
    let mut lambda = BTreeMap::new();
    for &(i, j, v) in &raw.lambda {
        if i == 0 || j == 0 || i > m || j > m || !g.has_edge(j, i) {
            return Err(dagstab::Error::LambdaOffEdge(i, j).into());
        }
        lambda.insert((i, j), v);
    }
    let mut omega = vec![None; m];
    for &(i, w) in &raw.omega {
        if i == 0 || i > m {
            return Err(dagstab::Error::VertexOutOfRange { vertex: i, m }.into());
        }
        omega[i - 1] = w;
    }
    Ok(MleEstimate { lambda, lambda_kernel_dims: vec![0; m], omega })
}

impl ProblemFile {
    pub fn resolve(self, o: &Overrides) -> Result<Problem, Failure> {
        let edges: Vec<(usize, usize)> = self.graph.edges.iter().map(|e| (e[0], e[1])).collect();
        let graph = Dag::new(self.graph.m, &edges)?;
        let m = graph.m();
        let sample = SampleMatrix::new(matrix(&self.sample, m, "sample")?)?;
        let perturbation = match &self.perturbation {
            Some(rows) => {
                if rows.len() != sample.n() {
                    return Err(Failure::Semantic(format!(
                        "perturbation has {} rows but the sample has {}",
                        rows.len(),
                        sample.n()
                    )));
                }
                Some(matrix(rows, m, "perturbation")?)
            }
            None => None,
        };
        let alpha = self.alpha.as_ref().map(|a| alpha(a, &graph)).transpose()?;
        let tol = o.tol.or(self.settings.tol).unwrap_or(DEFAULT_TOL);
        if !(tol > 0.0 && tol < 1.0) {
            return Err(Failure::Input(format!("tolerance {tol} must lie in (0, 1)")));
        }
        let grid = o.eps_grid.clone().or(self.settings.epsilon_grid).unwrap_or_else(default_epsilon_grid);
        dagstab::limits::validate_grid(&grid).map_err(|e| Failure::Input(e.to_string()))?;
        Ok(Problem { graph, sample, perturbation, alpha, tol, seed: o.seed.or(self.settings.seed), grid })
    }
}
