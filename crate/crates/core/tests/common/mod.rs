#![allow(dead_code)]

use std::collections::BTreeSet;

use dagstab::linalg::Matrix;
use dagstab::stabilise::gaussian_matrix;
use dagstab::{Dag, SampleMatrix};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn gaussian(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> Matrix {
    gaussian_matrix(rng, rows, cols)
}

/// Generic `n x m` matrix of rank `r`.
pub fn rank_r(rng: &mut ChaCha8Rng, n: usize, m: usize, r: usize) -> Matrix {
    if r == 0 {
        return Matrix::zeros(n, m);
    }
    gaussian(rng, n, r) * gaussian(rng, r, m)
}

pub fn sample(m: Matrix) -> SampleMatrix {
    SampleMatrix::new(m).expect("finite non-empty sample")
}

fn relabel(rng: &mut ChaCha8Rng, m: usize, edges: &[(usize, usize)]) -> Dag {
    let mut perm: Vec<usize> = (1..=m).collect();
    perm.shuffle(rng);
    let e: Vec<(usize, usize)> = edges.iter().map(|&(j, i)| (perm[j - 1], perm[i - 1])).collect();
    Dag::new(m, &e).expect("relabelled DAG")
}

fn closure(m: usize, edges: &[(usize, usize)]) -> Vec<(usize, usize)> {
    // vertices are in topological order 1..=m
    let mut anc: Vec<BTreeSet<usize>> = vec![BTreeSet::new(); m + 1];
    for i in 1..=m {
        for &(j, t) in edges {
            if t == i {
                let extra: Vec<usize> = anc[j].iter().copied().collect();
                anc[i].insert(j);
                anc[i].extend(extra);
            }
        }
    }
    (1..=m).flat_map(|i| anc[i].iter().map(move |&j| (j, i)).collect::<Vec<_>>()).collect()
}

/// Random DAG: each forward pair becomes an edge with probability `p`.
pub fn random_dag(rng: &mut ChaCha8Rng, m: usize, p: f64) -> Dag {
    let mut edges = Vec::new();
    for i in 1..=m {
        for j in 1..i {
            if rng.random_bool(p) {
                edges.push((j, i));
            }
        }
    }
    relabel(rng, m, &edges)
}

/// Transitive closure of a random DAG.
pub fn random_transitive(rng: &mut ChaCha8Rng, m: usize, p: f64) -> Dag {
    let mut edges = Vec::new();
    for i in 1..=m {
        for j in 1..i {
            if rng.random_bool(p) {
                edges.push((j, i));
            }
        }
    }
    relabel(rng, m, &closure(m, &edges))
}

/// Transitive closure of a random rooted tree; it has no unshielded collider.
pub fn arborescence_closure(rng: &mut ChaCha8Rng, m: usize) -> Dag {
    let edges: Vec<(usize, usize)> = (2..=m).map(|i| (rng.random_range(1..i), i)).collect();
    relabel(rng, m, &closure(m, &edges))
}

/// The path `1 -> 2 -> ... -> m` plus random longer forward edges.
pub fn chain_with_shortcuts(rng: &mut ChaCha8Rng, m: usize) -> Dag {
    let mut edges: Vec<(usize, usize)> = (1..m).map(|i| (i, i + 1)).collect();
    for i in 3..=m {
        for j in 1..i - 1 {
            if rng.random_bool(0.4) {
                edges.push((j, i));
            }
        }
    }
    Dag::new(m, &edges).expect("forward edges only")
}

pub fn collider() -> Dag {
    Dag::new(3, &[(1, 3), (2, 3)]).unwrap()
}

/// Star on `m` vertices whose parent columns have rank `r < m - 1` and whose
/// child column is generic, so an MLE exists but is not unique.
pub fn degenerate_star_sample(rng: &mut ChaCha8Rng, n: usize, m: usize, r: usize) -> SampleMatrix {
    let parents = rank_r(rng, n, m - 1, r);
    let child = gaussian(rng, n, 1);
    let mut f = Matrix::zeros(n, m);
    f.view_mut((0, 0), (n, m - 1)).copy_from(&parents);
    f.set_column(m - 1, &child.column(0));
    sample(f)
}
