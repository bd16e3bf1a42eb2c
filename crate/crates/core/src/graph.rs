//! Directed acyclic graphs and the combinatorial invariants that govern
//! existence and uniqueness of the MLE.
//!
//! Vertices are numbered `1..=m` in the public API. Internally parents are
//! stored 0-indexed.

use std::collections::BTreeSet;
use std::fmt;

use crate::error::{Error, Result};
use crate::mle::Classification;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Dag {
    m: usize,
    // parents[i] sorted ascending, 0-indexed
    parents: Vec<Vec<usize>>,
    topo: Vec<usize>,
}

impl Dag {
    /// Builds a DAG on `m` vertices from 1-indexed edges `(j, i)` meaning `j -> i`.
    pub fn new(m: usize, edges: &[(usize, usize)]) -> Result<Self> {
        if m == 0 {
            return Err(Error::EmptyGraph);
        }
        let mut parents: Vec<BTreeSet<usize>> = vec![BTreeSet::new(); m];
        for &(j, i) in edges {
            for v in [j, i] {
                if v == 0 || v > m {
                    return Err(Error::VertexOutOfRange { vertex: v, m });
                }
            }
            if i == j {
                return Err(Error::SelfLoop(i));
            }
            if !parents[i - 1].insert(j - 1) {
                return Err(Error::DuplicateEdge(j, i));
            }
        }
        let parents: Vec<Vec<usize>> = parents.into_iter().map(|s| s.into_iter().collect()).collect();
        let topo = topological_order(&parents)?;
        Ok(Self { m, parents, topo })
    }

    pub fn edgeless(m: usize) -> Result<Self> {
        Self::new(m, &[])
    }

    /// Star graph: vertex `m` is the only child, with parents `1..m`.
    pub fn star(m: usize) -> Result<Self> {
        let edges: Vec<_> = (1..m).map(|k| (k, m)).collect();
        Self::new(m, &edges)
    }

    /// Path `1 -> 2 -> ... -> m`.
    pub fn chain(m: usize) -> Result<Self> {
        let edges: Vec<_> = (1..m).map(|k| (k, k + 1)).collect();
        Self::new(m, &edges)
    }

    /// Chain with all shortcuts: `j -> i` for every `j < i`.
    pub fn transitive_tournament(m: usize) -> Result<Self> {
        let mut edges = Vec::new();
        for i in 1..=m {
            for j in 1..i {
                edges.push((j, i));
            }
        }
        Self::new(m, &edges)
    }

    pub fn m(&self) -> usize {
        self.m
    }

    /// All edges `(j, i)`, 1-indexed, ordered by child then parent.
    pub fn edges(&self) -> Vec<(usize, usize)> {
        let mut out = Vec::new();
        for (i, ps) in self.parents.iter().enumerate() {
            out.extend(ps.iter().map(|&j| (j + 1, i + 1)));
        }
        out
    }

    pub fn edge_count(&self) -> usize {
        self.parents.iter().map(Vec::len).sum()
    }

    fn check_vertex(&self, i: usize) -> Result<()> {
        if i == 0 || i > self.m {
            Err(Error::VertexOutOfRange { vertex: i, m: self.m })
        } else {
            Ok(())
        }
    }

    /// Parents of vertex `i`, sorted ascending (1-indexed).
    pub fn parents(&self, i: usize) -> Result<Vec<usize>> {
        self.check_vertex(i)?;
        Ok(self.parents[i - 1].iter().map(|j| j + 1).collect())
    }

    pub(crate) fn parents0(&self, i: usize) -> &[usize] {
        &self.parents[i]
    }

    pub fn has_edge(&self, j: usize, i: usize) -> bool {
        j >= 1 && i >= 1 && i <= self.m && self.parents[i - 1].binary_search(&(j - 1)).is_ok()
    }

    fn adjacent0(&self, a: usize, b: usize) -> bool {
        self.parents[a].binary_search(&b).is_ok() || self.parents[b].binary_search(&a).is_ok()
    }

    /// Vertices with at least one parent (1-indexed).
    pub fn child_vertices(&self) -> Vec<usize> {
        (0..self.m).filter(|&i| !self.parents[i].is_empty()).map(|i| i + 1).collect()
    }

    /// A topological order (1-indexed): parents precede children.
    pub fn topological_order(&self) -> Vec<usize> {
        self.topo.iter().map(|v| v + 1).collect()
    }

    /// Maximum likelihood threshold: `max_i |pa(i)| + 1`.
    pub fn mlt(&self) -> usize {
        self.parents.iter().map(Vec::len).max().unwrap_or(0) + 1
    }

    /// Number of arrows on a longest directed path.
    pub fn depth(&self) -> usize {
        self.longest_paths_ending().into_iter().max().unwrap_or(0)
    }

    // longest path (in arrows) ending at each vertex, 0-indexed
    fn longest_paths_ending(&self) -> Vec<usize> {
        let mut len = vec![0usize; self.m];
        for &v in &self.topo {
            len[v] = self.parents[v].iter().map(|&p| len[p] + 1).max().unwrap_or(0);
        }
        len
    }

    /// Number of arrows on a longest directed path starting at each vertex
    /// (indexed by vertex - 1).
    pub fn longest_paths_from(&self) -> Vec<usize> {
        let mut len = vec![0usize; self.m];
        for &v in self.topo.iter().rev() {
            for &p in &self.parents[v] {
                len[p] = len[p].max(len[v] + 1);
            }
        }
        len
    }

    /// True iff `k -> j -> i` always implies `k -> i`.
    pub fn is_transitive(&self) -> bool {
        (0..self.m).all(|i| {
            self.parents[i].iter().all(|&j| self.parents[j].iter().all(|k| self.parents[i].binary_search(k).is_ok()))
        })
    }

    /// All unshielded colliders `(j, i, k)` with `j -> i <- k`, `j < k`, and
    /// `j`, `k` non-adjacent. 1-indexed, sorted lexicographically by `(i, j, k)`.
    pub fn unshielded_colliders(&self) -> Vec<(usize, usize, usize)> {
        let mut out = Vec::new();
        for i in 0..self.m {
            let ps = &self.parents[i];
            for (a, &j) in ps.iter().enumerate() {
                for &k in &ps[a + 1..] {
                    if !self.adjacent0(j, k) {
                        out.push((j + 1, i + 1, k + 1));
                    }
                }
            }
        }
        out
    }

    /// The row of the regime table for `n` samples. Only defined for
    /// transitive DAGs.
    pub fn regime(&self, n: usize) -> Result<Regime> {
        if !self.is_transitive() {
            return Err(Error::NotTransitive);
        }
        let d = self.depth();
        let mlt = self.mlt();
        Ok(if n <= d {
            Regime::BelowDepth
        } else if n < mlt {
            Regime::Between
        } else if self.unshielded_colliders().is_empty() {
            Regime::AboveNoColliders
        } else {
            Regime::AboveWithColliders
        })
    }

    /// True if exactly one vertex has parents and every other vertex is one of them.
    pub fn is_star(&self) -> bool {
        let children = self.child_vertices();
        children.len() == 1 && self.parents[children[0] - 1].len() == self.m - 1
    }
}

fn topological_order(parents: &[Vec<usize>]) -> Result<Vec<usize>> {
    let m = parents.len();
    let mut children: Vec<Vec<usize>> = vec![Vec::new(); m];
    let mut indeg = vec![0usize; m];
    for (i, ps) in parents.iter().enumerate() {
        indeg[i] = ps.len();
        for &j in ps {
            children[j].push(i);
        }
    }
    let mut ready: BTreeSet<usize> = (0..m).filter(|&v| indeg[v] == 0).collect();
    let mut order = Vec::with_capacity(m);
    while let Some(v) = ready.pop_first() {
        order.push(v);
        for &c in &children[v] {
            indeg[c] -= 1;
            if indeg[c] == 0 {
                ready.insert(c);
            }
        }
    }
    if order.len() < m {
        let stuck = (0..m).find(|&v| indeg[v] > 0).unwrap_or(0);
        return Err(Error::Cycle(stuck + 1));
    }
    Ok(order)
}

/// Rows of the table of possible MLE behaviours for transitive DAGs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Regime {
    /// `n <= depth`
    BelowDepth,
    /// `depth < n < mlt`
    Between,
    /// `n >= mlt` and the graph has an unshielded collider
    AboveWithColliders,
    /// `n >= mlt` and no unshielded collider
    AboveNoColliders,
}

impl Regime {
    pub fn label(self) -> &'static str {
        match self {
            Regime::BelowDepth => "below-depth",
            Regime::Between => "between",
            Regime::AboveWithColliders => "above-with-colliders",
            Regime::AboveNoColliders => "above-no-colliders",
        }
    }

    /// Outcomes that can occur for some sample in this regime.
    pub fn outcomes(self) -> &'static [Classification] {
        use Classification::*;
        match self {
            Regime::BelowDepth => &[Nonexistent],
            Regime::Between => &[Nonexistent, ExistsNonUnique],
            Regime::AboveWithColliders => &[Nonexistent, ExistsNonUnique, ExistsUnique],
            Regime::AboveNoColliders => &[Nonexistent, ExistsUnique],
        }
    }
}

impl fmt::Display for Regime {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}
