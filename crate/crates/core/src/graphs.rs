//! Undirected weighted signed graphs and their spectral properties.

use std::collections::VecDeque;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg;

/// Constructor recipes. Node 1 of a star is the hub.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum GraphSpec {
    Ring { n: usize },
    Star { n: usize },
    Complete { n: usize },
    /// Node i is joined to i ± o (mod n) for every offset o.
    CirculantRegular { n: usize, offsets: Vec<usize> },
    /// Dense adjacency given row by row.
    Custom { adjacency: Vec<Vec<f64>> },
    /// Edge list with 1-based node indices.
    Edges { n: usize, edges: Vec<(usize, usize, f64)> },
}

/// Edge-list document `{"n": .., "edges": [[i, j, w], ..]}` with 1-based indices.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EdgeListFile {
    pub n: usize,
    pub edges: Vec<(usize, usize, f64)>,
}

impl EdgeListFile {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Validation(format!("graph JSON: {e}")))
    }

    pub fn to_graph(&self) -> Result<Graph> {
        Graph::from_edges(self.n, &self.edges)
    }
}

/// Symmetric adjacency with zero diagonal and finite entries.
#[derive(Debug, Clone, PartialEq)]
pub struct Graph {
    adjacency: DMatrix<f64>,
}

/// Unit-norm eigenvector with its eigenvalue and relative spectral gap.
#[derive(Debug, Clone, PartialEq)]
pub struct Eigenpair {
    pub value: f64,
    pub vector: DVector<f64>,
    pub gap: f64,
}

impl Eigenpair {
    pub fn is_simple(&self) -> bool {
        self.gap >= linalg::SIMPLICITY_GAP
    }
}

/// Witness two-colouring; indices are 0-based.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Bipartition {
    pub first: Vec<usize>,
    pub second: Vec<usize>,
}

impl Graph {
    pub fn build(spec: &GraphSpec) -> Result<Self> {
        match spec {
            GraphSpec::Ring { n } => Self::ring(*n),
            GraphSpec::Star { n } => Self::star(*n),
            GraphSpec::Complete { n } => Self::complete(*n),
            GraphSpec::CirculantRegular { n, offsets } => Self::circulant(*n, offsets),
            GraphSpec::Custom { adjacency } => {
                let n = adjacency.len();
                if adjacency.iter().any(|row| row.len() != n) {
                    return Err(Error::Validation("adjacency matrix is not square".into()));
                }
                Self::from_matrix(DMatrix::from_fn(n, n, |i, j| adjacency[i][j]))
            }
            GraphSpec::Edges { n, edges } => Self::from_edges(*n, edges),
        }
    }

    pub fn ring(n: usize) -> Result<Self> {
        check_order(n, 3, "ring")?;
        Self::circulant(n, &[1])
    }

    pub fn star(n: usize) -> Result<Self> {
        check_order(n, 2, "star")?;
        let mut a = DMatrix::zeros(n, n);
        for j in 1..n {
            a[(0, j)] = 1.0;
            a[(j, 0)] = 1.0;
        }
        Ok(Self { adjacency: a })
    }

    pub fn complete(n: usize) -> Result<Self> {
        check_order(n, 2, "complete graph")?;
        Ok(Self {
            adjacency: DMatrix::from_fn(n, n, |i, j| if i == j { 0.0 } else { 1.0 }),
        })
    }

    pub fn circulant(n: usize, offsets: &[usize]) -> Result<Self> {
        check_order(n, 2, "circulant graph")?;
        if offsets.is_empty() {
            return Err(Error::Domain("circulant graph needs at least one offset".into()));
        }
        let mut a = DMatrix::zeros(n, n);
        for &o in offsets {
            let o = o % n;
            if o == 0 {
                return Err(Error::Domain(format!("circulant offset must be nonzero mod {n}")));
            }
            for i in 0..n {
                let j = (i + o) % n;
                a[(i, j)] = 1.0;
                a[(j, i)] = 1.0;
            }
        }
        Ok(Self { adjacency: a })
    }

    pub fn from_edges(n: usize, edges: &[(usize, usize, f64)]) -> Result<Self> {
        check_order(n, 2, "graph")?;
        let mut a = DMatrix::zeros(n, n);
        for &(i, j, w) in edges {
            if i == 0 || j == 0 || i > n || j > n {
                return Err(Error::Validation(format!(
                    "edge ({i}, {j}) out of range for n = {n} (indices are 1-based)"
                )));
            }
            if i == j {
                return Err(Error::Validation(format!("self-loop at node {i}")));
            }
            let (r, c) = (i - 1, j - 1);
            if a[(r, c)] != 0.0 && a[(r, c)] != w {
                return Err(Error::Validation(format!(
                    "conflicting weights for edge ({i}, {j})"
                )));
            }
            a[(r, c)] = w;
            a[(c, r)] = w;
        }
        Self::from_matrix(a)
    }

    pub fn from_matrix(adjacency: DMatrix<f64>) -> Result<Self> {
        let n = adjacency.nrows();
        if adjacency.ncols() != n {
            return Err(Error::Validation("adjacency matrix is not square".into()));
        }
        check_order(n, 2, "graph")?;
        if let Some(violation) = adjacency_violation(&adjacency) {
            return Err(Error::Validation(violation));
        }
        Ok(Self { adjacency })
    }

    /// Skips validation; callers guarantee the invariants.
    pub(crate) fn from_matrix_unchecked(adjacency: DMatrix<f64>) -> Self {
        debug_assert!(adjacency_violation(&adjacency).is_none());
        Self { adjacency }
    }

    pub fn n(&self) -> usize {
        self.adjacency.nrows()
    }

    pub fn adjacency(&self) -> &DMatrix<f64> {
        &self.adjacency
    }

    pub fn weight(&self, i: usize, j: usize) -> f64 {
        self.adjacency[(i, j)]
    }

    pub fn neighbors(&self, i: usize) -> impl Iterator<Item = usize> + '_ {
        (0..self.n()).filter(move |&j| self.adjacency[(i, j)] != 0.0)
    }

    /// Weighted degree (row sum).
    pub fn degree(&self, i: usize) -> f64 {
        self.adjacency.row(i).sum()
    }

    pub fn is_unsigned(&self) -> bool {
        self.adjacency.iter().all(|&w| w >= 0.0)
    }

    pub fn is_unweighted(&self) -> bool {
        self.adjacency.iter().all(|&w| w == 0.0 || w == 1.0)
    }

    /// Common degree when the graph is unweighted and regular.
    pub fn regular_degree(&self) -> Option<usize> {
        if !self.is_unweighted() {
            return None;
        }
        let d = self.degree(0);
        (0..self.n())
            .all(|i| self.degree(i) == d)
            .then_some(d as usize)
    }

    /// Connected components (0-based), ignoring edge signs.
    pub fn components(&self) -> Vec<Vec<usize>> {
        let n = self.n();
        let mut seen = vec![false; n];
        let mut out = Vec::new();
        for root in 0..n {
            if seen[root] {
                continue;
            }
            seen[root] = true;
            let mut comp = vec![root];
            let mut queue = VecDeque::from([root]);
            while let Some(i) = queue.pop_front() {
                for j in self.neighbors(i) {
                    if !seen[j] {
                        seen[j] = true;
                        comp.push(j);
                        queue.push_back(j);
                    }
                }
            }
            comp.sort_unstable();
            out.push(comp);
        }
        out
    }

    pub fn is_connected(&self) -> bool {
        self.components().len() == 1
    }

    /// Sign-consistent breadth-first labeling. Node 1 always lands in the first set.
    pub fn structural_balance(&self) -> Result<Option<Bipartition>> {
        if !self.is_connected() {
            return Err(Error::Domain(
                "structural balance requires a connected graph".into(),
            ));
        }
        let n = self.n();
        let mut side: Vec<Option<bool>> = vec![None; n];
        side[0] = Some(false);
        let mut queue = VecDeque::from([0]);
        while let Some(i) = queue.pop_front() {
            let si = side[i].expect("queued nodes are labeled");
            for j in self.neighbors(i) {
                let expected = if self.adjacency[(i, j)] > 0.0 { si } else { !si };
                match side[j] {
                    None => {
                        side[j] = Some(expected);
                        queue.push_back(j);
                    }
                    Some(sj) if sj != expected => return Ok(None),
                    Some(_) => {}
                }
            }
        }
        let (first, second): (Vec<usize>, Vec<usize>) =
            (0..n).partition(|&i| side[i] == Some(false));
        Ok(Some(Bipartition { first, second }))
    }

    pub fn is_structurally_balanced(&self) -> Result<(bool, Option<Bipartition>)> {
        let witness = self.structural_balance()?;
        Ok((witness.is_some(), witness))
    }

    /// Largest eigenvalue by signed value with its oriented unit eigenvector.
    pub fn dominant_eigenpair(&self) -> Result<Eigenpair> {
        if !self.is_connected() {
            return Err(Error::Domain(
                "dominant eigenpair requires a connected graph".into(),
            ));
        }
        linalg::dominant_symmetric(&self.adjacency)
    }

    /// Graph with nodes relabeled so that new node k is old node `order[k]`.
    pub fn permuted(&self, order: &[usize]) -> Self {
        let n = self.n();
        Self {
            adjacency: DMatrix::from_fn(n, n, |i, j| self.adjacency[(order[i], order[j])]),
        }
    }
}

fn check_order(n: usize, min: usize, what: &str) -> Result<()> {
    if n < min {
        Err(Error::Domain(format!("{what} needs at least {min} nodes, got {n}")))
    } else {
        Ok(())
    }
}

/// Names the first broken adjacency invariant, if any.
pub fn adjacency_violation(a: &DMatrix<f64>) -> Option<String> {
    let n = a.nrows();
    if a.ncols() != n {
        return Some("adjacency matrix is not square".into());
    }
    for i in 0..n {
        for j in 0..n {
            let w = a[(i, j)];
            if !w.is_finite() {
                return Some(format!("non-finite weight at ({}, {})", i + 1, j + 1));
            }
            if i == j && w != 0.0 {
                return Some(format!("self-loop: nonzero diagonal at node {}", i + 1));
            }
            if w != a[(j, i)] {
                return Some(format!("asymmetric adjacency at ({}, {})", i + 1, j + 1));
            }
        }
    }
    None
}
