//! Per-agent projection constraints, the effective (alignment-weighted)
//! network they induce, and effective biases.
//!
//! Scaling a constraint vector by a negative number flips the sign of the
//! agent's row and column in the effective adjacency and of its effective
//! bias. This is allowed and yields signed effective graphs.

use std::collections::BTreeMap;

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graphs::Graph;

/// Gram matrices with a larger condition number are treated as rank-deficient.
pub const GRAM_CONDITION_LIMIT: f64 = 1e12;

/// Orthogonal projector onto the column span of `basis` (N_o x k).
pub fn projection_matrix(basis: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    if basis.ncols() == 0 || basis.nrows() == 0 {
        return Err(Error::Domain("constraint basis is empty".into()));
    }
    if basis.iter().any(|x| !x.is_finite()) {
        return Err(Error::Validation("constraint basis has non-finite entries".into()));
    }
    if basis.column_iter().any(|c| c.norm() == 0.0) {
        return Err(Error::Domain("constraint vector is zero".into()));
    }
    let gram = basis.transpose() * basis;
    let spectrum = SymmetricEigen::new(gram.clone()).eigenvalues;
    let (lo, hi) = spectrum
        .iter()
        .fold((f64::INFINITY, 0.0_f64), |(lo, hi), &x| (lo.min(x), hi.max(x)));
    if lo <= 0.0 || hi / lo > GRAM_CONDITION_LIMIT {
        return Err(Error::Domain(format!(
            "constraint basis is rank-deficient (Gram condition {:e})",
            hi / lo
        )));
    }
    let chol = gram
        .cholesky()
        .ok_or_else(|| Error::Domain("constraint Gram matrix is not positive definite".into()))?;
    let coefficients = chol.solve(&basis.transpose());
    let p = basis * coefficients;
    // Symmetrize away rounding so P = P^T holds exactly.
    Ok((&p + p.transpose()) * 0.5)
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConstraintSet {
    n_options: usize,
    bases: Vec<DMatrix<f64>>,
    projectors: Vec<DMatrix<f64>>,
}

impl ConstraintSet {
    /// Builds from per-agent bases (each N_o x k_i).
    pub fn from_bases(n_options: usize, bases: Vec<DMatrix<f64>>) -> Result<Self> {
        if bases.is_empty() {
            return Err(Error::Domain("constraint set has no agents".into()));
        }
        let mut projectors = Vec::with_capacity(bases.len());
        for (i, basis) in bases.iter().enumerate() {
            if basis.nrows() != n_options {
                return Err(Error::Dimension(format!(
                    "agent {} constraint has {} entries, expected {n_options}",
                    i + 1,
                    basis.nrows()
                )));
            }
            let p = projection_matrix(basis).map_err(|e| match e {
                Error::Domain(msg) => Error::Domain(format!("agent {}: {msg}", i + 1)),
                other => other,
            })?;
            projectors.push(p);
        }
        Ok(Self {
            n_options,
            bases,
            projectors,
        })
    }

    /// Rank-one constraints, one vector per agent.
    pub fn from_vectors(vectors: &[DVector<f64>]) -> Result<Self> {
        let n_options = vectors
            .first()
            .map(|v| v.len())
            .ok_or_else(|| Error::Domain("constraint set has no agents".into()))?;
        let bases = vectors
            .iter()
            .map(|v| DMatrix::from_column_slice(v.len(), 1, v.as_slice()))
            .collect();
        Self::from_bases(n_options, bases)
    }

    pub fn homogeneous(n_agents: usize, vector: &DVector<f64>) -> Result<Self> {
        Self::from_vectors(&vec![vector.clone(); n_agents])
    }

    /// Unconstrained agents (P_i = I).
    pub fn identity(n_agents: usize, n_options: usize) -> Result<Self> {
        Self::from_bases(n_options, vec![DMatrix::identity(n_options, n_options); n_agents])
    }

    pub fn n_agents(&self) -> usize {
        self.bases.len()
    }

    pub fn n_options(&self) -> usize {
        self.n_options
    }

    pub fn rank(&self, agent: usize) -> usize {
        self.bases[agent].ncols()
    }

    pub fn max_rank(&self) -> usize {
        (0..self.n_agents()).map(|i| self.rank(i)).max().unwrap_or(0)
    }

    pub fn is_rank_one(&self) -> bool {
        self.bases.iter().all(|b| b.ncols() == 1)
    }

    pub fn require_rank_one(&self) -> Result<()> {
        match (0..self.n_agents()).find(|&i| self.rank(i) != 1) {
            Some(agent) => Err(Error::UnsupportedRank {
                agent: agent + 1,
                rank: self.rank(agent),
            }),
            None => Ok(()),
        }
    }

    pub fn basis(&self, agent: usize) -> &DMatrix<f64> {
        &self.bases[agent]
    }

    pub fn projector(&self, agent: usize) -> &DMatrix<f64> {
        &self.projectors[agent]
    }

    pub fn complement(&self, agent: usize) -> DMatrix<f64> {
        DMatrix::identity(self.n_options, self.n_options) - &self.projectors[agent]
    }

    /// Normalized constraint vector of a rank-one agent.
    pub fn unit_vector(&self, agent: usize) -> Result<DVector<f64>> {
        if self.rank(agent) != 1 {
            return Err(Error::UnsupportedRank {
                agent: agent + 1,
                rank: self.rank(agent),
            });
        }
        Ok(self.bases[agent].column(0).normalize())
    }

    /// Rows are the normalized constraint vectors (n_agents x N_o).
    pub fn unit_vectors(&self) -> Result<DMatrix<f64>> {
        self.require_rank_one()?;
        let mut q = DMatrix::zeros(self.n_agents(), self.n_options);
        for i in 0..self.n_agents() {
            q.set_row(i, &self.unit_vector(i)?.transpose());
        }
        Ok(q)
    }

    /// Pairwise alignments p̂_iᵀp̂_k, computed as p_iᵀp_k / sqrt(‖p_i‖²‖p_k‖²)
    /// so that identical constraints align to exactly 1.
    pub fn alignment(&self) -> Result<DMatrix<f64>> {
        self.require_rank_one()?;
        let n = self.n_agents();
        let raw: Vec<_> = self.bases.iter().map(|b| b.column(0)).collect();
        let sq: Vec<f64> = raw.iter().map(|p| p.norm_squared()).collect();
        Ok(DMatrix::from_fn(n, n, |i, k| {
            (raw[i].dot(&raw[k]) / (sq[i] * sq[k]).sqrt()).clamp(-1.0, 1.0)
        }))
    }

    /// Orthogonal projection of every agent's opinion onto its constraint subspace.
    pub fn project_state(&self, state: &DMatrix<f64>) -> DMatrix<f64> {
        let mut out = state.clone();
        for i in 0..self.n_agents() {
            let row = &self.projectors[i] * state.row(i).transpose();
            out.set_row(i, &row.transpose());
        }
        out
    }

    /// Per-agent norm of the component outside the constraint subspace.
    pub fn violation(&self, state: &DMatrix<f64>) -> Vec<f64> {
        (0..self.n_agents())
            .map(|i| (self.complement(i) * state.row(i).transpose()).norm())
            .collect()
    }
}

/// Constraint document:
/// `{"options": N_o, "vectors": {"1": [..]}, "default": [..], "bases": {"3": [[..], [..]]}}`.
/// Agent keys are 1-based; `bases` lists column vectors for higher-rank agents.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConstraintFile {
    pub options: usize,
    #[serde(default)]
    pub vectors: BTreeMap<String, Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub default: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub bases: BTreeMap<String, Vec<Vec<f64>>>,
}

impl ConstraintFile {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Validation(format!("constraint JSON: {e}")))
    }

    pub fn to_set(&self, n_agents: usize) -> Result<ConstraintSet> {
        let mut bases: Vec<Option<DMatrix<f64>>> = vec![None; n_agents];
        let mut assign = |key: &str, basis: DMatrix<f64>| -> Result<()> {
            let agent = parse_agent_key(key, n_agents)?;
            if bases[agent].is_some() {
                return Err(Error::Validation(format!("agent {key} constrained twice")));
            }
            bases[agent] = Some(basis);
            Ok(())
        };
        for (key, v) in &self.vectors {
            assign(key, DMatrix::from_column_slice(v.len(), 1, v))?;
        }
        for (key, columns) in &self.bases {
            let rows = columns.first().map_or(0, |c| c.len());
            if columns.iter().any(|c| c.len() != rows) {
                return Err(Error::Dimension(format!("agent {key} basis columns differ in length")));
            }
            let flat: Vec<f64> = columns.iter().flatten().copied().collect();
            assign(key, DMatrix::from_column_slice(rows, columns.len(), &flat))?;
        }
        let bases = bases
            .into_iter()
            .enumerate()
            .map(|(i, b)| match (b, &self.default) {
                (Some(b), _) => Ok(b),
                (None, Some(d)) => Ok(DMatrix::from_column_slice(d.len(), 1, d)),
                (None, None) => Err(Error::Validation(format!(
                    "agent {} has no constraint and no default is given",
                    i + 1
                ))),
            })
            .collect::<Result<Vec<_>>>()?;
        ConstraintSet::from_bases(self.options, bases)
    }
}

/// Parses a 1-based agent key into a 0-based index.
pub fn parse_agent_key(key: &str, n_agents: usize) -> Result<usize> {
    match key.trim().parse::<usize>() {
        Ok(k) if (1..=n_agents).contains(&k) => Ok(k - 1),
        _ => Err(Error::Validation(format!(
            "agent key {key:?} is not an index in 1..={n_agents}"
        ))),
    }
}

/// Communication graph reweighted by constraint alignment.
#[derive(Debug, Clone, PartialEq)]
pub struct EffectiveNetwork {
    pub graph_prime: Graph,
    pub alignment: DMatrix<f64>,
}

/// [A']_ik = (p̂_iᵀp̂_k) [A]_ik.
pub fn effective_adjacency(g: &Graph, c: &ConstraintSet) -> Result<EffectiveNetwork> {
    if c.n_agents() != g.n() {
        return Err(Error::Dimension(format!(
            "{} constraints for {} agents",
            c.n_agents(),
            g.n()
        )));
    }
    let alignment = c.alignment()?;
    let mut a = g.adjacency().component_mul(&alignment);
    a.fill_diagonal(0.0);
    // Alignment is symmetric only up to rounding; mirror the upper triangle.
    for i in 0..g.n() {
        for k in (i + 1)..g.n() {
            a[(k, i)] = a[(i, k)];
        }
    }
    Ok(EffectiveNetwork {
        graph_prime: Graph::from_matrix_unchecked(a),
        alignment,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct BiasField {
    pub b: DMatrix<f64>,
    pub b_e: DVector<f64>,
}

/// b_ei = p̂_iᵀ b_i.
pub fn effective_bias(c: &ConstraintSet, b: &DMatrix<f64>) -> Result<BiasField> {
    if b.nrows() != c.n_agents() || b.ncols() != c.n_options() {
        return Err(Error::Dimension(format!(
            "bias is {}x{}, expected {}x{}",
            b.nrows(),
            b.ncols(),
            c.n_agents(),
            c.n_options()
        )));
    }
    let q = c.unit_vectors()?;
    let b_e = DVector::from_fn(c.n_agents(), |i, _| q.row(i).dot(&b.row(i)));
    Ok(BiasField { b: b.clone(), b_e })
}
