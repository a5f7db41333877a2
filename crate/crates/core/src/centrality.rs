//! Constraint-induced redistribution of eigenvector centrality: exact
//! dominant eigenpairs of the effective network, first-order eigenpair
//! perturbation, and closed forms for regular, complete, ring and star graphs
//! with a single heterogeneous agent.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::constraints::{effective_adjacency, ConstraintSet};
use crate::error::{Error, Result};
use crate::graphs::{Eigenpair, Graph};
use crate::linalg::{self, direction_error};

/// Relative eigenvalue cutoff of the pseudo-inverse of (A − dI)².
pub const PINV_CUTOFF: f64 = 1e-10;

/// Two constraint directions closer than this are treated as identical.
const SAME_DIRECTION: f64 = 1e-12;

/// Symmetric K, its entrywise derivative K' = dK/dδ, and an eigenpair of K.
#[derive(Debug, Clone, PartialEq)]
pub struct PerturbationInputs {
    pub k: DMatrix<f64>,
    pub k_prime: DMatrix<f64>,
    pub lambda: f64,
    pub v: DVector<f64>,
}

impl PerturbationInputs {
    /// Uses the dominant eigenpair of `k`.
    pub fn dominant(k: DMatrix<f64>, k_prime: DMatrix<f64>) -> Result<Self> {
        let pair = linalg::dominant_symmetric(&k)?;
        Ok(Self {
            k,
            k_prime,
            lambda: pair.value,
            v: pair.vector,
        })
    }
}

/// First-order estimates λ + δ vᵀK'v and v − δ [F² + 2vvᵀ]⁻¹ F K' v, F = K − λI.
pub fn eigenpair_perturbation(input: &PerturbationInputs, delta: f64) -> Result<(f64, DVector<f64>)> {
    let PerturbationInputs { k, k_prime, lambda, v } = input;
    let n = k.nrows();
    if k.ncols() != n || k_prime.shape() != (n, n) || v.len() != n {
        return Err(Error::Dimension("perturbation inputs disagree in size".into()));
    }
    if linalg::max_abs(&(k - k.transpose())) > 1e-12 || linalg::max_abs(&(k_prime - k_prime.transpose())) > 1e-12 {
        return Err(Error::Validation("K and K' must be symmetric".into()));
    }
    if (v.norm() - 1.0).abs() > 1e-10 {
        return Err(Error::Domain("eigenvector must have unit norm".into()));
    }
    if (k * v - v * *lambda).norm() > 1e-10 * (1.0 + lambda.abs()) {
        return Err(Error::Domain("(lambda, v) is not an eigenpair of K".into()));
    }
    let f = k - DMatrix::identity(n, n) * *lambda;
    let bracket = &f * &f + v * v.transpose() * 2.0;
    let spectrum = linalg::symmetric_spectrum(&bracket)?;
    let (lo, hi) = (spectrum.values[n - 1], spectrum.values[0]);
    if lo <= 1e-12 * hi.max(1.0) {
        return Err(Error::NonSimpleEigenvalue {
            value: *lambda,
            gap: lo.max(0.0).sqrt(),
        });
    }
    let rhs = &f * (k_prime * v);
    let dv = -bracket
        .cholesky()
        .ok_or_else(|| Error::Numeric("perturbation bracket is not positive definite".into()))?
        .solve(&rhs);
    let dlambda = v.dot(&(k_prime * v));
    Ok((lambda + delta * dlambda, v + dv * delta))
}

/// Closed-form centrality estimate with its eigenvalue.
#[derive(Debug, Clone, PartialEq)]
pub struct Approximation {
    pub method: String,
    pub vector: DVector<f64>,
    pub lambda: f64,
}

/// (−d² + d, m_12, …, m_1N) where m_1j counts mutual neighbours of 1 and j.
pub fn mutual_neighbor_vector(g: &Graph, d: f64) -> DVector<f64> {
    let a = g.adjacency();
    let a2 = a * a;
    let mut r = a2.row(0).transpose();
    r[0] = -d * d + d;
    r
}

/// Node 1 carries the heterogeneous constraint and all other agents share
/// one; `aligned` is p̂₁ᵀp̂₂.
pub fn regular_approx(g: &Graph, aligned: f64) -> Result<Approximation> {
    let d = g
        .regular_degree()
        .ok_or_else(|| Error::Domain("graph is not unweighted and regular".into()))? as f64;
    if !g.is_connected() {
        return Err(Error::Domain("graph is not connected".into()));
    }
    let n = g.n();
    let shifted = g.adjacency() - DMatrix::identity(n, n) * d;
    let pinv = linalg::symmetric_pseudo_inverse(&(&shifted * &shifted), PINV_CUTOFF)?;
    let b = DMatrix::from_element(n, n, 1.0 / (2.0 * n as f64)) + pinv;
    let r = mutual_neighbor_vector(g, d);
    let vector = DVector::from_element(n, 1.0) + b * r * (1.0 - aligned);
    Ok(Approximation {
        method: "regular".into(),
        vector,
        lambda: d * (1.0 - 2.0 / n as f64 * (1.0 - aligned)),
    })
}

/// Complete-graph specialization of [`regular_approx`]:
/// 1 + (1 − a)(N − 2)/N² · (−N + 1, 1, …, 1).
pub fn complete_approx(n: usize, aligned: f64) -> Result<DVector<f64>> {
    if n < 3 {
        return Err(Error::Domain(format!("complete-graph closed form needs n >= 3, got {n}")));
    }
    let nf = n as f64;
    let scale = (1.0 - aligned) * (nf - 2.0) / (nf * nf);
    Ok(DVector::from_fn(n, |i, _| {
        1.0 + scale * if i == 0 { 1.0 - nf } else { 1.0 }
    }))
}

/// Ring specialization of [`regular_approx`] with δ = a − 1.
pub fn ring_approx(n: usize, aligned: f64) -> Result<DVector<f64>> {
    let delta = aligned - 1.0;
    match n {
        0..=2 => Err(Error::Domain(format!("ring closed form needs n >= 3, got {n}"))),
        3 => Ok(DVector::from_vec(vec![1.0, 1.0, 1.0]) - DVector::from_vec(vec![-2.0, 1.0, 1.0]) * (delta / 9.0)),
        4 => Ok(DVector::from_element(4, 1.0) - DVector::from_vec(vec![-1.0, 0.0, 1.0, 0.0]) * (delta / 2.0)),
        _ => {
            // Conjugate Fourier modes pair into cosines; the sine sum must cancel.
            let nf = n as f64;
            let mut out = DVector::from_element(n, 1.0);
            for j in 0..n {
                let (mut re, mut im) = (0.0, 0.0);
                for k in 1..n {
                    let weight = 1.0 / (PI * k as f64 / nf).tan().powi(2);
                    let phase = 2.0 * PI * (k * j) as f64 / nf;
                    re += weight * phase.cos();
                    im += weight * phase.sin();
                }
                if im.abs() > 1e-12 * (1.0 + re.abs()) {
                    return Err(Error::Numeric(format!("imaginary residue {im:e} in ring closed form")));
                }
                out[j] += delta / nf * re;
            }
            Ok(out)
        }
    }
}

/// Dominant eigenpair of a star whose hub (node 1) has alignments
/// `alignments[j]` with leaf j + 2: λ = S = ‖alignments‖, v ∝ (S, alignments).
pub fn star_exact(n: usize, alignments: &[f64]) -> Result<(f64, DVector<f64>)> {
    if n < 2 || alignments.len() != n - 1 {
        return Err(Error::Dimension(format!(
            "star of {n} nodes needs {} alignments, got {}",
            n.saturating_sub(1),
            alignments.len()
        )));
    }
    if let Some(j) = alignments.iter().position(|&a| a == 0.0) {
        return Err(Error::Hypothesis(format!("leaf {} is orthogonal to the hub", j + 2)));
    }
    let s = alignments.iter().map(|a| a * a).sum::<f64>().sqrt();
    let mut v = DVector::from_element(n, s);
    v.rows_mut(1, n - 1).copy_from_slice(alignments);
    Ok((s, v.normalize()))
}

#[derive(Debug, Clone, PartialEq)]
pub struct CentralityReport {
    pub exact: Eigenpair,
    pub approx: Option<Approximation>,
    /// p̂_hᵀp̂ − 1 for the single heterogeneous agent h; 0 when homogeneous;
    /// `None` when several agents differ.
    pub delta: Option<f64>,
    pub error: Option<f64>,
    /// Agents (0-based) by decreasing exact centrality, ties by index.
    pub ranking: Vec<usize>,
}

/// JSON summary `{lambda_exact, lambda_approx, delta, error, ranking}` with
/// 1-based ranking.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportJson {
    pub lambda_exact: f64,
    pub lambda_approx: Option<f64>,
    pub delta: Option<f64>,
    pub error: Option<f64>,
    pub ranking: Vec<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub method: Option<String>,
}

impl CentralityReport {
    pub fn to_json(&self) -> ReportJson {
        ReportJson {
            lambda_exact: self.exact.value,
            lambda_approx: self.approx.as_ref().map(|a| a.lambda),
            delta: self.delta,
            error: self.error,
            ranking: self.ranking.iter().map(|i| i + 1).collect(),
            method: self.approx.as_ref().map(|a| a.method.clone()),
        }
    }

    /// Approximation rescaled to unit norm with the sign that best matches
    /// the exact vector.
    pub fn normalized_approx(&self) -> Option<DVector<f64>> {
        self.approx.as_ref().map(|a| {
            let v = a.vector.normalize();
            if (&v - &self.exact.vector).norm() <= (&v + &self.exact.vector).norm() {
                v
            } else {
                -v
            }
        })
    }

    /// CSV `node,exact,approx,abs_diff`; approx columns are empty when no
    /// closed form applies.
    pub fn to_csv(&self, comments: &[String]) -> String {
        let mut out = String::new();
        for c in comments {
            out.push_str("# ");
            out.push_str(c);
            out.push('\n');
        }
        out.push_str("node,exact,approx,abs_diff\n");
        let approx = self.normalized_approx();
        for (i, e) in self.exact.vector.iter().enumerate() {
            match &approx {
                Some(a) => out.push_str(&format!("{},{},{},{}\n", i + 1, e, a[i], (a[i] - e).abs())),
                None => out.push_str(&format!("{},{},,\n", i + 1, e)),
            }
        }
        out
    }
}

/// Indices by decreasing value; values equal to 1e-12 tie and fall back to index.
pub fn rank_agents(values: &DVector<f64>) -> Vec<usize> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by_key(|&i| (-(values[i] * 1e12).round() as i64, i));
    order
}

fn star_hub(g: &Graph) -> Option<usize> {
    let n = g.n();
    if n < 3 || !g.is_unweighted() {
        return None;
    }
    let hub = (0..n).find(|&i| g.neighbors(i).count() == n - 1)?;
    (0..n)
        .filter(|&i| i != hub)
        .all(|i| g.neighbors(i).eq(std::iter::once(hub)))
        .then_some(hub)
}

/// Index of the single agent whose direction differs from all others, and
/// its alignment with them. `Ok(None)` when every agent agrees.
fn single_heterogeneous(q: &DMatrix<f64>) -> Option<Option<(usize, f64)>> {
    let n = q.nrows();
    let same = |i: usize, k: usize| (q.row(i) - q.row(k)).amax() <= SAME_DIRECTION;
    if (1..n).all(|k| same(0, k)) {
        return Some(None);
    }
    // The majority direction is shared by at least two agents when n >= 3.
    let reference = (0..n).find(|&i| (0..n).filter(|&k| same(i, k)).count() == n - 1)?;
    let odd = (0..n).find(|&i| !same(reference, i))?;
    Some(Some((odd, q.row(odd).dot(&q.row(reference)))))
}

/// Exact centrality of the effective network plus the closed form that fits
/// the graph and constraint pattern.
pub fn influence_report(g: &Graph, c: &ConstraintSet) -> Result<CentralityReport> {
    let en = effective_adjacency(g, c)?;
    let prime = &en.graph_prime;
    let components = prime.components();
    if components.len() > 1 {
        return Err(Error::Disconnected {
            components: components
                .into_iter()
                .map(|comp| comp.into_iter().map(|i| i + 1).collect())
                .collect(),
        });
    }
    let exact = prime.dominant_eigenpair()?;
    let n = g.n();
    let q = c.unit_vectors()?;
    let pattern = single_heterogeneous(&q);

    let mut delta = match pattern {
        Some(None) => Some(0.0),
        Some(Some((_, aligned))) => Some(aligned - 1.0),
        None => None,
    };

    let approx = if let Some(hub) = star_hub(g).filter(|&h| h == 0) {
        let alignments: Vec<f64> = (1..n).map(|j| en.alignment[(hub, j)]).collect();
        let (lambda, vector) = star_exact(n, &alignments)?;
        if pattern.is_none() && alignments.iter().all(|&a| a == alignments[0]) {
            delta = Some(alignments[0] - 1.0);
        }
        Some(Approximation {
            method: "star".into(),
            vector,
            lambda,
        })
    } else if let (Some(d), Some(pattern)) = (g.regular_degree(), pattern) {
        let d = d as f64;
        match pattern {
            None => Some(Approximation {
                method: "regular".into(),
                vector: DVector::from_element(n, 1.0),
                lambda: d,
            }),
            Some((odd, aligned)) => {
                // Rotate labels so the heterogeneous agent becomes node 1.
                let order: Vec<usize> = (0..n).map(|k| (odd + k) % n).collect();
                let rotated = g.permuted(&order);
                let lambda = d * (1.0 - 2.0 / n as f64 * (1.0 - aligned));
                let (method, local) = if n >= 3 && rotated == Graph::complete(n)? {
                    ("complete", complete_approx(n, aligned)?)
                } else if n >= 3 && rotated == Graph::ring(n)? {
                    ("ring", ring_approx(n, aligned)?)
                } else {
                    ("regular", regular_approx(&rotated, aligned)?.vector)
                };
                let mut vector = DVector::zeros(n);
                for (k, &node) in order.iter().enumerate() {
                    vector[node] = local[k];
                }
                Some(Approximation {
                    method: method.into(),
                    vector,
                    lambda,
                })
            }
        }
    } else {
        None
    };

    let error = approx.as_ref().map(|a| direction_error(&a.vector, &exact.vector));
    let ranking = rank_agents(&exact.vector);
    Ok(CentralityReport {
        exact,
        approx,
        delta,
        error,
        ranking,
    })
}

/// Matrix with ones on every edge incident to `node`.
pub fn incident_edge_pattern(g: &Graph, node: usize) -> DMatrix<f64> {
    let n = g.n();
    DMatrix::from_fn(n, n, |i, j| {
        if (i == node || j == node) && g.weight(i, j) != 0.0 {
            1.0
        } else {
            0.0
        }
    })
}
