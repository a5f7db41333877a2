//! Critical attention, origin Jacobian, Lyapunov–Schmidt coefficients of the
//! pitchfork at the neutral state, and equilibrium diagrams of the reduced
//! system (closed-form unfolding roots and Newton continuation).

use std::f64::consts::PI;
use std::fmt;

use nalgebra::linalg::Schur;
use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::constraints::{effective_adjacency, effective_bias, ConstraintSet, EffectiveNetwork};
use crate::dynamics::{NodParams, ReducedModel};
use crate::error::{Error, Result};
use crate::graphs::Graph;
use crate::linalg::{self, SIMPLICITY_GAP};

pub const NEWTON_TOL: f64 = 1e-12;
pub const NEWTON_MAX_ITER: usize = 100;
/// Residual bound every stored equilibrium satisfies.
pub const EQUILIBRIUM_TOL: f64 = 1e-10;
pub const DEDUP_DISTANCE: f64 = 1e-6;
const STABILITY_EPS: f64 = 1e-9;
const SCHUR_MAX_ITER: usize = 10_000;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CriticalAttention {
    pub u_star: f64,
    /// Positive threshold: the pitchfork opens for increasing u.
    pub supercritical: bool,
}

/// u* = d / (α + λγ).
pub fn critical_attention(p: &NodParams, lambda: f64) -> Result<CriticalAttention> {
    let denom = p.alpha + lambda * p.gamma;
    if denom.abs() <= 1e-12 {
        return Err(Error::DegenerateThreshold(denom));
    }
    let u_star = p.d / denom;
    Ok(CriticalAttention {
        u_star,
        supercritical: u_star > 0.0,
    })
}

/// J = (uα − d) I + uγ A'.
pub fn jacobian_origin(p: &NodParams, en: &EffectiveNetwork, u: f64) -> DMatrix<f64> {
    let a = en.graph_prime.adjacency();
    let n = a.nrows();
    a * (u * p.gamma) + DMatrix::identity(n, n) * (u * p.alpha - p.d)
}

/// Largest eigenvalue of the origin Jacobian at attention `u`.
pub fn leading_origin_eigenvalue(p: &NodParams, en: &EffectiveNetwork, u: f64) -> Result<f64> {
    Ok(linalg::symmetric_spectrum(&jacobian_origin(p, en, u))?.values[0])
}

/// Bisection for the attention at which the leading origin eigenvalue crosses
/// zero inside `[lo, hi]`.
pub fn bisect_critical_attention(p: &NodParams, en: &EffectiveNetwork, lo: f64, hi: f64, tol: f64) -> Result<f64> {
    let f = |u: f64| leading_origin_eigenvalue(p, en, u);
    let (mut lo, mut hi) = (lo, hi);
    let (mut flo, fhi) = (f(lo)?, f(hi)?);
    if flo.signum() == fhi.signum() {
        return Err(Error::Domain(format!(
            "leading eigenvalue does not change sign on [{lo}, {hi}]"
        )));
    }
    while hi - lo > tol {
        let mid = 0.5 * (lo + hi);
        let fm = f(mid)?;
        if fm == 0.0 {
            return Ok(mid);
        }
        if fm.signum() == flo.signum() {
            lo = mid;
            flo = fm;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Truncated Lyapunov–Schmidt reduction h(x, u) = a (u − u*) x + b x³ + vᵀb_e.
#[derive(Debug, Clone, PartialEq)]
pub struct LsReduction {
    pub u_star: f64,
    pub a: f64,
    /// Cubic Taylor coefficient of h, i.e. `third_derivative / 6`.
    pub b_cubic: f64,
    /// vᵀ (d³Φ)(v, v, v) at (0, u*).
    pub third_derivative: f64,
    pub unfold: f64,
    pub v: DVector<f64>,
    pub lambda: f64,
}

impl LsReduction {
    pub fn h(&self, x: f64, u: f64) -> f64 {
        self.a * (u - self.u_star) * x + self.b_cubic * x.powi(3) + self.unfold
    }

    pub fn h_x(&self, x: f64, u: f64) -> f64 {
        self.a * (u - self.u_star) + 3.0 * self.b_cubic * x * x
    }

    /// Amplitude of the symmetric branches, when they exist at `u`.
    pub fn pitchfork_amplitude(&self, u: f64) -> Option<f64> {
        let r = self.a * (u - self.u_star) / -self.b_cubic;
        (r > 0.0).then(|| r.sqrt())
    }

    /// Real roots of h(·, u) in increasing order.
    pub fn roots(&self, u: f64) -> Vec<f64> {
        real_cubic_roots(self.b_cubic, self.a * (u - self.u_star), self.unfold)
    }
}

/// Reduction at the eigenvalue of A' with index `mode` in decreasing order
/// (0 is the dominant mode).
pub fn ls_coefficients(
    p: &NodParams,
    g: &Graph,
    c: &ConstraintSet,
    b: &DMatrix<f64>,
    mode: usize,
) -> Result<LsReduction> {
    let en = effective_adjacency(g, c)?;
    let bf = effective_bias(c, b)?;
    let spectrum = linalg::symmetric_spectrum(en.graph_prime.adjacency())?;
    if mode >= spectrum.values.len() {
        return Err(Error::Domain(format!("mode {mode} out of range for n = {}", g.n())));
    }
    let pair = spectrum.eigenpair(mode);
    if pair.gap < SIMPLICITY_GAP {
        return Err(Error::NonSimpleEigenvalue {
            value: pair.value,
            gap: pair.gap,
        });
    }
    let crit = critical_attention(p, pair.value)?;
    let v = pair.vector;
    let q = c.unit_vectors()?;
    let a_graph = g.adjacency();

    // w_ij = α v_i p̂_ij + γ Σ_k A_ik v_k p̂_kj
    let mut vq = q.clone();
    for (i, mut row) in vq.row_iter_mut().enumerate() {
        row *= v[i];
    }
    let w = &vq * p.alpha + a_graph * &vq * p.gamma;
    let sum: f64 = (0..g.n())
        .map(|i| v[i] * (0..c.n_options()).map(|j| q[(i, j)] * w[(i, j)].powi(3)).sum::<f64>())
        .sum();
    let third = p.sigmoid.third_derivative_at_zero() * crit.u_star.powi(3) * sum;

    Ok(LsReduction {
        u_star: crit.u_star,
        a: p.alpha + pair.value * p.gamma,
        b_cubic: third / 6.0,
        third_derivative: third,
        unfold: v.dot(&bf.b_e),
        v,
        lambda: pair.value,
    })
}

/// Real roots of b x³ + c x + e = 0, sorted, each polished by Newton steps.
pub fn real_cubic_roots(b: f64, c: f64, e: f64) -> Vec<f64> {
    if b == 0.0 {
        return if c != 0.0 { vec![-e / c] } else { Vec::new() };
    }
    // Depressed monic form x³ + p x + q = 0.
    let (p, q) = (c / b, e / b);
    let disc = -(4.0 * p.powi(3) + 27.0 * q * q);
    let scale = (p.abs().powi(3)).max(q * q).max(f64::MIN_POSITIVE);
    let mut roots = if p == 0.0 && q == 0.0 {
        vec![0.0]
    } else if disc > 1e-14 * scale && p < 0.0 {
        let m = 2.0 * (-p / 3.0).sqrt();
        let arg = ((3.0 * q) / (p * m)).clamp(-1.0, 1.0);
        let theta = arg.acos() / 3.0;
        (0..3).map(|k| m * (theta - 2.0 * PI * k as f64 / 3.0).cos()).collect()
    } else if disc < -1e-14 * scale || p == 0.0 {
        let s = (q * q / 4.0 + p.powi(3) / 27.0).max(0.0).sqrt();
        vec![(-q / 2.0 + s).cbrt() + (-q / 2.0 - s).cbrt()]
    } else {
        // Double root.
        vec![3.0 * q / p, -3.0 * q / (2.0 * p)]
    };
    for r in roots.iter_mut() {
        for _ in 0..3 {
            let f = r.powi(3) + p * *r + q;
            let df = 3.0 * *r * *r + p;
            if df.abs() > 1e-300 {
                let step = f / df;
                if step.is_finite() {
                    *r -= step;
                }
            }
        }
    }
    roots.sort_by(f64::total_cmp);
    roots.dedup_by(|a, b| (*a - *b).abs() <= 1e-12 * (1.0 + a.abs()));
    roots
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Stability {
    Stable,
    Unstable,
    Neutral,
}

impl Stability {
    /// From the largest real part of the linearization's spectrum.
    pub fn from_leading_real_part(re: f64) -> Self {
        if re < -STABILITY_EPS {
            Stability::Stable
        } else if re > STABILITY_EPS {
            Stability::Unstable
        } else {
            Stability::Neutral
        }
    }
}

impl fmt::Display for Stability {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Stability::Stable => "stable",
            Stability::Unstable => "unstable",
            Stability::Neutral => "neutral",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DiagramMethod {
    UnfoldingPolynomial,
    NewtonContinuation,
}

impl fmt::Display for DiagramMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            DiagramMethod::UnfoldingPolynomial => "unfolding_polynomial",
            DiagramMethod::NewtonContinuation => "newton_continuation",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DiagramPoint {
    pub u: f64,
    pub branch: usize,
    pub stability: Stability,
    /// Coordinate along the critical eigenvector, vᵀy*.
    pub x_ls: f64,
    pub y: DVector<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BifurcationDiagram {
    pub method: DiagramMethod,
    /// Sorted by u, then by x_ls.
    pub points: Vec<DiagramPoint>,
    /// Grid values of u at which no equilibrium was found.
    pub gaps: Vec<f64>,
}

impl BifurcationDiagram {
    /// Distinct u values in grid order.
    pub fn grid(&self) -> Vec<f64> {
        let mut out: Vec<f64> = Vec::new();
        for p in &self.points {
            if out.last() != Some(&p.u) {
                out.push(p.u);
            }
        }
        out
    }

    pub fn points_at(&self, u: f64) -> Vec<&DiagramPoint> {
        self.points.iter().filter(|p| p.u == u).collect()
    }

    pub fn branch_ids(&self) -> Vec<usize> {
        let mut ids: Vec<usize> = self.points.iter().map(|p| p.branch).collect();
        ids.sort_unstable();
        ids.dedup();
        ids
    }

    pub fn branch(&self, id: usize) -> Vec<&DiagramPoint> {
        self.points.iter().filter(|p| p.branch == id).collect()
    }

    /// CSV `u,branch_id,stability,x_ls,y_1..y_n`, gaps as `# gap u=..` lines.
    pub fn to_csv(&self, comments: &[String]) -> String {
        write_csv(&[self], comments, false)
    }
}

/// Several diagrams in one CSV; with `method_column` each row starts with the
/// diagram's method.
pub fn write_csv(diagrams: &[&BifurcationDiagram], comments: &[String], method_column: bool) -> String {
    let mut out = String::new();
    for c in comments {
        out.push_str("# ");
        out.push_str(c);
        out.push('\n');
    }
    let n = diagrams
        .iter()
        .flat_map(|d| d.points.first())
        .map(|p| p.y.len())
        .max()
        .unwrap_or(0);
    let mut header = Vec::new();
    if method_column {
        header.push("method".to_string());
    }
    header.extend(["u", "branch_id", "stability", "x_ls"].map(String::from));
    header.extend((1..=n).map(|i| format!("y_{i}")));
    out.push_str(&header.join(","));
    out.push('\n');
    for d in diagrams {
        for u in &d.gaps {
            out.push_str(&format!("# gap method={} u={u}\n", d.method));
        }
        for p in &d.points {
            let mut row = Vec::with_capacity(n + 5);
            if method_column {
                row.push(d.method.to_string());
            }
            row.push(p.u.to_string());
            row.push(p.branch.to_string());
            row.push(p.stability.to_string());
            row.push(p.x_ls.to_string());
            row.extend(p.y.iter().map(|x| x.to_string()));
            out.push_str(&row.join(","));
            out.push('\n');
        }
    }
    out
}

/// Inclusive uniform grid.
pub fn linspace(lo: f64, hi: f64, steps: usize) -> Vec<f64> {
    match steps {
        0 => Vec::new(),
        1 => vec![lo],
        _ => (0..steps)
            .map(|k| lo + (hi - lo) * k as f64 / (steps - 1) as f64)
            .collect(),
    }
}

struct Sample {
    u: f64,
    states: Vec<(DVector<f64>, Stability, f64)>,
}

/// Greedy one-to-one nearest-neighbour linking across adjacent samples.
fn link_branches(samples: Vec<Sample>) -> (Vec<DiagramPoint>, Vec<f64>) {
    let mut points = Vec::new();
    let mut gaps = Vec::new();
    let mut previous: Vec<(DVector<f64>, usize)> = Vec::new();
    let mut next_id = 0;
    for sample in samples {
        if sample.states.is_empty() {
            gaps.push(sample.u);
            previous.clear();
            continue;
        }
        let mut pairs: Vec<(f64, usize, usize)> = Vec::new();
        for (ci, (y, _, _)) in sample.states.iter().enumerate() {
            for (pi, (yp, _)) in previous.iter().enumerate() {
                pairs.push(((y - yp).norm(), ci, pi));
            }
        }
        pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
        let mut ids: Vec<Option<usize>> = vec![None; sample.states.len()];
        let mut taken = vec![false; previous.len()];
        for (_, ci, pi) in pairs {
            if ids[ci].is_none() && !taken[pi] {
                ids[ci] = Some(previous[pi].1);
                taken[pi] = true;
            }
        }
        let mut current = Vec::with_capacity(sample.states.len());
        let mut order: Vec<usize> = (0..sample.states.len()).collect();
        order.sort_by(|&a, &b| sample.states[a].2.total_cmp(&sample.states[b].2));
        for ci in order {
            let id = ids[ci].unwrap_or_else(|| {
                next_id += 1;
                next_id - 1
            });
            let (y, stability, x_ls) = &sample.states[ci];
            current.push((y.clone(), id));
            points.push(DiagramPoint {
                u: sample.u,
                branch: id,
                stability: *stability,
                x_ls: *x_ls,
                y: y.clone(),
            });
        }
        previous = current;
    }
    (points, gaps)
}

/// Roots of the truncated reduction on `resolution` grid points of `u_range`.
/// Stored states are the tangent approximations y ≈ x v.
pub fn unfolding_roots(ls: &LsReduction, u_range: (f64, f64), resolution: usize) -> Result<BifurcationDiagram> {
    if ls.b_cubic == 0.0 {
        return Err(Error::Domain("cubic coefficient is zero".into()));
    }
    let samples = linspace(u_range.0, u_range.1, resolution)
        .into_iter()
        .map(|u| Sample {
            u,
            states: ls
                .roots(u)
                .into_iter()
                .map(|x| {
                    // Along the centre direction ẋ ≈ h, so h_x < 0 is stable.
                    let stability = Stability::from_leading_real_part(ls.h_x(x, u));
                    (&ls.v * x, stability, x)
                })
                .collect(),
        })
        .collect();
    let (points, gaps) = link_branches(samples);
    Ok(BifurcationDiagram {
        method: DiagramMethod::UnfoldingPolynomial,
        points,
        gaps,
    })
}

/// Newton's method on Φ(·, u) with the analytic Jacobian.
pub fn newton_equilibrium(model: &ReducedModel, seed: &DVector<f64>) -> Option<DVector<f64>> {
    let mut y = seed.clone();
    for _ in 0..NEWTON_MAX_ITER {
        let r = model.rhs(&y);
        if !r.iter().all(|x| x.is_finite()) {
            return None;
        }
        if r.amax() <= NEWTON_TOL {
            return Some(y);
        }
        let step = model.jacobian(&y).lu().solve(&r)?;
        y -= &step;
        if step.amax() <= 1e-15 * (1.0 + y.amax()) {
            break;
        }
    }
    (model.rhs(&y).amax() <= EQUILIBRIUM_TOL).then_some(y)
}

/// Largest real part of the Jacobian spectrum at `y`; NaN when the Schur
/// iteration does not converge.
pub fn leading_real_part(model: &ReducedModel, y: &DVector<f64>) -> f64 {
    let j = model.jacobian(y);
    if linalg::max_abs(&(&j - j.transpose())) <= 1e-13 * (1.0 + linalg::max_abs(&j)) {
        if let Ok(s) = linalg::symmetric_spectrum(&j) {
            return s.values[0];
        }
    }
    // The unbounded default iteration can stall on clustered spectra.
    match Schur::try_new(j, f64::EPSILON, SCHUR_MAX_ITER) {
        Some(schur) => schur
            .complex_eigenvalues()
            .iter()
            .map(|z| z.re)
            .fold(f64::NEG_INFINITY, f64::max),
        None => {
            log::warn!("Schur iteration did not converge; stability left neutral");
            f64::NAN
        }
    }
}

/// Continuation of reduced-model equilibria over a u grid.
///
/// Each grid point is seeded with the user seeds, the origin, the previous
/// point's equilibria, and the dominant-mode unfolding roots lifted along v.
pub fn equilibrium_sweep(
    g: &Graph,
    c: &ConstraintSet,
    p: &NodParams,
    b: &DMatrix<f64>,
    u_range: (f64, f64),
    steps: usize,
    seeds: &[DVector<f64>],
) -> Result<BifurcationDiagram> {
    let base = ReducedModel::from_bias(g, c, p, b)?;
    let n = g.n();
    if let Some(s) = seeds.iter().find(|s| s.len() != n) {
        return Err(Error::Dimension(format!("seed has {} entries, expected {n}", s.len())));
    }
    let ls = ls_coefficients(p, g, c, b, 0).ok();
    let mut samples = Vec::new();
    let mut previous: Vec<DVector<f64>> = Vec::new();
    for u in linspace(u_range.0, u_range.1, steps) {
        let model = base.with_attention(u);
        let mut candidates: Vec<DVector<f64>> = seeds.to_vec();
        candidates.push(DVector::zeros(n));
        candidates.extend(previous.iter().cloned());
        if let Some(ls) = &ls {
            for x in ls.roots(u) {
                candidates.push(&ls.v * x);
            }
            if let Some(amp) = ls.pitchfork_amplitude(u) {
                candidates.push(&ls.v * amp);
                candidates.push(&ls.v * -amp);
            }
        }
        let mut found: Vec<DVector<f64>> = Vec::new();
        for seed in &candidates {
            if let Some(y) = newton_equilibrium(&model, seed) {
                if found.iter().all(|f| (f - &y).norm() > DEDUP_DISTANCE) {
                    found.push(y);
                }
            }
        }
        let states = found
            .iter()
            .map(|y| {
                let stability = Stability::from_leading_real_part(leading_real_part(&model, y));
                let x = ls.as_ref().map_or(0.0, |ls| ls.v.dot(y));
                (y.clone(), stability, x)
            })
            .collect();
        previous = found;
        samples.push(Sample { u, states });
    }
    let (points, gaps) = link_branches(samples);
    Ok(BifurcationDiagram {
        method: DiagramMethod::NewtonContinuation,
        points,
        gaps,
    })
}
