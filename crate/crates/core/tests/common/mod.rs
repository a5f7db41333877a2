//! Fixtures and measurements shared by the integration tests and the
//! acceptance runner.
#![allow(dead_code)]

use constrained_nod::bifurcation::{ls_coefficients, BifurcationDiagram, Stability};
use constrained_nod::centrality::{eigenpair_perturbation, incident_edge_pattern, PerturbationInputs};
use constrained_nod::dynamics::{
    constraint_drift, full_reduced_equivalence, InitialCondition, IntegrationSettings, NodParams, NodProblem,
    ReducedModel, SystemKind,
};
use constrained_nod::linalg::{direction_error, dominant_symmetric};
use constrained_nod::{effective_adjacency, ConstraintSet, Graph};
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn v(x: &[f64]) -> DVector<f64> {
    DVector::from_column_slice(x)
}

/// d = 0.3, α = 1, γ = 0.5 at attention `u`.
pub fn base_params(u: f64) -> NodParams {
    NodParams::new(0.3, u, 1.0, 0.5).unwrap()
}

#[derive(Debug, Clone)]
pub struct Fixture {
    pub label: String,
    pub graph: Graph,
    pub constraints: ConstraintSet,
    pub params: NodParams,
    pub bias: DMatrix<f64>,
}

impl Fixture {
    pub fn problem(&self) -> NodProblem {
        NodProblem::new(
            self.graph.clone(),
            self.constraints.clone(),
            self.params.clone(),
            self.bias.clone(),
        )
        .unwrap()
    }
}

/// Signed weighted Erdős–Rényi graph, edge probability 0.3.
pub fn random_graph(rng: &mut ChaCha8Rng, n: usize) -> Graph {
    let mut a = DMatrix::zeros(n, n);
    for i in 0..n {
        for j in i + 1..n {
            if rng.random_bool(0.3) {
                let w = rng.random_range(-1.0..1.0);
                a[(i, j)] = w;
                a[(j, i)] = w;
            }
        }
    }
    Graph::from_matrix(a).unwrap()
}

/// Fixture `index` of the randomized invariance suite: even indices use
/// rank-one constraints, odd indices mix ranks 1 to 3.
pub fn random_fixture(index: u64) -> Fixture {
    let mut rng = ChaCha8Rng::seed_from_u64(1000 + index);
    let n = rng.random_range(2..=20);
    let rank_one = index % 2 == 0;
    let n_o = if rank_one { rng.random_range(1..=5) } else { rng.random_range(2..=5) };
    let graph = random_graph(&mut rng, n);
    let bases = (0..n)
        .map(|_| {
            let rank = if rank_one { 1 } else { rng.random_range(1..=3.min(n_o - 1).max(1)) };
            DMatrix::from_fn(n_o, rank, |_, _| rng.random_range(-1.0..1.0))
        })
        .collect();
    let constraints = ConstraintSet::from_bases(n_o, bases).unwrap();
    let params = NodParams::new(
        rng.random_range(0.2..1.0),
        rng.random_range(0.05..0.6),
        rng.random_range(0.2..1.5),
        rng.random_range(0.2..1.0),
    )
    .unwrap();
    let bias = DMatrix::from_fn(n, n_o, |_, _| rng.random_range(-0.5..0.5));
    Fixture {
        label: format!("random#{index} n={n} options={n_o} max_rank={}", constraints.max_rank()),
        graph,
        constraints,
        params,
        bias,
    }
}

pub const T_INVARIANCE: f64 = 100.0;
pub const DT: f64 = 0.01;

/// Max over agents and samples of ‖P_i^⊥ Z_i(t)‖ from a seeded projected start.
pub fn invariance_drift(f: &Fixture) -> f64 {
    let settings = IntegrationSettings {
        dt: DT,
        horizon: T_INVARIANCE,
        ..Default::default()
    };
    let ic = InitialCondition::Seeded { seed: 7, epsilon: 0.5 };
    let traj = f.problem().integrate(SystemKind::Full, &ic, &settings).unwrap();
    constraint_drift(&traj, &f.constraints).unwrap().into_iter().fold(0.0, f64::max)
}

pub fn equivalence_gap(f: &Fixture) -> f64 {
    let y0 = constrained_nod::dynamics::seeded_uniform(3, 0.5, f.graph.n());
    full_reduced_equivalence(&f.graph, &f.constraints, &f.params, &f.bias, &y0, T_INVARIANCE, DT).unwrap()
}

/// Complete(6) with p = (1,1,1) and p₂ replaced by `p2`; bias (1,1,−1) on agent 2.
pub fn complete6_fixture(p2: &[f64], u: f64) -> Fixture {
    let mut vectors = vec![v(&[1.0, 1.0, 1.0]); 6];
    vectors[1] = v(p2);
    let mut bias = DMatrix::zeros(6, 3);
    bias.row_mut(1).copy_from_slice(&[1.0, 1.0, -1.0]);
    Fixture {
        label: format!("complete(6) p2={p2:?}"),
        graph: Graph::complete(6).unwrap(),
        constraints: ConstraintSet::from_vectors(&vectors).unwrap(),
        params: base_params(u),
        bias,
    }
}

/// Final effective opinions of the full system after T = 100 from a small
/// seeded start.
pub fn steady_effective(f: &Fixture) -> DVector<f64> {
    let traj = f
        .problem()
        .integrate(
            SystemKind::Full,
            &InitialCondition::Seeded { seed: 5, epsilon: 0.01 },
            &IntegrationSettings::default(),
        )
        .unwrap();
    traj.final_effective().unwrap().clone()
}

/// Unsigned connected fixtures: complete, ring and star, each with
/// homogeneous and mildly heterogeneous rank-one constraints, zero bias.
pub fn pitchfork_fixtures() -> Vec<Fixture> {
    let mut out = Vec::new();
    for (name, g) in [
        ("complete(6)", Graph::complete(6).unwrap()),
        ("ring(7)", Graph::ring(7).unwrap()),
        ("star(5)", Graph::star(5).unwrap()),
    ] {
        let n = g.n();
        for (kind, odd) in [("homogeneous", v(&[1.0, 1.0, 1.0])), ("heterogeneous", v(&[1.0, 1.0, 1.6]))] {
            let mut vectors = vec![v(&[1.0, 1.0, 1.0]); n];
            vectors[1] = odd.clone();
            out.push(Fixture {
                label: format!("{name} {kind}"),
                graph: g.clone(),
                constraints: ConstraintSet::from_vectors(&vectors).unwrap(),
                params: base_params(0.1),
                bias: DMatrix::zeros(n, 3),
            });
        }
    }
    out
}

pub fn reduced(f: &Fixture) -> ReducedModel {
    ReducedModel::from_bias(&f.graph, &f.constraints, &f.params, &f.bias).unwrap()
}

/// Cubic coefficient of t ↦ vᵀΦ(t v, u*) from a fourth-order central
/// difference of its third derivative.
pub fn cubic_by_finite_difference(f: &Fixture, h: f64) -> f64 {
    let ls = ls_coefficients(&f.params, &f.graph, &f.constraints, &f.bias, 0).unwrap();
    let model = reduced(f)
        .with_attention(ls.u_star)
        .with_effective_bias(DVector::zeros(f.graph.n()));
    let g = |t: f64| ls.v.dot(&model.rhs(&(&ls.v * t)));
    let third = (-g(3.0 * h) + 8.0 * g(2.0 * h) - 13.0 * g(h) + 13.0 * g(-h) - 8.0 * g(-2.0 * h) + g(-3.0 * h))
        / (8.0 * h.powi(3));
    third / 6.0
}

/// Number of equilibria at each u of a diagram.
pub fn branch_counts(d: &BifurcationDiagram) -> Vec<(f64, usize)> {
    d.grid().into_iter().map(|u| (u, d.points_at(u).len())).collect()
}

/// Checks 1 equilibrium below u* − step and 3 above u* + step.
pub fn counts_switch_at(d: &BifurcationDiagram, u_star: f64, step: f64) -> bool {
    branch_counts(d).into_iter().all(|(u, k)| {
        if u < u_star - step {
            k == 1
        } else if u > u_star + step {
            k == 3
        } else {
            (1..=3).contains(&k)
        }
    })
}

/// Largest angle in degrees between nonzero equilibria and span{v}.
pub fn max_tangency_angle(d: &BifurcationDiagram, v: &DVector<f64>) -> f64 {
    d.points
        .iter()
        .filter(|p| p.y.norm() > 1e-9)
        .map(|p| {
            let c = (p.y.dot(v).abs() / p.y.norm()).min(1.0);
            c.acos().to_degrees()
        })
        .fold(0.0, f64::max)
}

/// Largest distance from −y to the nearest equilibrium at the same u.
pub fn odd_symmetry_defect(d: &BifurcationDiagram) -> f64 {
    d.points
        .iter()
        .map(|p| {
            d.points_at(p.u)
                .iter()
                .map(|q| (&q.y + &p.y).amax())
                .fold(f64::INFINITY, f64::min)
        })
        .fold(0.0, f64::max)
}

/// Integrates the reduced model from a perturbed equilibrium; returns the
/// final distance from it.
pub fn settle_distance(model: &ReducedModel, y: &DVector<f64>, kick: &DVector<f64>, horizon: f64) -> f64 {
    let mut yt = y + kick;
    let dt = 0.01;
    let steps = (horizon / dt).round() as usize;
    for _ in 0..steps {
        let k1 = model.rhs(&yt);
        let k2 = model.rhs(&(&yt + &k1 * (dt / 2.0)));
        let k3 = model.rhs(&(&yt + &k2 * (dt / 2.0)));
        let k4 = model.rhs(&(&yt + &k3 * dt));
        yt += (k1 + (k2 + k3) * 2.0 + k4) * (dt / 6.0);
    }
    (yt - y).norm()
}

pub fn stability_consistent(model: &ReducedModel, y: &DVector<f64>, stability: Stability, kick: &DVector<f64>) -> bool {
    match stability {
        Stability::Stable => settle_distance(model, y, kick, 200.0) <= 1e-4,
        Stability::Unstable => settle_distance(model, y, kick, 200.0) > 1e-2,
        Stability::Neutral => true,
    }
}

/// Constraints on `n` agents in the plane: agent 1 has alignment `a` with
/// the common direction of the others.
pub fn one_heterogeneous(n: usize, a: f64) -> ConstraintSet {
    let mut vectors = vec![v(&[1.0, 0.0]); n];
    vectors[0] = v(&[a, (1.0 - a * a).max(0.0).sqrt()]);
    ConstraintSet::from_vectors(&vectors).unwrap()
}

pub fn exact_centrality(g: &Graph, a: f64) -> DVector<f64> {
    let c = one_heterogeneous(g.n(), a);
    effective_adjacency(g, &c).unwrap().graph_prime.dominant_eigenpair().unwrap().vector
}

pub const DELTAS: [f64; 3] = [-0.05, -0.1, -0.2];

/// error(δ) / error(δ/2) for a closed form `approx(δ)` against the exact
/// centrality of `g` with alignment 1 + δ on node 1.
pub fn closed_form_ratio(g: &Graph, delta: f64, approx: impl Fn(f64) -> DVector<f64>) -> f64 {
    let err = |d: f64| direction_error(&approx(1.0 + d), &exact_centrality(g, 1.0 + d));
    err(delta) / err(delta / 2.0)
}

/// Same ratio for the first-order eigenpair perturbation of A along the
/// edges incident to node 1.
pub fn lemma_ratio(g: &Graph, delta: f64) -> f64 {
    let k_prime = incident_edge_pattern(g, 0);
    let input = PerturbationInputs::dominant(g.adjacency().clone(), k_prime.clone()).unwrap();
    let err = |d: f64| {
        let (_, approx) = eigenpair_perturbation(&input, d).unwrap();
        let exact = dominant_symmetric(&(g.adjacency() + &k_prime * d)).unwrap();
        direction_error(&approx, &exact.vector)
    };
    err(delta) / err(delta / 2.0)
}

pub fn in_band(ratio: f64) -> bool {
    (3.0..=5.0).contains(&ratio)
}

/// Random star alignments in (0, 1].
pub fn star_alignments(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    (1..n).map(|_| 1.0 - rng.random_range(0.0..1.0)).collect()
}

/// Star with hub 1 whose leaf constraints realise `alignments` in the plane.
pub fn star_constraints(alignments: &[f64]) -> ConstraintSet {
    let mut vectors = vec![v(&[1.0, 0.0])];
    vectors.extend(alignments.iter().map(|&a| v(&[a, (1.0 - a * a).max(0.0).sqrt()])));
    ConstraintSet::from_vectors(&vectors).unwrap()
}
