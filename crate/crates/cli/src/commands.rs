//! Subcommand implementations. Each returns the files it wants written so
//! that output handling stays in one place.

use constrained_nod::bifurcation::{
    equilibrium_sweep, jacobian_origin, linspace, ls_coefficients, unfolding_roots, write_csv,
};
use constrained_nod::centrality::{eigenpair_perturbation, influence_report, PerturbationInputs};
use constrained_nod::dynamics::{
    constraint_drift, full_reduced_equivalence, NodProblem, SystemKind, Trajectory,
};
use constrained_nod::graphs::adjacency_violation;
use constrained_nod::linalg::{direction_error, dominant_symmetric, max_abs};
use constrained_nod::{effective_adjacency, effective_bias, Error, GraphSpec, Result};
use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::Serialize;
use serde_json::json;

use crate::scenario::Scenario;

/// |y| at or below this counts as undecided.
pub const NEUTRAL_BAND: f64 = 1e-6;
pub const DRIFT_TOL: f64 = 1e-8;
pub const EQUIVALENCE_TOL: f64 = 1e-6;
pub const PROJECTOR_TOL: f64 = 1e-12;
pub const JACOBIAN_TOL: f64 = 1e-6;
pub const FD_STEP: f64 = 1e-5;
pub const SCALING_BAND: (f64, f64) = (3.0, 5.0);

#[derive(Debug, Clone, PartialEq)]
pub struct OutputFile {
    pub name: String,
    pub contents: String,
}

fn file(name: &str, contents: String) -> OutputFile {
    OutputFile {
        name: name.into(),
        contents,
    }
}

fn json_file(name: &str, value: &impl Serialize) -> OutputFile {
    let mut text = serde_json::to_string_pretty(value).expect("output serializes");
    text.push('\n');
    file(name, text)
}

pub fn decision(y: f64) -> &'static str {
    if y.abs() <= NEUTRAL_BAND {
        "neutral"
    } else if y > 0.0 {
        "positive"
    } else {
        "negative"
    }
}

/// Integrates the scenario at attention `u`.
fn trajectory_of(s: &Scenario, problem: &NodProblem, u: f64) -> Result<Trajectory> {
    let mut p = problem.clone();
    p.params = p.params.with_attention(u);
    let ic = s.initial_condition()?;
    p.integrate(s.integrator.system, &ic, &s.integrator.settings())
}

pub fn simulate(s: &Scenario) -> Result<Vec<OutputFile>> {
    let built = s.build()?;
    let problem = &built.problem;
    let mut traj = problem.integrate(s.integrator.system, &built.initial, &s.integrator.settings())?;
    traj.meta.graph_id = graph_label(&s.graph);
    let header = s.header();
    let final_y = traj.final_effective().cloned();
    let max_drift = match traj.full.is_empty() {
        true => None,
        false => Some(constraint_drift(&traj, &problem.constraints)?.into_iter().fold(0.0, f64::max)),
    };
    let b_e = problem
        .constraints
        .is_rank_one()
        .then(|| effective_bias(&problem.constraints, &problem.bias))
        .transpose()?
        .map(|f| f.b_e);
    let summary = json!({
        "scenario_hash": s.hash(),
        "seed": s.seed,
        "system": s.integrator.system,
        "u": s.params.u,
        "final_time": traj.times.last(),
        "final_y": final_y.as_ref().map(|y| y.iter().copied().collect::<Vec<_>>()),
        "decisions": final_y.as_ref().map(|y| y.iter().map(|&x| decision(x)).collect::<Vec<_>>()),
        "max_drift": max_drift,
        "effective_bias": b_e.map(|b| b.iter().copied().collect::<Vec<_>>()),
        "final_z": traj.final_full().map(|z| z.row_iter().map(|r| r.iter().copied().collect::<Vec<_>>()).collect::<Vec<_>>()),
    });
    Ok(vec![file("trajectory.csv", traj.to_csv(&header)), json_file("summary.json", &summary)])
}

fn graph_label(spec: &GraphSpec) -> String {
    match spec {
        GraphSpec::Ring { n } => format!("ring({n})"),
        GraphSpec::Star { n } => format!("star({n})"),
        GraphSpec::Complete { n } => format!("complete({n})"),
        GraphSpec::CirculantRegular { n, offsets } => format!("circulant({n},{offsets:?})"),
        GraphSpec::Custom { adjacency } => format!("custom({})", adjacency.len()),
        GraphSpec::Edges { n, edges } => format!("edges({n},{})", edges.len()),
    }
}

pub fn bifurcate(s: &Scenario) -> Result<Vec<OutputFile>> {
    let built = s.build()?;
    let p = &built.problem;
    p.constraints.require_rank_one()?;
    let range = s.u_range()?;
    let seeds: Vec<DVector<f64>> = s.sweep.seeds.iter().map(|v| DVector::from_column_slice(v)).collect();
    let ls = ls_coefficients(&p.params, &p.graph, &p.constraints, &p.bias, s.sweep.mode)?;
    let overlay = unfolding_roots(&ls, range, s.sweep.resolution)?;
    let sweep = equilibrium_sweep(&p.graph, &p.constraints, &p.params, &p.bias, range, s.sweep.u_steps, &seeds)?;
    let mut header = s.header();
    header.push(format!(
        "u_star={} a={} b_cubic={} unfold={} lambda={}",
        ls.u_star, ls.a, ls.b_cubic, ls.unfold, ls.lambda
    ));
    let reduction = json!({
        "scenario_hash": s.hash(),
        "seed": s.seed,
        "mode": s.sweep.mode,
        "u_star": ls.u_star,
        "a": ls.a,
        "b_cubic": ls.b_cubic,
        "unfold": ls.unfold,
        "lambda": ls.lambda,
        "v": ls.v.iter().copied().collect::<Vec<_>>(),
        "u_range": [range.0, range.1],
        "sweep_gaps": sweep.gaps,
    });
    Ok(vec![
        file("diagram.csv", write_csv(&[&overlay, &sweep], &header, true)),
        json_file("reduction.json", &reduction),
    ])
}

pub fn centrality(s: &Scenario) -> Result<Vec<OutputFile>> {
    let g = s.graph()?;
    let c = s.constraints.to_set(g.n())?;
    let report = influence_report(&g, &c)?;
    let mut value = serde_json::to_value(report.to_json()).expect("report serializes");
    value["scenario_hash"] = json!(s.hash());
    value["seed"] = json!(s.seed);
    Ok(vec![
        file("centrality.csv", report.to_csv(&s.header())),
        json_file("centrality.json", &value),
    ])
}

/// Final state for every u on the sweep grid, integrated in parallel.
pub fn sweep(s: &Scenario) -> Result<Vec<OutputFile>> {
    let built = s.build()?;
    let (lo, hi) = s.u_range()?;
    let grid = linspace(lo, hi, s.sweep.u_steps);
    let finals: Vec<Result<DVector<f64>>> = grid
        .par_iter()
        .map(|&u| {
            let traj = trajectory_of(s, &built.problem, u)?;
            match (traj.final_effective(), traj.final_full()) {
                (Some(y), _) => Ok(y.clone()),
                (None, Some(z)) => Ok(DVector::from_row_slice(z.transpose().as_slice())),
                (None, None) => Err(Error::Numeric("empty trajectory".into())),
            }
        })
        .collect();
    let effective = built.problem.constraints.is_rank_one();
    let (n, no) = (built.problem.n_agents(), built.problem.n_options());
    let mut out = String::new();
    for c in s.header() {
        out.push_str(&format!("# {c}\n"));
    }
    let mut cols = vec!["u".to_string()];
    if effective {
        cols.extend((1..=n).map(|i| format!("y_{i}")));
    } else {
        cols.extend((1..=n).flat_map(|i| (1..=no).map(move |j| format!("z_{i}_{j}"))));
    }
    out.push_str(&cols.join(","));
    out.push('\n');
    for (u, x) in grid.iter().zip(finals) {
        let x = x?;
        let row: Vec<String> = std::iter::once(u.to_string()).chain(x.iter().map(|v| v.to_string())).collect();
        out.push_str(&row.join(","));
        out.push('\n');
    }
    Ok(vec![file("sweep.csv", out)])
}

#[derive(Debug, Clone, PartialEq)]
pub enum Outcome {
    Pass,
    Fail,
    Skipped(String),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub name: &'static str,
    pub outcome: Outcome,
    pub detail: String,
}

impl Check {
    fn measured(name: &'static str, value: f64, tol: f64) -> Self {
        Self {
            name,
            outcome: if value <= tol { Outcome::Pass } else { Outcome::Fail },
            detail: format!("value={value:e} tol={tol:e}"),
        }
    }

    fn skipped(name: &'static str, why: &str) -> Self {
        Self {
            name,
            outcome: Outcome::Skipped(why.into()),
            detail: String::new(),
        }
    }

    fn failed(name: &'static str, detail: String) -> Self {
        Self {
            name,
            outcome: Outcome::Fail,
            detail,
        }
    }

    pub fn line(&self) -> String {
        match &self.outcome {
            Outcome::Pass => format!("PASS {} {}", self.name, self.detail),
            Outcome::Fail => format!("FAIL {} {}", self.name, self.detail),
            Outcome::Skipped(why) => format!("SKIP {} skipped ({why})", self.name),
        }
    }
}

/// Runs the invariant checks on the scenario's objects.
pub fn verify(s: &Scenario) -> Result<Vec<Check>> {
    let mut checks = Vec::new();
    if let GraphSpec::Custom { adjacency } = &s.graph {
        let n = adjacency.len();
        if adjacency.iter().any(|r| r.len() != n) {
            checks.push(Check::failed("adjacency", "matrix is not square".into()));
            return Ok(checks);
        }
        let flat: Vec<f64> = adjacency.iter().flatten().copied().collect();
        if let Some(why) = adjacency_violation(&DMatrix::from_row_slice(n, n, &flat)) {
            checks.push(Check::failed("adjacency", why));
            return Ok(checks);
        }
    }
    let built = s.build()?;
    let p = &built.problem;
    let (g, c) = (&p.graph, &p.constraints);
    checks.push(Check {
        name: "adjacency",
        outcome: Outcome::Pass,
        detail: "symmetric, zero diagonal, finite".into(),
    });

    let idempotence = (0..c.n_agents())
        .map(|i| {
            let pr = c.projector(i);
            max_abs(&(pr * pr - pr)).max(max_abs(&(pr - pr.transpose())))
        })
        .fold(0.0, f64::max);
    checks.push(Check::measured("projector_idempotence", idempotence, PROJECTOR_TOL));

    let full = p.integrate(SystemKind::Full, &built.initial, &s.integrator.settings())?;
    let drift = constraint_drift(&full, c)?.into_iter().fold(0.0, f64::max);
    checks.push(Check::measured("invariance_drift", drift, DRIFT_TOL));

    if !c.is_rank_one() {
        for name in ["full_reduced_equivalence", "jacobian_closed_form", "perturbation_scaling"] {
            checks.push(Check::skipped(name, "rank>1"));
        }
        return Ok(checks);
    }

    let y0 = p.initial_effective_state(&built.initial)?;
    let gap = full_reduced_equivalence(g, c, &p.params, &p.bias, &y0, s.integrator.horizon, s.integrator.dt)?;
    checks.push(Check::measured("full_reduced_equivalence", gap, EQUIVALENCE_TOL));

    let en = effective_adjacency(g, c)?;
    let model = p.reduced_model()?.with_effective_bias(DVector::zeros(g.n()));
    let closed = jacobian_origin(&p.params, &en, p.params.u);
    let n = g.n();
    let mut fd = DMatrix::zeros(n, n);
    for j in 0..n {
        let mut e = DVector::zeros(n);
        e[j] = FD_STEP;
        fd.set_column(j, &((model.rhs(&e) - model.rhs(&-&e)) / (2.0 * FD_STEP)));
    }
    checks.push(Check::measured("jacobian_closed_form", max_abs(&(closed - fd)), JACOBIAN_TOL));

    checks.push(perturbation_scaling(g.adjacency(), en.graph_prime.adjacency()));
    Ok(checks)
}

/// First-order eigenpair estimate along A + δ(A' − A), compared at δ and δ/2.
fn perturbation_scaling(a: &DMatrix<f64>, a_prime: &DMatrix<f64>) -> Check {
    const NAME: &str = "perturbation_scaling";
    let k_prime = a_prime - a;
    if max_abs(&k_prime) == 0.0 {
        return Check::skipped(NAME, "homogeneous constraints");
    }
    let input = match PerturbationInputs::dominant(a.clone(), k_prime.clone()) {
        Ok(i) => i,
        Err(e) => return Check::skipped(NAME, &e.to_string()),
    };
    let err = |delta: f64| -> Result<f64> {
        let (_, approx) = eigenpair_perturbation(&input, delta)?;
        let exact = dominant_symmetric(&(a + &k_prime * delta))?;
        Ok(direction_error(&approx, &exact.vector))
    };
    let delta = 0.1 / max_abs(&k_prime).max(1.0);
    match (err(delta), err(delta / 2.0)) {
        (Ok(e1), Ok(e2)) if e2 < 1e-13 => Check {
            name: NAME,
            outcome: Outcome::Pass,
            detail: format!("error below roundoff ({e1:e}, {e2:e})"),
        },
        (Ok(e1), Ok(e2)) => {
            let ratio = e1 / e2;
            Check {
                name: NAME,
                outcome: if (SCALING_BAND.0..=SCALING_BAND.1).contains(&ratio) {
                    Outcome::Pass
                } else {
                    Outcome::Fail
                },
                detail: format!("ratio={ratio:.4} band=[{}, {}]", SCALING_BAND.0, SCALING_BAND.1),
            }
        }
        (Err(e), _) | (_, Err(e)) => Check::skipped(NAME, &e.to_string()),
    }
}

pub fn verify_report(s: &Scenario, checks: &[Check]) -> String {
    let mut out = String::new();
    for c in s.header() {
        out.push_str(&format!("# {c}\n"));
    }
    for c in checks {
        out.push_str(&c.line());
        out.push('\n');
    }
    out
}
