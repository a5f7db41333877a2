//! Scenario documents: one JSON file describing graph, constraints,
//! parameters, biases, initial condition, integrator and sweep grid.

use std::collections::BTreeMap;

use constrained_nod::bifurcation::critical_attention;
use constrained_nod::constraints::{parse_agent_key, ConstraintFile};
use constrained_nod::dynamics::{
    InitialCondition, IntegrationSettings, NodParams, NodProblem, ProjectionPolicy, SystemKind, DEFAULT_DT,
    DEFAULT_EPSILON, DEFAULT_HORIZON,
};
use constrained_nod::{effective_adjacency, Error, Graph, GraphSpec, Result};
use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    #[serde(default)]
    pub name: String,
    pub graph: GraphSpec,
    pub constraints: ConstraintFile,
    pub params: NodParams,
    /// Agent key (1-based) to bias vector; absent agents get zero bias.
    #[serde(default)]
    pub bias: BTreeMap<String, Vec<f64>>,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub initial: InitialSpec,
    #[serde(default)]
    pub integrator: IntegratorSpec,
    #[serde(default)]
    pub sweep: SweepSpec,
    #[serde(default = "default_output")]
    pub output: String,
}

fn default_output() -> String {
    "out".into()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum InitialSpec {
    /// Uniform in [-epsilon, epsilon] from the scenario seed, then projected.
    Seeded { epsilon: f64 },
    /// Row i is agent i's opinion vector.
    Full { state: Vec<Vec<f64>> },
    /// Effective opinions; needs rank-one constraints.
    Effective { y: Vec<f64> },
}

impl Default for InitialSpec {
    fn default() -> Self {
        InitialSpec::Seeded {
            epsilon: DEFAULT_EPSILON,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct IntegratorSpec {
    pub system: SystemKind,
    pub dt: f64,
    pub horizon: f64,
    /// Keep every k-th step in the trajectory output.
    pub sample_every: usize,
    pub projection: ProjectionPolicy,
}

impl Default for IntegratorSpec {
    fn default() -> Self {
        Self {
            system: SystemKind::Full,
            dt: DEFAULT_DT,
            horizon: DEFAULT_HORIZON,
            sample_every: 10,
            projection: ProjectionPolicy::Project,
        }
    }
}

impl IntegratorSpec {
    pub fn settings(&self) -> IntegrationSettings {
        IntegrationSettings {
            dt: self.dt,
            horizon: self.horizon,
            sample_every: self.sample_every,
            projection: self.projection,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepSpec {
    /// `null` resolves to half the dominant critical attention.
    pub u_min: Option<f64>,
    /// `null` resolves to 1.5 times the dominant critical attention.
    pub u_max: Option<f64>,
    pub u_steps: usize,
    /// Samples of the unfolding-polynomial overlay.
    pub resolution: usize,
    /// Eigen-index of A' used for the reduction, 0 = dominant.
    pub mode: usize,
    /// Extra Newton seeds in effective coordinates.
    pub seeds: Vec<Vec<f64>>,
}

impl Default for SweepSpec {
    fn default() -> Self {
        Self {
            u_min: None,
            u_max: None,
            u_steps: 101,
            resolution: 401,
            mode: 0,
            seeds: Vec::new(),
        }
    }
}

/// Command-line values that take precedence over the document.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub dt: Option<f64>,
    pub horizon: Option<f64>,
    pub u_min: Option<f64>,
    pub u_max: Option<f64>,
    pub u_steps: Option<usize>,
    pub out: Option<String>,
}

/// Objects instantiated from a scenario.
#[derive(Debug, Clone)]
pub struct Built {
    pub problem: NodProblem,
    pub initial: InitialCondition,
}

impl Scenario {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Validation(format!("scenario: {e}")))
    }

    /// Complete(6) with homogeneous constraints and a bias on agent 2.
    pub fn example() -> Self {
        Self {
            name: "complete6-homogeneous".into(),
            graph: GraphSpec::Complete { n: 6 },
            constraints: ConstraintFile {
                options: 3,
                vectors: BTreeMap::new(),
                default: Some(vec![1.0, 1.0, 1.0]),
                bases: BTreeMap::new(),
            },
            params: NodParams::new(0.3, 0.14, 1.0, 0.5).expect("valid example parameters"),
            bias: BTreeMap::from([("2".to_string(), vec![1.0, 1.0, -1.0])]),
            seed: 0,
            initial: InitialSpec::default(),
            integrator: IntegratorSpec::default(),
            sweep: SweepSpec::default(),
            output: default_output(),
        }
    }

    pub fn apply(&mut self, o: &Overrides) {
        if let Some(s) = o.seed {
            self.seed = s;
        }
        if let Some(dt) = o.dt {
            self.integrator.dt = dt;
        }
        if let Some(h) = o.horizon {
            self.integrator.horizon = h;
        }
        if o.u_min.is_some() {
            self.sweep.u_min = o.u_min;
        }
        if o.u_max.is_some() {
            self.sweep.u_max = o.u_max;
        }
        if let Some(k) = o.u_steps {
            self.sweep.u_steps = k;
        }
        if let Some(out) = &o.out {
            self.output = out.clone();
        }
    }

    pub fn graph(&self) -> Result<Graph> {
        Graph::build(&self.graph)
    }

    pub fn n_agents(&self) -> usize {
        match &self.graph {
            GraphSpec::Ring { n }
            | GraphSpec::Star { n }
            | GraphSpec::Complete { n }
            | GraphSpec::CirculantRegular { n, .. }
            | GraphSpec::Edges { n, .. } => *n,
            GraphSpec::Custom { adjacency } => adjacency.len(),
        }
    }

    pub fn bias_matrix(&self) -> Result<DMatrix<f64>> {
        let (n, no) = (self.n_agents(), self.constraints.options);
        let mut b = DMatrix::zeros(n, no);
        for (key, v) in &self.bias {
            let i = parse_agent_key(key, n)?;
            if v.len() != no {
                return Err(Error::Dimension(format!(
                    "bias of agent {key} has {} entries, expected {no}",
                    v.len()
                )));
            }
            b.row_mut(i).copy_from_slice(v);
        }
        Ok(b)
    }

    pub fn initial_condition(&self) -> Result<InitialCondition> {
        let (n, no) = (self.n_agents(), self.constraints.options);
        Ok(match &self.initial {
            InitialSpec::Seeded { epsilon } => {
                if !(epsilon.is_finite() && *epsilon >= 0.0) {
                    return Err(Error::Validation(format!("initial epsilon must be >= 0, got {epsilon}")));
                }
                InitialCondition::Seeded {
                    seed: self.seed,
                    epsilon: *epsilon,
                }
            }
            InitialSpec::Full { state } => {
                if state.len() != n || state.iter().any(|r| r.len() != no) {
                    return Err(Error::Dimension(format!("initial state must be {n} rows of {no} entries")));
                }
                let flat: Vec<f64> = state.iter().flatten().copied().collect();
                InitialCondition::Full(DMatrix::from_row_slice(n, no, &flat))
            }
            InitialSpec::Effective { y } => InitialCondition::Effective(DVector::from_column_slice(y)),
        })
    }

    pub fn build(&self) -> Result<Built> {
        let integ = &self.integrator;
        if !(integ.dt > 0.0 && integ.dt.is_finite() && integ.horizon >= 0.0 && integ.horizon.is_finite()) {
            return Err(Error::Validation(format!(
                "integrator needs dt > 0 and horizon >= 0, got dt = {}, horizon = {}",
                integ.dt, integ.horizon
            )));
        }
        if integ.sample_every == 0 {
            return Err(Error::Validation("integrator.sample_every must be at least 1".into()));
        }
        let graph = self.graph()?;
        let constraints = self.constraints.to_set(graph.n())?;
        let problem = NodProblem::new(graph, constraints, self.params.clone(), self.bias_matrix()?)?;
        Ok(Built {
            problem,
            initial: self.initial_condition()?,
        })
    }

    /// Sweep range with `null` ends filled in from the dominant critical attention.
    pub fn u_range(&self) -> Result<(f64, f64)> {
        let (lo, hi) = match (self.sweep.u_min, self.sweep.u_max) {
            (Some(lo), Some(hi)) => (lo, hi),
            (lo, hi) => {
                let g = self.graph()?;
                let c = self.constraints.to_set(g.n())?;
                let lambda = effective_adjacency(&g, &c)?.graph_prime.dominant_eigenpair()?.value;
                let u_star = critical_attention(&self.params, lambda)?.u_star;
                (lo.unwrap_or(0.5 * u_star), hi.unwrap_or(1.5 * u_star))
            }
        };
        if !(lo.is_finite() && hi.is_finite() && lo < hi) || self.sweep.u_steps < 2 {
            return Err(Error::Validation(format!(
                "sweep needs u_min < u_max and u_steps >= 2, got [{lo}, {hi}] with {} steps",
                self.sweep.u_steps
            )));
        }
        Ok((lo, hi))
    }

    /// Copy with the sweep range made explicit where it can be computed.
    pub fn resolved(&self) -> Self {
        let mut out = self.clone();
        if let Ok((lo, hi)) = self.u_range() {
            out.sweep.u_min = Some(lo);
            out.sweep.u_max = Some(hi);
        }
        out
    }

    pub fn to_pretty_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("scenario serializes")
    }

    /// SHA-256 of the compact JSON serialization, output directory excluded.
    pub fn hash(&self) -> String {
        let text = serde_json::to_string(&Self {
            output: String::new(),
            ..self.clone()
        })
        .expect("scenario serializes");
        Sha256::digest(text.as_bytes()).iter().map(|b| format!("{b:02x}")).collect()
    }

    pub fn header(&self) -> Vec<String> {
        vec![format!("scenario_hash={} seed={}", self.hash(), self.seed)]
    }
}
