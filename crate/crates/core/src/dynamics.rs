//! Full constrained opinion dynamics, the exact rank-one reduction, and a
//! fixed-step RK4 integrator with constraint-drift monitoring.

use std::fmt;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::constraints::{effective_bias, ConstraintSet};
use crate::error::{Error, Result};
use crate::graphs::Graph;

pub const DEFAULT_DT: f64 = 0.01;
pub const DEFAULT_HORIZON: f64 = 100.0;
pub const DEFAULT_EPSILON: f64 = 0.01;

type ScalarFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// Odd saturating nonlinearity with S(0) = 0, S'(0) = 1 and sign(S'') = -sign(z).
#[derive(Clone)]
pub struct Sigmoid {
    name: String,
    value: ScalarFn,
    derivative: ScalarFn,
    third_at_zero: f64,
}

impl Sigmoid {
    pub fn tanh() -> Self {
        Self {
            name: "tanh".into(),
            value: Arc::new(f64::tanh),
            derivative: Arc::new(|x: f64| 1.0 - x.tanh().powi(2)),
            third_at_zero: -2.0,
        }
    }

    /// x / sqrt(1 + x²).
    pub fn algebraic() -> Self {
        Self {
            name: "algebraic".into(),
            value: Arc::new(|x: f64| x / (1.0 + x * x).sqrt()),
            derivative: Arc::new(|x: f64| (1.0 + x * x).powf(-1.5)),
            third_at_zero: -3.0,
        }
    }

    pub fn by_name(name: &str) -> Result<Self> {
        match name {
            "tanh" => Ok(Self::tanh()),
            "algebraic" => Ok(Self::algebraic()),
            other => Err(Error::Validation(format!("unknown sigmoid {other:?}"))),
        }
    }

    /// Registers a user-supplied sigmoid after checking its contract numerically.
    /// S'''(0) is estimated by Richardson-extrapolated central differences of S'.
    pub fn custom<V, D>(name: &str, value: V, derivative: D) -> Result<Self>
    where
        V: Fn(f64) -> f64 + Send + Sync + 'static,
        D: Fn(f64) -> f64 + Send + Sync + 'static,
    {
        let fail = |what: &str| Err(Error::Validation(format!("sigmoid {name:?}: {what}")));
        if value(0.0).abs() > 1e-15 {
            return fail("S(0) must be 0");
        }
        if (derivative(0.0) - 1.0).abs() > 1e-9 {
            return fail("S'(0) must be 1");
        }
        let h = 1e-4;
        for k in 1..=80 {
            let z = k as f64 * 0.05;
            let (sp, sm) = (value(z), value(-z));
            if !sp.is_finite() || (sp + sm).abs() > 1e-12 * (1.0 + sp.abs()) {
                return fail("S must be odd");
            }
            let fd = (value(z + h) - value(z - h)) / (2.0 * h);
            if (fd - derivative(z)).abs() > 1e-6 * (1.0 + fd.abs()) {
                return fail("derivative does not match S");
            }
            let curvature = derivative(z + h) - derivative(z - h);
            if curvature >= 0.0 {
                return fail("S must be strictly concave for z > 0");
            }
        }
        let second_diff = |h: f64| (derivative(h) - 2.0 * derivative(0.0) + derivative(-h)) / (h * h);
        let third_at_zero = (4.0 * second_diff(5e-3) - second_diff(1e-2)) / 3.0;
        Ok(Self {
            name: name.into(),
            value: Arc::new(value),
            derivative: Arc::new(derivative),
            third_at_zero,
        })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    #[inline]
    pub fn value(&self, x: f64) -> f64 {
        (self.value)(x)
    }

    #[inline]
    pub fn derivative(&self, x: f64) -> f64 {
        (self.derivative)(x)
    }

    pub fn third_derivative_at_zero(&self) -> f64 {
        self.third_at_zero
    }
}

impl Default for Sigmoid {
    fn default() -> Self {
        Self::tanh()
    }
}

impl fmt::Debug for Sigmoid {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Sigmoid({})", self.name)
    }
}

impl PartialEq for Sigmoid {
    fn eq(&self, other: &Self) -> bool {
        self.name == other.name
    }
}

impl Serialize for Sigmoid {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(&self.name)
    }
}

impl<'de> Deserialize<'de> for Sigmoid {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let name = String::deserialize(d)?;
        Sigmoid::by_name(&name).map_err(serde::de::Error::custom)
    }
}

/// Damping, attention, self-reinforcement and social weight.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NodParams {
    pub d: f64,
    pub u: f64,
    pub alpha: f64,
    pub gamma: f64,
    #[serde(default)]
    pub sigmoid: Sigmoid,
}

impl NodParams {
    pub fn new(d: f64, u: f64, alpha: f64, gamma: f64) -> Result<Self> {
        let p = Self {
            d,
            u,
            alpha,
            gamma,
            sigmoid: Sigmoid::tanh(),
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("d", self.d), ("u", self.u), ("alpha", self.alpha), ("gamma", self.gamma)] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::Validation(format!("parameter {name} must be positive, got {v}")));
            }
        }
        Ok(())
    }

    pub fn with_attention(&self, u: f64) -> Self {
        Self { u, ..self.clone() }
    }
}

fn check_state(z: &DMatrix<f64>, g: &Graph, c: &ConstraintSet, b: &DMatrix<f64>) -> Result<()> {
    let (n, no) = (g.n(), c.n_options());
    if c.n_agents() != n {
        return Err(Error::Dimension(format!("{} constraints for {n} agents", c.n_agents())));
    }
    for (what, m) in [("state", z), ("bias", b)] {
        if m.nrows() != n || m.ncols() != no {
            return Err(Error::Dimension(format!(
                "{what} is {}x{}, expected {n}x{no}",
                m.nrows(),
                m.ncols()
            )));
        }
    }
    Ok(())
}

/// Vector field of the full constrained system, Ż_i = P_i F_i(Z).
/// Rows of `z` and `b` are agents, columns are options.
pub fn full_rhs(
    z: &DMatrix<f64>,
    g: &Graph,
    c: &ConstraintSet,
    p: &NodParams,
    b: &DMatrix<f64>,
) -> Result<DMatrix<f64>> {
    check_state(z, g, c, b)?;
    Ok(FullModel::new(g, c, p, b).rhs(z))
}

/// Effective-opinion vector field Φ(y, u) of the rank-one reduction.
pub fn reduced_rhs(
    y: &DVector<f64>,
    g: &Graph,
    c: &ConstraintSet,
    p: &NodParams,
    b_e: &DVector<f64>,
) -> Result<DVector<f64>> {
    let model = ReducedModel::new(g, c, p, b_e)?;
    if y.len() != model.n() {
        return Err(Error::Dimension(format!("state has {} entries, expected {}", y.len(), model.n())));
    }
    Ok(model.rhs(y))
}

/// Full system with any-rank projectors.
#[derive(Debug, Clone)]
pub struct FullModel {
    adjacency: DMatrix<f64>,
    projectors: Vec<DMatrix<f64>>,
    params: NodParams,
    bias: DMatrix<f64>,
}

impl FullModel {
    fn new(g: &Graph, c: &ConstraintSet, p: &NodParams, b: &DMatrix<f64>) -> Self {
        Self {
            adjacency: g.adjacency().clone(),
            projectors: (0..c.n_agents()).map(|i| c.projector(i).clone()).collect(),
            params: p.clone(),
            bias: b.clone(),
        }
    }

    pub fn rhs(&self, z: &DMatrix<f64>) -> DMatrix<f64> {
        let p = &self.params;
        let mut arg = &self.adjacency * z * (p.u * p.gamma);
        arg += z * (p.u * p.alpha);
        let mut f = arg.map(|x| p.sigmoid.value(x));
        f -= z * p.d;
        f += &self.bias;
        let mut out = DMatrix::zeros(z.nrows(), z.ncols());
        for (i, proj) in self.projectors.iter().enumerate() {
            out.set_row(i, &(f.row(i) * proj));
        }
        out
    }
}

/// Rank-one reduction in effective opinions y_i = p̂_iᵀZ_i.
#[derive(Debug, Clone)]
pub struct ReducedModel {
    adjacency: DMatrix<f64>,
    /// Row i is p̂_i.
    directions: DMatrix<f64>,
    params: NodParams,
    b_e: DVector<f64>,
}

impl ReducedModel {
    pub fn new(g: &Graph, c: &ConstraintSet, p: &NodParams, b_e: &DVector<f64>) -> Result<Self> {
        if c.n_agents() != g.n() || b_e.len() != g.n() {
            return Err(Error::Dimension(format!(
                "{} agents, {} constraints, {} effective biases",
                g.n(),
                c.n_agents(),
                b_e.len()
            )));
        }
        Ok(Self {
            adjacency: g.adjacency().clone(),
            directions: c.unit_vectors()?,
            params: p.clone(),
            b_e: b_e.clone(),
        })
    }

    /// Builds the reduction from a raw bias matrix.
    pub fn from_bias(g: &Graph, c: &ConstraintSet, p: &NodParams, b: &DMatrix<f64>) -> Result<Self> {
        let bf = effective_bias(c, b)?;
        Self::new(g, c, p, &bf.b_e)
    }

    pub fn n(&self) -> usize {
        self.adjacency.nrows()
    }

    pub fn params(&self) -> &NodParams {
        &self.params
    }

    pub fn effective_bias(&self) -> &DVector<f64> {
        &self.b_e
    }

    pub fn directions(&self) -> &DMatrix<f64> {
        &self.directions
    }

    pub fn adjacency(&self) -> &DMatrix<f64> {
        &self.adjacency
    }

    pub fn with_attention(&self, u: f64) -> Self {
        Self {
            params: self.params.with_attention(u),
            ..self.clone()
        }
    }

    pub fn with_effective_bias(&self, b_e: DVector<f64>) -> Self {
        Self { b_e, ..self.clone() }
    }

    /// u(α y_i p̂_i + γ Σ_k A_ik y_k p̂_k), one row per agent.
    fn sigmoid_argument(&self, y: &DVector<f64>) -> DMatrix<f64> {
        let p = &self.params;
        let mut w = self.directions.clone();
        for (i, mut row) in w.row_iter_mut().enumerate() {
            row *= y[i];
        }
        let mut arg = &self.adjacency * &w * (p.u * p.gamma);
        arg += &w * (p.u * p.alpha);
        arg
    }

    pub fn rhs(&self, y: &DVector<f64>) -> DVector<f64> {
        let s = self.sigmoid_argument(y).map(|x| self.params.sigmoid.value(x));
        DVector::from_fn(self.n(), |i, _| {
            -self.params.d * y[i] + self.directions.row(i).dot(&s.row(i)) + self.b_e[i]
        })
    }

    /// Analytic Jacobian ∂Φ_i/∂y_m.
    pub fn jacobian(&self, y: &DVector<f64>) -> DMatrix<f64> {
        let p = &self.params;
        let slopes = self.sigmoid_argument(y).map(|x| p.sigmoid.derivative(x));
        let weighted = self.directions.component_mul(&slopes);
        let coupling = &weighted * self.directions.transpose();
        let mut j = self.adjacency.component_mul(&coupling) * (p.u * p.gamma);
        for i in 0..self.n() {
            j[(i, i)] += p.u * p.alpha * weighted.row(i).dot(&self.directions.row(i)) - p.d;
        }
        j
    }

    /// Z_i = y_i p̂_i.
    pub fn lift(&self, y: &DVector<f64>) -> DMatrix<f64> {
        let mut z = self.directions.clone();
        for (i, mut row) in z.row_iter_mut().enumerate() {
            row *= y[i];
        }
        z
    }

    /// y_i = p̂_iᵀZ_i.
    pub fn effective(&self, z: &DMatrix<f64>) -> DVector<f64> {
        DVector::from_fn(self.n(), |i, _| self.directions.row(i).dot(&z.row(i)))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SystemKind {
    Full,
    Reduced,
}

/// How initial conditions outside the constraint subspaces are treated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProjectionPolicy {
    /// Project and log a warning.
    #[default]
    Project,
    /// Reject with a validation error.
    Strict,
    /// Integrate the raw state as given.
    Keep,
}

#[derive(Debug, Clone, PartialEq)]
pub enum InitialCondition {
    Full(DMatrix<f64>),
    Effective(DVector<f64>),
    /// Uniform in [-epsilon, epsilon] per coordinate, then projected.
    Seeded { seed: u64, epsilon: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IntegrationSettings {
    pub dt: f64,
    pub horizon: f64,
    pub sample_every: usize,
    #[serde(default)]
    pub projection: ProjectionPolicy,
}

impl Default for IntegrationSettings {
    fn default() -> Self {
        Self {
            dt: DEFAULT_DT,
            horizon: DEFAULT_HORIZON,
            sample_every: 1,
            projection: ProjectionPolicy::Project,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct TrajectoryMeta {
    pub system: Option<SystemKind>,
    pub params: Option<NodParams>,
    pub graph_id: String,
    pub constraint_id: String,
    pub seed: Option<u64>,
}

/// Sampled solution. `full` is empty for reduced runs; `effective` is empty
/// for full runs with higher-rank constraints.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub full: Vec<DMatrix<f64>>,
    pub effective: Vec<DVector<f64>>,
    pub meta: TrajectoryMeta,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn final_full(&self) -> Option<&DMatrix<f64>> {
        self.full.last()
    }

    pub fn final_effective(&self) -> Option<&DVector<f64>> {
        self.effective.last()
    }

    /// CSV with header `t,z_1_1,..,z_n_No,y_1,..,y_n`; each comment line is
    /// prefixed with `# `.
    pub fn to_csv(&self, comments: &[String]) -> String {
        let mut out = String::new();
        for c in comments {
            out.push_str("# ");
            out.push_str(c);
            out.push('\n');
        }
        let mut header = vec!["t".to_string()];
        if let Some(z) = self.full.first() {
            for i in 0..z.nrows() {
                for j in 0..z.ncols() {
                    header.push(format!("z_{}_{}", i + 1, j + 1));
                }
            }
        }
        if let Some(y) = self.effective.first() {
            header.extend((1..=y.len()).map(|i| format!("y_{i}")));
        }
        out.push_str(&header.join(","));
        out.push('\n');
        for (k, t) in self.times.iter().enumerate() {
            let mut row = vec![t.to_string()];
            if let Some(z) = self.full.get(k) {
                for i in 0..z.nrows() {
                    row.extend(z.row(i).iter().map(|x| x.to_string()));
                }
            }
            if let Some(y) = self.effective.get(k) {
                row.extend(y.iter().map(|x| x.to_string()));
            }
            out.push_str(&row.join(","));
            out.push('\n');
        }
        out
    }
}

/// Classic fixed-step RK4. The last step is shortened to land on `horizon`.
/// `observe` is called at t = 0, every `sample_every` steps, and at the end.
pub fn rk4<F, O>(
    mut field: F,
    x0: DVector<f64>,
    dt: f64,
    horizon: f64,
    sample_every: usize,
    mut observe: O,
) -> Result<DVector<f64>>
where
    F: FnMut(&DVector<f64>) -> DVector<f64>,
    O: FnMut(f64, &DVector<f64>),
{
    if !(dt > 0.0 && dt.is_finite()) || !(horizon >= dt) || sample_every == 0 {
        return Err(Error::Validation(format!(
            "need dt > 0, horizon >= dt, sample_every >= 1 (dt = {dt}, horizon = {horizon}, sample_every = {sample_every})"
        )));
    }
    if x0.iter().any(|x| !x.is_finite()) {
        return Err(Error::Validation("initial state is not finite".into()));
    }
    let ratio = horizon / dt;
    let steps = if (ratio - ratio.round()).abs() < 1e-9 {
        ratio.round() as usize
    } else {
        ratio.ceil() as usize
    };
    let mut x = x0;
    observe(0.0, &x);
    for step in 1..=steps {
        let t0 = (step - 1) as f64 * dt;
        let h = if step == steps { horizon - t0 } else { dt };
        let k1 = field(&x);
        let k2 = field(&(&x + &k1 * (h / 2.0)));
        let k3 = field(&(&x + &k2 * (h / 2.0)));
        let k4 = field(&(&x + &k3 * h));
        x += (k1 + (k2 + k3) * 2.0 + k4) * (h / 6.0);
        let t = if step == steps { horizon } else { step as f64 * dt };
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::Divergence { time: t });
        }
        if step % sample_every == 0 || step == steps {
            observe(t, &x);
        }
    }
    Ok(x)
}

/// Graph, constraints, parameters and raw bias of one opinion-dynamics setup.
#[derive(Debug, Clone)]
pub struct NodProblem {
    pub graph: Graph,
    pub constraints: ConstraintSet,
    pub params: NodParams,
    pub bias: DMatrix<f64>,
}

impl NodProblem {
    pub fn new(graph: Graph, constraints: ConstraintSet, params: NodParams, bias: DMatrix<f64>) -> Result<Self> {
        params.validate()?;
        check_state(&bias, &graph, &constraints, &bias)?;
        Ok(Self {
            graph,
            constraints,
            params,
            bias,
        })
    }

    pub fn n_agents(&self) -> usize {
        self.graph.n()
    }

    pub fn n_options(&self) -> usize {
        self.constraints.n_options()
    }

    pub fn full_model(&self) -> FullModel {
        FullModel::new(&self.graph, &self.constraints, &self.params, &self.bias)
    }

    pub fn reduced_model(&self) -> Result<ReducedModel> {
        ReducedModel::from_bias(&self.graph, &self.constraints, &self.params, &self.bias)
    }

    /// Resolves an initial condition to a full state, applying `policy`.
    pub fn initial_full_state(&self, ic: &InitialCondition, policy: ProjectionPolicy) -> Result<DMatrix<f64>> {
        let (n, no) = (self.n_agents(), self.n_options());
        let raw = match ic {
            InitialCondition::Full(z) => {
                if z.nrows() != n || z.ncols() != no {
                    return Err(Error::Dimension(format!(
                        "initial state is {}x{}, expected {n}x{no}",
                        z.nrows(),
                        z.ncols()
                    )));
                }
                z.clone()
            }
            InitialCondition::Effective(y) => {
                let model = self.reduced_model()?;
                if y.len() != n {
                    return Err(Error::Dimension(format!("initial state has {} entries, expected {n}", y.len())));
                }
                return Ok(model.lift(y));
            }
            InitialCondition::Seeded { seed, epsilon } => {
                let raw = seeded_uniform(*seed, *epsilon, n * no);
                // Seeded states are projected under every policy.
                return Ok(self.constraints.project_state(&DMatrix::from_row_slice(n, no, raw.as_slice())));
            }
        };
        let violation = self.constraints.violation(&raw).into_iter().fold(0.0, f64::max);
        let tol = 1e-12 * (1.0 + raw.amax());
        if violation <= tol || policy == ProjectionPolicy::Keep {
            return Ok(raw);
        }
        match policy {
            ProjectionPolicy::Strict => Err(Error::Validation(format!(
                "initial state violates constraints by {violation:e}"
            ))),
            _ => {
                log::warn!("initial state violates constraints by {violation:e}; projecting");
                Ok(self.constraints.project_state(&raw))
            }
        }
    }

    pub fn initial_effective_state(&self, ic: &InitialCondition) -> Result<DVector<f64>> {
        let model = self.reduced_model()?;
        match ic {
            InitialCondition::Effective(y) if y.len() == self.n_agents() => Ok(y.clone()),
            InitialCondition::Effective(y) => Err(Error::Dimension(format!(
                "initial state has {} entries, expected {}",
                y.len(),
                self.n_agents()
            ))),
            InitialCondition::Seeded { seed, epsilon } => Ok(seeded_uniform(*seed, *epsilon, self.n_agents())),
            InitialCondition::Full(_) => {
                let z = self.initial_full_state(ic, ProjectionPolicy::Project)?;
                Ok(model.effective(&z))
            }
        }
    }

    pub fn integrate(
        &self,
        system: SystemKind,
        ic: &InitialCondition,
        settings: &IntegrationSettings,
    ) -> Result<Trajectory> {
        let seed = match ic {
            InitialCondition::Seeded { seed, .. } => Some(*seed),
            _ => None,
        };
        let mut traj = Trajectory {
            times: Vec::new(),
            full: Vec::new(),
            effective: Vec::new(),
            meta: TrajectoryMeta {
                system: Some(system),
                params: Some(self.params.clone()),
                seed,
                ..Default::default()
            },
        };
        match system {
            SystemKind::Full => {
                let z0 = self.initial_full_state(ic, settings.projection)?;
                let (n, no) = (self.n_agents(), self.n_options());
                let model = self.full_model();
                let reduced = self.constraints.is_rank_one().then(|| self.reduced_model()).transpose()?;
                let field = |x: &DVector<f64>| {
                    let z = DMatrix::from_row_slice(n, no, x.as_slice());
                    let dz = model.rhs(&z);
                    DVector::from_row_slice(dz.transpose().as_slice())
                };
                let x0 = DVector::from_row_slice(z0.transpose().as_slice());
                rk4(field, x0, settings.dt, settings.horizon, settings.sample_every, |t, x| {
                    let z = DMatrix::from_row_slice(n, no, x.as_slice());
                    traj.times.push(t);
                    if let Some(r) = &reduced {
                        traj.effective.push(r.effective(&z));
                    }
                    traj.full.push(z);
                })?;
            }
            SystemKind::Reduced => {
                let model = self.reduced_model()?;
                let y0 = self.initial_effective_state(ic)?;
                rk4(|y| model.rhs(y), y0, settings.dt, settings.horizon, settings.sample_every, |t, y| {
                    traj.times.push(t);
                    traj.effective.push(y.clone());
                })?;
            }
        }
        Ok(traj)
    }
}

pub fn seeded_uniform(seed: u64, epsilon: f64, len: usize) -> DVector<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    DVector::from_fn(len, |_, _| {
        if epsilon > 0.0 {
            rng.random_range(-epsilon..=epsilon)
        } else {
            0.0
        }
    })
}

/// Per-agent maximum over samples of ‖P_i^⊥ Z_i(t)‖.
pub fn constraint_drift(traj: &Trajectory, c: &ConstraintSet) -> Result<Vec<f64>> {
    if traj.full.is_empty() {
        return Err(Error::Domain("constraint drift needs a full-state trajectory".into()));
    }
    let complements: Vec<_> = (0..c.n_agents()).map(|i| c.complement(i)).collect();
    let mut drift = vec![0.0_f64; c.n_agents()];
    for z in &traj.full {
        if z.nrows() != c.n_agents() || z.ncols() != c.n_options() {
            return Err(Error::Dimension("trajectory does not match constraint set".into()));
        }
        for (i, perp) in complements.iter().enumerate() {
            drift[i] = drift[i].max((perp * z.row(i).transpose()).norm());
        }
    }
    Ok(drift)
}

/// Integrates both the full system from Z_i(0) = y_i(0) p̂_i and the reduced
/// system from y(0); returns max over samples and agents of |p̂_iᵀZ_i − y_i|.
pub fn full_reduced_equivalence(
    g: &Graph,
    c: &ConstraintSet,
    p: &NodParams,
    b: &DMatrix<f64>,
    y0: &DVector<f64>,
    horizon: f64,
    dt: f64,
) -> Result<f64> {
    let problem = NodProblem::new(g.clone(), c.clone(), p.clone(), b.clone())?;
    let settings = IntegrationSettings {
        dt,
        horizon,
        sample_every: 1,
        projection: ProjectionPolicy::Strict,
    };
    let ic = InitialCondition::Effective(y0.clone());
    let full = problem.integrate(SystemKind::Full, &ic, &settings)?;
    let reduced = problem.integrate(SystemKind::Reduced, &ic, &settings)?;
    Ok(full
        .effective
        .iter()
        .zip(&reduced.effective)
        .map(|(a, b)| (a - b).amax())
        .fold(0.0, f64::max))
}
