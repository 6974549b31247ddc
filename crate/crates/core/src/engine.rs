//! Single-run orchestration: initialization, the synchronous update step,
//! per-step metrics, and stability detection.

use std::collections::VecDeque;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::controllers::{apply_popular, apply_strategic, apply_stubborn, ControllerSpec};
use crate::error::{Result, SimError};
use crate::matrix::{
    l1_distance, renorm_hadamard_power, row_similarity_matrix, DenseMatrix, NormEps,
};
use crate::network::{
    opinion_step, resample_edges, weights_from_similarity, AdjacencyMatrix, EdgeParams,
    OpinionMatrix, RngStream, Role,
};

/// Everything needed to build the initial state of a run, apart from the seed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    pub n_standard: usize,
    pub m: usize,
    /// One entry per controller agent; controllers are appended after the
    /// standard agents in this order.
    pub controllers: Vec<ControllerSpec>,
    pub edge: EdgeParams,
    pub eps_norm: f64,
}

impl SimConfig {
    /// 50 standard agents, 3 topics, `theta = 7`, default edge floor.
    pub fn baseline() -> Self {
        SimConfig {
            n_standard: 50,
            m: 3,
            controllers: Vec::new(),
            edge: EdgeParams {
                theta: 7,
                eps_edge: EdgeParams::DEFAULT_EPS_EDGE,
            },
            eps_norm: NormEps::DEFAULT.get(),
        }
    }

    pub fn n_agents(&self) -> usize {
        self.n_standard + self.controllers.len()
    }

    pub fn init(&self, seed: u64) -> Result<SimulationState> {
        init_network(
            self.n_standard,
            self.m,
            &self.controllers,
            self.edge,
            NormEps::new(self.eps_norm)?,
            RngStream::new(seed),
        )
    }
}

/// When a run counts as settled: the mean absolute per-entry opinion change,
/// averaged over the last `window` steps, drops below `tol`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StabilityCriterion {
    pub tol: f64,
    pub window: usize,
    /// Stop the run at the first stable step instead of only reporting it.
    #[serde(default)]
    pub stop_early: bool,
}

impl Default for StabilityCriterion {
    fn default() -> Self {
        StabilityCriterion {
            tol: 1e-4,
            window: 20,
            stop_early: false,
        }
    }
}

impl StabilityCriterion {
    pub fn validate(&self) -> Result<()> {
        if !(self.tol.is_finite() && self.tol > 0.0) {
            return Err(SimError::OutOfRange(format!(
                "stability tol must be > 0, got {}",
                self.tol
            )));
        }
        if self.window < 1 {
            return Err(SimError::OutOfRange("stability window must be >= 1".into()));
        }
        Ok(())
    }
}

/// True iff the last `window` entries of `history` average below `tol`.
/// Too short a history is simply not stable yet.
pub fn detect_stability(history: &[f64], criterion: &StabilityCriterion) -> bool {
    let w = criterion.window;
    if w == 0 || history.len() < w {
        return false;
    }
    let tail = &history[history.len() - w..];
    tail.iter().sum::<f64>() / (w as f64) < criterion.tol
}

/// Metrics recorded after a step.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepMetrics {
    pub k: usize,
    /// Per-topic mean over standard agents (all agents if there are none).
    pub mean_opinion: Vec<f64>,
    /// Per-topic mean over every agent, controllers included.
    pub mean_opinion_all: Vec<f64>,
    pub component_count: usize,
    pub mean_degree: f64,
    /// Mean over components of the mean 1-norm distance to the component
    /// centroid.
    pub intra_cluster_dispersion: f64,
    /// Mean absolute per-entry opinion change of the step that produced
    /// this record (0 for the initial state).
    pub opinion_change: f64,
}

/// Component labels (by order of first vertex) and the component count.
pub fn connected_components(a: &AdjacencyMatrix) -> (Vec<usize>, usize) {
    let n = a.n();
    let mut label = vec![usize::MAX; n];
    let mut count = 0;
    let mut queue = VecDeque::new();
    for start in 0..n {
        if label[start] != usize::MAX {
            continue;
        }
        label[start] = count;
        queue.push_back(start);
        while let Some(u) = queue.pop_front() {
            for (v, lv) in label.iter_mut().enumerate() {
                if *lv == usize::MAX && a.get(u, v) {
                    *lv = count;
                    queue.push_back(v);
                }
            }
        }
        count += 1;
    }
    (label, count)
}

/// Mean over components of the average 1-norm distance from each member's
/// opinion to the component centroid. Singletons contribute zero.
pub fn intra_cluster_dispersion(x: &OpinionMatrix, a: &AdjacencyMatrix) -> f64 {
    let (labels, count) = connected_components(a);
    if count == 0 {
        return 0.0;
    }
    let m = x.m();
    let mut members = vec![Vec::new(); count];
    for (i, &c) in labels.iter().enumerate() {
        members[c].push(i);
    }
    let total: f64 = members
        .iter()
        .map(|idx| {
            let mut centroid = vec![0.0; m];
            for &i in idx {
                for (c, &v) in centroid.iter_mut().zip(x.row(i)) {
                    *c += v;
                }
            }
            let size = idx.len() as f64;
            centroid.iter_mut().for_each(|c| *c /= size);
            idx.iter()
                .map(|&i| l1_distance(x.row(i), &centroid))
                .sum::<f64>()
                / size
        })
        .sum();
    total / count as f64
}

/// Full state of one seeded run at time `k`.
#[derive(Debug, Clone)]
pub struct SimulationState {
    pub x: OpinionMatrix,
    pub a: AdjacencyMatrix,
    pub roles: Vec<Role>,
    pub controllers: Vec<ControllerSpec>,
    pub edge: EdgeParams,
    pub eps: NormEps,
    pub k: usize,
    pub rng: RngStream,
    last_change: f64,
}

/// Builds the initial state: standard opinions i.i.d. uniform, then one
/// uniform row per popular/strategic controller (stubborn controllers use
/// their fixed opinion), then one round of edge sampling on the initial
/// opinions. Controllers start with no edges.
pub fn init_network(
    n_standard: usize,
    m: usize,
    specs: &[ControllerSpec],
    edge: EdgeParams,
    eps: NormEps,
    mut rng: RngStream,
) -> Result<SimulationState> {
    if n_standard < 1 {
        return Err(SimError::InvalidArgument("n_standard must be >= 1".into()));
    }
    if m < 1 {
        return Err(SimError::InvalidArgument("m must be >= 1".into()));
    }
    edge.validate()?;
    for spec in specs {
        spec.validate(m)?;
    }
    let n = n_standard + specs.len();
    let mut x = DenseMatrix::zeros(n, m);
    for i in 0..n_standard {
        for v in x.row_mut(i) {
            *v = rng.uniform();
        }
    }
    for (c, spec) in specs.iter().enumerate() {
        let row = x.row_mut(n_standard + c);
        match spec {
            ControllerSpec::Stubborn { opinion } => row.copy_from_slice(opinion),
            _ => row.iter_mut().for_each(|v| *v = rng.uniform()),
        }
    }
    let x = OpinionMatrix::new(x)?;
    let roles: Vec<Role> = (0..n)
        .map(|i| {
            if i < n_standard {
                Role::Standard
            } else {
                Role::Controller(i - n_standard)
            }
        })
        .collect();
    let a = if n >= 2 {
        let s = row_similarity_matrix(x.matrix(), eps)?;
        let s_hat = renorm_hadamard_power(&s, f64::from(edge.theta), eps)?;
        let mut a = resample_edges(&s_hat, &edge, &roles, &mut rng)?;
        for i in n_standard..n {
            a.isolate(i);
        }
        a
    } else {
        AdjacencyMatrix::empty(n)
    };
    Ok(SimulationState {
        x,
        a,
        roles,
        controllers: specs.to_vec(),
        edge,
        eps,
        k: 0,
        rng,
        last_change: 0.0,
    })
}

/// Output of [`SimulationState::run`].
#[derive(Debug, Clone)]
pub struct Trajectory {
    /// One record per executed step, `k = 1..`.
    pub metrics: Vec<StepMetrics>,
    /// First step at which the stability criterion held, if any.
    pub stabilized_at: Option<usize>,
}

impl SimulationState {
    /// Assembles a state from explicit parts; `roles[i] = Controller(c)`
    /// refers to `controllers[c]`.
    #[allow(clippy::too_many_arguments)]
    pub fn from_parts(
        x: OpinionMatrix,
        a: AdjacencyMatrix,
        roles: Vec<Role>,
        controllers: Vec<ControllerSpec>,
        edge: EdgeParams,
        eps: NormEps,
        rng: RngStream,
    ) -> Result<Self> {
        let n = x.n();
        if a.n() != n || roles.len() != n {
            return Err(SimError::Dimension(format!(
                "{n} opinion rows, {} vertices, {} roles",
                a.n(),
                roles.len()
            )));
        }
        if !a.is_symmetric() || !a.is_hollow() {
            return Err(SimError::InvalidArgument(
                "adjacency must be symmetric and hollow".into(),
            ));
        }
        for r in &roles {
            if let Role::Controller(c) = *r {
                let spec = controllers.get(c).ok_or(SimError::IndexOutOfRange {
                    index: c,
                    n: controllers.len(),
                })?;
                spec.validate(x.m())?;
            }
        }
        edge.validate()?;
        Ok(SimulationState {
            x,
            a,
            roles,
            controllers,
            edge,
            eps,
            k: 0,
            rng,
            last_change: 0.0,
        })
    }

    pub fn n(&self) -> usize {
        self.x.n()
    }

    /// Advances one synchronous step. Every quantity is computed from the
    /// time-`k` opinions and graph; the only randomness is the edge draw.
    pub fn step(&mut self) -> Result<()> {
        let n = self.n();
        if n < 2 {
            self.k += 1;
            self.last_change = 0.0;
            return Ok(());
        }
        let s = row_similarity_matrix(self.x.matrix(), self.eps)?;
        self.ensure_finite(&s, "similarity matrix")?;

        let mut w = weights_from_similarity(&s, &self.a);
        for (i, role) in self.roles.iter().enumerate() {
            if let Role::Controller(c) = *role {
                if let ControllerSpec::Stubborn { .. } = self.controllers[c] {
                    apply_stubborn(&mut w, i)?;
                }
            }
        }
        self.ensure_finite(&w, "weight matrix")?;
        let mut next = opinion_step(&self.x, &w)?;

        for (i, role) in self.roles.iter().enumerate() {
            let Role::Controller(c) = *role else { continue };
            let row = match &self.controllers[c] {
                ControllerSpec::Stubborn { .. } => continue,
                ControllerSpec::Popular { rho } => {
                    apply_popular(&self.x, &self.a, i, *rho, self.eps)?
                }
                ControllerSpec::Strategic { rho, goal } => {
                    apply_strategic(&self.x, &self.a, i, goal, *rho, self.eps)?
                }
            };
            if row.iter().any(|v| v.is_nan()) {
                return Err(SimError::NaN {
                    step: self.k,
                    detail: format!("controller output for agent {i}"),
                });
            }
            next.set_row(i, &row);
        }

        let s_hat = renorm_hadamard_power(&s, f64::from(self.edge.theta), self.eps)?;
        self.ensure_finite(&s_hat, "edge probabilities")?;
        let a_next = resample_edges(&s_hat, &self.edge, &self.roles, &mut self.rng)?;

        let entries = (n * self.x.m()) as f64;
        self.last_change = self
            .x
            .matrix()
            .as_slice()
            .iter()
            .zip(next.matrix().as_slice())
            .map(|(a, b)| (a - b).abs())
            .sum::<f64>()
            / entries;
        self.x = next;
        self.a = a_next;
        self.k += 1;
        Ok(())
    }

    fn ensure_finite(&self, m: &DenseMatrix, what: &str) -> Result<()> {
        if m.as_slice().iter().all(|v| v.is_finite()) {
            Ok(())
        } else {
            Err(SimError::NaN {
                step: self.k,
                detail: format!("non-finite entry in {what}"),
            })
        }
    }

    /// Metrics of the current state.
    pub fn metrics(&self) -> StepMetrics {
        let n = self.n();
        let m = self.x.m();
        let mut sum_std = vec![0.0; m];
        let mut sum_all = vec![0.0; m];
        let mut n_std = 0usize;
        for i in 0..n {
            let row = self.x.row(i);
            for j in 0..m {
                sum_all[j] += row[j];
            }
            if self.roles[i] == Role::Standard {
                n_std += 1;
                for j in 0..m {
                    sum_std[j] += row[j];
                }
            }
        }
        let mean_all: Vec<f64> = sum_all.iter().map(|s| s / n as f64).collect();
        let mean_std = if n_std == 0 {
            mean_all.clone()
        } else {
            sum_std.iter().map(|s| s / n_std as f64).collect()
        };
        let (_, component_count) = connected_components(&self.a);
        StepMetrics {
            k: self.k,
            mean_opinion: mean_std,
            mean_opinion_all: mean_all,
            component_count,
            mean_degree: 2.0 * self.a.edge_count() as f64 / n as f64,
            intra_cluster_dispersion: intra_cluster_dispersion(&self.x, &self.a),
            opinion_change: self.last_change,
        }
    }

    /// Runs up to `steps` steps, recording metrics after each one.
    pub fn run(
        &mut self,
        steps: usize,
        criterion: Option<&StabilityCriterion>,
    ) -> Result<Trajectory> {
        if steps == 0 {
            return Err(SimError::InvalidArgument("steps must be >= 1".into()));
        }
        if let Some(c) = criterion {
            c.validate()?;
        }
        let mut metrics = Vec::with_capacity(steps);
        let mut changes = Vec::with_capacity(steps);
        let mut stabilized_at = None;
        for _ in 0..steps {
            self.step()?;
            changes.push(self.last_change);
            metrics.push(self.metrics());
            if let Some(c) = criterion {
                if stabilized_at.is_none() && detect_stability(&changes, c) {
                    stabilized_at = Some(self.k);
                    if c.stop_early {
                        break;
                    }
                }
            }
        }
        Ok(Trajectory {
            metrics,
            stabilized_at,
        })
    }
}

/// One independent run in a batch.
#[derive(Debug, Clone)]
pub struct BatchJob {
    pub config: SimConfig,
    pub seed: u64,
    pub steps: usize,
    pub stability: Option<StabilityCriterion>,
}

/// Outcome of a batch job: the trajectory and the final state.
#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub trajectory: Trajectory,
    pub final_state: SimulationState,
}

pub fn run_job(job: &BatchJob) -> Result<RunOutcome> {
    let mut state = job.config.init(job.seed)?;
    let trajectory = state.run(job.steps, job.stability.as_ref())?;
    Ok(RunOutcome {
        trajectory,
        final_state: state,
    })
}

/// Runs independent jobs in parallel on the current rayon pool. Results
/// come back in job order.
pub fn run_batch(jobs: &[BatchJob]) -> Vec<Result<RunOutcome>> {
    jobs.par_iter().map(run_job).collect()
}
