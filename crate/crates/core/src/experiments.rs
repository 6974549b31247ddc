//! Seed-ensemble harness and the named controller experiments.
//!
//! Every experiment is a list of variations applied to a shared base
//! configuration and run over a list of seeds. Each `(variation, seed)` run is
//! independent, so the grid runs in parallel on the current rayon pool.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::controllers::ControllerSpec;
use crate::engine::{run_job, BatchJob, SimConfig, StabilityCriterion, StepMetrics};
use crate::error::{Result, SimError};

/// Horizon of the popular and strategic spectrum experiments.
pub const SPECTRUM_HORIZON: usize = 180;
/// Horizon of the strategic-versus-stubborn comparison.
pub const STRAT_VS_STUB_HORIZON: usize = 3500;
/// Popular-agent counts swept for each `rho`.
pub const POPULAR_COUNTS: [usize; 5] = [1, 2, 5, 10, 50];
pub const PEOPLE_PLEASER_RHO: f64 = -10.0;
pub const POPULARIZER_RHO: f64 = 10.0;
/// Eleven strategic `rho` values from heavy-handed to gentle.
pub const STRATEGIC_RHO_GRID: [f64; 11] = [
    -100.0, -10.0, -5.0, -2.0, -1.0, 0.0, 1.0, 2.0, 5.0, 10.0, 100.0,
];
pub const STRAT_VS_STUB_RHO: f64 = 2.0;
pub const STRAT_VS_STUB_EPS: [f64; 3] = [0.0, 0.001, 0.01];
pub const CONTROL: &str = "control";

/// Default ensemble: seeds `0..20`.
pub fn default_seeds() -> Vec<u64> {
    (0..20).collect()
}

/// Overrides applied on top of an experiment's base configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Variation {
    pub name: String,
    /// Replaces the base controller list.
    pub controllers: Vec<ControllerSpec>,
    /// Replaces the base edge floor when set.
    pub eps_edge: Option<f64>,
}

impl Variation {
    pub fn control() -> Self {
        Variation {
            name: CONTROL.to_string(),
            controllers: Vec::new(),
            eps_edge: None,
        }
    }

    pub fn apply(&self, base: &SimConfig) -> SimConfig {
        let mut cfg = base.clone();
        cfg.controllers = self.controllers.clone();
        if let Some(eps) = self.eps_edge {
            cfg.edge.eps_edge = eps;
        }
        cfg
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub name: String,
    pub base: SimConfig,
    pub variations: Vec<Variation>,
    pub seeds: Vec<u64>,
    pub horizon: usize,
    /// Reported only; runs always go to the full horizon unless
    /// `stop_early` is set.
    pub stability: Option<StabilityCriterion>,
    /// Keep the per-step metrics of every run in the result.
    pub keep_trajectories: bool,
}

impl ExperimentConfig {
    pub fn new(
        name: impl Into<String>,
        base: SimConfig,
        variations: Vec<Variation>,
        seeds: Vec<u64>,
        horizon: usize,
    ) -> Self {
        ExperimentConfig {
            name: name.into(),
            base,
            variations,
            seeds,
            horizon,
            stability: None,
            keep_trajectories: false,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.seeds.is_empty() {
            return Err(SimError::InvalidArgument("seed list is empty".into()));
        }
        if self.horizon < 1 {
            return Err(SimError::InvalidArgument("horizon must be >= 1".into()));
        }
        if self.variations.is_empty() {
            return Err(SimError::InvalidArgument("no variations".into()));
        }
        Ok(())
    }
}

/// Final metrics of one completed `(variation, seed)` run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub variation: String,
    pub seed: u64,
    pub final_metrics: StepMetrics,
    pub stabilized_at: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub trajectory: Option<Vec<StepMetrics>>,
}

impl RunRecord {
    /// 1-norm of the final standard-agent mean opinion, i.e. its distance to
    /// the all-zero opinion.
    pub fn final_l1(&self) -> f64 {
        self.final_metrics
            .mean_opinion
            .iter()
            .map(|v| v.abs())
            .sum()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunFailure {
    pub variation: String,
    pub seed: u64,
    pub error: String,
}

/// Summary statistics of one scalar over an ensemble.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub mean: f64,
    /// Sample standard deviation (0 for a single run).
    pub std: f64,
    pub min: f64,
    pub max: f64,
}

impl Summary {
    pub fn of(values: &[f64]) -> Option<Summary> {
        if values.is_empty() {
            return None;
        }
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let std = if values.len() > 1 {
            (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
        } else {
            0.0
        };
        let min = values.iter().copied().fold(f64::INFINITY, f64::min);
        let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        // the running sum can round the mean just past an extreme
        Some(Summary {
            mean: mean.clamp(min, max),
            std,
            min,
            max,
        })
    }
}

/// Across-seed statistics for one variation, over completed runs only.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Aggregate {
    pub variation: String,
    pub runs: usize,
    pub failures: usize,
    /// Per-topic summary of the final standard-agent mean opinion.
    pub mean_opinion: Vec<Summary>,
    /// Summary of the 1-norm of the final mean opinion.
    pub l1: Option<Summary>,
    pub component_count: Option<Summary>,
    pub intra_cluster_dispersion: Option<Summary>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentResult {
    pub name: String,
    pub horizon: usize,
    pub m: usize,
    pub variations: Vec<String>,
    /// Completed runs in `(variation, seed)` grid order.
    pub runs: Vec<RunRecord>,
    pub failures: Vec<RunFailure>,
    pub aggregates: Vec<Aggregate>,
}

impl ExperimentResult {
    pub fn runs_for<'a>(&'a self, variation: &'a str) -> impl Iterator<Item = &'a RunRecord> + 'a {
        self.runs.iter().filter(move |r| r.variation == variation)
    }

    pub fn run(&self, variation: &str, seed: u64) -> Option<&RunRecord> {
        self.runs
            .iter()
            .find(|r| r.variation == variation && r.seed == seed)
    }

    pub fn aggregate(&self, variation: &str) -> Option<&Aggregate> {
        self.aggregates.iter().find(|a| a.variation == variation)
    }
}

/// Runs every `(variation, seed)` pair and aggregates the final metrics.
/// Failed runs are reported with their identifiers and excluded from the
/// aggregates.
pub fn seed_sweep(config: &ExperimentConfig) -> Result<ExperimentResult> {
    config.validate()?;
    let grid: Vec<(usize, u64)> = (0..config.variations.len())
        .flat_map(|v| config.seeds.iter().map(move |&s| (v, s)))
        .collect();
    let outcomes: Vec<_> = grid
        .par_iter()
        .map(|&(v, seed)| {
            let job = BatchJob {
                config: config.variations[v].apply(&config.base),
                seed,
                steps: config.horizon,
                stability: config.stability,
            };
            run_job(&job)
        })
        .collect();

    let mut runs = Vec::new();
    let mut failures = Vec::new();
    for (&(v, seed), outcome) in grid.iter().zip(outcomes) {
        let variation = config.variations[v].name.clone();
        match outcome {
            Ok(out) => {
                let final_metrics = out
                    .trajectory
                    .metrics
                    .last()
                    .cloned()
                    .unwrap_or_else(|| out.final_state.metrics());
                runs.push(RunRecord {
                    variation,
                    seed,
                    final_metrics,
                    stabilized_at: out.trajectory.stabilized_at,
                    trajectory: config.keep_trajectories.then_some(out.trajectory.metrics),
                });
            }
            Err(e) => failures.push(RunFailure {
                variation,
                seed,
                error: e.to_string(),
            }),
        }
    }

    let aggregates = config
        .variations
        .iter()
        .map(|v| aggregate(&v.name, config.base.m, &runs, &failures))
        .collect();
    Ok(ExperimentResult {
        name: config.name.clone(),
        horizon: config.horizon,
        m: config.base.m,
        variations: config.variations.iter().map(|v| v.name.clone()).collect(),
        runs,
        failures,
        aggregates,
    })
}

fn aggregate(name: &str, m: usize, runs: &[RunRecord], failures: &[RunFailure]) -> Aggregate {
    let mine: Vec<&RunRecord> = runs.iter().filter(|r| r.variation == name).collect();
    let collect =
        |f: &dyn Fn(&RunRecord) -> f64| -> Vec<f64> { mine.iter().map(|r| f(r)).collect() };
    let mean_opinion = (0..m)
        .filter_map(|j| Summary::of(&collect(&|r| r.final_metrics.mean_opinion[j])))
        .collect();
    Aggregate {
        variation: name.to_string(),
        runs: mine.len(),
        failures: failures.iter().filter(|f| f.variation == name).count(),
        mean_opinion,
        l1: Summary::of(&collect(&|r| r.final_l1())),
        component_count: Summary::of(&collect(&|r| r.final_metrics.component_count as f64)),
        intra_cluster_dispersion: Summary::of(&collect(&|r| {
            r.final_metrics.intra_cluster_dispersion
        })),
    }
}

fn zero_goal(m: usize) -> Vec<f64> {
    vec![0.0; m]
}

/// Popular-agent spectrum: control, then `rho = -10` and `rho = +10` agents
/// at each count in [`POPULAR_COUNTS`].
pub fn popular_spectrum_config(seeds: Vec<u64>, horizon: usize) -> ExperimentConfig {
    let mut variations = vec![Variation::control()];
    for (label, rho) in [
        ("people-pleaser", PEOPLE_PLEASER_RHO),
        ("popularizer", POPULARIZER_RHO),
    ] {
        for count in POPULAR_COUNTS {
            variations.push(Variation {
                name: format!("{label}-x{count}"),
                controllers: vec![ControllerSpec::Popular { rho }; count],
                eps_edge: None,
            });
        }
    }
    ExperimentConfig::new(
        "popular-spectrum",
        SimConfig::baseline(),
        variations,
        seeds,
        horizon,
    )
}

/// One strategic agent with goal `0` at each `rho` of the grid, plus control.
pub fn strategic_spectrum_config(
    seeds: Vec<u64>,
    horizon: usize,
    rho_grid: &[f64],
) -> ExperimentConfig {
    let base = SimConfig::baseline();
    let mut variations = vec![Variation::control()];
    variations.extend(rho_grid.iter().map(|&rho| Variation {
        name: format!("strategic-rho{rho}"),
        controllers: vec![ControllerSpec::Strategic {
            rho,
            goal: zero_goal(base.m),
        }],
        eps_edge: None,
    }));
    ExperimentConfig::new("strategic-spectrum", base, variations, seeds, horizon)
}

/// Stubborn versus strategic (`rho = 2`), both targeting `0`, at each edge
/// floor in [`STRAT_VS_STUB_EPS`].
pub fn strat_vs_stub_config(seeds: Vec<u64>, horizon: usize) -> ExperimentConfig {
    let base = SimConfig::baseline();
    let mut variations = Vec::new();
    for eps in STRAT_VS_STUB_EPS {
        variations.push(Variation {
            name: format!("stubborn-eps{eps}"),
            controllers: vec![ControllerSpec::Stubborn {
                opinion: zero_goal(base.m),
            }],
            eps_edge: Some(eps),
        });
        variations.push(Variation {
            name: format!("strategic-eps{eps}"),
            controllers: vec![ControllerSpec::Strategic {
                rho: STRAT_VS_STUB_RHO,
                goal: zero_goal(base.m),
            }],
            eps_edge: Some(eps),
        });
    }
    ExperimentConfig::new("strat-vs-stub", base, variations, seeds, horizon)
}

pub fn popular_spectrum_experiment(seeds: Vec<u64>, horizon: usize) -> Result<ExperimentResult> {
    seed_sweep(&popular_spectrum_config(seeds, horizon))
}

pub fn strategic_spectrum_experiment(seeds: Vec<u64>, horizon: usize) -> Result<ExperimentResult> {
    seed_sweep(&strategic_spectrum_config(
        seeds,
        horizon,
        &STRATEGIC_RHO_GRID,
    ))
}

pub fn strategic_vs_stubborn_experiment(
    seeds: Vec<u64>,
    horizon: usize,
) -> Result<ExperimentResult> {
    seed_sweep(&strat_vs_stub_config(seeds, horizon))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small_base() -> SimConfig {
        SimConfig {
            n_standard: 10,
            ..SimConfig::baseline()
        }
    }

    #[test]
    fn variation_counts() {
        assert_eq!(
            popular_spectrum_config(default_seeds(), 180)
                .variations
                .len(),
            11
        );
        assert_eq!(
            strategic_spectrum_config(default_seeds(), 180, &STRATEGIC_RHO_GRID)
                .variations
                .len(),
            12
        );
        assert_eq!(
            strat_vs_stub_config(default_seeds(), 3500).variations.len(),
            6
        );
    }

    #[test]
    fn sweep_counts_rows() {
        let cfg = ExperimentConfig::new(
            "t",
            small_base(),
            vec![Variation::control()],
            (0..5).collect(),
            10,
        );
        let r = seed_sweep(&cfg).unwrap();
        assert_eq!(r.runs.len(), 5);
        assert_eq!(r.aggregates.len(), 1);
        assert_eq!(r.aggregates[0].runs, 5);
        assert!(r.failures.is_empty());
    }

    #[test]
    fn sweep_rejects_empty_seeds() {
        let cfg = ExperimentConfig::new("t", small_base(), vec![Variation::control()], vec![], 10);
        assert!(seed_sweep(&cfg).is_err());
    }

    #[test]
    fn repeated_seed_gives_identical_rows() {
        let cfg = ExperimentConfig::new(
            "t",
            small_base(),
            vec![Variation::control()],
            vec![7, 7],
            25,
        );
        let r = seed_sweep(&cfg).unwrap();
        assert_eq!(r.runs[0], r.runs[1]);
    }

    #[test]
    fn failures_are_reported_not_dropped() {
        let bad = Variation {
            name: "bad-goal".into(),
            controllers: vec![ControllerSpec::Strategic {
                rho: 1.0,
                goal: vec![0.0],
            }],
            eps_edge: None,
        };
        let cfg = ExperimentConfig::new(
            "t",
            small_base(),
            vec![Variation::control(), bad],
            vec![1, 2],
            5,
        );
        let r = seed_sweep(&cfg).unwrap();
        assert_eq!(r.runs.len(), 2);
        assert_eq!(r.failures.len(), 2);
        assert!(r.failures.iter().all(|f| f.variation == "bad-goal"));
        let agg = r.aggregate("bad-goal").unwrap();
        assert_eq!((agg.runs, agg.failures), (0, 2));
        assert!(agg.l1.is_none());
    }

    #[test]
    fn summary_statistics() {
        let s = Summary::of(&[1.0, 2.0, 3.0]).unwrap();
        assert_eq!((s.mean, s.min, s.max), (2.0, 1.0, 3.0));
        assert!((s.std - 1.0).abs() < 1e-12);
        assert_eq!(Summary::of(&[4.0]).unwrap().std, 0.0);
        assert!(Summary::of(&[]).is_none());
    }

    #[test]
    fn variation_overrides_base() {
        let v = Variation {
            name: "x".into(),
            controllers: vec![ControllerSpec::Popular { rho: 3.0 }],
            eps_edge: Some(0.01),
        };
        let cfg = v.apply(&small_base());
        assert_eq!(cfg.controllers.len(), 1);
        assert_eq!(cfg.edge.eps_edge, 0.01);
        assert_eq!(cfg.edge.theta, 7);
    }
}
