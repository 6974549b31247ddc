//! Influencer controllers. Each one overrides its own agent's row of the
//! opinion update; none of them consume randomness.
//!
//! * **Stubborn** never changes its opinion.
//! * **Popular** posts a `rho`-emphasized mix of its neighbors' opinions,
//!   weighted by how far each neighbor sits from the rest of the
//!   neighborhood. Negative `rho` favors the most typical neighbors,
//!   positive `rho` the fringe ones, and `rho = 0` is the plain mean.
//! * **Strategic** mixes its neighbors with a goal opinion whose weight
//!   matches the neighbor closest to the goal. Negative `rho` pulls hard
//!   toward the goal, positive `rho` stays close to distant neighbors.

use serde::{Deserialize, Serialize};

use crate::error::{Result, SimError};
use crate::matrix::{hadamard_power_row, l1_distance, DenseMatrix, NormEps};
use crate::network::{AdjacencyMatrix, OpinionMatrix};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Archetype {
    Stubborn,
    Popular,
    Strategic,
}

impl Archetype {
    pub fn as_str(self) -> &'static str {
        match self {
            Archetype::Stubborn => "stubborn",
            Archetype::Popular => "popular",
            Archetype::Strategic => "strategic",
        }
    }
}

/// A single controller and its parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase")]
pub enum ControllerSpec {
    Stubborn { opinion: Vec<f64> },
    Popular { rho: f64 },
    Strategic { rho: f64, goal: Vec<f64> },
}

impl ControllerSpec {
    pub fn archetype(&self) -> Archetype {
        match self {
            ControllerSpec::Stubborn { .. } => Archetype::Stubborn,
            ControllerSpec::Popular { .. } => Archetype::Popular,
            ControllerSpec::Strategic { .. } => Archetype::Strategic,
        }
    }

    /// Checks parameter ranges against a topic count `m`.
    pub fn validate(&self, m: usize) -> Result<()> {
        let check_vec = |name: &str, v: &[f64]| -> Result<()> {
            if v.len() != m {
                return Err(SimError::Dimension(format!(
                    "{name} has {} entries, expected {m}",
                    v.len()
                )));
            }
            if v.iter().any(|x| !(0.0..=1.0).contains(x)) {
                return Err(SimError::OutOfRange(format!(
                    "{name} entries must lie in [0, 1]"
                )));
            }
            Ok(())
        };
        let check_rho = |rho: f64| -> Result<()> {
            if rho.is_finite() {
                Ok(())
            } else {
                Err(SimError::OutOfRange(format!(
                    "rho must be finite, got {rho}"
                )))
            }
        };
        match self {
            ControllerSpec::Stubborn { opinion } => check_vec("opinion", opinion),
            ControllerSpec::Popular { rho } => check_rho(*rho),
            ControllerSpec::Strategic { rho, goal } => {
                check_rho(*rho)?;
                check_vec("goal", goal)
            }
        }
    }
}

/// Ascending indices of an agent's neighbors.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct NeighborSet(Vec<usize>);

impl NeighborSet {
    pub fn indices(&self) -> &[usize] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

pub fn neighbor_set(a: &AdjacencyMatrix, i: usize) -> Result<NeighborSet> {
    if i >= a.n() {
        return Err(SimError::IndexOutOfRange { index: i, n: a.n() });
    }
    Ok(NeighborSet((0..a.n()).filter(|&j| a.get(i, j)).collect()))
}

/// Replaces row `i` of `w` with the unit vector `e_i`, freezing agent `i`.
pub fn apply_stubborn(w: &mut DenseMatrix, i: usize) -> Result<()> {
    if i >= w.rows() || i >= w.cols() {
        return Err(SimError::IndexOutOfRange {
            index: i,
            n: w.rows(),
        });
    }
    let row = w.row_mut(i);
    row.fill(0.0);
    row[i] = 1.0;
    Ok(())
}

/// Normalizes a distance vector and applies the `rho` emphasis. A vector of
/// all-zero distances (every candidate identical) yields uniform weights.
fn emphasized_weights(mut d: Vec<f64>, rho: f64, eps: NormEps) -> Vec<f64> {
    let total: f64 = d.iter().sum();
    if total == 0.0 {
        let k = d.len() as f64;
        return vec![1.0 / k; d.len()];
    }
    let denom = total + eps.get();
    d.iter_mut().for_each(|v| *v /= denom);
    hadamard_power_row(&mut d, rho, eps);
    let denom = d.iter().sum::<f64>() + eps.get();
    d.iter_mut().for_each(|v| *v /= denom);
    d
}

/// Popular-agent weights over `nbrs`: each neighbor's summed 1-norm distance
/// to the other neighbors, normalized, then raised to `rho` and renormalized.
pub fn popular_weights(
    x: &OpinionMatrix,
    nbrs: &NeighborSet,
    rho: f64,
    eps: NormEps,
) -> Result<Vec<f64>> {
    if nbrs.is_empty() {
        return Err(SimError::EmptyNeighborSet);
    }
    check_rho(rho)?;
    let idx = nbrs.indices();
    let d = idx
        .iter()
        .map(|&j| {
            idx.iter()
                .filter(|&&l| l != j)
                .map(|&l| l1_distance(x.row(l), x.row(j)))
                .sum()
        })
        .collect();
    Ok(emphasized_weights(d, rho, eps))
}

/// Next opinion of a popular agent at index `i`. With no neighbors the agent
/// keeps its current opinion.
pub fn apply_popular(
    x: &OpinionMatrix,
    a: &AdjacencyMatrix,
    i: usize,
    rho: f64,
    eps: NormEps,
) -> Result<Vec<f64>> {
    let nbrs = neighbor_set(a, i)?;
    if nbrs.is_empty() {
        return Ok(x.row(i).to_vec());
    }
    let w = popular_weights(x, &nbrs, rho, eps)?;
    let rows: Vec<&[f64]> = nbrs.indices().iter().map(|&j| x.row(j)).collect();
    Ok(combine(&w, &rows, x.m()))
}

/// Strategic-agent weights over `nbrs` followed by one weight for the goal.
/// The goal's raw distance is the smallest neighbor distance to the goal.
pub fn strategic_weights(
    x: &OpinionMatrix,
    nbrs: &NeighborSet,
    goal: &[f64],
    rho: f64,
    eps: NormEps,
) -> Result<Vec<f64>> {
    if nbrs.is_empty() {
        return Err(SimError::EmptyNeighborSet);
    }
    check_rho(rho)?;
    check_goal(goal, x.m())?;
    let mut d: Vec<f64> = nbrs
        .indices()
        .iter()
        .map(|&j| l1_distance(x.row(j), goal))
        .collect();
    let closest = d.iter().copied().fold(f64::INFINITY, f64::min);
    d.push(closest);
    Ok(emphasized_weights(d, rho, eps))
}

/// Next opinion of a strategic agent at index `i` steering toward `goal`.
/// With no neighbors the agent keeps its current opinion.
pub fn apply_strategic(
    x: &OpinionMatrix,
    a: &AdjacencyMatrix,
    i: usize,
    goal: &[f64],
    rho: f64,
    eps: NormEps,
) -> Result<Vec<f64>> {
    let nbrs = neighbor_set(a, i)?;
    if nbrs.is_empty() {
        return Ok(x.row(i).to_vec());
    }
    let w = strategic_weights(x, &nbrs, goal, rho, eps)?;
    let mut rows: Vec<&[f64]> = nbrs.indices().iter().map(|&j| x.row(j)).collect();
    rows.push(goal);
    Ok(combine(&w, &rows, x.m()))
}

fn combine(weights: &[f64], rows: &[&[f64]], m: usize) -> Vec<f64> {
    let mut out = vec![0.0; m];
    for (&w, row) in weights.iter().zip(rows) {
        for (o, &v) in out.iter_mut().zip(row.iter()) {
            *o += w * v;
        }
    }
    out.iter_mut().for_each(|v| *v = v.clamp(0.0, 1.0));
    out
}

fn check_rho(rho: f64) -> Result<()> {
    if rho.is_finite() {
        Ok(())
    } else {
        Err(SimError::NonFiniteExponent(rho))
    }
}

fn check_goal(goal: &[f64], m: usize) -> Result<()> {
    if goal.len() != m {
        return Err(SimError::Dimension(format!(
            "goal has {} entries for {m} topics",
            goal.len()
        )));
    }
    if goal.iter().any(|g| !(0.0..=1.0).contains(g)) {
        return Err(SimError::OutOfRange(
            "goal entries must lie in [0, 1]".into(),
        ));
    }
    Ok(())
}
