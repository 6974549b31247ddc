#![allow(dead_code)]

use opinion_sim::matrix::l1_distance;
use opinion_sim::network::{AdjacencyMatrix, OpinionMatrix};
use rand::Rng;

pub const RED: usize = 0;
pub const GREEN: usize = 1;
pub const BLUE: usize = 2;

/// A popular agent (last index) joined to every other row of `x`.
pub struct StarInstance {
    pub x: OpinionMatrix,
    pub a: AdjacencyMatrix,
    pub center: usize,
    /// Each neighbor's summed distance to the other neighbors.
    pub d: Vec<f64>,
}

impl StarInstance {
    pub fn neighbor_rows(&self) -> Vec<&[f64]> {
        (0..self.center).map(|j| self.x.row(j)).collect()
    }

    /// Mean of the neighbor rows whose `d` equals `target`.
    pub fn mean_where(&self, target: f64) -> Vec<f64> {
        let m = self.x.m();
        let picked: Vec<&[f64]> = self
            .neighbor_rows()
            .into_iter()
            .zip(&self.d)
            .filter(|(_, &d)| d == target)
            .map(|(r, _)| r)
            .collect();
        mean_rows(&picked, m)
    }
}

pub fn mean_rows(rows: &[&[f64]], m: usize) -> Vec<f64> {
    let mut out = vec![0.0; m];
    for r in rows {
        for (o, v) in out.iter_mut().zip(r.iter()) {
            *o += v;
        }
    }
    out.iter_mut().for_each(|o| *o /= rows.len() as f64);
    out
}

pub fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max)
}

pub fn random_opinions<R: Rng>(rng: &mut R, n: usize, m: usize) -> OpinionMatrix {
    let rows: Vec<Vec<f64>> = (0..n)
        .map(|_| (0..m).map(|_| rng.gen::<f64>()).collect())
        .collect();
    OpinionMatrix::from_rows(&rows).unwrap()
}

pub fn random_graph<R: Rng>(rng: &mut R, n: usize, p: f64) -> AdjacencyMatrix {
    let mut a = AdjacencyMatrix::empty(n);
    for i in 0..n {
        for j in (i + 1)..n {
            if rng.gen::<f64>() < p {
                a.set(i, j, true);
            }
        }
    }
    a
}

/// Star instance with 3 to 6 neighbors whose normalized summed distances are
/// pairwise at least `gap` apart. Retries until one is found.
pub fn separated_star<R: Rng>(rng: &mut R, gap: f64) -> StarInstance {
    loop {
        let k = rng.gen_range(3..=6);
        let m = rng.gen_range(1..=5);
        let nbrs: Vec<Vec<f64>> = (0..k)
            .map(|_| (0..m).map(|_| rng.gen::<f64>()).collect())
            .collect();
        let d: Vec<f64> = (0..k)
            .map(|j| {
                (0..k)
                    .filter(|&l| l != j)
                    .map(|l| l1_distance(&nbrs[l], &nbrs[j]))
                    .sum()
            })
            .collect();
        let total: f64 = d.iter().sum();
        if total <= 0.0 {
            continue;
        }
        let mut sorted: Vec<f64> = d.iter().map(|v| v / total).collect();
        sorted.sort_by(f64::total_cmp);
        if sorted.windows(2).any(|w| w[1] - w[0] < gap) {
            continue;
        }
        let mut rows = nbrs;
        rows.push((0..m).map(|_| rng.gen::<f64>()).collect());
        let x = OpinionMatrix::from_rows(&rows).unwrap();
        let edges: Vec<(usize, usize)> = (0..k).map(|j| (j, k)).collect();
        let a = AdjacencyMatrix::from_edges(k + 1, &edges).unwrap();
        return StarInstance { x, a, center: k, d };
    }
}
