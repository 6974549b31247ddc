//! Opinion and topology co-evolution: the similarity-weighted opinion update
//! and the stochastic resampling of the symmetric follow graph.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Result, SimError};
use crate::matrix::{renorm_hadamard_power, row_similarity_matrix, DenseMatrix, NormEps};

/// Tolerance on the row sums of a weight matrix fed to [`opinion_step`].
pub const ROW_SUM_TOL: f64 = 1e-6;

/// `n x m` matrix of opinions; entry `(i, j)` is agent `i`'s support for
/// topic `j`, always in `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct OpinionMatrix(DenseMatrix);

impl OpinionMatrix {
    pub fn new(x: DenseMatrix) -> Result<Self> {
        if x.rows() == 0 || x.cols() == 0 {
            return Err(SimError::Dimension(format!(
                "opinion matrix must be at least 1x1, got {}x{}",
                x.rows(),
                x.cols()
            )));
        }
        for i in 0..x.rows() {
            for (j, &v) in x.row(i).iter().enumerate() {
                if !(0.0..=1.0).contains(&v) {
                    return Err(SimError::OutOfRange(format!(
                        "opinion ({i}, {j}) = {v} is outside [0, 1]"
                    )));
                }
            }
        }
        Ok(OpinionMatrix(x))
    }

    pub fn from_rows<R: AsRef<[f64]>>(rows: &[R]) -> Result<Self> {
        Self::new(DenseMatrix::from_rows(rows)?)
    }

    /// Number of agents.
    pub fn n(&self) -> usize {
        self.0.rows()
    }

    /// Number of topics.
    pub fn m(&self) -> usize {
        self.0.cols()
    }

    pub fn row(&self, i: usize) -> &[f64] {
        self.0.row(i)
    }

    pub fn matrix(&self) -> &DenseMatrix {
        &self.0
    }

    pub(crate) fn set_row(&mut self, i: usize, values: &[f64]) {
        for (dst, &v) in self.0.row_mut(i).iter_mut().zip(values) {
            *dst = v.clamp(0.0, 1.0);
        }
    }
}

/// Symmetric, hollow 0/1 adjacency matrix of the follow graph.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct AdjacencyMatrix {
    n: usize,
    bits: Vec<bool>,
}

impl AdjacencyMatrix {
    pub fn empty(n: usize) -> Self {
        AdjacencyMatrix {
            n,
            bits: vec![false; n * n],
        }
    }

    /// Builds a graph from undirected edges. Self-loops are rejected.
    pub fn from_edges(n: usize, edges: &[(usize, usize)]) -> Result<Self> {
        let mut a = Self::empty(n);
        for &(i, j) in edges {
            if i >= n || j >= n {
                return Err(SimError::IndexOutOfRange { index: i.max(j), n });
            }
            if i == j {
                return Err(SimError::InvalidArgument(format!("self-loop at {i}")));
            }
            a.set(i, j, true);
        }
        Ok(a)
    }

    pub fn complete(n: usize) -> Self {
        let mut a = Self::empty(n);
        for i in 0..n {
            for j in (i + 1)..n {
                a.set(i, j, true);
            }
        }
        a
    }

    pub fn n(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> bool {
        self.bits[i * self.n + j]
    }

    /// Sets both `(i, j)` and `(j, i)`; the diagonal is left untouched.
    #[inline]
    pub fn set(&mut self, i: usize, j: usize, on: bool) {
        if i != j {
            self.bits[i * self.n + j] = on;
            self.bits[j * self.n + i] = on;
        }
    }

    pub fn degree(&self, i: usize) -> usize {
        self.bits[i * self.n..(i + 1) * self.n]
            .iter()
            .filter(|&&b| b)
            .count()
    }

    pub fn edge_count(&self) -> usize {
        self.bits.iter().filter(|&&b| b).count() / 2
    }

    /// Undirected edges as `(i, j)` with `i < j`, row-major order.
    pub fn edges(&self) -> Vec<(usize, usize)> {
        let mut out = Vec::new();
        for i in 0..self.n {
            for j in (i + 1)..self.n {
                if self.get(i, j) {
                    out.push((i, j));
                }
            }
        }
        out
    }

    /// Removes every edge touching `i`.
    pub fn isolate(&mut self, i: usize) {
        for j in 0..self.n {
            self.set(i, j, false);
        }
    }

    pub fn is_symmetric(&self) -> bool {
        (0..self.n).all(|i| (0..self.n).all(|j| self.get(i, j) == self.get(j, i)))
    }

    pub fn is_hollow(&self) -> bool {
        (0..self.n).all(|i| !self.get(i, i))
    }
}

/// Parameters of the edge-resampling rule.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EdgeParams {
    /// Hadamard exponent sharpening the similarity rows.
    pub theta: u32,
    /// Floor on the per-pair edge probability.
    pub eps_edge: f64,
}

impl EdgeParams {
    pub const DEFAULT_EPS_EDGE: f64 = 0.001;

    pub fn new(theta: u32, eps_edge: f64) -> Result<Self> {
        let p = EdgeParams { theta, eps_edge };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if self.theta < 1 {
            return Err(SimError::OutOfRange("theta must be >= 1".into()));
        }
        if !(0.0..1.0).contains(&self.eps_edge) {
            return Err(SimError::OutOfRange(format!(
                "eps_edge must lie in [0, 1), got {}",
                self.eps_edge
            )));
        }
        Ok(())
    }
}

/// Whether an agent follows the standard dynamics or is driven by one of the
/// run's controllers (index into the controller list).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Role {
    Standard,
    Controller(usize),
}

impl Role {
    pub fn is_controller(self) -> bool {
        matches!(self, Role::Controller(_))
    }
}

/// Seeded uniform sample stream. Counts draws so replays can be audited.
#[derive(Debug, Clone)]
pub struct RngStream {
    seed: u64,
    rng: ChaCha8Rng,
    draws: u64,
}

impl RngStream {
    pub fn new(seed: u64) -> Self {
        RngStream {
            seed,
            rng: ChaCha8Rng::seed_from_u64(seed),
            draws: 0,
        }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Total number of samples drawn so far.
    pub fn draws(&self) -> u64 {
        self.draws
    }

    /// Uniform sample on `[0, 1)`.
    #[inline]
    pub fn uniform(&mut self) -> f64 {
        self.draws += 1;
        self.rng.gen::<f64>()
    }
}

/// Weight matrix `S_N(X) o A + (I - diag([S_N(X) o A] 1))`.
pub fn weight_matrix(x: &OpinionMatrix, a: &AdjacencyMatrix, eps: NormEps) -> Result<DenseMatrix> {
    check_same_n(x, a)?;
    if x.n() < 2 {
        return Ok(DenseMatrix::identity(x.n()));
    }
    let s = row_similarity_matrix(x.matrix(), eps)?;
    Ok(weights_from_similarity(&s, a))
}

/// Masks a similarity matrix by the adjacency and puts the remaining mass on
/// the diagonal, so every row sums to one.
pub(crate) fn weights_from_similarity(s: &DenseMatrix, a: &AdjacencyMatrix) -> DenseMatrix {
    let n = a.n();
    let mut w = DenseMatrix::zeros(n, n);
    for i in 0..n {
        let mut off = 0.0;
        for j in 0..n {
            if i != j && a.get(i, j) {
                let v = s[(i, j)];
                w[(i, j)] = v;
                off += v;
            }
        }
        w[(i, i)] = (1.0 - off).max(0.0);
    }
    w
}

/// One opinion update `X' = W X`.
pub fn opinion_step(x: &OpinionMatrix, w: &DenseMatrix) -> Result<OpinionMatrix> {
    if w.rows() != x.n() || w.cols() != x.n() {
        return Err(SimError::Dimension(format!(
            "weight matrix is {}x{} for {} agents",
            w.rows(),
            w.cols(),
            x.n()
        )));
    }
    for (row, sum) in w.row_sums().into_iter().enumerate() {
        if (sum - 1.0).abs() > ROW_SUM_TOL {
            return Err(SimError::NotStochastic { row, sum });
        }
    }
    let mut next = w.matmul(x.matrix())?;
    // convex combinations only leave [0, 1] through rounding
    for i in 0..next.rows() {
        for v in next.row_mut(i) {
            *v = v.clamp(0.0, 1.0);
        }
    }
    OpinionMatrix::new(next)
}

/// Edge probabilities `R(S_N(X)^theta)`.
pub fn edge_probabilities(
    x: &OpinionMatrix,
    params: &EdgeParams,
    eps: NormEps,
) -> Result<DenseMatrix> {
    params.validate()?;
    let s = row_similarity_matrix(x.matrix(), eps)?;
    renorm_hadamard_power(&s, f64::from(params.theta), eps)
}

/// Draws a fresh adjacency matrix.
///
/// Exactly one uniform sample is drawn per unordered pair `i < j`, in
/// row-major upper-triangle order, and the pair is connected iff the sample
/// is below `max(s_hat[i][j], eps_edge)`. Pairs of two controllers are never
/// connected, but their sample is still drawn so every step consumes
/// `n (n - 1) / 2` samples.
pub fn resample_edges(
    s_hat: &DenseMatrix,
    params: &EdgeParams,
    roles: &[Role],
    rng: &mut RngStream,
) -> Result<AdjacencyMatrix> {
    let n = s_hat.rows();
    if s_hat.cols() != n || roles.len() != n {
        return Err(SimError::Dimension(format!(
            "edge probabilities are {}x{} with {} roles",
            n,
            s_hat.cols(),
            roles.len()
        )));
    }
    if !s_hat.is_hollow() {
        return Err(SimError::InvalidArgument(
            "edge probability matrix must be hollow".into(),
        ));
    }
    if let Some(v) = s_hat.as_slice().iter().find(|v| !(0.0..=1.0).contains(*v)) {
        return Err(SimError::OutOfRange(format!(
            "edge probability {v} is outside [0, 1]"
        )));
    }
    let mut a = AdjacencyMatrix::empty(n);
    for i in 0..n {
        for j in (i + 1)..n {
            let gamma = rng.uniform();
            let p = s_hat[(i, j)].max(params.eps_edge);
            let both_controllers = roles[i].is_controller() && roles[j].is_controller();
            if gamma < p && !both_controllers {
                a.set(i, j, true);
            }
        }
    }
    Ok(a)
}

fn check_same_n(x: &OpinionMatrix, a: &AdjacencyMatrix) -> Result<()> {
    if x.n() != a.n() {
        return Err(SimError::Dimension(format!(
            "{} opinion rows but {} graph vertices",
            x.n(),
            a.n()
        )));
    }
    Ok(())
}
