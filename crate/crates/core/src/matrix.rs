//! Dense row-major matrices and the row-stochastic operators built on them:
//! row normalization, the row-wise difference and similarity matrices, and
//! the renormalized Hadamard (elementwise) power.

use std::fmt;

use crate::error::{Result, SimError};

/// Guard added to row sums before dividing. Must lie in `(0, 1e-6]`.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd)]
pub struct NormEps(f64);

impl NormEps {
    pub const DEFAULT: NormEps = NormEps(1e-12);
    pub const MAX: f64 = 1e-6;

    pub fn new(eps: f64) -> Result<Self> {
        if eps.is_finite() && eps > 0.0 && eps <= Self::MAX {
            Ok(NormEps(eps))
        } else {
            Err(SimError::OutOfRange(format!(
                "eps_norm must lie in (0, {}], got {eps}",
                Self::MAX
            )))
        }
    }

    #[inline]
    pub fn get(self) -> f64 {
        self.0
    }
}

impl Default for NormEps {
    fn default() -> Self {
        Self::DEFAULT
    }
}

/// A dense real matrix stored row-major. Entries are always finite.
#[derive(Clone, PartialEq)]
pub struct DenseMatrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl DenseMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        DenseMatrix {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = 1.0;
        }
        m
    }

    /// Builds a matrix from row-major data, rejecting non-finite entries.
    pub fn from_vec(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(SimError::Dimension(format!(
                "{} entries supplied for a {rows}x{cols} matrix",
                data.len()
            )));
        }
        if let Some(pos) = data.iter().position(|v| !v.is_finite()) {
            return Err(SimError::NonFinite {
                row: pos / cols.max(1),
                col: pos % cols.max(1),
            });
        }
        Ok(DenseMatrix { rows, cols, data })
    }

    pub fn from_rows<R: AsRef<[f64]>>(rows: &[R]) -> Result<Self> {
        let cols = rows.first().map_or(0, |r| r.as_ref().len());
        let mut data = Vec::with_capacity(rows.len() * cols);
        for (i, r) in rows.iter().enumerate() {
            let r = r.as_ref();
            if r.len() != cols {
                return Err(SimError::Dimension(format!(
                    "row {i} has {} entries, expected {cols}",
                    r.len()
                )));
            }
            data.extend_from_slice(r);
        }
        Self::from_vec(rows.len(), cols, data)
    }

    #[inline]
    pub fn rows(&self) -> usize {
        self.rows
    }

    #[inline]
    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    #[inline]
    pub fn row_mut(&mut self, i: usize) -> &mut [f64] {
        &mut self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn iter_rows(&self) -> impl Iterator<Item = &[f64]> {
        // chunks_exact panics on zero; a 0-column matrix has no data anyway
        self.data.chunks_exact(self.cols.max(1)).take(self.rows)
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn row_sums(&self) -> Vec<f64> {
        self.iter_rows().map(|r| r.iter().sum()).collect()
    }

    pub fn transpose(&self) -> DenseMatrix {
        let mut t = DenseMatrix::zeros(self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                t[(j, i)] = self[(i, j)];
            }
        }
        t
    }

    /// Matrix product `self * rhs`.
    pub fn matmul(&self, rhs: &DenseMatrix) -> Result<DenseMatrix> {
        if self.cols != rhs.rows {
            return Err(SimError::Dimension(format!(
                "cannot multiply {}x{} by {}x{}",
                self.rows, self.cols, rhs.rows, rhs.cols
            )));
        }
        let mut out = DenseMatrix::zeros(self.rows, rhs.cols);
        for i in 0..self.rows {
            let lhs_row = self.row(i);
            let out_row = &mut out.data[i * rhs.cols..(i + 1) * rhs.cols];
            for (k, &w) in lhs_row.iter().enumerate() {
                if w == 0.0 {
                    continue;
                }
                for (o, &x) in out_row.iter_mut().zip(rhs.row(k)) {
                    *o += w * x;
                }
            }
        }
        Ok(out)
    }

    pub fn is_hollow(&self) -> bool {
        self.rows == self.cols && (0..self.rows).all(|i| self[(i, i)] == 0.0)
    }

    fn check_non_negative(&self) -> Result<()> {
        for i in 0..self.rows {
            for (j, &v) in self.row(i).iter().enumerate() {
                if !v.is_finite() {
                    return Err(SimError::NonFinite { row: i, col: j });
                }
                if v < 0.0 {
                    return Err(SimError::NegativeEntry {
                        row: i,
                        col: j,
                        value: v,
                    });
                }
            }
        }
        Ok(())
    }
}

impl std::ops::Index<(usize, usize)> for DenseMatrix {
    type Output = f64;

    #[inline]
    fn index(&self, (i, j): (usize, usize)) -> &f64 {
        debug_assert!(i < self.rows && j < self.cols);
        &self.data[i * self.cols + j]
    }
}

impl std::ops::IndexMut<(usize, usize)> for DenseMatrix {
    #[inline]
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut f64 {
        debug_assert!(i < self.rows && j < self.cols);
        &mut self.data[i * self.cols + j]
    }
}

impl fmt::Debug for DenseMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "DenseMatrix {}x{} [", self.rows, self.cols)?;
        for r in self.iter_rows() {
            writeln!(f, "  {r:?}")?;
        }
        write!(f, "]")
    }
}

/// 1-norm distance between two equal-length vectors.
#[inline]
pub fn l1_distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).sum()
}

/// Divides each row in place by `sum + eps`. All-zero rows stay zero.
fn normalize_rows_in_place(m: &mut DenseMatrix, eps: NormEps) {
    let cols = m.cols;
    for row in m.data.chunks_exact_mut(cols.max(1)) {
        let s: f64 = row.iter().sum();
        if s == 0.0 {
            continue;
        }
        let denom = s + eps.get();
        row.iter_mut().for_each(|v| *v /= denom);
    }
}

/// `diag(M1 + eps 1)^-1 M`. Rows of zeros come back as rows of zeros.
pub fn row_normalize(m: &DenseMatrix, eps: NormEps) -> Result<DenseMatrix> {
    m.check_non_negative()?;
    let mut out = m.clone();
    normalize_rows_in_place(&mut out, eps);
    Ok(out)
}

/// Row-normalized matrix of pairwise 1-norm distances between the rows of `x`.
pub fn row_diff_matrix(x: &DenseMatrix, eps: NormEps) -> Result<DenseMatrix> {
    let d = pairwise_l1(x)?;
    row_normalize(&d, eps)
}

/// Un-normalized pairwise distance matrix `d_ij = |x_i - x_j|_1`.
/// Symmetric and hollow by construction.
pub fn pairwise_l1(x: &DenseMatrix) -> Result<DenseMatrix> {
    let n = x.rows();
    if n < 2 {
        return Err(SimError::TooFewRows { need: 2, got: n });
    }
    let mut d = DenseMatrix::zeros(n, n);
    for i in 0..n {
        for j in (i + 1)..n {
            let v = l1_distance(x.row(i), x.row(j));
            d[(i, j)] = v;
            d[(j, i)] = v;
        }
    }
    Ok(d)
}

/// `R(11^T - (I + D_N(x)))`: hollow, entries in `[0, 1]`, larger for rows
/// with closer opinion profiles.
///
/// The inner difference rows are normalized exactly (the `eps -> 0` limit).
/// Keeping the guard there would leave an `eps`-sized residue where the
/// similarity is exactly zero, which the outer normalization then inflates
/// (for two antipodal agents it would come out as 1/3 instead of 0).
pub fn row_similarity_matrix(x: &DenseMatrix, eps: NormEps) -> Result<DenseMatrix> {
    let d = pairwise_l1(x)?;
    let n = d.rows();
    let mut s = DenseMatrix::zeros(n, n);
    for i in 0..n {
        let total: f64 = d.row(i).iter().sum();
        for j in 0..n {
            if i != j {
                let dn = if total > 0.0 { d[(i, j)] / total } else { 0.0 };
                s[(i, j)] = (1.0 - dn).max(0.0);
            }
        }
    }
    normalize_rows_in_place(&mut s, eps);
    Ok(s)
}

/// Raises every entry to the power `p` and renormalizes the rows.
///
/// `0^0` is taken as 1, so `p = 0` gives uniform rows. For `p < 0` entries
/// are floored at `eps` first, which lets the smallest entries dominate
/// instead of dividing by zero.
///
/// Each row is evaluated in the log domain and rescaled so its largest
/// powered entry is 1 before normalizing. This is the same row after
/// normalization but cannot overflow for large `|p|` (e.g. `0.01^-100`).
pub fn renorm_hadamard_power(m: &DenseMatrix, p: f64, eps: NormEps) -> Result<DenseMatrix> {
    if !p.is_finite() {
        return Err(SimError::NonFiniteExponent(p));
    }
    m.check_non_negative()?;
    let mut out = m.clone();
    let cols = out.cols;
    for row in out.data.chunks_exact_mut(cols.max(1)) {
        hadamard_power_row(row, p, eps);
    }
    normalize_rows_in_place(&mut out, eps);
    Ok(out)
}

/// Rescaled `row^p` in place (not yet normalized).
pub(crate) fn hadamard_power_row(row: &mut [f64], p: f64, eps: NormEps) {
    if p == 0.0 {
        row.iter_mut().for_each(|v| *v = 1.0);
        return;
    }
    if p < 0.0 {
        row.iter_mut().for_each(|v| *v = v.max(eps.get()));
    }
    // log-magnitudes; zeros (p > 0 only) map to -inf and stay zero
    let mut peak = f64::NEG_INFINITY;
    for v in row.iter_mut() {
        *v = if *v > 0.0 {
            p * v.ln()
        } else {
            f64::NEG_INFINITY
        };
        peak = peak.max(*v);
    }
    if peak == f64::NEG_INFINITY {
        row.iter_mut().for_each(|v| *v = 0.0);
        return;
    }
    row.iter_mut().for_each(|v| *v = (*v - peak).exp());
}
