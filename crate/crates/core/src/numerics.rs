//! Dense-matrix primitives shared by the rest of the crate.
//!
//! Everything here is deterministic: SVD signs follow a fixed convention,
//! neighbor ties resolve to the lowest index, and random matrices are drawn
//! from explicitly seeded ChaCha streams.

use std::cmp::Ordering;

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;

use crate::error::{Error, Result};

/// A `rows × cols` real matrix whose columns are samples in ambient space.
///
/// Construction rejects empty shapes and non-finite entries, so every
/// `DataMatrix` in circulation is finite.
#[derive(Debug, Clone, PartialEq)]
pub struct DataMatrix(DMatrix<f64>);

impl DataMatrix {
    /// Builds a matrix from entries listed in row-major order.
    pub fn from_row_major(rows: usize, cols: usize, values: &[f64]) -> Result<Self> {
        if rows == 0 || cols == 0 {
            return Err(Error::invalid(format!(
                "matrix must be non-empty, got {rows}x{cols}"
            )));
        }
        if values.len() != rows * cols {
            return Err(Error::DimensionMismatch(format!(
                "expected {} values for a {rows}x{cols} matrix, got {}",
                rows * cols,
                values.len()
            )));
        }
        Self::new(DMatrix::from_row_slice(rows, cols, values))
    }

    pub fn new(m: DMatrix<f64>) -> Result<Self> {
        if m.nrows() == 0 || m.ncols() == 0 {
            return Err(Error::invalid(format!(
                "matrix must be non-empty, got {}x{}",
                m.nrows(),
                m.ncols()
            )));
        }
        for j in 0..m.ncols() {
            for i in 0..m.nrows() {
                if !m[(i, j)].is_finite() {
                    return Err(Error::NonFinite { row: i, col: j });
                }
            }
        }
        Ok(DataMatrix(m))
    }

    /// Wraps a matrix the caller already knows to be finite and non-empty.
    pub(crate) fn from_trusted(m: DMatrix<f64>) -> Self {
        debug_assert!(m.nrows() > 0 && m.ncols() > 0);
        DataMatrix(m)
    }

    pub fn zeros(rows: usize, cols: usize) -> Result<Self> {
        Self::new(DMatrix::zeros(rows, cols))
    }

    pub fn rows(&self) -> usize {
        self.0.nrows()
    }

    pub fn cols(&self) -> usize {
        self.0.ncols()
    }

    pub fn as_matrix(&self) -> &DMatrix<f64> {
        &self.0
    }

    pub fn into_inner(self) -> DMatrix<f64> {
        self.0
    }

    pub fn column(&self, j: usize) -> DVector<f64> {
        self.0.column(j).into_owned()
    }

    /// Entries in row-major order.
    pub fn to_row_major(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.rows() * self.cols());
        for i in 0..self.rows() {
            out.extend(self.0.row(i).iter());
        }
        out
    }

    /// Sub-matrix made of the listed columns, in the listed order.
    pub fn select_columns(&self, idx: &[usize]) -> Result<Self> {
        if idx.is_empty() {
            return Err(Error::invalid("column selection is empty"));
        }
        if let Some(&bad) = idx.iter().find(|&&j| j >= self.cols()) {
            return Err(Error::invalid(format!(
                "column index {bad} out of range for {} columns",
                self.cols()
            )));
        }
        Ok(DataMatrix(self.0.select_columns(idx)))
    }

    pub fn transpose(&self) -> Self {
        DataMatrix(self.0.transpose())
    }
}

/// Thin singular value decomposition `left · diag(singular) · rightᵀ`.
#[derive(Debug, Clone)]
pub struct SvdFactors {
    /// `p × q`, orthonormal columns.
    pub left: DMatrix<f64>,
    /// Nonincreasing, length `q = min(p, n)`.
    pub singular: DVector<f64>,
    /// `n × q`, orthonormal columns.
    pub right: DMatrix<f64>,
}

impl SvdFactors {
    pub fn reconstruct(&self) -> DMatrix<f64> {
        let mut scaled = self.left.clone();
        for (j, s) in self.singular.iter().enumerate() {
            scaled.column_mut(j).scale_mut(*s);
        }
        scaled * self.right.transpose()
    }
}

/// Full thin SVD with sorted singular values and a deterministic sign
/// convention: the largest-magnitude entry of every left singular vector is
/// positive (lowest index wins ties).
pub fn svd(m: &DataMatrix) -> Result<SvdFactors> {
    svd_of(m.as_matrix())
}

pub(crate) fn svd_of(m: &DMatrix<f64>) -> Result<SvdFactors> {
    let (p, n) = m.shape();
    if let Some(pos) = m.iter().position(|v| !v.is_finite()) {
        return Err(Error::NonFinite {
            row: pos % p,
            col: pos / p,
        });
    }
    let q = p.min(n);
    // nalgebra's bidiagonalization is faster on tall inputs.
    let (u, s, v) = if p >= n {
        let d = nalgebra::linalg::SVD::try_new(m.clone(), true, true, f64::EPSILON, 0)
            .ok_or_else(|| Error::Numerical("SVD did not converge".into()))?;
        (d.u.unwrap(), d.singular_values, d.v_t.unwrap().transpose())
    } else {
        let d = nalgebra::linalg::SVD::try_new(m.transpose(), true, true, f64::EPSILON, 0)
            .ok_or_else(|| Error::Numerical("SVD did not converge".into()))?;
        (d.v_t.unwrap().transpose(), d.singular_values, d.u.unwrap())
    };

    let mut order: Vec<usize> = (0..q).collect();
    order.sort_by(|&a, &b| s[b].total_cmp(&s[a]).then(a.cmp(&b)));

    let mut left = DMatrix::zeros(p, q);
    let mut right = DMatrix::zeros(n, q);
    let mut singular = DVector::zeros(q);
    for (dst, &src) in order.iter().enumerate() {
        let mut ucol = u.column(src).into_owned();
        let mut vcol = v.column(src).into_owned();
        if sign_flip_needed(ucol.as_slice()) {
            ucol.neg_mut();
            vcol.neg_mut();
        }
        left.set_column(dst, &ucol);
        right.set_column(dst, &vcol);
        singular[dst] = s[src].max(0.0);
    }
    Ok(SvdFactors {
        left,
        singular,
        right,
    })
}

/// True when the largest-magnitude entry (first one on ties) is negative.
/// Magnitudes within a relative `1e-10` of the maximum count as tied, so
/// rounding noise in computed vectors cannot flip the choice.
pub(crate) fn sign_flip_needed(v: &[f64]) -> bool {
    let max = v.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    v.iter()
        .find(|x| x.abs() >= max * (1.0 - 1e-10))
        .is_some_and(|x| *x < 0.0)
}

/// Squared Euclidean distances between the columns of `a` and of `b`.
///
/// Differences are accumulated directly (not via the Gram expansion), so
/// identical columns give exactly zero.
pub fn pairwise_sq_dist(a: &DataMatrix, b: &DataMatrix) -> Result<DMatrix<f64>> {
    sq_dist_columns(a.as_matrix(), b.as_matrix())
}

pub(crate) fn sq_dist_columns(a: &DMatrix<f64>, b: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    if a.nrows() != b.nrows() {
        return Err(Error::DimensionMismatch(format!(
            "ambient dimensions differ: {} vs {}",
            a.nrows(),
            b.nrows()
        )));
    }
    let (na, nb) = (a.ncols(), b.ncols());
    let rows: Vec<Vec<f64>> = (0..na)
        .into_par_iter()
        .map(|i| {
            let ai = a.column(i);
            (0..nb)
                .map(|j| {
                    ai.iter()
                        .zip(b.column(j).iter())
                        .map(|(x, y)| (x - y) * (x - y))
                        .sum()
                })
                .collect()
        })
        .collect();
    Ok(DMatrix::from_fn(na, nb, |i, j| rows[i][j]))
}

/// Squared distances from column `i` of `m` to every column of `m`.
pub(crate) fn sq_dist_from(m: &DMatrix<f64>, i: usize) -> Vec<f64> {
    let ci = m.column(i);
    (0..m.ncols())
        .map(|j| {
            ci.iter()
                .zip(m.column(j).iter())
                .map(|(x, y)| (x - y) * (x - y))
                .sum()
        })
        .collect()
}

fn by_dist_then_index(dists: &[f64]) -> impl Fn(&usize, &usize) -> Ordering + '_ {
    move |&a, &b| dists[a].total_cmp(&dists[b]).then(a.cmp(&b))
}

/// Indices (0-based) of the `k` smallest entries, nearest first.
pub fn knn(dists: &[f64], k: usize) -> Result<Vec<usize>> {
    if k == 0 {
        return Err(Error::invalid("k must be positive"));
    }
    if k > dists.len() {
        return Err(Error::invalid(format!(
            "k = {k} exceeds the {} available distances",
            dists.len()
        )));
    }
    let mut idx: Vec<usize> = (0..dists.len()).collect();
    let cmp = by_dist_then_index(dists);
    if k < idx.len() {
        idx.select_nth_unstable_by(k - 1, &cmp);
        idx.truncate(k);
    }
    idx.sort_unstable_by(&cmp);
    Ok(idx)
}

fn median_in_place(vals: &mut [f64]) -> f64 {
    vals.sort_unstable_by(f64::total_cmp);
    let m = vals.len();
    if m % 2 == 1 {
        vals[m / 2]
    } else {
        0.5 * (vals[m / 2 - 1] + vals[m / 2])
    }
}

/// Median of a non-empty slice; even counts average the two central values.
pub fn median(values: &[f64]) -> Result<f64> {
    if values.is_empty() {
        return Err(Error::invalid("median of an empty set"));
    }
    let mut v = values.to_vec();
    Ok(median_in_place(&mut v))
}

/// Coordinate-wise median of the columns.
pub fn entrywise_median(columns: &DataMatrix) -> Result<DVector<f64>> {
    let all: Vec<usize> = (0..columns.cols()).collect();
    median_of_columns(columns.as_matrix(), &all)
}

/// Coordinate-wise median of a subset of columns of `m`.
pub(crate) fn median_of_columns(m: &DMatrix<f64>, idx: &[usize]) -> Result<DVector<f64>> {
    if idx.is_empty() {
        return Err(Error::invalid("median over zero columns"));
    }
    let mut buf = vec![0.0; idx.len()];
    Ok(DVector::from_fn(m.nrows(), |r, _| {
        for (slot, &j) in buf.iter_mut().zip(idx) {
            *slot = m[(r, j)];
        }
        median_in_place(&mut buf)
    }))
}

/// Haar-distributed orthogonal matrix: QR of a seeded standard-Gaussian
/// matrix, with columns of Q flipped so that R has a positive diagonal.
pub fn random_orthogonal(dim: usize, seed: u64) -> Result<DMatrix<f64>> {
    if dim == 0 {
        return Err(Error::invalid("dimension must be at least 1"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let g = DMatrix::from_fn(dim, dim, |_, _| StandardNormal.sample(&mut rng));
    let qr = g.qr();
    let r = qr.r();
    let mut q = qr.q();
    for j in 0..dim {
        if r[(j, j)] < 0.0 {
            q.column_mut(j).neg_mut();
        }
    }
    Ok(q)
}

/// A Haar-distributed orthogonal `dim × dim` operator kept in implicit form.
///
/// `Q = H₀ H₁ ⋯ H_{dim-2} · S` is the Householder product that QR of a
/// Gaussian matrix would produce; reflector `k` is drawn from its own ChaCha
/// stream so it can be regenerated in either order without storing `O(dim²)`
/// numbers. Used where `dim` is the sample count and an explicit matrix would
/// not fit in memory.
#[derive(Debug, Clone, Copy)]
pub struct HaarRotation {
    dim: usize,
    seed: u64,
}

const REFLECTOR_BLOCK: usize = 32;

impl HaarRotation {
    pub fn new(dim: usize, seed: u64) -> Result<Self> {
        if dim == 0 {
            return Err(Error::invalid("dimension must be at least 1"));
        }
        Ok(Self { dim, seed })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Unit Householder vector for reflector `k` (acting on coordinates
    /// `k..dim`) and the sign entry `S_kk`.
    fn reflector(&self, k: usize) -> (Vec<f64>, f64) {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(k as u64);
        let len = self.dim - k;
        let mut v: Vec<f64> = (0..len).map(|_| StandardNormal.sample(&mut rng)).collect();
        let x0 = v[0];
        if len == 1 {
            return (v, if x0 < 0.0 { -1.0 } else { 1.0 });
        }
        let s = if x0 < 0.0 { -1.0 } else { 1.0 };
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        v[0] += s * norm;
        let vnorm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        v.iter_mut().for_each(|x| *x /= vnorm);
        // H x = -s‖x‖e₁, so the positive-diagonal fix multiplies by -s.
        (v, -s)
    }

    fn apply_block(rows: &mut [Vec<f64>], block: &[(usize, Vec<f64>)]) {
        rows.par_iter_mut().for_each(|row| {
            for (k, v) in block {
                let tail = &mut row[*k..];
                let dot: f64 = tail.iter().zip(v).map(|(a, b)| a * b).sum();
                let c = 2.0 * dot;
                tail.iter_mut().zip(v).for_each(|(a, b)| *a -= c * b);
            }
        });
    }

    fn reflector_count(&self) -> usize {
        self.dim.saturating_sub(1)
    }

    /// Replaces every row vector `r` (length `dim`) by `r · Q`.
    pub fn apply_right(&self, rows: &mut [Vec<f64>]) {
        let count = self.reflector_count();
        let mut start = 0;
        while start < count {
            let end = (start + REFLECTOR_BLOCK).min(count);
            let block: Vec<(usize, Vec<f64>)> =
                (start..end).map(|k| (k, self.reflector(k).0)).collect();
            Self::apply_block(rows, &block);
            start = end;
        }
        let signs: Vec<f64> = (0..self.dim).map(|k| self.reflector(k).1).collect();
        Self::scale_columns(rows, &signs);
    }

    /// Replaces every row vector `r` by `r · Qᵀ`.
    pub fn apply_right_transpose(&self, rows: &mut [Vec<f64>]) {
        let signs: Vec<f64> = (0..self.dim).map(|k| self.reflector(k).1).collect();
        Self::scale_columns(rows, &signs);
        let mut end = self.reflector_count();
        while end > 0 {
            let start = end.saturating_sub(REFLECTOR_BLOCK);
            let block: Vec<(usize, Vec<f64>)> = (start..end)
                .rev()
                .map(|k| (k, self.reflector(k).0))
                .collect();
            Self::apply_block(rows, &block);
            end = start;
        }
    }

    fn scale_columns(rows: &mut [Vec<f64>], d: &[f64]) {
        rows.par_iter_mut().for_each(|row| {
            row.iter_mut().zip(d).for_each(|(a, s)| *a *= s);
        });
    }

    /// Materializes `Q`; only sensible for small `dim`.
    pub fn to_matrix(&self) -> DMatrix<f64> {
        let mut rows: Vec<Vec<f64>> = (0..self.dim)
            .map(|i| {
                let mut r = vec![0.0; self.dim];
                r[i] = 1.0;
                r
            })
            .collect();
        self.apply_right(&mut rows);
        DMatrix::from_fn(self.dim, self.dim, |i, j| rows[i][j])
    }
}
