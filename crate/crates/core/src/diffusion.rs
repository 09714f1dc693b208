//! Diffusion Maps and their landmark variant (ROSELAND).
//!
//! Both embeddings use a Gaussian kernel on the complete graph. Diffusion
//! Maps work with the full `n × n` affinity; ROSELAND only needs affinities
//! between the samples and `m ≪ n` landmarks and recovers the spectral
//! structure from the SVD of the normalized `n × m` landmark affinity.

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::{self, DataMatrix};

/// Kernel bandwidth: fixed, or derived from the data (see [`Bandwidth::Auto`]).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Bandwidth {
    /// Median squared distance after removing each sample's smallest
    /// squared distance (to another sample, or to a landmark).
    #[default]
    Auto,
    Fixed(f64),
}

impl Bandwidth {
    fn check(self) -> Result<()> {
        match self {
            Bandwidth::Fixed(h) if !(h > 0.0 && h.is_finite()) => Err(Error::invalid(format!(
                "bandwidth must be positive, got {h}"
            ))),
            _ => Ok(()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum EmbeddingKind {
    DiffusionMaps,
    Roseland,
}

#[derive(Debug, Clone)]
pub struct EmbeddingResult {
    /// `n × q′`; row `i` is the embedded sample `i`.
    pub coords: DMatrix<f64>,
    /// Diagonal factors of the embedding map: `λ_k^t` for Diffusion Maps,
    /// `σ_k^{2t}` for ROSELAND (`k = 2 … q′+1`).
    pub spectrum: Vec<f64>,
    /// Raw eigenvalues (Diffusion Maps) or singular values (ROSELAND),
    /// including the trivial leading one.
    pub raw_spectrum: Vec<f64>,
    /// Diagonal of `D` (Diffusion Maps) or `D̄` (ROSELAND).
    pub degrees: Vec<f64>,
    pub diffusion_time: f64,
    pub bandwidth: f64,
    pub kind: EmbeddingKind,
}

impl EmbeddingResult {
    pub fn len(&self) -> usize {
        self.coords.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.coords.nrows() == 0
    }
}

/// `exp(−‖xᵢ − xⱼ‖²/h)` off the diagonal, zero on it.
pub fn affinity_complete(x: &DataMatrix, h: f64) -> Result<DMatrix<f64>> {
    Bandwidth::Fixed(h).check()?;
    if x.cols() < 2 {
        return Err(Error::invalid("affinity needs at least two samples"));
    }
    let d2 = numerics::pairwise_sq_dist(x, x)?;
    Ok(DMatrix::from_fn(d2.nrows(), d2.ncols(), |i, j| {
        if i == j {
            0.0
        } else {
            (-d2[(i, j)] / h).exp()
        }
    }))
}

/// Automatic bandwidth from a table of squared distances.
///
/// Each row's smallest entry is subtracted before taking the median over
/// all entries. High-dimensional noise adds a nearly constant amount to
/// every squared distance of a sample, and this removes it so the scale
/// follows the geometry. Entries with `skip(i, j)` (a sample paired with
/// itself) are ignored. Falls back to the plain median, then to 1, when
/// the result is not positive.
fn auto_bandwidth(d2: &DMatrix<f64>, skip: impl Fn(usize, usize) -> bool) -> Result<f64> {
    let mut shifted = Vec::with_capacity(d2.len());
    let mut plain = Vec::with_capacity(d2.len());
    for i in 0..d2.nrows() {
        let row: Vec<f64> = (0..d2.ncols())
            .filter(|&j| !skip(i, j))
            .map(|j| d2[(i, j)])
            .collect();
        let Some(min) = row.iter().copied().reduce(f64::min) else {
            continue;
        };
        shifted.extend(row.iter().map(|v| v - min));
        plain.extend(row);
    }
    if plain.is_empty() {
        return Err(Error::invalid("no distances to derive a bandwidth from"));
    }
    let h = numerics::median(&shifted)?;
    if h > 0.0 {
        return Ok(h);
    }
    // Coincident clouds have zero median distance.
    let h = numerics::median(&plain)?;
    Ok(if h > 0.0 { h } else { 1.0 })
}

fn resolve(bw: Bandwidth, auto: impl FnOnce() -> Result<f64>) -> Result<f64> {
    bw.check()?;
    match bw {
        Bandwidth::Fixed(h) => Ok(h),
        Bandwidth::Auto => auto(),
    }
}

/// Diffusion Maps embedding with diffusion time `t` (a positive integer, so
/// negative eigenvalues raise to real powers).
pub fn dm_embed(x: &DataMatrix, h: Bandwidth, q: usize, t: u32) -> Result<EmbeddingResult> {
    let n = x.cols();
    if n < 2 {
        return Err(Error::invalid("Diffusion Maps need at least two samples"));
    }
    if q == 0 || q > n - 1 {
        return Err(Error::invalid(format!(
            "embedding dimension must be in 1..={}, got {q}",
            n - 1
        )));
    }
    if t == 0 {
        return Err(Error::invalid("diffusion time must be positive"));
    }
    let d2 = numerics::pairwise_sq_dist(x, x)?;
    let bandwidth = resolve(h, || auto_bandwidth(&d2, |i, j| i == j))?;
    let w0 = DMatrix::from_fn(n, n, |i, j| {
        if i == j {
            0.0
        } else {
            (-d2[(i, j)] / bandwidth).exp()
        }
    });
    let d0: Vec<f64> = w0.row_iter().map(|r| r.sum()).collect();
    if let Some(i) = d0.iter().position(|&d| !(d > 0.0)) {
        return Err(Error::Numerical(format!(
            "sample {i} is isolated (zero degree)"
        )));
    }
    let w = DMatrix::from_fn(n, n, |i, j| w0[(i, j)] / (d0[i] * d0[j]));
    let deg: Vec<f64> = w.row_iter().map(|r| r.sum()).collect();
    if let Some(i) = deg.iter().position(|&d| !(d > 0.0)) {
        return Err(Error::Numerical(format!(
            "sample {i} has zero normalized degree"
        )));
    }
    let inv_sqrt: Vec<f64> = deg.iter().map(|d| 1.0 / d.sqrt()).collect();
    let conj = DMatrix::from_fn(n, n, |i, j| inv_sqrt[i] * w[(i, j)] * inv_sqrt[j]);

    let eig = conj.symmetric_eigen();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| {
        eig.eigenvalues[b]
            .total_cmp(&eig.eigenvalues[a])
            .then(a.cmp(&b))
    });
    let raw: Vec<f64> = order.iter().map(|&k| eig.eigenvalues[k]).collect();

    let mut coords = DMatrix::zeros(n, q);
    let mut spectrum = Vec::with_capacity(q);
    for c in 0..q {
        let src = order[c + 1];
        // Right eigenvector of A = D⁻¹W is D^{-1/2}φ; scaled to unit length.
        let mut u = DVector::from_fn(n, |i, _| inv_sqrt[i] * eig.eigenvectors[(i, src)]);
        u.normalize_mut();
        if numerics::sign_flip_needed(u.as_slice()) {
            u.neg_mut();
        }
        let factor = eig.eigenvalues[src].powi(t as i32);
        spectrum.push(factor);
        coords.set_column(c, &(u * factor));
    }
    Ok(EmbeddingResult {
        coords,
        spectrum,
        raw_spectrum: raw,
        degrees: deg,
        diffusion_time: t as f64,
        bandwidth,
        kind: EmbeddingKind::DiffusionMaps,
    })
}

/// Row-normalized transition matrix `A = D⁻¹W` of Diffusion Maps.
pub fn dm_transition(x: &DataMatrix, h: Bandwidth) -> Result<DMatrix<f64>> {
    let n = x.cols();
    let d2 = numerics::pairwise_sq_dist(x, x)?;
    let bandwidth = resolve(h, || auto_bandwidth(&d2, |i, j| i == j))?;
    let w0 = DMatrix::from_fn(n, n, |i, j| {
        if i == j {
            0.0
        } else {
            (-d2[(i, j)] / bandwidth).exp()
        }
    });
    let d0: Vec<f64> = w0.row_iter().map(|r| r.sum()).collect();
    let w = DMatrix::from_fn(n, n, |i, j| w0[(i, j)] / (d0[i] * d0[j]));
    let deg: Vec<f64> = w.row_iter().map(|r| r.sum()).collect();
    if deg.iter().any(|&d| !(d > 0.0)) {
        return Err(Error::Numerical("isolated sample in affinity graph".into()));
    }
    Ok(DMatrix::from_fn(n, n, |i, j| w[(i, j)] / deg[i]))
}

/// `m = round(n^γ)` landmark indices drawn uniformly without replacement,
/// returned in ascending order.
pub fn select_landmarks(x: &DataMatrix, gamma: f64, seed: u64) -> Result<Vec<usize>> {
    if !(gamma > 0.0 && gamma < 1.0) {
        return Err(Error::invalid(format!(
            "landmark exponent must lie in (0, 1), got {gamma}"
        )));
    }
    let n = x.cols();
    let m = landmark_count(n, gamma);
    if m < 2 {
        return Err(Error::invalid(format!(
            "round({n}^{gamma}) = {m} landmarks; at least 2 are required"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut idx = rand::seq::index::sample(&mut rng, n, m).into_vec();
    idx.sort_unstable();
    Ok(idx)
}

pub fn landmark_count(n: usize, gamma: f64) -> usize {
    ((n as f64).powf(gamma) + 0.5).floor() as usize
}

/// Sample-to-landmark affinity `W̄ᵢⱼ = exp(−‖xᵢ − yⱼ‖²/h)` and the bandwidth
/// it was built with.
pub fn landmark_affinity(
    x: &DataMatrix,
    landmarks: &[usize],
    h: Bandwidth,
) -> Result<(DMatrix<f64>, f64)> {
    let y = x.select_columns(landmarks)?;
    let d2 = numerics::pairwise_sq_dist(x, &y)?;
    let bandwidth = resolve(h, || auto_bandwidth(&d2, |i, j| landmarks[j] == i))?;
    Ok((d2.map(|v| (-v / bandwidth).exp()), bandwidth))
}

/// Normalized landmark transition `Ā = D̄^{-1/2}W̄` with `D̄ = diag(W̄W̄ᵀ𝟙)`.
pub fn roseland_transition(wbar: &DMatrix<f64>) -> Result<(DMatrix<f64>, Vec<f64>)> {
    let col_sums: DVector<f64> = wbar.row_sum().transpose();
    let deg: Vec<f64> = (wbar * col_sums).iter().copied().collect();
    if let Some(i) = deg.iter().position(|&d| !(d > 0.0)) {
        return Err(Error::Numerical(format!(
            "sample {i} has zero landmark degree (bandwidth too small?)"
        )));
    }
    let mut a = wbar.clone();
    for (i, mut row) in a.row_iter_mut().enumerate() {
        row.scale_mut(1.0 / deg[i].sqrt());
    }
    Ok((a, deg))
}

/// ROSELAND embedding: row `i` of `D̄^{-1/2}·Ū_{q′}·S̄_{q′}^{2t}` using the
/// second through `(q′+1)`-th singular triplets of `Ā`.
pub fn roseland_embed(
    x: &DataMatrix,
    landmarks: &[usize],
    h: Bandwidth,
    q: usize,
    t: f64,
) -> Result<EmbeddingResult> {
    let n = x.cols();
    let m = landmarks.len();
    if m < 2 {
        return Err(Error::invalid("ROSELAND needs at least two landmarks"));
    }
    let limit = n.min(m) - 1;
    if q == 0 || q > limit {
        return Err(Error::invalid(format!(
            "embedding dimension must be in 1..={limit}, got {q}"
        )));
    }
    if !(t > 0.0 && t.is_finite()) {
        return Err(Error::invalid(format!(
            "diffusion time must be positive, got {t}"
        )));
    }
    let (wbar, bandwidth) = landmark_affinity(x, landmarks, h)?;
    let (abar, deg) = roseland_transition(&wbar)?;
    let f = numerics::svd_of(&abar)?;

    let mut coords = DMatrix::zeros(n, q);
    let mut spectrum = Vec::with_capacity(q);
    for c in 0..q {
        let s = f.singular[c + 1];
        let factor = s.powf(2.0 * t);
        spectrum.push(factor);
        for i in 0..n {
            coords[(i, c)] = factor * f.left[(i, c + 1)] / deg[i].sqrt();
        }
    }
    Ok(EmbeddingResult {
        coords,
        spectrum,
        raw_spectrum: f.singular.iter().copied().collect(),
        degrees: deg,
        diffusion_time: t,
        bandwidth,
        kind: EmbeddingKind::Roseland,
    })
}

/// Euclidean distance between embedded samples `i` and `j`.
pub fn diffusion_distance(emb: &EmbeddingResult, i: usize, j: usize) -> Result<f64> {
    let n = emb.len();
    if i >= n || j >= n {
        return Err(Error::invalid(format!(
            "indices ({i}, {j}) out of range for {n} samples"
        )));
    }
    Ok((emb.coords.row(i) - emb.coords.row(j)).norm())
}
