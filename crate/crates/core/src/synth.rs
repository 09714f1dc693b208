//! Synthetic manifolds, noise models and the mSNR diagnostic.

use std::f64::consts::PI;

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal, StudentT};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::{self, DataMatrix, HaarRotation};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ManifoldKind {
    /// One-dimensional Fourier curve occupying `2·⌈2p/5⌉` coordinates.
    M1,
    /// Klein bottle in the first four coordinates.
    M3,
}

impl ManifoldKind {
    pub fn name(self) -> &'static str {
        match self {
            ManifoldKind::M1 => "m1",
            ManifoldKind::M3 => "m3",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NoiseKind {
    Gaussian,
    Separable,
}

impl NoiseKind {
    pub fn name(self) -> &'static str {
        match self {
            NoiseKind::Gaussian => "gaussian",
            NoiseKind::Separable => "separable",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ManifoldSpec {
    pub kind: ManifoldKind,
    pub p: usize,
    pub n: usize,
    pub seed: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseSpec {
    pub kind: NoiseKind,
    /// Noise enters as `Ξ / p^α`.
    pub alpha: f64,
    pub seed: u64,
}

/// Intrinsic coordinates of the clean samples.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Latent {
    /// Generating angle `θ` of each M1 sample.
    Angles(Vec<f64>),
    /// `(t, s)` of each Klein-bottle sample.
    Klein(Vec<(f64, f64)>),
}

impl Latent {
    pub fn len(&self) -> usize {
        match self {
            Latent::Angles(a) => a.len(),
            Latent::Klein(ts) => ts.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

#[derive(Debug, Clone)]
pub struct SyntheticDataset {
    pub clean: DataMatrix,
    pub noisy: DataMatrix,
    /// The noise actually added, `Ξ / p^α`.
    pub noise: DataMatrix,
    pub latent: Latent,
    pub msnr_db: f64,
}

/// Number of Fourier harmonics of M1 in ambient dimension `p`: `⌈2p/5⌉`.
pub fn m1_harmonics(p: usize) -> usize {
    (2 * p).div_ceil(5)
}

/// Embeds one angle on M1.
pub fn m1_point(p: usize, theta: f64) -> Vec<f64> {
    let j_max = m1_harmonics(p);
    let mut v = vec![0.0; p];
    for j in 1..=j_max {
        let jf = j as f64;
        v[2 * j - 2] = (jf * theta).sin() / (2.0 * jf - 1.0);
        v[2 * j - 1] = (jf * theta).cos() / (2.0 * jf);
    }
    v
}

/// `n` points on M1 with angles i.i.d. uniform on `[0, 2π)`.
pub fn sample_m1(p: usize, n: usize, seed: u64) -> Result<(DataMatrix, Vec<f64>)> {
    if p < 5 {
        return Err(Error::invalid(format!("M1 needs p >= 5, got {p}")));
    }
    if n == 0 {
        return Err(Error::invalid("sample count must be positive"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let angles: Vec<f64> = (0..n).map(|_| rng.random_range(0.0..2.0 * PI)).collect();
    let mut m = DMatrix::zeros(p, n);
    for (c, &theta) in angles.iter().enumerate() {
        m.set_column(c, &nalgebra::DVector::from_vec(m1_point(p, theta)));
    }
    Ok((DataMatrix::from_trusted(m), angles))
}

/// Embeds one `(t, s)` pair on the Klein bottle.
pub fn klein_point(p: usize, t: f64, s: f64) -> Vec<f64> {
    let mut v = vec![0.0; p];
    let r = 2.0 * t.cos() + 1.0;
    v[0] = r * s.cos();
    v[1] = r * s.sin();
    v[2] = 2.0 * t.sin() * (s / 2.0).cos();
    v[3] = 2.0 * t.sin() * (s / 2.0).sin();
    v
}

/// `n` points on the Klein bottle with `(t, s)` i.i.d. uniform on `[0, 2π)²`.
pub fn sample_klein(p: usize, n: usize, seed: u64) -> Result<(DataMatrix, Vec<(f64, f64)>)> {
    if p < 4 {
        return Err(Error::invalid(format!(
            "Klein bottle needs p >= 4, got {p}"
        )));
    }
    if n == 0 {
        return Err(Error::invalid("sample count must be positive"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let params: Vec<(f64, f64)> = (0..n)
        .map(|_| {
            (
                rng.random_range(0.0..2.0 * PI),
                rng.random_range(0.0..2.0 * PI),
            )
        })
        .collect();
    let mut m = DMatrix::zeros(p, n);
    for (c, &(t, s)) in params.iter().enumerate() {
        m.set_column(c, &nalgebra::DVector::from_vec(klein_point(p, t, s)));
    }
    Ok((DataMatrix::from_trusted(m), params))
}

/// I.i.d. standard normal `p × n` matrix.
pub fn gaussian_noise(p: usize, n: usize, seed: u64) -> Result<DataMatrix> {
    if p == 0 || n == 0 {
        return Err(Error::invalid("noise shape must be non-empty"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    // Fill column by column so the stream order matches the storage order.
    let mut m = DMatrix::zeros(p, n);
    for v in m.iter_mut() {
        *v = StandardNormal.sample(&mut rng);
    }
    Ok(DataMatrix::from_trusted(m))
}

/// Separable-covariance noise together with the spectra of its factors.
#[derive(Debug, Clone)]
pub struct SeparableNoise {
    /// `A^{1/2} Z B^{1/2}`, `p × n`.
    pub noise: DataMatrix,
    /// Eigenvalues of the row covariance `A`.
    pub a_eigs: Vec<f64>,
    /// Eigenvalues of the column covariance `B`.
    pub b_eigs: Vec<f64>,
    /// `A` itself (`p × p`); `B` is only kept implicitly.
    pub a: DMatrix<f64>,
}

/// Eigenvalue draws at or below this are redrawn to keep `A`, `B` positive definite.
pub const EIGEN_FLOOR: f64 = 0.05;
const MAX_REDRAWS: usize = 100;

fn redraw<R: Rng>(rng: &mut R, mut draw: impl FnMut(&mut R) -> f64) -> Result<f64> {
    for _ in 0..MAX_REDRAWS {
        let v = draw(rng);
        if v > EIGEN_FLOOR {
            return Ok(v);
        }
    }
    Err(Error::Numerical(format!(
        "covariance eigenvalue stayed below {EIGEN_FLOOR} after {MAX_REDRAWS} draws"
    )))
}

/// Eigenvalues of `A`: block levels 1, 1/4, 1/2 over thirds of the index
/// range, each perturbed by `l_j/32` where `l_j` are the eigenvalues of a
/// symmetric matrix with i.i.d. `N(0, 1/p)` entries.
pub fn separable_row_spectrum(p: usize, seed: u64) -> Result<Vec<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let sd = (1.0 / p as f64).sqrt();
    let mut g = DMatrix::zeros(p, p);
    for j in 0..p {
        for i in 0..=j {
            let v: f64 = StandardNormal.sample(&mut rng);
            g[(i, j)] = sd * v;
            g[(j, i)] = sd * v;
        }
    }
    let mut l: Vec<f64> = g.symmetric_eigenvalues().iter().copied().collect();
    l.sort_by(|a, b| b.total_cmp(a));
    let (t1, t2) = (p / 3, 2 * p / 3);
    let lambda: Vec<f64> = l
        .iter()
        .enumerate()
        .map(|(j, lj)| {
            let base = if j < t1 {
                1.0
            } else if j < t2 {
                0.25
            } else {
                0.5
            };
            base + lj / 32.0
        })
        .collect();
    if let Some(bad) = lambda.iter().find(|&&v| v <= EIGEN_FLOOR) {
        return Err(Error::Numerical(format!(
            "row covariance eigenvalue {bad} not positive"
        )));
    }
    Ok(lambda)
}

/// Eigenvalues of `B`: `U(0,1)/4 + 1/6` for the first `⌊n/2⌋`, `T₆/8 + 1`
/// for the rest, redrawing anything at or below [`EIGEN_FLOOR`].
pub fn separable_column_spectrum(n: usize, seed: u64) -> Result<Vec<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let t6 = StudentT::new(6.0).map_err(|e| Error::Numerical(e.to_string()))?;
    let half = n / 2;
    let mut out = Vec::with_capacity(n);
    for _ in 0..half {
        out.push(redraw(&mut rng, |r| r.random::<f64>() / 4.0 + 1.0 / 6.0)?);
    }
    for _ in half..n {
        out.push(redraw(&mut rng, |r| t6.sample(r) / 8.0 + 1.0)?);
    }
    Ok(out)
}

// Independent sub-seeds for the pieces of the separable construction.
fn sub_seed(seed: u64, tag: u64) -> u64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(tag);
    rng.random()
}

/// Separable-covariance noise `A^{1/2} Z B^{1/2}` with Student-t₅ entries in
/// `Z` scaled to unit variance, `A = Q diag(λ) Qᵀ` and `B = Q̄ diag(ℓ) Q̄ᵀ`
/// for Haar-random `Q`, `Q̄`.
pub fn separable_noise(p: usize, n: usize, seed: u64) -> Result<SeparableNoise> {
    if p < 3 || n < 2 {
        return Err(Error::invalid(format!(
            "separable noise needs p >= 3 and n >= 2, got {p}x{n}"
        )));
    }
    let a_eigs = separable_row_spectrum(p, sub_seed(seed, 1))?;
    let q = numerics::random_orthogonal(p, sub_seed(seed, 2))?;
    let b_eigs = separable_column_spectrum(n, sub_seed(seed, 3))?;
    let qbar = HaarRotation::new(n, sub_seed(seed, 4))?;

    let t5 = StudentT::new(5.0).map_err(|e| Error::Numerical(e.to_string()))?;
    let t5_sd = (5.0f64 / 3.0).sqrt();
    let mut zrng = ChaCha8Rng::seed_from_u64(sub_seed(seed, 5));
    let mut rows: Vec<Vec<f64>> = (0..p)
        .map(|_| (0..n).map(|_| t5.sample(&mut zrng) / t5_sd).collect())
        .collect();

    // Z·B^{1/2} = Z·Q̄·diag(√ℓ)·Q̄ᵀ, applied to each row of Z.
    qbar.apply_right(&mut rows);
    let sqrt_b: Vec<f64> = b_eigs.iter().map(|v| v.sqrt()).collect();
    for row in rows.iter_mut() {
        row.iter_mut().zip(&sqrt_b).for_each(|(x, s)| *x *= s);
    }
    qbar.apply_right_transpose(&mut rows);
    let zb = DMatrix::from_fn(p, n, |i, j| rows[i][j]);
    drop(rows);

    let mut qs = q.clone();
    let mut qd = q.clone();
    for (j, l) in a_eigs.iter().enumerate() {
        qs.column_mut(j).scale_mut(l.sqrt());
        qd.column_mut(j).scale_mut(*l);
    }
    let sqrt_a = &qs * q.transpose();
    let a = &qd * q.transpose();
    let noise = sqrt_a * zb;
    Ok(SeparableNoise {
        noise: DataMatrix::new(noise)?,
        a_eigs,
        b_eigs,
        a,
    })
}

/// Manifold SNR in dB: `10·log₁₀(tr C_s / tr C_ξ)` with empirical,
/// column-mean-centered covariances.
pub fn msnr(s: &DataMatrix, xi: &DataMatrix) -> Result<f64> {
    if s.rows() != xi.rows() || s.cols() != xi.cols() {
        return Err(Error::DimensionMismatch(format!(
            "signal {}x{} vs noise {}x{}",
            s.rows(),
            s.cols(),
            xi.rows(),
            xi.cols()
        )));
    }
    let ts = centered_trace(s.as_matrix());
    let tn = centered_trace(xi.as_matrix());
    if !(tn > 0.0) {
        return Err(Error::invalid("noise covariance has zero trace"));
    }
    Ok(10.0 * (ts / tn).log10())
}

/// Trace of the empirical covariance of the columns (divisor `n − 1`).
pub fn centered_trace(m: &DMatrix<f64>) -> f64 {
    let n = m.ncols();
    if n < 2 {
        return 0.0;
    }
    let mu = m.column_mean();
    let mut acc = 0.0;
    for c in m.column_iter() {
        acc += (c - &mu).norm_squared();
    }
    acc / (n as f64 - 1.0)
}

/// Clean samples, noise, and their sum `S + Ξ/p^α`.
pub fn make_dataset(m: &ManifoldSpec, nz: &NoiseSpec) -> Result<SyntheticDataset> {
    if !(nz.alpha >= 0.0) {
        return Err(Error::invalid(format!(
            "noise exponent must be >= 0, got {}",
            nz.alpha
        )));
    }
    let (clean, latent) = match m.kind {
        ManifoldKind::M1 => {
            let (c, a) = sample_m1(m.p, m.n, m.seed)?;
            (c, Latent::Angles(a))
        }
        ManifoldKind::M3 => {
            let (c, ts) = sample_klein(m.p, m.n, m.seed)?;
            (c, Latent::Klein(ts))
        }
    };
    let raw = match nz.kind {
        NoiseKind::Gaussian => gaussian_noise(m.p, m.n, nz.seed)?,
        NoiseKind::Separable => separable_noise(m.p, m.n, nz.seed)?.noise,
    };
    let scale = (m.p as f64).powf(-nz.alpha);
    let noise = DataMatrix::new(raw.into_inner() * scale)?;
    let noisy = DataMatrix::new(clean.as_matrix() + noise.as_matrix())?;
    let msnr_db = msnr(&clean, &noise)?;
    Ok(SyntheticDataset {
        clean,
        noisy,
        noise,
        latent,
        msnr_db,
    })
}
