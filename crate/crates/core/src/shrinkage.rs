//! Optimal singular-value shrinkage for low-rank signal in separable
//! covariance noise (eOptShrink).
//!
//! The estimator never needs the noise covariances. It reads the bulk edge
//! and effective rank off the order statistics of the observed spectrum,
//! imputes the top of the noise bulk that the signal components displaced,
//! and plugs the resulting empirical Stieltjes transforms into the
//! Frobenius-optimal shrinker.
//!
//! All spectral quantities are eigenvalues of `X Xᵀ` for the orientation
//! with `p ≤ n` (the input is transposed internally otherwise); nothing is
//! normalized by `n`.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::{self, DataMatrix};

/// `1 / (2^{2/3} − 1)`, the extrapolation factor of the edge estimator.
pub fn edge_factor() -> f64 {
    1.0 / (2f64.powf(2.0 / 3.0) - 1.0)
}

/// `round(n^{1/4})`, halves rounded up.
pub fn edge_offset(n: usize) -> usize {
    ((n as f64).powf(0.25) + 0.5).floor() as usize
}

/// Estimated right edge of the noise bulk:
/// `λ̃_{m+1} + (λ̃_{m+1} − λ̃_{2m+1}) / (2^{2/3} − 1)` with `m = round(n^{1/4})`.
pub fn estimate_bulk_edge(spectrum: &[f64], n: usize) -> Result<f64> {
    let m = edge_offset(n);
    let required = 2 * m + 2;
    if spectrum.len() < required {
        return Err(Error::SpectrumTooShort {
            required,
            actual: spectrum.len(),
        });
    }
    Ok(edge_from_offset(spectrum, m))
}

fn edge_from_offset(spectrum: &[f64], m: usize) -> f64 {
    let anchor = spectrum[m];
    anchor + edge_factor() * (anchor - spectrum[2 * m])
}

/// Number of eigenvalues strictly above `bulk_edge + n^{-1/3}`.
pub fn estimate_effective_rank(spectrum: &[f64], bulk_edge: f64, n: usize) -> usize {
    let threshold = rank_threshold(bulk_edge, n);
    spectrum.iter().filter(|&&l| l > threshold).count()
}

pub fn rank_threshold(bulk_edge: f64, n: usize) -> f64 {
    bulk_edge + (n as f64).powf(-1.0 / 3.0)
}

/// Imputed noise eigenvalues standing in for the top `k` of the bulk:
/// `λ̂_j = λ̃_{k+1} + (1 − ((j−1)/k)^{2/3}) / (2^{2/3} − 1) · (λ̃_{k+1} − λ̃_{2k+1})`.
pub fn impute_noise_eigs(spectrum: &[f64], k: usize) -> Result<Vec<f64>> {
    if k == 0 {
        return Err(Error::invalid("imputation count k must be positive"));
    }
    let required = 2 * k + 1;
    if spectrum.len() < required {
        return Err(Error::SpectrumTooShort {
            required,
            actual: spectrum.len(),
        });
    }
    let anchor = spectrum[k];
    let spread = anchor - spectrum[2 * k];
    let c = edge_factor();
    Ok((0..k)
        .map(|j| {
            let frac = (j as f64 / k as f64).powf(2.0 / 3.0);
            anchor + (1.0 - frac) * c * spread
        })
        .collect())
}

/// Plug-in Stieltjes transforms (and derivatives) evaluated at one outlier.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StieltjesEstimates {
    pub m1: f64,
    pub m2: f64,
    pub m1p: f64,
    pub m2p: f64,
    pub t: f64,
    pub tp: f64,
}

/// Evaluates the plug-in transforms at `spectrum[i]` (0-based `i`).
///
/// `m2` is the companion transform `β·m1 − (1−β)/λ̃ᵢ` (the spectral measure
/// of `XᵀX`, which carries extra mass `1−β` at zero) and `m2p` its
/// derivative.
pub fn stieltjes_estimates(
    spectrum: &[f64],
    imputed: &[f64],
    i: usize,
    beta: f64,
    k: usize,
) -> Result<StieltjesEstimates> {
    let degenerate = |reason: String| Error::DegenerateShrinkage {
        component: i,
        reason,
    };
    if imputed.len() != k {
        return Err(Error::invalid(format!(
            "expected {k} imputed eigenvalues, got {}",
            imputed.len()
        )));
    }
    if i >= spectrum.len() || k > spectrum.len() {
        return Err(Error::invalid(format!(
            "component {i} / imputation count {k} out of range for {} eigenvalues",
            spectrum.len()
        )));
    }
    if !(0.0..=1.0).contains(&beta) {
        return Err(Error::invalid(format!(
            "aspect ratio {beta} outside [0, 1]"
        )));
    }
    let li = spectrum[i];
    let bulk = imputed.iter().chain(&spectrum[k..]);
    if let Some(top) = bulk.clone().copied().reduce(f64::max) {
        if li <= top {
            return Err(degenerate(format!(
                "eigenvalue {li} does not exceed the noise bulk ({top})"
            )));
        }
    }
    let p = spectrum.len() as f64;
    let (mut s1, mut s2) = (0.0, 0.0);
    for &l in bulk {
        let d = l - li;
        s1 += 1.0 / d;
        s2 += 1.0 / (d * d);
    }
    let m1 = s1 / p;
    let m1p = s2 / p;
    let m2 = beta * m1 - (1.0 - beta) / li;
    let m2p = (1.0 - beta) / (li * li) + beta * m1p;
    let t = li * m1 * m2;
    let tp = m1 * m2 + li * m1p * m2 + li * m1 * m2p;
    if !(t > 0.0) {
        return Err(degenerate(format!("T = {t} is not positive")));
    }
    if !(tp < 0.0) {
        return Err(degenerate(format!("T' = {tp} is not negative")));
    }
    Ok(StieltjesEstimates {
        m1,
        m2,
        m1p,
        m2p,
        t,
        tp,
    })
}

/// Shrunk singular value `d̂ = φ̂·√(â₁â₂)` for one kept component.
pub fn shrink_singular_value(lambda: f64, est: &StieltjesEstimates) -> Result<f64> {
    shrink_parts(lambda, est).map(|s| s.value)
}

/// Intermediate quantities of the shrinker, exposed for diagnostics.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ShrinkParts {
    /// Estimated clean singular value `φ̂`.
    pub phi: f64,
    /// Estimated squared cosine between clean and noisy left vectors.
    pub a1: f64,
    /// Same for the right vectors.
    pub a2: f64,
    pub value: f64,
}

pub fn shrink_parts(lambda: f64, est: &StieltjesEstimates) -> Result<ShrinkParts> {
    let degenerate = |reason: String| Error::DegenerateShrinkage {
        component: 0,
        reason,
    };
    if !(est.t > 0.0) || !(est.tp < 0.0) {
        return Err(degenerate(format!(
            "estimates out of range (T = {}, T' = {})",
            est.t, est.tp
        )));
    }
    let phi = (1.0 / est.t).sqrt();
    let a1 = est.m1 / (phi * phi * est.tp);
    let a2 = est.m2 / (phi * phi * est.tp);
    if !(a1 * a2 > 0.0) {
        return Err(degenerate(format!("a1·a2 = {} is not positive", a1 * a2)));
    }
    let value = phi * (a1 * a2).sqrt();
    if !value.is_finite() || value <= 0.0 {
        return Err(degenerate(format!("shrunk value {value} at λ̃ = {lambda}")));
    }
    Ok(ShrinkParts { phi, a1, a2, value })
}

/// Non-fatal events raised while shrinking.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum ShrinkWarning {
    /// Nothing rose above the rank threshold; the estimate is the zero matrix.
    ZeroEffectiveRank,
    /// The effective rank reached the imputation count, which was raised.
    ImputationCountRaised { from: usize, to: usize },
    /// A component too close to the bulk was left out of the estimate.
    ComponentDropped { component: usize, reason: String },
}

/// Result of [`eoptshrink`].
#[derive(Debug, Clone)]
pub struct ShrinkageOutput {
    /// Eigenvalues `λ̃₁ ≥ … ≥ λ̃_q` of `XXᵀ`, `q = min(p, n)`.
    pub spectrum: Vec<f64>,
    pub bulk_edge: f64,
    pub rank_threshold: f64,
    pub effective_rank: usize,
    /// Imputation count actually used (after any raise).
    pub imputation_count: usize,
    pub imputed: Vec<f64>,
    /// Shrunk singular values of the kept components.
    pub shrunk: Vec<f64>,
    /// 0-based component indices matching `shrunk`.
    pub kept: Vec<usize>,
    /// Left singular vectors of the kept components (`p × kept`).
    pub left: DMatrix<f64>,
    /// Right singular vectors of the kept components (`n × kept`).
    pub right: DMatrix<f64>,
    /// Column mean removed before shrinking, if centering was requested.
    pub center: Option<DVector<f64>>,
    pub denoised: DataMatrix,
    /// `min(p, n) / max(p, n)`.
    pub aspect: f64,
    pub transposed: bool,
    pub warnings: Vec<ShrinkWarning>,
}

impl ShrinkageOutput {
    /// Coordinates of the denoised samples in the kept singular basis
    /// (`kept × n`). Euclidean distances between these columns equal the
    /// distances between the columns of `denoised`.
    pub fn sample_coords(&self) -> DMatrix<f64> {
        let mut c = self.right.transpose();
        for (r, d) in self.shrunk.iter().enumerate() {
            c.row_mut(r).scale_mut(*d);
        }
        c
    }
}

/// Smallest `min(p, n)` that [`eoptshrink`] accepts for the given shape.
pub fn minimum_short_side(k: usize, long_side: usize) -> usize {
    2 * k.max(edge_offset(long_side)) + 2
}

/// Denoises `x` by shrinking its singular values.
///
/// `k` is the number of imputed noise eigenvalues; it is raised to
/// `r̂ + 5` when the effective rank reaches it. With `center`, the column
/// mean is removed first and added back to the estimate.
pub fn eoptshrink(x: &DataMatrix, k: usize, center: bool) -> Result<ShrinkageOutput> {
    if k == 0 {
        return Err(Error::invalid("imputation count k must be positive"));
    }
    let (p, n) = (x.rows(), x.cols());
    let transposed = p > n;
    let (short, long) = if transposed { (n, p) } else { (p, n) };
    let needed = minimum_short_side(k, long);
    if short < needed {
        return Err(Error::invalid(format!(
            "matrix {p}x{n} too small for shrinkage with k = {k}: min(p, n) must be at least {needed}"
        )));
    }

    let mut work = x.as_matrix().clone();
    let mean = if center {
        let mu = work.column_mean();
        for mut c in work.column_iter_mut() {
            c -= &mu;
        }
        Some(mu)
    } else {
        None
    };
    if transposed {
        work = work.transpose();
    }

    let f = numerics::svd_of(&work)?;
    let spectrum: Vec<f64> = f.singular.iter().map(|s| s * s).collect();
    let aspect = short as f64 / long as f64;

    let bulk_edge = estimate_bulk_edge(&spectrum, long)?;
    let threshold = rank_threshold(bulk_edge, long);
    let effective_rank = estimate_effective_rank(&spectrum, bulk_edge, long);

    let mut warnings = Vec::new();
    let mut k_used = k;
    if effective_rank >= k {
        let raised = effective_rank + 5;
        if spectrum.len() < 2 * raised + 1 {
            return Err(Error::invalid(format!(
                "effective rank {effective_rank} reaches k = {k} and the spectrum ({} values) is too short to raise k to {raised}",
                spectrum.len()
            )));
        }
        warnings.push(ShrinkWarning::ImputationCountRaised {
            from: k,
            to: raised,
        });
        k_used = raised;
    }
    let imputed = impute_noise_eigs(&spectrum, k_used)?;

    let mut shrunk = Vec::new();
    let mut kept = Vec::new();
    for i in 0..effective_rank {
        let outcome = stieltjes_estimates(&spectrum, &imputed, i, aspect, k_used)
            .and_then(|est| shrink_singular_value(spectrum[i], &est));
        match outcome {
            Ok(d) => {
                shrunk.push(d);
                kept.push(i);
            }
            Err(Error::DegenerateShrinkage { reason, .. }) => {
                log::debug!("dropping component {i}: {reason}");
                warnings.push(ShrinkWarning::ComponentDropped {
                    component: i,
                    reason,
                });
            }
            Err(e) => return Err(e),
        }
    }
    if effective_rank == 0 {
        warnings.push(ShrinkWarning::ZeroEffectiveRank);
    }

    let (u_all, v_all) = if transposed {
        (&f.right, &f.left)
    } else {
        (&f.left, &f.right)
    };
    let left = u_all.select_columns(&kept);
    let right = v_all.select_columns(&kept);
    let mut scaled = left.clone();
    for (c, d) in shrunk.iter().enumerate() {
        scaled.column_mut(c).scale_mut(*d);
    }
    let mut est = scaled * right.transpose();
    if let Some(mu) = &mean {
        for mut c in est.column_iter_mut() {
            c += mu;
        }
    }

    Ok(ShrinkageOutput {
        spectrum,
        bulk_edge,
        rank_threshold: threshold,
        effective_rank,
        imputation_count: k_used,
        imputed,
        shrunk,
        kept,
        left,
        right,
        center: mean,
        denoised: DataMatrix::from_trusted(est),
        aspect,
        transposed,
        warnings,
    })
}

/// Frobenius-optimal shrinker for i.i.d. noise of entry variance `1/n`
/// at aspect ratio `β`: `(1/y)·√((y² − β − 1)² − 4β)` above the bulk edge
/// `1 + √β`, zero below.
pub fn white_noise_shrinker(y: f64, beta: f64) -> f64 {
    if y <= 1.0 + beta.sqrt() {
        return 0.0;
    }
    let a = y * y - beta - 1.0;
    (a * a - 4.0 * beta).max(0.0).sqrt() / y
}
