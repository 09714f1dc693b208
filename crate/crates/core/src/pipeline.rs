//! The three-step denoiser.
//!
//! 1. A global metric (ROSELAND diffusion distance, or distances between
//!    globally shrunk samples) proposes `K` candidate neighbors per point.
//! 2. Shrinkage on each `p × (K+1)` neighborhood gives a local metric.
//! 3. The point is replaced by the entrywise median of its `k` nearest
//!    candidates under the local metric (itself included).
//!
//! Steps 2 and 3 run independently per point and in parallel; the output
//! does not depend on the thread count.

use std::time::Instant;

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::diffusion::{self, Bandwidth};
use crate::error::{Error, Result};
use crate::numerics::{self, DataMatrix};
use crate::shrinkage;

/// How Step 1 measures similarity.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum GlobalMode {
    /// ROSELAND diffusion distance. Suited to curved, high-codimension
    /// embeddings.
    #[default]
    Roseland,
    /// Euclidean distance after global shrinkage, then local shrinkage.
    GlobalShrink,
    /// Global shrinkage only; Step 2 is skipped and Step 3 ranks candidates
    /// by the global metric.
    ShrinkOnly,
}

impl GlobalMode {
    pub fn name(self) -> &'static str {
        match self {
            GlobalMode::Roseland => "roseland",
            GlobalMode::GlobalShrink => "global-shrink",
            GlobalMode::ShrinkOnly => "shrink-only",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PipelineConfig {
    pub global_mode: GlobalMode,
    pub bandwidth: Bandwidth,
    /// Landmark exponent: `round(n^γ)` landmarks.
    pub gamma: f64,
    /// Embedding dimension `q′` (clipped to what the landmark count allows).
    pub embed_dim: usize,
    pub diffusion_time: f64,
    /// `K`, candidate neighbors from the global metric.
    pub global_neighbors: usize,
    /// `k`, neighbors whose median recovers the point.
    pub local_neighbors: usize,
    /// Imputed noise eigenvalues in every shrinkage call.
    pub imputation_count: usize,
    /// Remove the column mean before shrinking.
    pub center: bool,
    pub seed: u64,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            global_mode: GlobalMode::Roseland,
            bandwidth: Bandwidth::Auto,
            gamma: 0.5,
            embed_dim: 10,
            diffusion_time: 1.0,
            global_neighbors: 100,
            local_neighbors: 20,
            imputation_count: 10,
            center: false,
            seed: 0,
        }
    }
}

impl PipelineConfig {
    /// Checks the configuration against a data set of `n` samples.
    pub fn validate(&self, n: usize) -> Result<()> {
        let (k, big_k) = (self.local_neighbors, self.global_neighbors);
        if !(1 <= k && k < big_k && big_k < n) {
            return Err(Error::invalid(format!(
                "neighbor counts must satisfy 1 <= k < K < n, got k = {k}, K = {big_k}, n = {n}"
            )));
        }
        if self.embed_dim == 0 {
            return Err(Error::invalid("embedding dimension q' must be at least 1"));
        }
        if self.imputation_count == 0 {
            return Err(Error::invalid("imputation count must be at least 1"));
        }
        if !(self.gamma > 0.0 && self.gamma < 1.0) {
            return Err(Error::invalid(format!(
                "landmark exponent must lie in (0, 1), got {}",
                self.gamma
            )));
        }
        if !(self.diffusion_time > 0.0 && self.diffusion_time.is_finite()) {
            return Err(Error::invalid(format!(
                "diffusion time must be positive, got {}",
                self.diffusion_time
            )));
        }
        if let Bandwidth::Fixed(h) = self.bandwidth {
            if !(h > 0.0 && h.is_finite()) {
                return Err(Error::invalid(format!(
                    "bandwidth must be positive, got {h}"
                )));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MetricKind {
    Diffusion,
    EuclideanDenoised,
    /// Raw Euclidean distance, used when global shrinkage found no signal.
    EuclideanRaw,
}

/// Step-1 metric: Euclidean distance between the columns of `coords`.
#[derive(Debug, Clone)]
pub struct GlobalMetric {
    pub kind: MetricKind,
    /// `q × n`; column `i` represents sample `i`.
    pub coords: DMatrix<f64>,
    pub effective_rank: Option<usize>,
    pub bandwidth: Option<f64>,
    pub landmarks: Option<usize>,
    pub warnings: Vec<String>,
}

impl GlobalMetric {
    pub fn len(&self) -> usize {
        self.coords.ncols()
    }

    pub fn is_empty(&self) -> bool {
        self.coords.ncols() == 0
    }

    pub fn distance(&self, i: usize, j: usize) -> f64 {
        (self.coords.column(i) - self.coords.column(j)).norm()
    }

    /// `i` followed by its `count` nearest other samples.
    pub fn neighborhood(&self, i: usize, count: usize) -> Result<Vec<usize>> {
        let mut d = numerics::sq_dist_from(&self.coords, i);
        d[i] = f64::NEG_INFINITY;
        numerics::knn(&d, count + 1)
    }
}

/// Builds the Step-1 metric.
pub fn global_metric(x: &DataMatrix, cfg: &PipelineConfig) -> Result<GlobalMetric> {
    match cfg.global_mode {
        GlobalMode::Roseland => {
            let landmarks = diffusion::select_landmarks(x, cfg.gamma, cfg.seed)?;
            let q = cfg.embed_dim.min(landmarks.len().min(x.cols()) - 1).max(1);
            let emb =
                diffusion::roseland_embed(x, &landmarks, cfg.bandwidth, q, cfg.diffusion_time)?;
            let mut warnings = Vec::new();
            if q < cfg.embed_dim {
                warnings.push(format!(
                    "embedding dimension clipped from {} to {q}",
                    cfg.embed_dim
                ));
            }
            Ok(GlobalMetric {
                kind: MetricKind::Diffusion,
                coords: emb.coords.transpose(),
                effective_rank: None,
                bandwidth: Some(emb.bandwidth),
                landmarks: Some(landmarks.len()),
                warnings,
            })
        }
        GlobalMode::GlobalShrink | GlobalMode::ShrinkOnly => {
            let out = shrinkage::eoptshrink(x, cfg.imputation_count, cfg.center)?;
            let mut warnings: Vec<String> = out.warnings.iter().map(|w| format!("{w:?}")).collect();
            let (kind, coords) = if out.shrunk.is_empty() {
                warnings.push("global shrinkage kept no component; using raw distances".into());
                (MetricKind::EuclideanRaw, x.as_matrix().clone())
            } else {
                (MetricKind::EuclideanDenoised, out.sample_coords())
            };
            Ok(GlobalMetric {
                kind,
                coords,
                effective_rank: Some(out.effective_rank),
                bandwidth: None,
                landmarks: None,
                warnings,
            })
        }
    }
}

/// Step-2 result for one point.
#[derive(Debug, Clone)]
pub struct LocalNeighborhood {
    /// The point itself followed by its `K` global neighbors.
    pub neighborhood: Vec<usize>,
    /// Local distance from the point to each neighborhood member.
    pub local_dists: Vec<f64>,
    pub effective_rank: Option<usize>,
    /// Local shrinkage failed and raw distances were used instead.
    pub fallback: bool,
}

/// Step 2: shrink the neighborhood of `i` and measure distances between
/// the shrunk columns.
pub fn local_denoise(
    x: &DataMatrix,
    i: usize,
    metric: &GlobalMetric,
    cfg: &PipelineConfig,
) -> Result<LocalNeighborhood> {
    let neighborhood = metric.neighborhood(i, cfg.global_neighbors)?;
    let xi = x.select_columns(&neighborhood)?;
    let (coords, effective_rank, fallback) =
        match shrinkage::eoptshrink(&xi, cfg.imputation_count, cfg.center) {
            Ok(out) => (out.sample_coords(), Some(out.effective_rank), false),
            Err(e) => {
                log::debug!("local shrinkage failed at point {i}: {e}");
                (xi.into_inner(), None, true)
            }
        };
    let local_dists = numerics::sq_dist_from(&coords, 0)
        .into_iter()
        .map(f64::sqrt)
        .collect();
    Ok(LocalNeighborhood {
        neighborhood,
        local_dists,
        effective_rank,
        fallback,
    })
}

/// Step 3: entrywise median of the `k` columns of `xi` nearest under
/// `local_dists` (ties to the lowest column index).
pub fn recover_point(xi: &DataMatrix, local_dists: &[f64], k: usize) -> Result<DVector<f64>> {
    if local_dists.len() != xi.cols() {
        return Err(Error::DimensionMismatch(format!(
            "{} distances for {} columns",
            local_dists.len(),
            xi.cols()
        )));
    }
    let chosen = numerics::knn(local_dists, k)?;
    numerics::median_of_columns(xi.as_matrix(), &chosen)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Diagnostics {
    pub mode: GlobalMode,
    pub metric: MetricKind,
    pub global_effective_rank: Option<usize>,
    pub bandwidth: Option<f64>,
    pub landmarks: Option<usize>,
    pub global_warnings: Vec<String>,
    /// Local effective rank per point (`None` where Step 2 did not run or failed).
    pub local_ranks: Vec<Option<usize>>,
    pub fallback_count: usize,
    pub fallback_points: Vec<usize>,
    pub global_seconds: f64,
    pub local_seconds: f64,
    pub total_seconds: f64,
}

#[derive(Debug, Clone)]
pub struct RosdosOutput {
    pub denoised: DataMatrix,
    pub diagnostics: Diagnostics,
}

/// Runs the full denoiser on the columns of `x`.
pub fn rosdos(x: &DataMatrix, cfg: &PipelineConfig) -> Result<RosdosOutput> {
    cfg.validate(x.cols())?;
    let start = Instant::now();
    let metric = global_metric(x, cfg)?;
    let global_seconds = start.elapsed().as_secs_f64();

    let local_start = Instant::now();
    // (recovered column, local rank, fell back to raw distances)
    type PointResult = Result<(DVector<f64>, Option<usize>, bool)>;
    let per_point: Vec<PointResult> = (0..x.cols())
        .into_par_iter()
        .map(|i| {
            if cfg.global_mode == GlobalMode::ShrinkOnly {
                let hood = metric.neighborhood(i, cfg.global_neighbors)?;
                let dists: Vec<f64> = hood.iter().map(|&j| metric.distance(i, j)).collect();
                let xi = x.select_columns(&hood)?;
                Ok((
                    recover_point(&xi, &dists, cfg.local_neighbors)?,
                    None,
                    false,
                ))
            } else {
                let local = local_denoise(x, i, &metric, cfg)?;
                let xi = x.select_columns(&local.neighborhood)?;
                let col = recover_point(&xi, &local.local_dists, cfg.local_neighbors)?;
                Ok((col, local.effective_rank, local.fallback))
            }
        })
        .collect();
    let local_seconds = local_start.elapsed().as_secs_f64();

    let mut out = DMatrix::zeros(x.rows(), x.cols());
    let mut local_ranks = Vec::with_capacity(x.cols());
    let mut fallback_points = Vec::new();
    for (i, r) in per_point.into_iter().enumerate() {
        let (col, rank, fallback) = r?;
        out.set_column(i, &col);
        local_ranks.push(rank);
        if fallback {
            fallback_points.push(i);
        }
    }

    Ok(RosdosOutput {
        denoised: DataMatrix::from_trusted(out),
        diagnostics: Diagnostics {
            mode: cfg.global_mode,
            metric: metric.kind,
            global_effective_rank: metric.effective_rank,
            bandwidth: metric.bandwidth,
            landmarks: metric.landmarks,
            global_warnings: metric.warnings,
            local_ranks,
            fallback_count: fallback_points.len(),
            fallback_points,
            global_seconds,
            local_seconds,
            total_seconds: start.elapsed().as_secs_f64(),
        },
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn config_validation() {
        let cfg = PipelineConfig::default();
        assert!(cfg.validate(5000).is_ok());
        assert!(cfg.validate(100).is_err());
        let bad = PipelineConfig {
            local_neighbors: 0,
            ..PipelineConfig::default()
        };
        let msg = bad.validate(500).unwrap_err().to_string();
        assert!(msg.contains("1 <= k < K < n"), "{msg}");
        let bad = PipelineConfig {
            local_neighbors: 100,
            ..PipelineConfig::default()
        };
        assert!(bad.validate(500).is_err());
    }

    #[test]
    fn identical_points_have_zero_diffusion_distance() {
        let x = DataMatrix::from_row_major(2, 2, &[1.0, 1.0, -2.0, -2.0]).unwrap();
        let cfg = PipelineConfig {
            gamma: 0.99,
            embed_dim: 1,
            ..PipelineConfig::default()
        };
        let m = global_metric(&x, &cfg).unwrap();
        assert_eq!(m.distance(0, 1), 0.0);
    }

    #[test]
    fn recover_point_examples() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let xi =
            DataMatrix::new(DMatrix::from_fn(4, 6, |_, _| rng.random_range(-1.0..1.0))).unwrap();
        let d = [0.0, 0.3, 0.1, 0.9, 0.2, 0.5];
        assert_eq!(recover_point(&xi, &d, 1).unwrap(), xi.column(0));

        let xi = DataMatrix::from_row_major(1, 3, &[1.0, 2.0, 100.0]).unwrap();
        assert_eq!(recover_point(&xi, &[0.0, 1.0, 2.0], 3).unwrap()[0], 2.0);
        assert!(recover_point(&xi, &[0.0, 1.0], 1).is_err());
    }

    #[test]
    fn identical_neighborhood_has_zero_local_distances() {
        let col: Vec<f64> = (0..40).map(|i| (i as f64).sin()).collect();
        let x = DataMatrix::new(DMatrix::from_fn(40, 60, |r, _| col[r])).unwrap();
        let cfg = PipelineConfig {
            global_mode: GlobalMode::GlobalShrink,
            global_neighbors: 25,
            local_neighbors: 5,
            ..PipelineConfig::default()
        };
        let metric = global_metric(&x, &cfg).unwrap();
        let local = local_denoise(&x, 7, &metric, &cfg).unwrap();
        assert_eq!(local.neighborhood.len(), 26);
        assert_eq!(local.neighborhood[0], 7);
        assert!(local.local_dists.iter().all(|&d| d.abs() < 1e-9));
    }
}
