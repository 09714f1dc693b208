//! Recovery metrics and baseline denoisers.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::{self, DataMatrix};

/// Per-point `‖s̃ᵢ − sᵢ‖ / ‖sᵢ‖`.
pub fn nrmse(clean: &DataMatrix, estimate: &DataMatrix) -> Result<Vec<f64>> {
    same_shape(clean, estimate)?;
    let (s, e) = (clean.as_matrix(), estimate.as_matrix());
    (0..s.ncols())
        .map(|i| {
            let norm = s.column(i).norm();
            if norm == 0.0 {
                return Err(Error::invalid(format!("clean column {i} has zero norm")));
            }
            Ok((e.column(i) - s.column(i)).norm() / norm)
        })
        .collect()
}

/// Per-point `‖ξᵢ‖ / ‖sᵢ‖`, the error of doing nothing.
pub fn noise_ratio(clean: &DataMatrix, noise: &DataMatrix) -> Result<Vec<f64>> {
    same_shape(clean, noise)?;
    let (s, xi) = (clean.as_matrix(), noise.as_matrix());
    (0..s.ncols())
        .map(|i| {
            let norm = s.column(i).norm();
            if norm == 0.0 {
                return Err(Error::invalid(format!("clean column {i} has zero norm")));
            }
            Ok(xi.column(i).norm() / norm)
        })
        .collect()
}

fn same_shape(a: &DataMatrix, b: &DataMatrix) -> Result<()> {
    if a.rows() != b.rows() || a.cols() != b.cols() {
        return Err(Error::DimensionMismatch(format!(
            "{}x{} vs {}x{}",
            a.rows(),
            a.cols(),
            b.rows(),
            b.cols()
        )));
    }
    Ok(())
}

/// Keeps the top-`r` singular triplets unchanged.
pub fn baseline_tsvd(x: &DataMatrix, r: usize) -> Result<DataMatrix> {
    let q = x.rows().min(x.cols());
    if r > q {
        return Err(Error::invalid(format!("rank {r} exceeds min(p, n) = {q}")));
    }
    if r == 0 {
        return DataMatrix::zeros(x.rows(), x.cols());
    }
    let f = numerics::svd(x)?;
    let mut u = f.left.columns(0, r).into_owned();
    for c in 0..r {
        u.column_mut(c).scale_mut(f.singular[c]);
    }
    DataMatrix::new(u * f.right.columns(0, r).transpose())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub nrmse: Vec<f64>,
    pub nrmse_median: f64,
    pub nrmse_mean: f64,
    /// Median of `‖ξᵢ‖/‖sᵢ‖`; absent when the noise is unknown.
    pub noise_ratio_median: Option<f64>,
    pub msnr_db: Option<f64>,
    pub wallclock_seconds: f64,
    pub config_echo: serde_json::Value,
}

/// Aggregates the per-point errors of `estimate` against `clean`.
pub fn summarize(
    clean: &DataMatrix,
    estimate: &DataMatrix,
    noise: Option<&DataMatrix>,
    wallclock_seconds: f64,
    config_echo: serde_json::Value,
) -> Result<ExperimentReport> {
    let errs = nrmse(clean, estimate)?;
    let nrmse_median = numerics::median(&errs)?;
    let nrmse_mean = errs.iter().sum::<f64>() / errs.len() as f64;
    let (noise_ratio_median, msnr_db) = match noise {
        Some(xi) => {
            let ratios = noise_ratio(clean, xi)?;
            let msnr = crate::synth::msnr(clean, xi).ok();
            (Some(numerics::median(&ratios)?), msnr)
        }
        None => (None, None),
    };
    Ok(ExperimentReport {
        nrmse: errs,
        nrmse_median,
        nrmse_mean,
        noise_ratio_median,
        msnr_db,
        wallclock_seconds,
        config_echo,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::DMatrix;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random(p: usize, n: usize, seed: u64) -> DataMatrix {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        DataMatrix::new(DMatrix::from_fn(p, n, |_, _| rng.random_range(-1.0..1.0))).unwrap()
    }

    #[test]
    fn nrmse_examples() {
        let s = random(4, 6, 1);
        assert!(nrmse(&s, &s).unwrap().iter().all(|&v| v == 0.0));

        let s = DataMatrix::from_row_major(2, 1, &[0.0, 1.0]).unwrap();
        let e = DataMatrix::from_row_major(2, 1, &[1.0, 1.0]).unwrap();
        assert_eq!(nrmse(&s, &e).unwrap(), vec![1.0]);

        let z = DataMatrix::from_row_major(2, 2, &[0.0, 1.0, 0.0, 1.0]).unwrap();
        let err = nrmse(&z, &z).unwrap_err().to_string();
        assert!(err.contains("column 0"), "{err}");
    }

    #[test]
    fn nrmse_matches_loop_oracle() {
        let s = random(5, 9, 2);
        let e = random(5, 9, 3);
        let got = nrmse(&s, &e).unwrap();
        let (sm, em) = (s.as_matrix(), e.as_matrix());
        for i in 0..9 {
            let (mut num, mut den) = (0.0, 0.0);
            for r in 0..5 {
                num += (em[(r, i)] - sm[(r, i)]).powi(2);
                den += sm[(r, i)].powi(2);
            }
            assert!((got[i] - (num / den).sqrt()).abs() < 1e-12);
        }
    }

    #[test]
    fn tsvd_examples() {
        let x = random(6, 9, 4);
        let full = baseline_tsvd(&x, 6).unwrap();
        assert!((full.as_matrix() - x.as_matrix()).amax() < 1e-10);
        assert!(baseline_tsvd(&x, 0)
            .unwrap()
            .as_matrix()
            .iter()
            .all(|&v| v == 0.0));
        assert!(baseline_tsvd(&x, 7).is_err());

        let a = random(6, 2, 5).into_inner();
        let b = random(2, 9, 6).into_inner();
        let r2 = DataMatrix::new(a * b).unwrap();
        let rec = baseline_tsvd(&r2, 2).unwrap();
        assert!((rec.as_matrix() - r2.as_matrix()).amax() < 1e-10);
    }

    #[test]
    fn tsvd_error_is_monotone_in_rank() {
        let x = random(8, 12, 7);
        let errs: Vec<f64> = (0..=8)
            .map(|r| (baseline_tsvd(&x, r).unwrap().as_matrix() - x.as_matrix()).norm())
            .collect();
        assert!(errs.windows(2).all(|w| w[1] <= w[0] + 1e-12));
    }

    #[test]
    fn summary_of_do_nothing_denoiser() {
        let s = random(4, 11, 8);
        let xi = random(4, 11, 9);
        let x = DataMatrix::new(s.as_matrix() + xi.as_matrix()).unwrap();
        let rep = summarize(&s, &x, Some(&xi), 0.5, serde_json::json!({"m": 1})).unwrap();
        let ratio = noise_ratio(&s, &xi).unwrap();
        for (a, b) in rep.nrmse.iter().zip(&ratio) {
            assert!((a - b).abs() < 1e-12);
        }
        assert!((rep.nrmse_median - rep.noise_ratio_median.unwrap()).abs() < 1e-12);

        let mut sorted = rep.nrmse.clone();
        sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
        assert_eq!(rep.nrmse_median, sorted[5]);

        let clean = summarize(&s, &s, None, 0.0, serde_json::Value::Null).unwrap();
        assert_eq!(clean.nrmse_median, 0.0);
        assert!(clean.noise_ratio_median.is_none());
    }
}
