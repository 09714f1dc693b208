mod common;

use common::*;
use nalgebra::DMatrix;
use proptest::prelude::*;
use rosdos::shrinkage::{self, eoptshrink};

#[test]
fn bulk_edge_tracks_marchenko_pastur_edge() {
    let (p, n) = (200, 1000);
    let edge = (1.0 + (p as f64 / n as f64).sqrt()).powi(2);
    let estimates: Vec<f64> = (0..50)
        .map(|seed| {
            let out =
                eoptshrink(&data(gaussian(p, n, 1.0 / n as f64, 100 + seed)), 10, false).unwrap();
            out.bulk_edge
        })
        .collect();
    let med = median(&estimates);
    assert!(
        (med - edge).abs() / edge < 0.05,
        "median bulk edge {med}, expected about {edge}"
    );
}

#[test]
fn kept_components_shrink_strictly() {
    for seed in 0..5 {
        let noise = gaussian(120, 600, 1.0 / 600.0, 200 + seed);
        let signal = low_rank(120, 600, &[6.0, 4.0, 2.5], 300 + seed);
        let out = eoptshrink(&data(signal + noise), 10, false).unwrap();
        assert!(!out.kept.is_empty());
        for (&i, &d) in out.kept.iter().zip(&out.shrunk) {
            let sigma = out.spectrum[i].sqrt();
            assert!(
                d > 0.0 && d < sigma,
                "component {i}: d = {d}, sigma = {sigma}"
            );
        }
    }
}

#[test]
fn noiseless_low_rank_is_recovered() {
    let values = [40.0, 20.0, 10.0];
    let s = low_rank(200, 1000, &values, 7);
    let out = eoptshrink(&data(s.clone()), 10, false).unwrap();
    assert_eq!(out.effective_rank, 3);
    assert_eq!(out.kept, vec![0, 1, 2]);
    for (d, v) in out.shrunk.iter().zip(values) {
        assert!((d - v).abs() / v < 0.02, "shrunk {d} vs {v}");
    }
    assert!(rel_frobenius(out.denoised.as_matrix(), &s) < 0.02);
}

#[test]
fn scaling_the_input_scales_the_estimate() {
    let x = low_rank(80, 400, &[5.0, 3.0], 8) + gaussian(80, 400, 1.0 / 400.0, 9);
    let base = eoptshrink(&data(x.clone()), 10, false).unwrap();
    let scaled = eoptshrink(&data(&x * 3.7), 10, false).unwrap();
    assert_eq!(base.effective_rank, scaled.effective_rank);
    let expected = base.denoised.as_matrix() * 3.7;
    assert!(rel_frobenius(scaled.denoised.as_matrix(), &expected) < 1e-8);
}

#[test]
fn tall_input_matches_transposed_wide_input() {
    let x = low_rank(90, 400, &[5.0, 3.0], 10) + gaussian(90, 400, 1.0 / 400.0, 11);
    let wide = eoptshrink(&data(x.clone()), 10, false).unwrap();
    let tall = eoptshrink(&data(x.transpose()), 10, false).unwrap();
    assert!(tall.transposed && !wide.transposed);
    assert_eq!(tall.effective_rank, wide.effective_rank);
    assert_eq!(tall.denoised.rows(), 400);
    assert!(
        rel_frobenius(
            &tall.denoised.as_matrix().transpose(),
            wide.denoised.as_matrix()
        ) < 1e-10
    );
}

#[test]
fn centering_ignores_a_common_offset() {
    let x = low_rank(60, 300, &[4.0, 2.5], 12) + gaussian(60, 300, 1.0 / 300.0, 13);
    let offset = DMatrix::from_fn(60, 1, |r, _| 5.0 + r as f64 * 0.1);
    let shifted = DMatrix::from_fn(60, 300, |r, c| x[(r, c)] + offset[(r, 0)]);
    let a = eoptshrink(&data(x), 10, true).unwrap();
    let b = eoptshrink(&data(shifted), 10, true).unwrap();
    assert_eq!(a.effective_rank, b.effective_rank);
    let back = DMatrix::from_fn(60, 300, |r, c| {
        b.denoised.as_matrix()[(r, c)] - offset[(r, 0)]
    });
    assert!(rel_frobenius(&back, a.denoised.as_matrix()) < 1e-8);
}

#[test]
fn rank_at_imputation_count_raises_it() {
    let values: Vec<f64> = (0..4).map(|i| 20.0 - 3.0 * i as f64).collect();
    let x = low_rank(80, 300, &values, 14) + gaussian(80, 300, 1.0 / 300.0, 15);
    let out = eoptshrink(&data(x), 3, false).unwrap();
    assert_eq!(out.effective_rank, 4);
    assert_eq!(out.imputation_count, 9);
    assert!(out.warnings.iter().any(|w| matches!(
        w,
        shrinkage::ShrinkWarning::ImputationCountRaised { from: 3, to: 9 }
    )));
}

#[test]
fn pure_noise_shrinks_to_zero_with_warning() {
    let out = eoptshrink(&data(gaussian(100, 500, 1.0 / 500.0, 16)), 10, false).unwrap();
    assert_eq!(out.effective_rank, 0);
    assert!(out.denoised.as_matrix().iter().all(|&v| v == 0.0));
    assert!(out
        .warnings
        .iter()
        .any(|w| matches!(w, shrinkage::ShrinkWarning::ZeroEffectiveRank)));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn estimate_is_finite_and_never_larger(seed in 0u64..10_000, spike in 0.5f64..8.0) {
        let x = low_rank(40, 160, &[spike], seed) + gaussian(40, 160, 1.0 / 160.0, seed + 1);
        let out = eoptshrink(&data(x.clone()), 5, false).unwrap();
        prop_assert!(out.denoised.as_matrix().iter().all(|v| v.is_finite()));
        prop_assert!(out.effective_rank <= out.spectrum.len());
        prop_assert!(out.denoised.as_matrix().norm() <= x.norm() + 1e-9);
        for (&i, &d) in out.kept.iter().zip(&out.shrunk) {
            prop_assert!(d > 0.0 && d < out.spectrum[i].sqrt());
        }
    }
}
