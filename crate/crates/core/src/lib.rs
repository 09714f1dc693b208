//! Manifold denoising for samples corrupted by high-dimensional noise with
//! separable covariance.
//!
//! The denoiser ([`pipeline::rosdos`]) finds candidate neighbors with a
//! noise-robust global metric (landmark diffusion distance or globally
//! shrunk coordinates), refines them with optimal singular-value shrinkage
//! on each neighborhood ([`shrinkage::eoptshrink`]), and recovers every
//! point as the entrywise median of its nearest refined neighbors.
//!
//! [`synth`] generates the synthetic benchmark manifolds and noise models
//! and [`eval`] scores reconstructions.

// `!(x > 0.0)` style guards are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod diffusion;
pub mod error;
pub mod eval;
pub mod io;
pub mod numerics;
pub mod pipeline;
pub mod shrinkage;
pub mod synth;

pub use error::{Error, Result};
pub use numerics::DataMatrix;
pub use pipeline::{rosdos, GlobalMode, PipelineConfig};
pub use shrinkage::{eoptshrink, ShrinkageOutput};
