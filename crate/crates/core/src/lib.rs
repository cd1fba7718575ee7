//! Nearest-neighbour goodness-of-fit testing for the multivariate generalised
//! Gaussian (MGGD) family with unknown location, scatter and shape.
//!
//! The pipeline: robustly fit `(μ̂, Σ̂, β̂)`, whiten the data, draw a reference
//! sample from `MGGD(0, I, β̂)`, count how many reference points have a
//! reference point as their nearest neighbour in the pooled cloud, and
//! calibrate that count with a parametric bootstrap that refits in every
//! replicate.

// `!(x > 0.0)` guards deliberately reject NaN as well.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod compare;
pub mod data;
pub mod error;
pub mod energy;
pub mod estimation;
pub mod gamma;
pub mod gof;
pub mod kdtree;
pub mod matrix;
pub mod mggd;
pub mod nn;
pub mod rng;
pub mod sample;
pub mod sim;
pub mod stats;
pub mod tolerances;

pub use error::{GofError, Result};
pub use matrix::{ConditionReport, SpdMatrix, WhiteningMap};
pub use mggd::{MggdParams, RadialLaw, ShapeParam};
pub use sample::Sample;
