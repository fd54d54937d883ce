//! Chopthin resampling for sequential Monte Carlo.
//!
//! The crate provides:
//!
//! - [`chopthin()`](chopthin::chopthin): bounded weight-ratio resampling with
//!   an expected-linear-time threshold search;
//! - six baseline schemes in [`resample`] (multinomial, systematic,
//!   stratified, residual, residual-stratified, branching);
//! - a bootstrap particle filter ([`filter`]) generic over Gaussian AR(1)
//!   state-space models, with the two benchmark models and their reference
//!   posteriors in [`models`];
//! - seeded experiment drivers in [`experiments`] and a command-line front
//!   end in [`cli`].
//!
//! Ancestor indices are 0-based throughout the library.

// `!(x > 0.0)` style checks are used on purpose so NaN is rejected
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod chopthin;
pub mod cli;
pub mod error;
pub mod experiments;
pub mod filter;
pub mod models;
pub mod resample;
pub mod weights;

pub use crate::chopthin::{chopthin, solve_a, HParams, ResampleResult};
pub use crate::error::{Error, Result};
pub use crate::filter::{pf_run, PfConfig, PfOutput};
pub use crate::models::{Model, StateSpaceModel};
pub use crate::resample::{baseline_resample, resample, SchemeId};
pub use crate::weights::WeightVector;
