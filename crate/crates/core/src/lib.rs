//! Core planning engine for predictive waste collection.
//!
//! The crate is organised along the planning pipeline:
//!
//! * [`model`] holds the shared domain types (containers, vehicles, cost
//!   matrices, routes and solutions, fill histories and forecasts).
//! * [`costmatrix`] builds or loads the asymmetric distance/duration matrices.
//! * [`forecast`] reconstructs daily fill rates from sparse collection events
//!   and predicts future fill levels with linear, Gaussian-process or
//!   support-vector regressors.
//! * [`selection`] turns forecasts into mandatory / optional / excluded sets.
//! * [`router`] solves the heterogeneous, site-dependent routing problem with
//!   a ruin-and-recreate (1+1) evolutionary algorithm and carries a
//!   brute-force oracle for small instances.
//! * [`io`] reads and writes the comma-delimited file formats.
//! * [`synth`] generates reproducible synthetic case-study instances.

// `!(x > 0.0)` is used on purpose so that NaN fails validation.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod costmatrix;
pub mod error;
pub mod forecast;
pub mod io;
pub mod model;
pub mod router;
pub mod selection;
pub mod synth;

pub use error::{Error, Result};
