//! Stochastic earned-value project control.
//!
//! Monte Carlo realizations of a stochastic project are pivoted at fixed
//! earned-value levels into `(t, c)` point clouds. Those clouds feed a kernel
//! density anomaly score, over-run classifiers and additive regression models
//! of the final cost and duration, which are combined into EVM-style control
//! reports.

#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::type_complexity, clippy::len_without_is_empty)]

pub mod curve;
pub mod dataset;
pub mod error;
pub mod classify;
pub mod exec;
pub mod gam;
pub mod geometry;
pub mod kde;
pub mod linalg;
pub mod optimize;
pub mod pipeline;
pub mod project;
pub mod selection;
pub mod simulation;
pub mod stats;

pub use error::{Error, ErrorKind, Result};
pub use exec::Execution;
