//! Simulation laboratory for class imbalance in weight-of-evidence logistic
//! regression scorecards.
//!
//! The pipeline runs from [`config`] (class-conditional data-generating
//! mechanisms and their information values) through [`datagen`] (seeded
//! samples with exact event counts), [`scorecard`] (WoE estimation and the
//! maximum-likelihood fit) and [`metrics`] (F1, P4, Gini, cut-off search) to
//! [`mc`] (the Monte Carlo grid and quantile summaries). [`curve`] and
//! [`guideline`] turn summaries into attainable-performance tables; [`io`]
//! and [`chart`] handle files.

// `!(x >= lo)` style guards are used on purpose so NaN inputs are rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod chart;
pub mod config;
pub mod curve;
pub mod datagen;
pub mod error;
pub mod guideline;
pub mod io;
pub mod mc;
pub mod metrics;
pub mod scorecard;

pub use error::{Error, Result};
