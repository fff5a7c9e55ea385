//! Command-line driver for EP trajectory runs: configuration, the
//! crossing-to-oracle pipeline, SVG figures and run summaries.

// `!(x > 0.0)` rejects NaN along with non-positive values.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod config;
pub mod pipeline;
pub mod report;
pub mod svg;
