//! Point-in-time fundamental stock selection and asset allocation.

// `!(x > 0.0)` is used on purpose so NaN fails the check.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod calendar;
pub mod cleaner;
pub mod dataset;
pub mod features;
pub mod store;
pub mod model;
pub mod backtest;
pub mod outlook;
pub mod pipeline;
pub mod fixtures;
pub mod synth;
