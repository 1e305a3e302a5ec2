//! Physics-informed neural-network solver for one-dimensional binary-alloy
//! solidification.
//!
//! Three feed-forward networks (temperature in both phases, liquid
//! composition, interface position) plus one trainable scalar (solid
//! composition) are trained against PDE residuals, initial/boundary
//! constraints and a handful of measurement points, alternating causal
//! temporal weighting with gradient-statistics adaptive weighting. A
//! closed-form similarity solution provides measurement labels and the
//! ground truth for error reporting.

pub mod analytic;
pub mod diffcore;
pub mod loss;
pub mod metrics;
pub mod net;
pub mod optim;
pub mod physics;
pub mod train;
