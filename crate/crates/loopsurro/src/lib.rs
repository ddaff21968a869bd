//! Neural surrogates for nonlinear algebraic loops in time-stepped
//! simulations.
//!
//! Time-stepped models often contain algebraic loops: equation blocks that
//! must be solved for unknowns `y` at every step given inputs `x` computed by
//! the preceding equations. This crate trains small feedforward networks to
//! predict those solutions directly, using the loop's own residual
//! `f(x, ŷ)` as the training loss, so no labeled dataset is required. A
//! residual-trained surrogate settles on one valid solution even when the
//! loop admits several, where a supervised network would average them.
//!
//! The pieces:
//!
//! - [`problems`]: the residual-system abstraction and built-in loops.
//! - [`newton`]: the damped Newton baseline and fallback solver.
//! - [`sampling`]: input-space profiling, Sobol / Latin hypercube sampling,
//!   and label generation for supervised baselines.
//! - [`nn`]: dense networks, manual backprop, Adam, LR schedule.
//! - [`training`]: residual / supervised / semi-supervised losses, the
//!   training loop, and convergence monitors.
//! - [`multimodel`]: k-means clustering of the output space, per-cluster and
//!   per-branch surrogate bundles, model switching, PCA diagnostics.
//! - [`simulate`]: hybrid time stepping with error-controlled fallback to
//!   Newton, plus benchmarking and trajectory comparison.

pub mod error;
pub mod io;
pub mod linalg;
pub mod matrix;
pub mod multimodel;
pub mod newton;
pub mod nn;
pub mod problems;
pub mod sampling;
pub mod simulate;
pub mod training;

pub use error::{Error, Result};
pub use matrix::Matrix;
