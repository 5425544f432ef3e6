//! Multiple-model reference adaptive control with blending.
//!
//! The plant `ẋ_p = A_p x_p + B_p u` is unknown but lies in the convex hull
//! of known corner models. The controller identifies convex weights online
//! and blends per-corner matching gains so that `x_p` tracks a reference
//! model `ẋ_r = A_r x_r + B_r r`.
//!
//! - [`matpoly`]: corner sets, matching conditions and polytope refinement.
//! - [`identifier`]: filters, normalized errors and the projected weight law.
//! - [`controller`]: blended gains, reference model, Lyapunov tools, baseline MRAC.
//! - [`simulator`]: fixed-step closed-loop runs, metrics and comparisons.
//! - [`scenario`]: the plain-text scenario file format.

// Negated comparisons are used so NaN fails validation.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod controller;
pub mod error;
pub mod linalg;
pub mod lp;
pub mod identifier;
pub mod matpoly;
pub mod scenario;
pub mod simulator;

pub use error::{Error, Result};
pub use nalgebra;
