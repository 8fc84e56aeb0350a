#![allow(clippy::neg_cmp_op_on_partial_ord)]
//! Green functions of the clamped bilaplacian
//! (Δ²u = f in Ω, u = ∂u/∂ν = 0 on ∂Ω).
//!
//! * [`kernels`]: exact half-space and ball kernels in every dimension, plus
//!   the two-sided comparison function `H`.
//! * [`geometry`]: planar test domains, boundary distance, grid masks and
//!   deterministic pair sampling.
//! * [`solver`]: 13-point finite-difference bilaplacian with clamped
//!   boundary and discrete Green columns.
//! * [`analysis`]: empirical checks of the two-sided estimate, local
//!   positivity, blow-up limits and the reflection across a flat boundary.

pub mod analysis;
pub mod error;
pub mod geometry;
pub mod kernels;
pub mod solver;

pub use error::{Error, Result};
pub use geometry::{DomainKind, DomainSpec, PairStrategy, Point2, PointPair};
pub use kernels::{Dimension, HInput};
pub use solver::{GreenSample, GridField, GridOperator};
