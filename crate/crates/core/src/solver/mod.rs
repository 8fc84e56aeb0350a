//! Finite-difference clamped bilaplacian on planar grid masks and discrete
//! Green columns.

mod convergence;
mod green;
mod operator;

pub use convergence::{convergence_study, ConvergenceMode, ConvergenceRow, ConvergenceTable};
pub use green::{
    discrete_green, evaluate_pairs, green_value, point_source, GreenSample, GridField, MIN_INTERIOR_NODES,
};
pub use operator::{assemble_bilaplacian, GridOperator, Solution, SolveMethod, SolveOptions};
