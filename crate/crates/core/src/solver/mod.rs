//! Finite-difference gradient over the narrow band and the regularised global least-squares solve.

mod cg;
mod gradient;

pub use cg::{
    solve, GlobalSystem, Preconditioner, Solution, SolveOptions, SolveReport, DEFAULT_LAMBDA, DEFAULT_MAX_ITERS,
    DEFAULT_TOLERANCE,
};
pub use gradient::{build_gradient, GradientOperator, GradientRow, RowKind};
