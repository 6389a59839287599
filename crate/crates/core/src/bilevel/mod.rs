//! Gradient-based bilevel learning: the lower-level reconstruction by
//! L-BFGS, hypergradients through a sequence of Hessian solves, and gradient
//! descent on the upper level with Armijo backtracking.

mod lower;
mod sequence;
mod upper;

pub use lower::{lbfgs, lower_solve, LbfgsResult, LowerOptions};
pub use sequence::{hypergradient, HessianSequence, HessianSolve, HessianSolveConfig, StopKind};
pub use upper::{
    backtracking_linesearch, gradient_descent, upper_cost, DescentOptions, DescentTrace, LinesearchOutcome,
    LinesearchParams, LinesearchSummary, UpperEvaluator, UpperIterate, UpperState,
};
