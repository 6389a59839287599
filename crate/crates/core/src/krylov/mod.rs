//! Krylov solvers for symmetric systems: MINRES, CG and recycling MINRES.

mod cg;
mod flops;
mod minres;

pub use cg::cg;
pub use flops::{flops_minres, flops_rminres};
pub use minres::{minres, minres_observed, rminres, rminres_observed, IterationView, TridiagState};

use alloc::vec::Vec;
use nalgebra::DMatrix;

use crate::stopping::StopRule;

/// Default iteration cap for the Hessian solves.
pub const DEFAULT_MAX_ITER: usize = 500;

/// Lucky breakdown when `beta_{k+1} <= BREAKDOWN_TOL * ||g||`.
pub const BREAKDOWN_TOL: f64 = 1e-13;

#[derive(Debug, Clone, Copy)]
pub struct SolveOptions<'a> {
    pub max_iter: usize,
    pub initial_guess: Option<&'a [f64]>,
    pub stop: StopRule<'a>,
    /// Keep the Lanczos vectors `v_1..v_k` (needed by outer recycling).
    pub track_basis: bool,
    /// Maintain `r_k` by recurrence. Switched on automatically for rules that need it.
    pub track_residual_vector: bool,
    /// Full reorthogonalization, for diagnostics only. Not reflected in the FLOP count.
    pub reorthogonalize: bool,
}

impl<'a> SolveOptions<'a> {
    pub fn new(stop: StopRule<'a>) -> Self {
        Self {
            max_iter: DEFAULT_MAX_ITER,
            initial_guess: None,
            stop,
            track_basis: false,
            track_residual_vector: false,
            reorthogonalize: false,
        }
    }

    pub fn with_initial_guess(mut self, w0: &'a [f64]) -> Self {
        self.initial_guess = Some(w0);
        self
    }

    pub fn with_basis(mut self) -> Self {
        self.track_basis = true;
        self
    }

    pub fn with_residual_vector(mut self) -> Self {
        self.track_residual_vector = true;
        self
    }

    pub fn with_max_iter(mut self, max_iter: usize) -> Self {
        self.max_iter = max_iter;
        self
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StopReason {
    Tolerance,
    MaxIter,
    Breakdown,
}

impl StopReason {
    pub fn as_str(&self) -> &'static str {
        match self {
            StopReason::Tolerance => "tolerance",
            StopReason::MaxIter => "max_iter",
            StopReason::Breakdown => "breakdown",
        }
    }
}

#[derive(Debug, Clone)]
pub struct SolveResult {
    pub solution: Vec<f64>,
    pub iterations: usize,
    /// Residual norm after each iteration, starting with the initial one.
    pub residual_norms: Vec<f64>,
    /// Value of the stop rule after each iteration, starting with the initial one.
    pub stop_values: Vec<f64>,
    /// Lanczos vectors `v_1..v_k` as columns.
    pub basis: Option<DMatrix<f64>>,
    /// Final residual vector when tracked.
    pub residual: Option<Vec<f64>>,
    pub flops: u64,
    pub stop_reason: StopReason,
}

impl SolveResult {
    pub fn final_residual_norm(&self) -> f64 {
        *self.residual_norms.last().expect("at least the initial residual")
    }

    pub fn final_stop_value(&self) -> f64 {
        *self.stop_values.last().expect("at least the initial value")
    }
}
