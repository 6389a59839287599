//! Re-solving a frozen sequence of Hessian systems under a recycling strategy.

use serde::Serialize;

use recycle_core::bilevel::{
    backtracking_linesearch, HessianSequence, StopKind, HessianSolveConfig, LinesearchParams, UpperEvaluator, UpperState,
};
use recycle_core::krylov::{StopReason, DEFAULT_MAX_ITER};
use recycle_core::operators::{foe_hessian, mixed_jacobian, AdjointJacobian, FoeHessian, MixedJacobian};
use recycle_core::recycling::StrategyDescriptor;
use recycle_core::vector::norm;

use crate::error::Result;
use crate::problem::StopChoice;
use crate::record::SequenceRecord;

#[derive(Debug, Clone, Copy)]
pub struct ReplayConfig {
    pub strategy: StrategyDescriptor,
    pub recycle_dim: usize,
    pub stop: StopChoice,
    pub delta: f64,
    pub max_iter: usize,
    pub warm_start: bool,
    /// Run one backtracking linesearch per system along the replayed hypergradient.
    pub one_step: bool,
    pub linesearch: LinesearchParams,
}

impl ReplayConfig {
    /// Stop rule follows the strategy's `-NSC` flag.
    pub fn new(strategy: StrategyDescriptor, recycle_dim: usize, delta: f64) -> Self {
        Self {
            strategy,
            recycle_dim,
            stop: if strategy.nsc { StopChoice::Nsc } else { StopChoice::Residual },
            delta,
            max_iter: DEFAULT_MAX_ITER,
            warm_start: false,
            one_step: false,
            linesearch: LinesearchParams::default(),
        }
    }

    pub fn with_stop(mut self, stop: StopChoice) -> Self {
        self.stop = stop;
        self
    }

    pub fn with_one_step(mut self, one_step: bool) -> Self {
        self.one_step = one_step;
        self
    }

    pub fn with_max_iter(mut self, max_iter: usize) -> Self {
        self.max_iter = max_iter;
        self
    }

    pub fn with_warm_start(mut self, warm_start: bool) -> Self {
        self.warm_start = warm_start;
        self
    }

    fn solve_config(&self) -> HessianSolveConfig {
        HessianSolveConfig::new(self.strategy, self.recycle_dim, self.delta)
            .with_stop(self.stop.kind())
            .with_max_iter(self.max_iter)
            .with_warm_start(self.warm_start)
    }
}

/// One CSV row per replayed system.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReplayRow {
    pub strategy: String,
    pub stop: String,
    pub recycle_dim: usize,
    pub system: usize,
    pub iterations: usize,
    pub cumulative_iterations: usize,
    pub flops: u64,
    pub cumulative_flops: u64,
    pub recycle_size: usize,
    /// Rule actually applied (`nsc` falls back to `res` without a recycle space).
    pub stop_used: String,
    pub stop_reason: String,
    pub final_stop_value: f64,
    pub final_residual: f64,
    /// Set when the solve ended without meeting its tolerance.
    pub flagged: bool,
    pub hg_rel_error: Option<f64>,
    pub one_step_cost: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct ReplayReport {
    pub rows: Vec<ReplayRow>,
    /// Recycle-space warnings, one line per event.
    pub warnings: Vec<String>,
    /// Replayed solutions `w^(i)`.
    pub solutions: Vec<Vec<f64>>,
}

impl ReplayReport {
    pub fn total_iterations(&self) -> usize {
        self.rows.last().map_or(0, |r| r.cumulative_iterations)
    }

    pub fn total_flops(&self) -> u64 {
        self.rows.last().map_or(0, |r| r.cumulative_flops)
    }

    pub fn iterations(&self) -> Vec<usize> {
        self.rows.iter().map(|r| r.iterations).collect()
    }

    pub fn max_hg_error(&self) -> Option<f64> {
        self.hg_errors().map(|v| v.into_iter().fold(0.0, f64::max))
    }

    pub fn mean_hg_error(&self) -> Option<f64> {
        self.hg_errors()
            .map(|v| if v.is_empty() { 0.0 } else { v.iter().sum::<f64>() / v.len() as f64 })
    }

    fn hg_errors(&self) -> Option<Vec<f64>> {
        self.rows.iter().map(|r| r.hg_rel_error).collect()
    }

    pub fn one_step_costs(&self) -> Option<Vec<f64>> {
        self.rows.iter().map(|r| r.one_step_cost).collect()
    }
}

/// `||a - b|| / ||a||`, or the absolute difference when `a = 0`.
pub fn relative_error(reference: &[f64], approx: &[f64]) -> f64 {
    let diff: Vec<f64> = reference.iter().zip(approx).map(|(a, b)| a - b).collect();
    let scale = norm(reference);
    if scale > 0.0 {
        norm(&diff) / scale
    } else {
        norm(&diff)
    }
}

pub fn replay(seq: &SequenceRecord, cfg: &ReplayConfig) -> Result<ReplayReport> {
    let mut solver: HessianSequence<FoeHessian, MixedJacobian> = HessianSequence::new(cfg.solve_config());
    let eval = UpperEvaluator::new(&seq.problem, seq.lower_options())?;
    let label = cfg.strategy.to_string();
    let mut rows = Vec::with_capacity(seq.len());
    let mut warnings = Vec::new();
    let mut solutions = Vec::with_capacity(seq.len());
    let (mut cum_its, mut cum_flops) = (0usize, 0u64);
    for (i, sys) in seq.systems.iter().enumerate() {
        let theta = seq.params(&sys.theta)?;
        let h = foe_hessian(&theta, &seq.problem);
        let j = mixed_jacobian(&theta, &sys.x_hat, &seq.problem)?;
        let solve = solver.solve(h, j, &sys.rhs)?;
        let (_, j) = solver.last_operators().expect("just solved");
        let hg = j.apply_alloc(&solve.result.solution);
        let res = &solve.result;
        cum_its += res.iterations;
        cum_flops += res.flops;
        warnings.extend(solve.warnings.iter().map(|w| format!("system {i}: {w:?}")));
        let hg_rel_error = sys.hg_ref.as_ref().map(|r| relative_error(r, &hg));
        let one_step_cost = if cfg.one_step {
            let state = UpperState {
                theta,
                x_hat: sys.x_hat.clone(),
                cost: sys.upper_cost,
                hypergradient: hg,
                stepsize: sys.stepsize,
            };
            Some(backtracking_linesearch(&eval, &state, &cfg.linesearch)?.cost)
        } else {
            None
        };
        let final_stop_value = res.final_stop_value();
        rows.push(ReplayRow {
            strategy: label.clone(),
            stop: cfg.stop.label().into(),
            recycle_dim: cfg.recycle_dim,
            system: i,
            iterations: res.iterations,
            cumulative_iterations: cum_its,
            flops: res.flops,
            cumulative_flops: cum_flops,
            recycle_size: solve.recycle_size,
            stop_used: stop_label(solve.stop_used).into(),
            stop_reason: res.stop_reason.as_str().into(),
            final_stop_value,
            final_residual: res.final_residual_norm(),
            flagged: res.stop_reason != StopReason::Tolerance || final_stop_value >= cfg.delta || final_stop_value.is_nan(),
            hg_rel_error,
            one_step_cost,
        });
        solutions.push(solve.result.solution);
    }
    Ok(ReplayReport {
        rows,
        warnings,
        solutions,
    })
}

fn stop_label(kind: StopKind) -> &'static str {
    match kind {
        StopKind::Residual => "res",
        StopKind::Nsc => "nsc",
        StopKind::TrueHgError => "true-hg",
    }
}
