//! Recycle-dimension sweeps, strategy comparisons, FLOP tables and the
//! MINRES versus CG baseline.

use serde::Serialize;

use recycle_core::krylov::{cg, flops_minres, flops_rminres, minres, SolveOptions, StopReason};
use recycle_core::operators::{foe_hessian, mixed_jacobian, AdjointJacobian, SymmetricOperator};
use recycle_core::recycling::StrategyDescriptor;
use recycle_core::stopping::StopRule;

use crate::error::Result;
use crate::problem::StopChoice;
use crate::record::SequenceRecord;
use crate::replay::{relative_error, replay, ReplayConfig, ReplayReport};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepRow {
    pub strategy: String,
    pub stop: String,
    pub recycle_dim: usize,
    pub total_iterations: usize,
    pub total_flops: u64,
    pub max_hg_error: Option<f64>,
    pub mean_hg_error: Option<f64>,
}

impl SweepRow {
    pub fn from_report(cfg: &ReplayConfig, report: &ReplayReport) -> Self {
        Self {
            strategy: cfg.strategy.to_string(),
            stop: cfg.stop.label().into(),
            recycle_dim: cfg.recycle_dim,
            total_iterations: report.total_iterations(),
            total_flops: report.total_flops(),
            max_hg_error: report.max_hg_error(),
            mean_hg_error: report.mean_hg_error(),
        }
    }
}

/// Replays `base` once per recycle dimension in `dims`.
pub fn dimension_sweep(seq: &SequenceRecord, base: &ReplayConfig, dims: &[usize]) -> Result<Vec<SweepRow>> {
    dims.iter()
        .map(|&s| {
            let cfg = ReplayConfig {
                recycle_dim: s,
                ..*base
            };
            Ok(SweepRow::from_report(&cfg, &replay(seq, &cfg)?))
        })
        .collect()
}

/// Replays every strategy with otherwise identical settings.
pub fn compare(
    seq: &SequenceRecord,
    base: &ReplayConfig,
    strategies: &[(StrategyDescriptor, StopChoice)],
) -> Result<Vec<ReplayReport>> {
    strategies
        .iter()
        .map(|&(strategy, stop)| {
            let cfg = ReplayConfig {
                strategy,
                stop,
                ..*base
            };
            replay(seq, &cfg)
        })
        .collect()
}

/// Closed-form cost of one solve. Systems without a recycle space are solved
/// by plain MINRES.
pub fn closed_form_flops(iterations: usize, n: usize, recycle_size: usize, h_cost: u64) -> Result<u64> {
    let (k, n, s, h) = (iterations as i64, n as i64, recycle_size as i64, h_cost as i64);
    Ok(if recycle_size == 0 {
        flops_minres(k, n, h)?
    } else {
        flops_rminres(k, n, s, h)?
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FlopsRow {
    pub strategy: String,
    pub system: usize,
    pub iterations: usize,
    pub recycle_size: usize,
    pub counted: u64,
    pub closed_form: u64,
}

/// Counted FLOPs of a replay next to the closed forms.
pub fn flops_table(seq: &SequenceRecord, report: &ReplayReport) -> Result<Vec<FlopsRow>> {
    let n = seq.dim();
    seq.systems
        .iter()
        .zip(&report.rows)
        .map(|(sys, row)| {
            let h = foe_hessian(&seq.params(&sys.theta)?, &seq.problem);
            Ok(FlopsRow {
                strategy: row.strategy.clone(),
                system: row.system,
                iterations: row.iterations,
                recycle_size: row.recycle_size,
                counted: row.flops,
                closed_form: closed_form_flops(row.iterations, n, row.recycle_size, h.apply_cost())?,
            })
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BaselineSolver {
    Minres,
    Cg,
}

impl BaselineSolver {
    pub fn label(self) -> &'static str {
        match self {
            BaselineSolver::Minres => "minres",
            BaselineSolver::Cg => "cg",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BaselineRow {
    pub solver: String,
    pub start: String,
    pub system: usize,
    pub iterations: usize,
    pub cumulative_iterations: usize,
    pub final_residual: f64,
    pub converged: bool,
    pub hg_rel_error: Option<f64>,
}

/// MINRES and CG over the sequence without recycling, each started cold
/// (from zero) and warm (from its own previous solution).
pub fn cg_vs_minres(seq: &SequenceRecord, delta: f64, max_iter: usize) -> Result<Vec<BaselineRow>> {
    let mut rows = Vec::new();
    for solver in [BaselineSolver::Minres, BaselineSolver::Cg] {
        for warm in [false, true] {
            let mut previous: Option<Vec<f64>> = None;
            let mut cumulative = 0;
            for (i, sys) in seq.systems.iter().enumerate() {
                let theta = seq.params(&sys.theta)?;
                let h = foe_hessian(&theta, &seq.problem);
                let mut opts = SolveOptions::new(StopRule::residual(delta)).with_max_iter(max_iter);
                if let (true, Some(w0)) = (warm, previous.as_deref()) {
                    opts = opts.with_initial_guess(w0);
                }
                let res = match solver {
                    BaselineSolver::Minres => minres(&h, &sys.rhs, &opts)?,
                    BaselineSolver::Cg => cg(&h, &sys.rhs, &opts)?,
                };
                cumulative += res.iterations;
                let hg_rel_error = match &sys.hg_ref {
                    Some(r) => {
                        let j = mixed_jacobian(&theta, &sys.x_hat, &seq.problem)?;
                        Some(relative_error(r, &j.apply_alloc(&res.solution)))
                    }
                    None => None,
                };
                rows.push(BaselineRow {
                    solver: solver.label().into(),
                    start: if warm { "warm" } else { "cold" }.into(),
                    system: i,
                    iterations: res.iterations,
                    cumulative_iterations: cumulative,
                    final_residual: res.final_residual_norm(),
                    converged: res.stop_reason == StopReason::Tolerance,
                    hg_rel_error,
                });
                previous = Some(res.solution);
            }
        }
    }
    Ok(rows)
}
