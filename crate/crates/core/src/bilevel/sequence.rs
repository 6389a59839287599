use alloc::vec::Vec;
use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::krylov::{minres, rminres, SolveOptions, SolveResult, DEFAULT_MAX_ITER};
use crate::operators::{foe_hessian, mixed_jacobian, AdjointJacobian, FoeHessian, FoeParams, InpaintingProblem, MixedJacobian, SymmetricOperator};
use crate::recycling::{next_recycle, PreviousSolve, RecycleInputs, RecycleSpace, StrategyDescriptor, Warning};
use crate::stopping::{StopRule, TrueHgError, DEFAULT_DELTA};

/// Which quantity the Hessian solves are stopped on.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StopKind {
    Residual,
    /// Projected hypergradient-error estimate; needs a GSVD-based strategy and
    /// falls back to the residual rule while no recycle space exists.
    Nsc,
    /// Exact `||J H^{-1} r||`, for experiments only.
    TrueHgError,
}

#[derive(Debug, Clone, Copy)]
pub struct HessianSolveConfig {
    pub strategy: StrategyDescriptor,
    pub recycle_dim: usize,
    pub stop: StopKind,
    pub delta: f64,
    pub max_iter: usize,
    /// Start each solve from the previous solution instead of zero.
    pub warm_start: bool,
    /// Tolerance of the nested solve behind `StopKind::TrueHgError` when the
    /// Hessian is too large to factor.
    pub oracle_tol: f64,
}

impl HessianSolveConfig {
    /// The stop kind follows the strategy's `-NSC` flag.
    pub fn new(strategy: StrategyDescriptor, recycle_dim: usize, delta: f64) -> Self {
        Self {
            strategy,
            recycle_dim,
            stop: if strategy.nsc { StopKind::Nsc } else { StopKind::Residual },
            delta,
            max_iter: DEFAULT_MAX_ITER,
            warm_start: false,
            oracle_tol: 1e-12,
        }
    }

    pub fn with_stop(mut self, stop: StopKind) -> Self {
        self.stop = stop;
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
}

impl Default for HessianSolveConfig {
    fn default() -> Self {
        Self::new(StrategyDescriptor::NONE, 0, DEFAULT_DELTA)
    }
}

#[derive(Debug, Clone)]
pub struct HessianSolve {
    /// The solve's result; its basis is kept by the sequence instead.
    pub result: SolveResult,
    pub recycle_size: usize,
    /// Stop rule actually used, after any fallback.
    pub stop_used: StopKind,
    pub warnings: Vec<Warning>,
}

struct Previous<H, J> {
    hessian: H,
    jacobian: J,
    basis: Option<DMatrix<f64>>,
    recycle: RecycleSpace,
    solution: Vec<f64>,
}

/// Solves `H^(i) w = g^(i)` for consecutive systems, carrying what the next
/// recycle space is built from.
pub struct HessianSequence<H, J> {
    config: HessianSolveConfig,
    solved: usize,
    previous: Option<Previous<H, J>>,
}

impl<H: SymmetricOperator, J: AdjointJacobian> HessianSequence<H, J> {
    pub fn new(config: HessianSolveConfig) -> Self {
        Self {
            config,
            solved: 0,
            previous: None,
        }
    }

    pub fn config(&self) -> &HessianSolveConfig {
        &self.config
    }

    /// Number of systems solved so far.
    pub fn solved(&self) -> usize {
        self.solved
    }

    pub fn reset(&mut self) {
        self.solved = 0;
        self.previous = None;
    }

    /// Operators of the most recent system.
    pub fn last_operators(&self) -> Option<(&H, &J)> {
        self.previous.as_ref().map(|p| (&p.hessian, &p.jacobian))
    }

    pub fn last_recycle(&self) -> Option<&RecycleSpace> {
        self.previous.as_ref().map(|p| &p.recycle)
    }

    pub fn last_basis(&self) -> Option<&DMatrix<f64>> {
        self.previous.as_ref().and_then(|p| p.basis.as_ref())
    }

    pub fn solve(&mut self, hessian: H, jacobian: J, rhs: &[f64]) -> Result<HessianSolve> {
        let cfg = self.config;
        let n = hessian.dim();
        if jacobian.cols() != n {
            return Err(Error::shape("Jacobian columns", n, jacobian.cols()));
        }
        let previous = self.previous.as_ref().map(|p| PreviousSolve {
            basis: p.basis.as_ref(),
            recycle: Some(&p.recycle),
            hessian: &p.hessian,
            jacobian: &p.jacobian,
            index: self.solved - 1,
        });
        let recycle = next_recycle(&RecycleInputs {
            strategy: cfg.strategy,
            size: cfg.recycle_dim,
            previous,
            hessian: &hessian,
            jacobian: &jacobian,
        })?;

        let oracle;
        let (rule, stop_used) = match (cfg.stop, recycle.nsc.as_ref()) {
            (StopKind::Residual, _) | (StopKind::Nsc, None) => (StopRule::residual(cfg.delta), StopKind::Residual),
            (StopKind::Nsc, Some(data)) => (StopRule::nsc(cfg.delta, Some(data))?, StopKind::Nsc),
            (StopKind::TrueHgError, _) => {
                oracle = TrueHgError::new(&hessian, &jacobian, cfg.oracle_tol)?;
                (
                    StopRule::TrueHgError {
                        delta: cfg.delta,
                        oracle: &oracle,
                    },
                    StopKind::TrueHgError,
                )
            }
        };
        let mut opts = SolveOptions::new(rule).with_basis().with_max_iter(cfg.max_iter);
        if cfg.warm_start {
            if let Some(p) = &self.previous {
                opts = opts.with_initial_guess(&p.solution);
            }
        }
        let mut result = if recycle.is_empty() {
            minres(&hessian, rhs, &opts)?
        } else {
            rminres(&hessian, rhs, &recycle, &opts)?
        };
        let basis = result.basis.take();
        let solve = HessianSolve {
            recycle_size: recycle.size(),
            stop_used,
            warnings: recycle.warnings.clone(),
            result,
        };
        self.previous = Some(Previous {
            hessian,
            jacobian,
            basis,
            recycle,
            solution: solve.result.solution.clone(),
        });
        self.solved += 1;
        Ok(solve)
    }
}

/// `grad F(theta) = J w` with `H w = x^ - x_true`, solved as the next system
/// of `seq`.
pub fn hypergradient(
    theta: &FoeParams,
    x_hat: &[f64],
    prob: &InpaintingProblem,
    seq: &mut HessianSequence<FoeHessian, MixedJacobian>,
) -> Result<(Vec<f64>, HessianSolve)> {
    let x_true = prob
        .x_true()
        .ok_or_else(|| Error::InvalidParameter("hypergradient needs a ground-truth image".into()))?;
    if x_hat.len() != prob.dim() {
        return Err(Error::shape("reconstruction", prob.dim(), x_hat.len()));
    }
    let rhs: Vec<f64> = x_hat.iter().zip(x_true).map(|(a, b)| a - b).collect();
    let h = foe_hessian(theta, prob);
    let j = mixed_jacobian(theta, x_hat, prob)?;
    let solve = seq.solve(h, j, &rhs)?;
    let (_, j) = seq.last_operators().expect("just solved");
    let d = j.apply_alloc(&solve.result.solution);
    Ok((d, solve))
}
