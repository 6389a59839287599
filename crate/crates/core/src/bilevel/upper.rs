use alloc::vec::Vec;
use core::cell::Cell;

use crate::error::{Error, Result};
use crate::operators::{FoeHessian, FoeParams, InpaintingProblem, MixedJacobian};
use crate::vector::{axpy, dot, norm};

use super::lower::{lower_solve, LbfgsResult, LowerOptions};
use super::sequence::{hypergradient, HessianSequence, HessianSolve};

fn half_sq_dist(x: &[f64], y: &[f64]) -> f64 {
    0.5 * x.iter().zip(y).map(|(a, b)| (a - b) * (a - b)).sum::<f64>()
}

fn ground_truth(prob: &InpaintingProblem) -> Result<&[f64]> {
    prob.x_true()
        .ok_or_else(|| Error::InvalidParameter("upper-level cost needs a ground-truth image".into()))
}

/// `F(theta) = 1/2 ||x^(theta) - x_true||^2`, with the reconstruction
/// computed from `x_init`.
pub fn upper_cost(
    theta: &FoeParams,
    prob: &InpaintingProblem,
    x_init: &[f64],
    lower: &LowerOptions,
) -> Result<(f64, LbfgsResult)> {
    let x_true = ground_truth(prob)?;
    let rec = lower_solve(theta, prob, x_init, lower)?;
    Ok((half_sq_dist(&rec.x, x_true), rec))
}

/// Upper-level cost with call counting.
pub struct UpperEvaluator<'a> {
    prob: &'a InpaintingProblem,
    lower: LowerOptions,
    calls: Cell<usize>,
    lower_iterations: Cell<usize>,
}

impl<'a> UpperEvaluator<'a> {
    pub fn new(prob: &'a InpaintingProblem, lower: LowerOptions) -> Result<Self> {
        ground_truth(prob)?;
        Ok(Self {
            prob,
            lower,
            calls: Cell::new(0),
            lower_iterations: Cell::new(0),
        })
    }

    pub fn problem(&self) -> &'a InpaintingProblem {
        self.prob
    }

    pub fn lower_options(&self) -> &LowerOptions {
        &self.lower
    }

    pub fn cost(&self, theta: &FoeParams, x_init: &[f64]) -> Result<(f64, LbfgsResult)> {
        self.calls.set(self.calls.get() + 1);
        let out = upper_cost(theta, self.prob, x_init, &self.lower)?;
        self.lower_iterations.set(self.lower_iterations.get() + out.1.iterations);
        Ok(out)
    }

    /// Number of upper-cost evaluations so far.
    pub fn calls(&self) -> usize {
        self.calls.get()
    }

    /// Total L-BFGS iterations spent in those evaluations.
    pub fn lower_iterations(&self) -> usize {
        self.lower_iterations.get()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinesearchParams {
    /// Initial stepsize of the first linesearch.
    pub beta: f64,
    pub rho: f64,
    pub eta: f64,
    pub max_backtracks: usize,
}

impl Default for LinesearchParams {
    fn default() -> Self {
        Self {
            beta: 1.0,
            rho: 0.5,
            eta: 1e-4,
            max_backtracks: 30,
        }
    }
}

impl LinesearchParams {
    fn validate(&self) -> Result<()> {
        let ok = self.beta > 0.0
            && self.beta.is_finite()
            && self.rho > 0.0
            && self.rho < 1.0
            && self.eta > 0.0
            && self.eta < 1.0
            && self.max_backtracks > 0;
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidParameter(alloc::format!("invalid linesearch parameters {self:?}")))
        }
    }
}

/// Current upper iterate with its hypergradient.
#[derive(Debug, Clone)]
pub struct UpperState {
    pub theta: FoeParams,
    pub x_hat: Vec<f64>,
    pub cost: f64,
    pub hypergradient: Vec<f64>,
    /// Initial stepsize for the next linesearch.
    pub stepsize: f64,
}

#[derive(Debug, Clone)]
pub struct LinesearchOutcome {
    pub theta: FoeParams,
    pub x_hat: Vec<f64>,
    pub cost: f64,
    /// Accepted step `beta rho^(j-1)`.
    pub step: f64,
    /// `2 beta rho^(j-1)`.
    pub next_stepsize: f64,
    pub trials: usize,
    /// False when the backtrack limit was hit; the smallest step is returned.
    pub satisfied: bool,
}

/// Backtracking along `-d` with `d = state.hypergradient`, starting from
/// `state.stepsize`. Accepts the first `j` with
/// `F(theta - beta rho^(j-1) d) <= F(theta) - eta rho^(j-1) ||d||^2`.
/// Each trial reconstruction is warm-started from the previous trial.
pub fn backtracking_linesearch(
    eval: &UpperEvaluator<'_>,
    state: &UpperState,
    params: &LinesearchParams,
) -> Result<LinesearchOutcome> {
    params.validate()?;
    let d = &state.hypergradient;
    if d.len() != state.theta.len() {
        return Err(Error::shape("search direction", state.theta.len(), d.len()));
    }
    let base = state.theta.flatten();
    let c1 = state.cost;
    let c2 = dot(d, d);
    let mut x_prev = state.x_hat.clone();
    let mut factor = 1.0;
    let mut last = None;
    for j in 1..=params.max_backtracks {
        let step = state.stepsize * factor;
        let mut values = base.clone();
        axpy(-step, d, &mut values);
        let theta = state.theta.with_values(&values)?;
        let (c0, rec) = eval.cost(&theta, &x_prev)?;
        let satisfied = c0 <= c1 - params.eta * factor * c2;
        let outcome = LinesearchOutcome {
            theta,
            x_hat: rec.x,
            cost: c0,
            step,
            next_stepsize: 2.0 * step,
            trials: j,
            satisfied,
        };
        if satisfied {
            return Ok(outcome);
        }
        x_prev = outcome.x_hat.clone();
        last = Some(outcome);
        factor *= params.rho;
    }
    Ok(last.expect("at least one trial"))
}

#[derive(Debug, Clone, Copy)]
pub struct DescentOptions {
    /// Stop once `||grad F|| < eps_stop`.
    pub eps_stop: f64,
    pub max_iters: usize,
    pub linesearch: LinesearchParams,
}

impl Default for DescentOptions {
    fn default() -> Self {
        Self {
            eps_stop: 1e-6,
            max_iters: 25,
            linesearch: LinesearchParams::default(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct UpperIterate {
    pub theta: FoeParams,
    pub x_hat: Vec<f64>,
    pub cost: f64,
    pub hypergradient: Vec<f64>,
    pub grad_norm: f64,
    pub solve: HessianSolve,
    /// Initial stepsize `beta^(i)` handed to the linesearch.
    pub stepsize: f64,
    /// `None` on the final, converged iterate.
    pub linesearch: Option<LinesearchSummary>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinesearchSummary {
    pub step: f64,
    pub trials: usize,
    pub satisfied: bool,
}

#[derive(Debug, Clone)]
pub struct DescentTrace {
    pub iterates: Vec<UpperIterate>,
    pub theta: FoeParams,
    pub x_hat: Vec<f64>,
    pub cost: f64,
    pub converged: bool,
}

impl DescentTrace {
    pub fn total_inner_iterations(&self) -> usize {
        self.iterates.iter().map(|it| it.solve.result.iterations).sum()
    }
}

/// Gradient descent with backtracking. Every iteration solves one Hessian
/// system through `seq`; the upper cost of an accepted step is reused.
pub fn gradient_descent(
    eval: &UpperEvaluator<'_>,
    theta0: &FoeParams,
    x0: &[f64],
    seq: &mut HessianSequence<FoeHessian, MixedJacobian>,
    opts: &DescentOptions,
) -> Result<DescentTrace> {
    if !(opts.eps_stop > 0.0) {
        return Err(Error::InvalidParameter("eps_stop must be positive".into()));
    }
    opts.linesearch.validate()?;
    let prob = eval.problem();
    let (mut cost, rec) = eval.cost(theta0, x0)?;
    let mut theta = theta0.clone();
    let mut x = rec.x;
    let mut beta = opts.linesearch.beta;
    let mut iterates = Vec::new();
    let mut converged = false;
    for _ in 0..opts.max_iters {
        let (d, solve) = hypergradient(&theta, &x, prob, seq)?;
        let grad_norm = norm(&d);
        let mut it = UpperIterate {
            theta: theta.clone(),
            x_hat: x.clone(),
            cost,
            hypergradient: d,
            grad_norm,
            solve,
            stepsize: beta,
            linesearch: None,
        };
        if grad_norm < opts.eps_stop {
            iterates.push(it);
            converged = true;
            break;
        }
        let state = UpperState {
            theta: theta.clone(),
            x_hat: x.clone(),
            cost,
            hypergradient: it.hypergradient.clone(),
            stepsize: beta,
        };
        let ls = backtracking_linesearch(eval, &state, &opts.linesearch)?;
        it.linesearch = Some(LinesearchSummary {
            step: ls.step,
            trials: ls.trials,
            satisfied: ls.satisfied,
        });
        iterates.push(it);
        theta = ls.theta;
        x = ls.x_hat;
        cost = ls.cost;
        beta = ls.next_stepsize;
    }
    Ok(DescentTrace {
        iterates,
        theta,
        x_hat: x,
        cost,
        converged,
    })
}
