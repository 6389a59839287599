use alloc::collections::VecDeque;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::operators::{foe_cost, foe_gradient, FoeParams, InpaintingProblem};
use crate::vector::{axpy, dot, norm};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LowerOptions {
    /// Stop once `||grad_x L|| < gtol`.
    pub gtol: f64,
    pub memory: usize,
    pub max_iter: usize,
}

impl Default for LowerOptions {
    fn default() -> Self {
        Self {
            gtol: 1e-3,
            memory: 10,
            max_iter: 5000,
        }
    }
}

#[derive(Debug, Clone)]
pub struct LbfgsResult {
    pub x: Vec<f64>,
    pub value: f64,
    pub grad_norm: f64,
    pub iterations: usize,
    pub evaluations: usize,
}

const ARMIJO_C1: f64 = 1e-4;
const MAX_BACKTRACKS: usize = 60;

/// Minimizes a smooth function with limited-memory BFGS and backtracking.
///
/// `fg` returns the value and gradient. Near the optimum the sufficient
/// decrease test is dominated by rounding in the function values, so a step
/// is also accepted when the value does not grow beyond rounding level and
/// the directional derivative satisfies the approximate Wolfe bound.
pub fn lbfgs<F>(x0: &[f64], opts: &LowerOptions, mut fg: F) -> Result<LbfgsResult>
where
    F: FnMut(&[f64]) -> Result<(f64, Vec<f64>)>,
{
    if !(opts.gtol > 0.0) {
        return Err(Error::InvalidParameter("gtol must be positive".into()));
    }
    let mut x = x0.to_vec();
    let (mut f, mut g) = fg(&x)?;
    let mut evaluations = 1;
    let mut gn = norm(&g);
    let mut pairs: VecDeque<(Vec<f64>, Vec<f64>, f64)> = VecDeque::new();
    let mut iterations = 0;
    while gn >= opts.gtol {
        if iterations == opts.max_iter {
            return Err(Error::LowerSolveStalled {
                iterations,
                grad_norm: gn,
            });
        }
        let mut d = two_loop(&g, &pairs);
        let mut slope = dot(&g, &d);
        if !(slope < 0.0) {
            pairs.clear();
            d = g.iter().map(|v| -v).collect();
            slope = -gn * gn;
        }
        let mut step = if pairs.is_empty() { (1.0 / gn).min(1.0) } else { 1.0 };
        let mut accepted = None;
        for _ in 0..MAX_BACKTRACKS {
            let mut trial = x.clone();
            axpy(step, &d, &mut trial);
            let (ft, gt) = fg(&trial)?;
            evaluations += 1;
            let armijo = ft <= f + ARMIJO_C1 * step * slope;
            let approx_wolfe =
                ft <= f + 4.0 * f64::EPSILON * f.abs() && dot(&gt, &d) <= (2.0 * ARMIJO_C1 - 1.0) * slope;
            if ft.is_finite() && (armijo || approx_wolfe) {
                accepted = Some((trial, ft, gt));
                break;
            }
            step *= 0.5;
        }
        let Some((xn, fnew, gnew)) = accepted else {
            return Err(Error::LowerSolveStalled {
                iterations,
                grad_norm: gn,
            });
        };
        let s: Vec<f64> = xn.iter().zip(&x).map(|(a, b)| a - b).collect();
        let y: Vec<f64> = gnew.iter().zip(&g).map(|(a, b)| a - b).collect();
        let sy = dot(&s, &y);
        if sy > 1e-12 * dot(&s, &s).max(f64::MIN_POSITIVE) {
            if pairs.len() == opts.memory.max(1) {
                pairs.pop_front();
            }
            pairs.push_back((s, y, 1.0 / sy));
        }
        x = xn;
        f = fnew;
        g = gnew;
        gn = norm(&g);
        iterations += 1;
    }
    Ok(LbfgsResult {
        x,
        value: f,
        grad_norm: gn,
        iterations,
        evaluations,
    })
}

/// `-H_k g` by the two-loop recursion.
fn two_loop(g: &[f64], pairs: &VecDeque<(Vec<f64>, Vec<f64>, f64)>) -> Vec<f64> {
    let mut q: Vec<f64> = g.iter().map(|v| -v).collect();
    let mut alphas = Vec::with_capacity(pairs.len());
    for (s, y, rho) in pairs.iter().rev() {
        let a = rho * dot(s, &q);
        axpy(-a, y, &mut q);
        alphas.push(a);
    }
    if let Some((s, y, _)) = pairs.back() {
        let gamma = dot(s, y) / dot(y, y);
        q.iter_mut().for_each(|v| *v *= gamma);
    }
    for ((s, y, rho), a) in pairs.iter().zip(alphas.iter().rev()) {
        let b = rho * dot(y, &q);
        axpy(a - b, s, &mut q);
    }
    q
}

/// Reconstruction `x^(theta)` by L-BFGS from `x_init`.
pub fn lower_solve(
    theta: &FoeParams,
    prob: &InpaintingProblem,
    x_init: &[f64],
    opts: &LowerOptions,
) -> Result<LbfgsResult> {
    if x_init.len() != prob.dim() {
        return Err(Error::shape("initial image", prob.dim(), x_init.len()));
    }
    lbfgs(x_init, opts, |x| Ok((foe_cost(x, theta, prob)?, foe_gradient(x, theta, prob)?)))
}
