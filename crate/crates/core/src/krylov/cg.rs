use alloc::vec;
use alloc::vec::Vec;
use nalgebra::DMatrix;

use super::{SolveOptions, SolveResult, StopReason};
use crate::error::{Error, Result};
use crate::operators::SymmetricOperator;
use crate::vector::{axpy, dot};

/// Conjugate gradients. Residual norms are those of the recursively updated
/// residual; unlike MINRES they need not decrease monotonically.
///
/// FLOPs charged: `H + 3n` before the loop, `H + 10n` per iteration.
pub fn cg<H: SymmetricOperator + ?Sized>(h: &H, g: &[f64], opts: &SolveOptions<'_>) -> Result<SolveResult> {
    let n = h.dim();
    if g.len() != n {
        return Err(Error::shape("right-hand side", n, g.len()));
    }
    if opts.max_iter == 0 {
        return Err(Error::InvalidParameter("max_iter must be at least 1".into()));
    }
    opts.stop.validate(n)?;
    let nn = n as u64;
    let h_cost = h.apply_cost();
    let mut w = match opts.initial_guess {
        Some(w0) if w0.len() != n => return Err(Error::shape("initial guess", n, w0.len())),
        Some(w0) => w0.to_vec(),
        None => vec![0.0; n],
    };
    let mut r = h.apply_alloc(&w);
    for (ri, gi) in r.iter_mut().zip(g) {
        *ri = gi - *ri;
    }
    let mut rr = dot(&r, &r);
    let mut flops = h_cost + 3 * nn;
    let mut res_norm = libm::sqrt(rr);
    let mut residual_norms = vec![res_norm];
    let mut stop_values = vec![opts.stop.value(res_norm, Some(&r))];
    let mut basis: Vec<Vec<f64>> = Vec::new();
    let mut reason = StopReason::MaxIter;
    let mut iterations = 0;
    if opts.stop.is_satisfied(stop_values[0]) {
        reason = StopReason::Tolerance;
    } else {
        let mut d = r.clone();
        let mut hd = vec![0.0; n];
        for k in 1..=opts.max_iter {
            iterations = k;
            if opts.track_basis {
                basis.push(r.iter().map(|v| v / res_norm).collect());
            }
            h.apply(&d, &mut hd);
            let curvature = dot(&d, &hd);
            if !(curvature > 0.0) {
                return Err(Error::NonPositiveCurvature {
                    iteration: k,
                    curvature,
                });
            }
            let a = rr / curvature;
            axpy(a, &d, &mut w);
            axpy(-a, &hd, &mut r);
            let rr_next = dot(&r, &r);
            flops += h_cost + 10 * nn;
            res_norm = libm::sqrt(rr_next);
            residual_norms.push(res_norm);
            let value = opts.stop.value(res_norm, Some(&r));
            stop_values.push(value);
            if opts.stop.is_satisfied(value) {
                reason = StopReason::Tolerance;
                break;
            }
            if rr_next == 0.0 {
                reason = StopReason::Breakdown;
                break;
            }
            let beta = rr_next / rr;
            rr = rr_next;
            for (di, ri) in d.iter_mut().zip(&r) {
                *di = ri + beta * *di;
            }
        }
    }
    let basis = opts.track_basis.then(|| {
        let mut m = DMatrix::zeros(n, basis.len());
        for (j, col) in basis.iter().enumerate() {
            m.column_mut(j).copy_from_slice(col);
        }
        m
    });
    let residual = (opts.track_residual_vector || opts.stop.needs_residual_vector()).then_some(r);
    Ok(SolveResult {
        solution: w,
        iterations,
        residual_norms,
        stop_values,
        basis,
        residual,
        flops,
        stop_reason: reason,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dense::to_dvector;
    use crate::operators::DenseOperator;
    use crate::stopping::StopRule;
    use crate::testing::{random_spd, random_vec, rng};

    #[test]
    fn matches_dense_solve_and_flop_model() {
        let mut r = rng(1);
        let hm = random_spd(&mut r, 30);
        let g = random_vec(&mut r, 30);
        let h = DenseOperator::new(hm.clone());
        let res = cg(&h, &g, &SolveOptions::new(StopRule::residual(1e-11)).with_basis()).unwrap();
        let exact = hm.cholesky().unwrap().solve(&to_dvector(&g));
        assert!((to_dvector(&res.solution) - &exact).norm() <= 1e-8 * exact.norm());
        let k = res.iterations as u64;
        let hc = h.apply_cost();
        assert_eq!(res.flops, hc + 90 + k * (hc + 300));
        assert_eq!(res.basis.unwrap().ncols(), res.iterations);
    }

    #[test]
    fn indefinite_matrix_is_rejected() {
        let h = DenseOperator::new(DMatrix::from_diagonal(&to_dvector(&[1.0, -1.0])));
        let err = cg(&h, &[0.0, 1.0], &SolveOptions::new(StopRule::residual(1e-10))).unwrap_err();
        assert!(matches!(err, Error::NonPositiveCurvature { iteration: 1, .. }));
    }
}
