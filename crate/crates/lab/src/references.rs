//! High-accuracy reference solutions `w_ref = H^-1 g` and hypergradients
//! `J w_ref` for a recorded sequence.

use nalgebra::{Cholesky, DVector};

use recycle_core::dense::{materialize, symmetrize, DENSE_LIMIT};
use recycle_core::krylov::{minres, SolveOptions, StopReason};
use recycle_core::operators::{foe_hessian, mixed_jacobian, AdjointJacobian, FoeHessian, SymmetricOperator};
use recycle_core::stopping::StopRule;
use recycle_core::vector::norm;
use recycle_core::Error;

use crate::error::Result;
use crate::record::SequenceRecord;

/// Default reference tolerance: `||g - H w_ref|| < tol * (1 + ||g||)`.
pub const REFERENCE_TOL: f64 = 1e-13;

const REFINEMENT_STEPS: usize = 3;

fn residual(h: &FoeHessian, g: &[f64], w: &[f64]) -> Vec<f64> {
    let hw = h.apply_alloc(w);
    g.iter().zip(&hw).map(|(a, b)| a - b).collect()
}

/// Dense Cholesky with a few steps of iterative refinement, or a tight MINRES
/// above the dense limit. Returns the solution and its residual norm.
pub fn reference_solve(h: &FoeHessian, g: &[f64], tol: f64) -> Result<(Vec<f64>, f64)> {
    let n = h.dim();
    let target = tol * (1.0 + norm(g));
    if n <= DENSE_LIMIT {
        let chol = Cholesky::new(symmetrize(&materialize(h))).ok_or(Error::NonPositiveCurvature {
            iteration: 0,
            curvature: f64::NAN,
        })?;
        let mut w = chol.solve(&DVector::from_column_slice(g)).as_slice().to_vec();
        let mut r = residual(h, g, &w);
        for _ in 0..REFINEMENT_STEPS {
            if norm(&r) < target {
                break;
            }
            let dw = chol.solve(&DVector::from_column_slice(&r));
            w.iter_mut().zip(dw.iter()).for_each(|(a, b)| *a += b);
            r = residual(h, g, &w);
        }
        let rn = norm(&r);
        return Ok((w, rn));
    }
    let opts = SolveOptions::new(StopRule::residual(target)).with_max_iter(20 * n);
    let res = minres(h, g, &opts)?;
    if res.stop_reason == StopReason::MaxIter {
        return Err(Error::InnerSolveFailed {
            iterations: res.iterations,
            residual: res.final_residual_norm(),
        }
        .into());
    }
    let rn = norm(&residual(h, g, &res.solution));
    Ok((res.solution, rn))
}

/// Fills `w_ref`, `hg_ref` and the residual record of every system.
pub fn compute_references(seq: &mut SequenceRecord, tol: f64) -> Result<()> {
    let mut residuals = Vec::with_capacity(seq.len());
    for i in 0..seq.len() {
        let theta = seq.params(&seq.systems[i].theta)?;
        let h = foe_hessian(&theta, &seq.problem);
        let j = mixed_jacobian(&theta, &seq.systems[i].x_hat, &seq.problem)?;
        let (w, rn) = reference_solve(&h, &seq.systems[i].rhs, tol)?;
        let hg = j.apply_alloc(&w);
        let sys = &mut seq.systems[i];
        sys.w_ref = Some(w);
        sys.hg_ref = Some(hg);
        residuals.push(rn);
    }
    seq.reference_delta = Some(tol);
    seq.reference_residuals = Some(residuals);
    Ok(())
}
