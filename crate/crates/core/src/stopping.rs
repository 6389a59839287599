//! Stop rules for the inner Hessian solves.
//!
//! Besides the usual residual test, two rules target the hypergradient
//! `J w` directly: a projected estimate of `||J H^{-1} r_k||` built from a
//! partial GSVD of the recycle space, and the exact value for experiments.

use alloc::vec::Vec;
use nalgebra::{Cholesky, DMatrix, DVector, Dyn};

use crate::dense::{materialize, DENSE_LIMIT};
use crate::error::{Error, Result};
use crate::krylov::{minres, SolveOptions, StopReason};
use crate::operators::{AdjointJacobian, SymmetricOperator};
use crate::vector::norm;

/// Default tolerance for both residual and projected rules.
pub const DEFAULT_DELTA: f64 = 1e-2;

/// Projection data for the hypergradient-error estimate
/// `||diag(mu) V_H^T W^T r||` over the selected GSVD components.
#[derive(Debug, Clone, PartialEq)]
pub struct NscData {
    /// Selected Ritz generalized singular values `alpha_i / beta_i`.
    pub gen_values: Vec<f64>,
    /// Matching columns of `V_H` (`t x s`).
    pub vh: DMatrix<f64>,
    /// Candidate basis `W` (`n x t`).
    pub w: DMatrix<f64>,
}

impl NscData {
    pub fn dim(&self) -> usize {
        self.w.nrows()
    }

    /// Evaluates the estimate at residual `r`. Costs `O(nt + ts + s)`.
    pub fn value(&self, r: &[f64]) -> f64 {
        let wr = self.w.tr_mul(&DVector::from_column_slice(r));
        let proj = self.vh.tr_mul(&wr);
        let mut acc = 0.0;
        for (mu, v) in self.gen_values.iter().zip(proj.iter()) {
            let x = mu * v;
            acc += x * x;
        }
        libm::sqrt(acc)
    }

    /// Reorders the selected components.
    pub fn permuted(&self, order: &[usize]) -> Self {
        Self {
            gen_values: order.iter().map(|&i| self.gen_values[i]).collect(),
            vh: crate::dense::select_columns(&self.vh, order),
            w: self.w.clone(),
        }
    }
}

/// Something that can report `||J H^{-1} r||` for a residual `r`.
pub trait HgErrorOracle {
    fn hg_error(&self, r: &[f64]) -> f64;
}

/// Stop rule attached to a solve. The solver stops once `value < delta`.
#[derive(Clone, Copy)]
pub enum StopRule<'a> {
    ResidualNorm { delta: f64 },
    Nsc { delta: f64, data: &'a NscData },
    TrueHgError { delta: f64, oracle: &'a dyn HgErrorOracle },
}

impl core::fmt::Debug for StopRule<'_> {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        match self {
            StopRule::ResidualNorm { delta } => write!(f, "ResidualNorm({delta:e})"),
            StopRule::Nsc { delta, .. } => write!(f, "Nsc({delta:e})"),
            StopRule::TrueHgError { delta, .. } => write!(f, "TrueHgError({delta:e})"),
        }
    }
}

impl<'a> StopRule<'a> {
    pub fn residual(delta: f64) -> Self {
        StopRule::ResidualNorm { delta }
    }

    /// Fails when the recycle space carries no projection data.
    pub fn nsc(delta: f64, data: Option<&'a NscData>) -> Result<Self> {
        data.map(|data| StopRule::Nsc { delta, data })
            .ok_or(Error::MissingNscData)
    }

    pub fn delta(&self) -> f64 {
        match *self {
            StopRule::ResidualNorm { delta }
            | StopRule::Nsc { delta, .. }
            | StopRule::TrueHgError { delta, .. } => delta,
        }
    }

    pub fn validate(&self, n: usize) -> Result<()> {
        let delta = self.delta();
        if !(delta > 0.0) || !delta.is_finite() {
            return Err(Error::InvalidParameter(alloc::format!("stop tolerance must be positive, got {delta}")));
        }
        if let StopRule::Nsc { data, .. } = self {
            if data.dim() != n {
                return Err(Error::shape("projection data", n, data.dim()));
            }
        }
        Ok(())
    }

    /// Whether evaluating the rule needs the residual vector itself.
    pub fn needs_residual_vector(&self) -> bool {
        !matches!(self, StopRule::ResidualNorm { .. })
    }

    /// Value of the monitored quantity. `residual` must be present when
    /// [`Self::needs_residual_vector`] is true.
    pub fn value(&self, residual_norm: f64, residual: Option<&[f64]>) -> f64 {
        match self {
            StopRule::ResidualNorm { .. } => residual_norm,
            StopRule::Nsc { data, .. } => nsc_value(data, residual.expect("residual vector tracked")),
            StopRule::TrueHgError { oracle, .. } => oracle.hg_error(residual.expect("residual vector tracked")),
        }
    }

    pub fn is_satisfied(&self, value: f64) -> bool {
        value < self.delta()
    }
}

/// `||r|| < delta`, strictly.
pub fn residual_rule(residual_norm: f64, delta: f64) -> bool {
    residual_norm < delta
}

pub fn nsc_value(data: &NscData, r: &[f64]) -> f64 {
    data.value(r)
}

/// `||diag(mu) V_H^T W^T r|| < delta`.
pub fn nsc_rule(data: &NscData, r: &[f64], delta: f64) -> bool {
    nsc_value(data, r) < delta
}

/// Exact hypergradient error `||J H^{-1} r||`, with a dense Cholesky factor of
/// `H` when `n <= DENSE_LIMIT` and a tight nested MINRES otherwise.
pub struct TrueHgError<'a, H: ?Sized, J: ?Sized> {
    hessian: &'a H,
    jacobian: &'a J,
    factor: Option<Cholesky<f64, Dyn>>,
    inner_tol: f64,
}

impl<'a, H, J> TrueHgError<'a, H, J>
where
    H: SymmetricOperator + ?Sized,
    J: AdjointJacobian + ?Sized,
{
    pub fn new(hessian: &'a H, jacobian: &'a J, inner_tol: f64) -> Result<Self> {
        let n = hessian.dim();
        if jacobian.cols() != n {
            return Err(Error::shape("Jacobian columns", n, jacobian.cols()));
        }
        let factor = if n <= DENSE_LIMIT {
            let m = crate::dense::symmetrize(&materialize(hessian));
            Some(Cholesky::new(m).ok_or(Error::NonPositiveCurvature {
                iteration: 0,
                curvature: f64::NAN,
            })?)
        } else {
            None
        };
        Ok(Self {
            hessian,
            jacobian,
            factor,
            inner_tol,
        })
    }

    /// `H^{-1} r`.
    pub fn solve(&self, r: &[f64]) -> Result<Vec<f64>> {
        match &self.factor {
            Some(f) => {
                let x = f.solve(&DVector::from_column_slice(r));
                Ok(x.as_slice().to_vec())
            }
            None => {
                let opts = SolveOptions {
                    max_iter: 20 * self.hessian.dim(),
                    ..SolveOptions::new(StopRule::residual(self.inner_tol))
                };
                let res = minres(self.hessian, r, &opts)?;
                if res.stop_reason == StopReason::MaxIter {
                    return Err(Error::InnerSolveFailed {
                        iterations: res.iterations,
                        residual: res.final_residual_norm(),
                    });
                }
                Ok(res.solution)
            }
        }
    }

    pub fn evaluate(&self, r: &[f64]) -> Result<f64> {
        if r.iter().all(|&v| v == 0.0) {
            return Ok(0.0);
        }
        let x = self.solve(r)?;
        Ok(norm(&self.jacobian.apply_alloc(&x)))
    }
}

impl<H, J> HgErrorOracle for TrueHgError<'_, H, J>
where
    H: SymmetricOperator + ?Sized,
    J: AdjointJacobian + ?Sized,
{
    fn hg_error(&self, r: &[f64]) -> f64 {
        self.evaluate(r).unwrap_or(f64::INFINITY)
    }
}

/// One-shot `||J H^{-1} r||`.
pub fn true_hg_error<H, J>(jacobian: &J, hessian: &H, r: &[f64], inner_tol: f64) -> Result<f64>
where
    H: SymmetricOperator + ?Sized,
    J: AdjointJacobian + ?Sized,
{
    TrueHgError::new(hessian, jacobian, inner_tol)?.evaluate(r)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::operators::{DenseJacobian, DenseOperator, ScaledIdentity};
    use crate::testing::{random_matrix, random_orthonormal, random_spd, random_vec, rng};

    #[test]
    fn residual_rule_is_strict() {
        assert!(residual_rule(0.0, 1e-2));
        assert!(!residual_rule(1e-2, 1e-2));
        assert!(residual_rule(0.999e-2, 1e-2));
    }

    #[test]
    fn nsc_zero_residual() {
        let mut r = rng(1);
        let data = NscData {
            gen_values: alloc::vec![1.0, 2.0],
            vh: random_orthonormal(&mut r, 4, 2),
            w: random_orthonormal(&mut r, 10, 4),
        };
        assert!(nsc_rule(&data, &[0.0; 10], 1e-12));
        assert_eq!(nsc_value(&data, &[0.0; 10]), 0.0);
    }

    #[test]
    fn missing_nsc_data_is_a_configuration_error() {
        assert_eq!(StopRule::nsc(1e-2, None).unwrap_err(), Error::MissingNscData);
    }

    #[test]
    fn true_error_trivial_cases() {
        let mut r = rng(2);
        let jm = random_matrix(&mut r, 6, 8);
        let j = DenseJacobian::new(jm.clone());
        let h = ScaledIdentity { dim: 8, scale: 1.0 };
        assert_eq!(true_hg_error(&j, &h, &[0.0; 8], 1e-13).unwrap(), 0.0);
        let res = random_vec(&mut r, 8);
        let expected = (&jm * DVector::from_column_slice(&res)).norm();
        let got = true_hg_error(&j, &h, &res, 1e-13).unwrap();
        assert!((got - expected).abs() <= 1e-12 * expected);
    }

    #[test]
    fn true_error_matches_explicit_inverse() {
        let mut r = rng(3);
        let hm = random_spd(&mut r, 20);
        let jm = random_matrix(&mut r, 7, 20);
        let res = random_vec(&mut r, 20);
        let inv = hm.clone().try_inverse().unwrap();
        let expected = (&jm * &inv * DVector::from_column_slice(&res)).norm();
        let got = true_hg_error(&DenseJacobian::new(jm), &DenseOperator::new(hm), &res, 1e-13).unwrap();
        assert!((got - expected).abs() <= 1e-8 * expected);
    }
}
