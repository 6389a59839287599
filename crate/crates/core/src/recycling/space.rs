use alloc::vec::Vec;
use nalgebra::DMatrix;

use crate::dense::{apply_columns, DENSE_LIMIT};
use crate::error::{Error, Result};
use crate::operators::{AdjointJacobian, SymmetricOperator};
use crate::stopping::NscData;
use crate::vector::{dot, norm};

use super::basis::build_candidate_basis;
use super::select::{harmonic_ritz_select, rgen_select, ritz_select, Selection};
use super::strategy::{Placement, Side, StrategyDescriptor, VecType};
use super::{Warning, RANK_TOL};

/// `U` and `C = H U` with `C^T C = I`.
#[derive(Debug, Clone)]
pub struct RecycleSpace {
    pub u: DMatrix<f64>,
    pub c: DMatrix<f64>,
    /// Present for GSVD-based strategies.
    pub nsc: Option<NscData>,
    pub warnings: Vec<Warning>,
}

impl RecycleSpace {
    pub fn empty(n: usize) -> Self {
        Self {
            u: DMatrix::zeros(n, 0),
            c: DMatrix::zeros(n, 0),
            nsc: None,
            warnings: Vec::new(),
        }
    }

    pub fn dim(&self) -> usize {
        self.u.nrows()
    }

    /// Number of recycle vectors.
    pub fn size(&self) -> usize {
        self.u.ncols()
    }

    pub fn is_empty(&self) -> bool {
        self.u.ncols() == 0
    }
}

/// Orthonormalizes `H U~` by modified Gram-Schmidt (two passes), applying the
/// same column operations to `U~` so that `H U = C` holds by construction.
/// Columns of `H U~` that are numerically dependent are dropped.
pub fn prepare_recycle<H: SymmetricOperator + ?Sized>(h: &H, u_tilde: &DMatrix<f64>) -> Result<RecycleSpace> {
    let n = h.dim();
    if u_tilde.nrows() != n {
        return Err(Error::shape("recycle vectors rows", n, u_tilde.nrows()));
    }
    let hu = apply_columns(h, u_tilde);
    let mut cs: Vec<Vec<f64>> = Vec::new();
    let mut us: Vec<Vec<f64>> = Vec::new();
    for j in 0..u_tilde.ncols() {
        let mut c: Vec<f64> = hu.column(j).iter().copied().collect();
        let mut u: Vec<f64> = u_tilde.column(j).iter().copied().collect();
        let original = norm(&c);
        if original == 0.0 || !original.is_finite() {
            continue;
        }
        for _ in 0..2 {
            for (ck, uk) in cs.iter().zip(&us) {
                let r = dot(ck, &c);
                for i in 0..n {
                    c[i] -= r * ck[i];
                    u[i] -= r * uk[i];
                }
            }
        }
        let nc = norm(&c);
        if nc <= RANK_TOL * original {
            continue;
        }
        c.iter_mut().for_each(|x| *x /= nc);
        u.iter_mut().for_each(|x| *x /= nc);
        cs.push(c);
        us.push(u);
    }
    let s = cs.len();
    let mut warnings = Vec::new();
    if s < u_tilde.ncols() {
        warnings.push(Warning::ColumnsDropped(u_tilde.ncols() - s));
    }
    let mut space = RecycleSpace::empty(n);
    space.u = DMatrix::from_fn(n, s, |i, j| us[j][i]);
    space.c = DMatrix::from_fn(n, s, |i, j| cs[j][i]);
    space.warnings = warnings;
    Ok(space)
}

/// What the solve of the previous system left behind.
#[derive(Clone, Copy)]
pub struct PreviousSolve<'a> {
    /// Lanczos basis `V` of the previous solve.
    pub basis: Option<&'a DMatrix<f64>>,
    /// Recycle space used by the previous solve.
    pub recycle: Option<&'a RecycleSpace>,
    pub hessian: &'a dyn SymmetricOperator,
    pub jacobian: &'a dyn AdjointJacobian,
    pub index: usize,
}

#[derive(Clone, Copy)]
pub struct RecycleInputs<'a> {
    pub strategy: StrategyDescriptor,
    /// Requested recycle dimension.
    pub size: usize,
    pub previous: Option<PreviousSolve<'a>>,
    /// Operators of the system about to be solved.
    pub hessian: &'a dyn SymmetricOperator,
    pub jacobian: &'a dyn AdjointJacobian,
}

/// Builds the recycle space for the next solve.
///
/// Outer placement projects the upcoming `H^(i), J^(i)`; inner placement
/// projects `H^(i-1), J^(i-1)`. Normalization always uses `H^(i)`. Eig and
/// GSVD strategies decompose the full matrices and need `n <= DENSE_LIMIT`.
pub fn next_recycle(inputs: &RecycleInputs<'_>) -> Result<RecycleSpace> {
    let n = inputs.hessian.dim();
    let strategy = inputs.strategy;
    let Some(prev) = inputs.previous.filter(|_| !strategy.is_none()) else {
        return Ok(RecycleSpace::empty(n));
    };
    let (h, j): (&dyn SymmetricOperator, &dyn AdjointJacobian) = match strategy.placement {
        Placement::Outer => (inputs.hessian, inputs.jacobian),
        Placement::Inner => (prev.hessian, prev.jacobian),
    };
    let w = if strategy.is_full_dimensional() {
        if n > DENSE_LIMIT {
            return Err(Error::TooLargeForDense { n, limit: DENSE_LIMIT });
        }
        DMatrix::identity(n, n)
    } else {
        let basis = build_candidate_basis(n, prev.basis, prev.recycle.map(|r| &r.u), prev.index);
        if basis.is_empty() {
            return Ok(RecycleSpace::empty(n));
        }
        basis.w
    };

    let side = strategy.side.unwrap_or(Side::Right);
    let (selection, nsc): (Selection, Option<NscData>) = match strategy.vec_type {
        VecType::None => unreachable!("handled above"),
        VecType::Eig | VecType::Ritz => (ritz_select(&w, h, inputs.size, strategy.size)?, None),
        VecType::HRitz => (harmonic_ritz_select(&w, h, inputs.size, strategy.size)?, None),
        VecType::Gsvd | VecType::RGen => {
            let (sel, data) = rgen_select(&w, h, j, inputs.size, strategy.size, side)?;
            (sel, Some(data))
        }
    };
    let mut space = prepare_recycle(inputs.hessian, &selection.vectors)?;
    space.nsc = nsc;
    let mut warnings = selection.warnings;
    warnings.append(&mut space.warnings);
    space.warnings = warnings;
    Ok(space)
}
