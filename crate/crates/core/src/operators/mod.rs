//! Matrix-free operators and the Fields-of-Experts inpainting problem.

mod conv;
mod foe;

pub use conv::{conv2d, conv2d_adjoint, conv2d_adjoint_into, conv2d_into, ImageShape, ImageVector, Kernel};
pub use foe::{
    foe_cost, foe_gradient, foe_hessian, mixed_jacobian, FoeHessian, FoeParams, InpaintingProblem,
    MixedJacobian, LOG_WEIGHT_CLAMP,
};

use alloc::vec::Vec;
use nalgebra::DMatrix;

/// A symmetric linear map on `R^n` known only through its action.
///
/// Implementations are immutable once built, so a single operator can be
/// shared between concurrent solves.
pub trait SymmetricOperator {
    fn dim(&self) -> usize;

    /// `y = H x`. `y` is overwritten.
    fn apply(&self, x: &[f64], y: &mut [f64]);

    /// FLOPs charged for one application. Defaults to a dense mat-vec, `2n^2 - n`.
    fn apply_cost(&self) -> u64 {
        let n = self.dim() as u64;
        (2 * n * n).saturating_sub(n)
    }

    fn apply_alloc(&self, x: &[f64]) -> Vec<f64> {
        let mut y = alloc::vec![0.0; self.dim()];
        self.apply(x, &mut y);
        y
    }
}

impl<T: SymmetricOperator + ?Sized> SymmetricOperator for &T {
    fn dim(&self) -> usize {
        (**self).dim()
    }
    fn apply(&self, x: &[f64], y: &mut [f64]) {
        (**self).apply(x, y)
    }
    fn apply_cost(&self) -> u64 {
        (**self).apply_cost()
    }
}

/// The map `w -> J w` with `J = -(D^2_{theta x} L)^T`, a `p x n` matrix.
pub trait AdjointJacobian {
    /// Number of hyperparameters `p`.
    fn rows(&self) -> usize;
    /// State dimension `n`.
    fn cols(&self) -> usize;
    fn apply(&self, w: &[f64], out: &mut [f64]);

    fn apply_alloc(&self, w: &[f64]) -> Vec<f64> {
        let mut out = alloc::vec![0.0; self.rows()];
        self.apply(w, &mut out);
        out
    }
}

impl<T: AdjointJacobian + ?Sized> AdjointJacobian for &T {
    fn rows(&self) -> usize {
        (**self).rows()
    }
    fn cols(&self) -> usize {
        (**self).cols()
    }
    fn apply(&self, w: &[f64], out: &mut [f64]) {
        (**self).apply(w, out)
    }
}

/// Dense symmetric matrix wrapped as an operator. The matrix is not checked
/// for symmetry; callers are expected to pass one.
#[derive(Debug, Clone)]
pub struct DenseOperator {
    matrix: DMatrix<f64>,
}

impl DenseOperator {
    pub fn new(matrix: DMatrix<f64>) -> Self {
        assert_eq!(matrix.nrows(), matrix.ncols(), "dense operator must be square");
        Self { matrix }
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }
}

impl SymmetricOperator for DenseOperator {
    fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    fn apply(&self, x: &[f64], y: &mut [f64]) {
        let n = self.dim();
        y.iter_mut().for_each(|v| *v = 0.0);
        for (j, &xj) in x.iter().enumerate().take(n) {
            if xj == 0.0 {
                continue;
            }
            let col = self.matrix.column(j);
            for (yi, a) in y.iter_mut().zip(col.iter()) {
                *yi += a * xj;
            }
        }
    }
}

/// `c * I`.
#[derive(Debug, Clone, Copy)]
pub struct ScaledIdentity {
    pub dim: usize,
    pub scale: f64,
}

impl SymmetricOperator for ScaledIdentity {
    fn dim(&self) -> usize {
        self.dim
    }
    fn apply(&self, x: &[f64], y: &mut [f64]) {
        for (yi, xi) in y.iter_mut().zip(x) {
            *yi = self.scale * xi;
        }
    }
    fn apply_cost(&self) -> u64 {
        self.dim as u64
    }
}

/// Dense `p x n` adjoint Jacobian.
#[derive(Debug, Clone)]
pub struct DenseJacobian {
    matrix: DMatrix<f64>,
}

impl DenseJacobian {
    pub fn new(matrix: DMatrix<f64>) -> Self {
        Self { matrix }
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }
}

impl AdjointJacobian for DenseJacobian {
    fn rows(&self) -> usize {
        self.matrix.nrows()
    }
    fn cols(&self) -> usize {
        self.matrix.ncols()
    }
    fn apply(&self, w: &[f64], out: &mut [f64]) {
        let r = &self.matrix * nalgebra::DVector::from_column_slice(w);
        out.copy_from_slice(r.as_slice());
    }
}
