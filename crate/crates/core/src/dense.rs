//! Dense helpers built on `nalgebra` for the small projected problems.

use alloc::vec::Vec;
use nalgebra::{DMatrix, DVector};

use crate::operators::{AdjointJacobian, SymmetricOperator};
use crate::vector::{dot, norm};

/// Largest dimension for which full dense decompositions are attempted.
pub const DENSE_LIMIT: usize = 2000;

/// Applies `op` to every column of `w`.
pub fn apply_columns<O: SymmetricOperator + ?Sized>(op: &O, w: &DMatrix<f64>) -> DMatrix<f64> {
    let mut out = DMatrix::zeros(w.nrows(), w.ncols());
    for j in 0..w.ncols() {
        let col = w.column(j);
        op.apply(col.as_slice(), out.column_mut(j).as_mut_slice());
    }
    out
}

/// Builds `J W` column by column.
pub fn jacobian_columns<J: AdjointJacobian + ?Sized>(jac: &J, w: &DMatrix<f64>) -> DMatrix<f64> {
    let mut out = DMatrix::zeros(jac.rows(), w.ncols());
    for j in 0..w.ncols() {
        jac.apply(w.column(j).as_slice(), out.column_mut(j).as_mut_slice());
    }
    out
}

/// Dense matrix of a symmetric operator, obtained by applying it to the canonical basis.
pub fn materialize<O: SymmetricOperator + ?Sized>(op: &O) -> DMatrix<f64> {
    apply_columns(op, &DMatrix::identity(op.dim(), op.dim()))
}

pub fn materialize_jacobian<J: AdjointJacobian + ?Sized>(jac: &J) -> DMatrix<f64> {
    jacobian_columns(jac, &DMatrix::identity(jac.cols(), jac.cols()))
}

/// Modified Gram-Schmidt with one reorthogonalization pass.
///
/// Columns whose remaining norm falls below `rel_tol` times their original
/// norm are dropped. Returns the orthonormal columns and the indices kept.
pub fn orthonormalize(w: &DMatrix<f64>, rel_tol: f64) -> (DMatrix<f64>, Vec<usize>) {
    let n = w.nrows();
    let mut cols: Vec<Vec<f64>> = Vec::with_capacity(w.ncols());
    let mut kept = Vec::new();
    for j in 0..w.ncols() {
        let mut v: Vec<f64> = w.column(j).iter().copied().collect();
        let original = norm(&v);
        if original == 0.0 || !original.is_finite() {
            continue;
        }
        for _ in 0..2 {
            for q in &cols {
                let h = dot(q, &v);
                for (vi, qi) in v.iter_mut().zip(q) {
                    *vi -= h * qi;
                }
            }
        }
        let nv = norm(&v);
        if nv <= rel_tol * original {
            continue;
        }
        for vi in v.iter_mut() {
            *vi /= nv;
        }
        cols.push(v);
        kept.push(j);
    }
    let mut q = DMatrix::zeros(n, cols.len());
    for (j, c) in cols.iter().enumerate() {
        q.column_mut(j).copy_from_slice(c);
    }
    (q, kept)
}

/// Orthogonal projector onto the range of `w` (columns need not be orthonormal).
pub fn range_projector(w: &DMatrix<f64>) -> DMatrix<f64> {
    let (q, _) = orthonormalize(w, 1e-12);
    &q * q.transpose()
}

/// Largest absolute entry.
pub fn max_abs(m: &DMatrix<f64>) -> f64 {
    m.iter().fold(0.0_f64, |acc, v| acc.max(v.abs()))
}

/// `max |M^T M - I|`.
pub fn orthonormality_defect(m: &DMatrix<f64>) -> f64 {
    let g = m.transpose() * m;
    max_abs(&(g - DMatrix::identity(m.ncols(), m.ncols())))
}

/// Indices of `values` sorted ascending; equal values keep their original order.
pub fn argsort(values: &[f64]) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..values.len()).collect();
    idx.sort_by(|&a, &b| values[a].total_cmp(&values[b]).then(a.cmp(&b)));
    idx
}

pub fn symmetrize(m: &DMatrix<f64>) -> DMatrix<f64> {
    (m + m.transpose()) * 0.5
}

pub fn to_dvector(x: &[f64]) -> DVector<f64> {
    DVector::from_column_slice(x)
}

/// Selects columns of `m` in the given order.
pub fn select_columns(m: &DMatrix<f64>, idx: &[usize]) -> DMatrix<f64> {
    let mut out = DMatrix::zeros(m.nrows(), idx.len());
    for (j, &i) in idx.iter().enumerate() {
        out.set_column(j, &m.column(i));
    }
    out
}
