//! Extraction of recycle vectors from a candidate basis `W`.

use alloc::vec::Vec;
use nalgebra::{DMatrix, SymmetricEigen};

use crate::dense::{apply_columns, argsort, jacobian_columns, select_columns, symmetrize};
use crate::error::Result;
use crate::operators::{AdjointJacobian, SymmetricOperator};
use crate::stopping::NscData;

use super::gsvd::gsvd_pair;
use super::strategy::{Side, SizeSel};
use super::Warning;

/// Eigenvalues of the pencil below this fraction of the largest are dropped.
const PENCIL_TOL: f64 = 1e-14;

#[derive(Debug, Clone)]
pub struct Selection {
    /// `n x s`, unit-norm columns.
    pub vectors: DMatrix<f64>,
    /// Values of the selected vectors, in the order of `vectors`.
    pub values: Vec<f64>,
    /// Indices of the selected components within `all_values`.
    pub indices: Vec<usize>,
    /// All `t` values of the projected problem.
    pub all_values: Vec<f64>,
    pub warnings: Vec<Warning>,
}

/// Picks `s` indices by value: `Small` takes the smallest, `Large` the
/// largest, `Mixed` takes `floor(s/2)` smallest and `ceil(s/2)` largest.
/// Ties are broken by index. `s` larger than `values.len()` is clamped.
pub fn select_indices(values: &[f64], s: usize, size: SizeSel) -> (Vec<usize>, Option<Warning>) {
    let t = values.len();
    let warning = (s > t).then_some(Warning::SizeClamped {
        requested: s,
        available: t,
    });
    let s = s.min(t);
    let ascending = argsort(values);
    let negated: Vec<f64> = values.iter().map(|v| -v).collect();
    let descending = argsort(&negated);
    let idx = match size {
        SizeSel::Small => ascending[..s].to_vec(),
        SizeSel::Large => descending[..s].to_vec(),
        SizeSel::Mixed => {
            let mut idx = ascending[..s / 2].to_vec();
            let need = s - idx.len();
            let large: Vec<usize> = descending
                .iter()
                .copied()
                .filter(|i| !idx.contains(i))
                .take(need)
                .collect();
            idx.extend(large);
            idx
        }
    };
    (idx, warning)
}

fn normalize_columns(m: &mut DMatrix<f64>) {
    for mut col in m.column_iter_mut() {
        let nrm = col.norm();
        if nrm > 0.0 {
            col /= nrm;
        }
    }
}

fn finish(
    mut vectors: DMatrix<f64>,
    all_values: Vec<f64>,
    indices: Vec<usize>,
    mut warnings: Vec<Warning>,
    clamp: Option<Warning>,
) -> Selection {
    normalize_columns(&mut vectors);
    warnings.extend(clamp);
    Selection {
        vectors,
        values: indices.iter().map(|&i| all_values[i]).collect(),
        indices,
        all_values,
        warnings,
    }
}

/// Ritz vectors of `H` over `span(W)`, `W` with orthonormal columns.
pub fn ritz_select<H>(w: &DMatrix<f64>, h: &H, s: usize, size: SizeSel) -> Result<Selection>
where
    H: SymmetricOperator + ?Sized,
{
    let hw = apply_columns(h, w);
    let projected = symmetrize(&w.tr_mul(&hw));
    let eig = SymmetricEigen::new(projected);
    let values: Vec<f64> = eig.eigenvalues.iter().copied().collect();
    let (idx, clamp) = select_indices(&values, s, size);
    let vectors = w * select_columns(&eig.eigenvectors, &idx);
    Ok(finish(vectors, values, idx, Vec::new(), clamp))
}

/// Harmonic Ritz vectors: `(HW)^T HW rho = theta (HW)^T W rho`, selected by
/// `|theta|`. The returned values are the `theta`.
///
/// The pencil is reduced through the eigendecomposition of `(HW)^T HW`;
/// directions where it is numerically zero are dropped.
pub fn harmonic_ritz_select<H>(w: &DMatrix<f64>, h: &H, s: usize, size: SizeSel) -> Result<Selection>
where
    H: SymmetricOperator + ?Sized,
{
    let hw = apply_columns(h, w);
    let a = symmetrize(&hw.tr_mul(&hw));
    let b = symmetrize(&hw.tr_mul(w));
    let eig_a = SymmetricEigen::new(a);
    let lmax = eig_a.eigenvalues.iter().copied().fold(0.0, f64::max);
    let keep: Vec<usize> = (0..w.ncols())
        .filter(|&i| eig_a.eigenvalues[i] > PENCIL_TOL * lmax)
        .collect();
    let mut warnings = Vec::new();
    if keep.len() < w.ncols() {
        warnings.push(Warning::PencilDirectionsDropped(w.ncols() - keep.len()));
    }
    let mut p = select_columns(&eig_a.eigenvectors, &keep);
    for (c, &i) in keep.iter().enumerate() {
        let f = 1.0 / libm::sqrt(eig_a.eigenvalues[i]);
        p.column_mut(c).scale_mut(f);
    }
    let reduced = symmetrize(&(p.transpose() * b * &p));
    let eig = SymmetricEigen::new(reduced);
    let thetas: Vec<f64> = eig.eigenvalues.iter().map(|nu| 1.0 / nu).collect();
    let magnitudes: Vec<f64> = thetas.iter().map(|t| t.abs()).collect();
    let (idx, clamp) = select_indices(&magnitudes, s, size);
    let rho = p * select_columns(&eig.eigenvectors, &idx);
    let vectors = w * rho;
    Ok(finish(vectors, thetas, idx, warnings, clamp))
}

/// Ritz generalized singular vectors from the GSVD of `(J W, W^T H W)`,
/// selected by `mu = alpha / beta`. Also returns the data for the projected
/// hypergradient-error estimate restricted to the selected components.
pub fn rgen_select<H, J>(
    w: &DMatrix<f64>,
    h: &H,
    j: &J,
    s: usize,
    size: SizeSel,
    side: Side,
) -> Result<(Selection, NscData)>
where
    H: SymmetricOperator + ?Sized,
    J: AdjointJacobian + ?Sized,
{
    let jw = jacobian_columns(j, w);
    let hw = apply_columns(h, w);
    let projected = symmetrize(&w.tr_mul(&hw));
    let f = gsvd_pair(&jw, &projected)?;
    let mu = f.gen_values();
    let (idx, clamp) = select_indices(&mu, s, size);
    let vh = select_columns(&f.vh, &idx);
    let vectors = match side {
        Side::Left => w * &vh,
        Side::Right => w * select_columns(&f.x, &idx),
        Side::Mixed => {
            let mut left = w * &vh;
            let mut right = w * select_columns(&f.x, &idx);
            normalize_columns(&mut left);
            normalize_columns(&mut right);
            (left + right) * 0.5
        }
    };
    let nsc = NscData {
        gen_values: idx.iter().map(|&i| mu[i]).collect(),
        vh,
        w: w.clone(),
    };
    Ok((finish(vectors, mu, idx, Vec::new(), clamp), nsc))
}
