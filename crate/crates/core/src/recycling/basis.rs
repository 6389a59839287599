use nalgebra::DMatrix;

use crate::dense::orthonormalize;

use super::RANK_TOL;

/// Orthonormal basis of `span[V_prev U_prev]`.
#[derive(Debug, Clone)]
pub struct CandidateBasis {
    pub w: DMatrix<f64>,
    /// Index of the system whose solve produced the basis.
    pub source: usize,
}

impl CandidateBasis {
    pub fn dim(&self) -> usize {
        self.w.ncols()
    }

    pub fn is_empty(&self) -> bool {
        self.w.ncols() == 0
    }
}

/// Concatenates `[V_prev U_prev]` and orthonormalizes, dropping columns whose
/// remaining norm is below `RANK_TOL` times their original norm.
pub fn build_candidate_basis(
    n: usize,
    v_prev: Option<&DMatrix<f64>>,
    u_prev: Option<&DMatrix<f64>>,
    source: usize,
) -> CandidateBasis {
    let kv = v_prev.map_or(0, |m| m.ncols());
    let ku = u_prev.map_or(0, |m| m.ncols());
    let mut joined = DMatrix::zeros(n, kv + ku);
    if let Some(v) = v_prev {
        joined.columns_mut(0, kv).copy_from(v);
    }
    if let Some(u) = u_prev {
        joined.columns_mut(kv, ku).copy_from(u);
    }
    let (w, _) = orthonormalize(&joined, RANK_TOL);
    CandidateBasis { w, source }
}
