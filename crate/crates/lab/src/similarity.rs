//! How much consecutive systems of a recorded sequence differ.

use serde::Serialize;

use recycle_core::dense::{materialize, DENSE_LIMIT};
use recycle_core::operators::{foe_hessian, FoeHessian, SymmetricOperator};

use crate::error::Result;
use crate::record::SequenceRecord;
use crate::replay::relative_error;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SimilarityRow {
    /// Compares system `system - 1` with `system`.
    pub system: usize,
    /// `||H^(i) - H^(i-1)||_F / ||H^(i-1)||_F`.
    pub hessian: f64,
    /// Same quantity from operator probing, without forming either matrix.
    pub hessian_probe: f64,
    pub rhs: f64,
    pub solution: f64,
}

/// `||H1 - H0||_F / ||H0||_F` column by column. The mask and ridge terms
/// cancel in the difference, so only the filter parts are applied there.
pub fn probe_relative_difference(h0: &FoeHessian, h1: &FoeHessian) -> f64 {
    let n = h0.dim();
    let mut e = vec![0.0; n];
    let (mut a, mut b, mut full) = (vec![0.0; n], vec![0.0; n], vec![0.0; n]);
    let (mut num, mut den) = (0.0, 0.0);
    for k in 0..n {
        e[k] = 1.0;
        h0.apply_filters(&e, &mut a);
        h1.apply_filters(&e, &mut b);
        h0.apply(&e, &mut full);
        num += a.iter().zip(&b).map(|(x, y)| (y - x) * (y - x)).sum::<f64>();
        den += full.iter().map(|x| x * x).sum::<f64>();
        e[k] = 0.0;
    }
    (num / den).sqrt()
}

pub fn dense_relative_difference(h0: &FoeHessian, h1: &FoeHessian) -> f64 {
    let m0 = materialize(h0);
    let m1 = materialize(h1);
    (&m1 - &m0).norm() / m0.norm()
}

/// One row per consecutive pair. The Hessian column is dense for
/// `n <= DENSE_LIMIT` and probed otherwise.
pub fn similarity_report(seq: &SequenceRecord) -> Result<Vec<SimilarityRow>> {
    let hessians = seq
        .systems
        .iter()
        .map(|s| Ok(foe_hessian(&seq.params(&s.theta)?, &seq.problem)))
        .collect::<Result<Vec<_>>>()?;
    let mut rows = Vec::new();
    for i in 1..seq.len() {
        let (prev, cur) = (&seq.systems[i - 1], &seq.systems[i]);
        let hessian_probe = probe_relative_difference(&hessians[i - 1], &hessians[i]);
        let hessian = if seq.dim() <= DENSE_LIMIT {
            dense_relative_difference(&hessians[i - 1], &hessians[i])
        } else {
            hessian_probe
        };
        rows.push(SimilarityRow {
            system: i,
            hessian,
            hessian_probe,
            rhs: relative_error(&prev.rhs, &cur.rhs),
            solution: relative_error(&prev.w, &cur.w),
        });
    }
    Ok(rows)
}
