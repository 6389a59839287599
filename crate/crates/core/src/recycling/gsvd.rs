//! Generalized singular value decomposition of a pair `(J~, H~)` with `H~`
//! square and invertible.
//!
//! Construction: thin QR of the stacked matrix `[J~; H~] = [Q1; Q2] R`, SVD of
//! `Q2 = V_H diag(beta) Z^T`, then `Q1 Z` has orthogonal columns of norms
//! `alpha_i` and `X = R^{-1} Z`. Components are ordered by increasing
//! `mu_i = alpha_i / beta_i`.

use alloc::vec::Vec;
use nalgebra::DMatrix;

use crate::dense::{argsort, orthonormalize, select_columns};
use crate::error::{Error, Result};

/// Singular `H~` is reported when `sigma_min < SINGULAR_TOL * sigma_max`.
pub const SINGULAR_TOL: f64 = 1e-12;

/// Columns of `Q1 Z` with norm below this are treated as exact zeros.
const ALPHA_TOL: f64 = 1e-12;

/// `V_J^T J~ X = D_J`, `V_H^T H~ X = D_H`.
#[derive(Debug, Clone)]
pub struct GsvdFactors {
    /// `p x p` orthogonal.
    pub vj: DMatrix<f64>,
    /// `t x t` orthogonal.
    pub vh: DMatrix<f64>,
    /// `t x t` invertible.
    pub x: DMatrix<f64>,
    /// Nondecreasing, in `[0, 1)`.
    pub alphas: Vec<f64>,
    /// Nonincreasing, in `(0, 1]`.
    pub betas: Vec<f64>,
    /// Condition number of `H~`.
    pub h_condition: f64,
}

impl GsvdFactors {
    pub fn t(&self) -> usize {
        self.alphas.len()
    }

    pub fn p(&self) -> usize {
        self.vj.nrows()
    }

    /// `mu_i = alpha_i / beta_i`, nondecreasing.
    pub fn gen_values(&self) -> Vec<f64> {
        self.alphas.iter().zip(&self.betas).map(|(a, b)| a / b).collect()
    }

    /// Column of `D_J` (and of `V_J`) holding component `i`. When `p < t` the
    /// first `t - p` components have `alpha = 0` and no row of their own.
    fn row_of(&self, i: usize) -> Option<usize> {
        let offset = self.t().saturating_sub(self.p());
        i.checked_sub(offset)
    }

    /// `p x t`.
    pub fn d_j(&self) -> DMatrix<f64> {
        let mut d = DMatrix::zeros(self.p(), self.t());
        for i in 0..self.t() {
            if let Some(row) = self.row_of(i) {
                d[(row, i)] = self.alphas[i];
            }
        }
        d
    }

    /// `t x t`.
    pub fn d_h(&self) -> DMatrix<f64> {
        DMatrix::from_diagonal(&nalgebra::DVector::from_column_slice(&self.betas))
    }
}

pub fn gsvd_pair(j: &DMatrix<f64>, h: &DMatrix<f64>) -> Result<GsvdFactors> {
    let t = h.ncols();
    let p = j.nrows();
    if h.nrows() != t {
        return Err(Error::shape("projected Hessian rows", t, h.nrows()));
    }
    if j.ncols() != t {
        return Err(Error::shape("projected Jacobian columns", t, j.ncols()));
    }
    if t == 0 {
        return Ok(GsvdFactors {
            vj: DMatrix::identity(p, p),
            vh: DMatrix::zeros(0, 0),
            x: DMatrix::zeros(0, 0),
            alphas: Vec::new(),
            betas: Vec::new(),
            h_condition: 1.0,
        });
    }
    let sv = h.clone().singular_values();
    let sigma_max = sv.max();
    let sigma_min = sv.min();
    if !(sigma_min >= SINGULAR_TOL * sigma_max) || sigma_max == 0.0 {
        return Err(Error::SingularProjectedHessian { sigma_min, sigma_max });
    }

    let mut stacked = DMatrix::zeros(p + t, t);
    stacked.rows_mut(0, p).copy_from(j);
    stacked.rows_mut(p, t).copy_from(h);
    let qr = stacked.qr();
    let q = qr.q();
    let r = qr.r();
    let q1 = q.rows(0, p).into_owned();
    let q2 = q.rows(p, t).into_owned();

    let svd = q2.svd(true, true);
    let u = svd.u.expect("left singular vectors");
    let z = svd.v_t.expect("right singular vectors").transpose();
    let y = &q1 * &z;

    let mut alphas: Vec<f64> = (0..t).map(|i| y.column(i).norm()).collect();
    let mut betas: Vec<f64> = svd.singular_values.iter().copied().collect();
    for (a, b) in alphas.iter_mut().zip(betas.iter_mut()) {
        let scale = libm::hypot(*a, *b);
        *a /= scale;
        *b /= scale;
    }
    let mu: Vec<f64> = alphas.iter().zip(&betas).map(|(a, b)| a / b).collect();
    let order = argsort(&mu);
    let alphas: Vec<f64> = order.iter().map(|&i| alphas[i]).collect();
    let betas: Vec<f64> = order.iter().map(|&i| betas[i]).collect();
    let vh = select_columns(&u, &order);
    let z = select_columns(&z, &order);
    let y = select_columns(&y, &order);

    let x = r
        .solve_upper_triangular(&z)
        .ok_or(Error::SingularProjectedHessian { sigma_min, sigma_max })?;

    // V_J: normalized columns of Q1 Z where alpha > 0, completed to an orthogonal basis.
    let offset = t.saturating_sub(p);
    let mut slots: Vec<Option<usize>> = alloc::vec![None; p];
    let mut seeds = Vec::new();
    for i in offset..t {
        let norm = y.column(i).norm();
        if norm > ALPHA_TOL {
            slots[i - offset] = Some(seeds.len());
            seeds.push(y.column(i) / norm);
        }
    }
    let k = seeds.len();
    let mut pool = DMatrix::zeros(p, k + p);
    for (c, s) in seeds.iter().enumerate() {
        pool.set_column(c, s);
    }
    pool.columns_mut(k, p).copy_from(&DMatrix::identity(p, p));
    let (basis, kept) = orthonormalize(&pool, 1e-8);
    debug_assert!(kept.len() >= p && kept[..k].iter().copied().eq(0..k));
    let mut vj = DMatrix::zeros(p, p);
    let mut filler = k;
    for (col, slot) in slots.iter().enumerate() {
        match slot {
            Some(s) => vj.set_column(col, &basis.column(*s)),
            None => {
                vj.set_column(col, &basis.column(filler));
                filler += 1;
            }
        }
    }

    Ok(GsvdFactors {
        vj,
        vh,
        x,
        alphas,
        betas,
        h_condition: sigma_max / sigma_min,
    })
}
