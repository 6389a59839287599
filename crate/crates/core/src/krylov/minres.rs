//! MINRES and its recycling variant.
//!
//! Both run the same Lanczos/Givens loop. With a recycle space `(U, C)`,
//! `C = H U`, `C^T C = I`, every Lanczos vector is kept orthogonal to `C` and
//! the correction is `V_k y_k - U C^T H V_k y_k`, which minimizes
//! `||r_0 - H [V_k U] [y; z]||` over both blocks. The recycled part is carried
//! by the three-term recurrence on `b~_k` next to the one on `v~_k`.

use alloc::vec;
use alloc::vec::Vec;
use nalgebra::{DMatrix, DVector};

use super::{SolveOptions, SolveResult, StopReason, BREAKDOWN_TOL};
use crate::error::{Error, Result};
use crate::operators::SymmetricOperator;
use crate::recycling::RecycleSpace;
use crate::vector::{axpy, dot, norm, scale};

/// Lanczos and Givens scalars of the current iteration.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct TridiagState {
    pub alpha: f64,
    pub beta: f64,
    pub beta_next: f64,
    pub gamma: f64,
    pub delta: f64,
    pub epsilon: f64,
    pub epsilon_tilde: f64,
    /// `(c_k, s_k)`, `(c_{k-1}, s_{k-1})`, `(c_{k-2}, s_{k-2})`.
    pub rotations: [(f64, f64); 3],
    pub zeta: f64,
}

/// Snapshot handed to an observer after every iteration (and once for `k = 0`).
#[derive(Debug)]
pub struct IterationView<'a> {
    pub iteration: usize,
    pub solution: &'a [f64],
    pub residual: Option<&'a [f64]>,
    pub residual_norm: f64,
    pub stop_value: f64,
    pub state: &'a TridiagState,
}

pub fn minres<H: SymmetricOperator + ?Sized>(h: &H, g: &[f64], opts: &SolveOptions<'_>) -> Result<SolveResult> {
    lanczos_solve(h, g, None, opts, &mut |_| {})
}

pub fn minres_observed<H, F>(h: &H, g: &[f64], opts: &SolveOptions<'_>, observer: &mut F) -> Result<SolveResult>
where
    H: SymmetricOperator + ?Sized,
    F: FnMut(&IterationView<'_>),
{
    lanczos_solve(h, g, None, opts, observer)
}

/// Recycling MINRES. An empty recycle space gives the MINRES iterates, but the
/// FLOP count follows the recycling cost model.
pub fn rminres<H: SymmetricOperator + ?Sized>(
    h: &H,
    g: &[f64],
    recycle: &RecycleSpace,
    opts: &SolveOptions<'_>,
) -> Result<SolveResult> {
    lanczos_solve(h, g, Some(recycle), opts, &mut |_| {})
}

pub fn rminres_observed<H, F>(
    h: &H,
    g: &[f64],
    recycle: &RecycleSpace,
    opts: &SolveOptions<'_>,
    observer: &mut F,
) -> Result<SolveResult>
where
    H: SymmetricOperator + ?Sized,
    F: FnMut(&IterationView<'_>),
{
    lanczos_solve(h, g, Some(recycle), opts, observer)
}

struct Projection<'a> {
    u: &'a DMatrix<f64>,
    c: &'a DMatrix<f64>,
}

impl Projection<'_> {
    fn s(&self) -> usize {
        self.c.ncols()
    }

    /// `C^T x`
    fn ct(&self, x: &[f64]) -> DVector<f64> {
        self.c.tr_mul(&DVector::from_column_slice(x))
    }
}

fn lanczos_solve<H, F>(
    h: &H,
    g: &[f64],
    recycle: Option<&RecycleSpace>,
    opts: &SolveOptions<'_>,
    observer: &mut F,
) -> Result<SolveResult>
where
    H: SymmetricOperator + ?Sized,
    F: FnMut(&IterationView<'_>),
{
    let n = h.dim();
    if g.len() != n {
        return Err(Error::shape("right-hand side", n, g.len()));
    }
    if opts.max_iter == 0 {
        return Err(Error::InvalidParameter("max_iter must be at least 1".into()));
    }
    opts.stop.validate(n)?;
    let proj = match recycle {
        Some(rc) => {
            if rc.dim() != n {
                return Err(Error::shape("recycle space rows", n, rc.dim()));
            }
            Some(Projection { u: &rc.u, c: &rc.c })
        }
        None => None,
    };
    let s = proj.as_ref().map_or(0, Projection::s) as u64;
    let nn = n as u64;
    let h_cost = h.apply_cost();
    let track_r = opts.track_residual_vector || opts.stop.needs_residual_vector();
    let keep_basis = opts.track_basis || opts.reorthogonalize;

    let mut w = match opts.initial_guess {
        Some(w0) if w0.len() != n => return Err(Error::shape("initial guess", n, w0.len())),
        Some(w0) => w0.to_vec(),
        None => vec![0.0; n],
    };

    // r_0 = g - H w_0
    let mut flops = h_cost + nn;
    let mut r = h.apply_alloc(&w);
    for (ri, gi) in r.iter_mut().zip(g) {
        *ri = gi - *ri;
    }
    if let Some(p) = &proj {
        // w_0 += U C^T r_0, r_0 -= C C^T r_0
        let z = p.ct(&r);
        let uz = p.u * &z;
        let cz = p.c * &z;
        axpy(1.0, uz.as_slice(), &mut w);
        axpy(-1.0, cz.as_slice(), &mut r);
        flops += 6 * nn * s;
    }
    let beta1 = norm(&r);
    flops += 2 * nn;
    let mut v = r.clone();
    if beta1 > 0.0 {
        scale(1.0 / beta1, &mut v);
    }
    flops += nn;

    let g_norm = norm(g);
    let breakdown_floor = BREAKDOWN_TOL * if g_norm > 0.0 { g_norm } else { beta1 };

    let mut state = TridiagState {
        beta: beta1,
        rotations: [(1.0, 0.0), (1.0, 0.0), (0.0, 0.0)],
        zeta: beta1,
        ..TridiagState::default()
    };
    let mut residual_norms = vec![beta1];
    let first_value = opts.stop.value(beta1, Some(&r));
    let mut stop_values = vec![first_value];
    let mut residual = if track_r { Some(r) } else { None };
    observer(&IterationView {
        iteration: 0,
        solution: &w,
        residual: residual.as_deref(),
        residual_norm: beta1,
        stop_value: first_value,
        state: &state,
    });

    let mut basis: Vec<Vec<f64>> = Vec::new();
    let mut reason = StopReason::MaxIter;
    let mut iterations = 0;
    if opts.stop.is_satisfied(first_value) {
        reason = StopReason::Tolerance;
    } else {
        let mut v_prev = vec![0.0; n];
        // v~_{k-1}, v~_{k-2} and the recycled counterparts b~.
        let mut vt1 = vec![0.0; n];
        let mut vt2 = vec![0.0; n];
        let mut bt1 = vec![0.0; n];
        let mut bt2 = vec![0.0; n];
        // H d~_{k-1}, H d~_{k-2} with d~ = v~ - b~ (residual recurrence).
        let mut hd1 = vec![0.0; n];
        let mut hd2 = vec![0.0; n];
        let mut hv = vec![0.0; n];
        // c_{k-1}, s_{k-1}, c_{k-2}, s_{k-2}
        let (mut c1, mut s1, mut c2, mut s2) = (1.0, 0.0, 0.0, 0.0);
        let mut beta = beta1;
        let mut zeta = beta1;

        for k in 1..=opts.max_iter {
            iterations = k;
            if keep_basis {
                basis.push(v.clone());
            }
            h.apply(&v, &mut hv);
            flops += h_cost;
            let mut v_next = hv.clone();
            let mut b = None;
            let mut cc_hv = None;
            if let Some(p) = &proj {
                let z = p.ct(&hv);
                let bk = p.u * &z;
                let cz = p.c * &z;
                axpy(-1.0, cz.as_slice(), &mut v_next);
                b = Some(bk);
                cc_hv = Some(cz);
                flops = flops + 6 * nn * s - nn - s;
            }
            let alpha = dot(&v, &v_next);
            axpy(-alpha, &v, &mut v_next);
            axpy(-beta, &v_prev, &mut v_next);
            if opts.reorthogonalize {
                if let Some(p) = &proj {
                    let z = p.ct(&v_next);
                    axpy(-1.0, (p.c * z).as_slice(), &mut v_next);
                }
                for q in &basis {
                    let hq = dot(q, &v_next);
                    axpy(-hq, q, &mut v_next);
                }
            }
            let beta_next = norm(&v_next);
            let lucky = beta_next <= breakdown_floor;
            if !lucky {
                scale(1.0 / beta_next, &mut v_next);
            }
            flops += 9 * nn;

            // Previous two rotations on the new column, then a new one for beta_{k+1}.
            let gamma = s2 * beta;
            let delta = c1 * c2 * beta + s1 * alpha;
            let epsilon = -s1 * c2 * beta + c1 * alpha;
            let beta_rot = if lucky { 0.0 } else { beta_next };
            let epsilon_tilde = libm::hypot(epsilon, beta_rot);
            if epsilon_tilde == 0.0 {
                // T_k singular; cannot happen for definite H.
                reason = StopReason::Breakdown;
                iterations = k - 1;
                if keep_basis {
                    basis.pop();
                }
                break;
            }
            let ck = epsilon / epsilon_tilde;
            let sk = beta_rot / epsilon_tilde;
            let tau = ck * zeta;
            let zeta_k = -sk * zeta;

            let mut vt: Vec<f64> = v.clone();
            axpy(-gamma, &vt2, &mut vt);
            axpy(-delta, &vt1, &mut vt);
            scale(1.0 / epsilon_tilde, &mut vt);
            flops += 5 * nn;
            let mut direction = vt.clone();
            let mut bt = Vec::new();
            if let Some(bk) = &b {
                bt = bk.as_slice().to_vec();
                axpy(-gamma, &bt2, &mut bt);
                axpy(-delta, &bt1, &mut bt);
                scale(1.0 / epsilon_tilde, &mut bt);
                axpy(-1.0, &bt, &mut direction);
                flops += 6 * nn;
            }
            axpy(tau, &direction, &mut w);
            flops += 2 * nn;

            if let Some(rv) = residual.as_mut() {
                // H d~_k = ((I - C C^T) H v_k - delta H d~_{k-1} - gamma H d~_{k-2}) / eps~
                let mut hd = hv.clone();
                if let Some(cz) = &cc_hv {
                    axpy(-1.0, cz.as_slice(), &mut hd);
                }
                axpy(-delta, &hd1, &mut hd);
                axpy(-gamma, &hd2, &mut hd);
                scale(1.0 / epsilon_tilde, &mut hd);
                axpy(-tau, &hd, rv);
                hd2 = core::mem::replace(&mut hd1, hd);
            }

            state = TridiagState {
                alpha,
                beta,
                beta_next,
                gamma,
                delta,
                epsilon,
                epsilon_tilde,
                rotations: [(ck, sk), (c1, s1), (c2, s2)],
                zeta: zeta_k,
            };
            let res_norm = zeta_k.abs();
            let value = opts.stop.value(res_norm, residual.as_deref());
            residual_norms.push(res_norm);
            stop_values.push(value);
            observer(&IterationView {
                iteration: k,
                solution: &w,
                residual: residual.as_deref(),
                residual_norm: res_norm,
                stop_value: value,
                state: &state,
            });
            if opts.stop.is_satisfied(value) {
                reason = StopReason::Tolerance;
                break;
            }
            if lucky {
                reason = StopReason::Breakdown;
                break;
            }

            v_prev = core::mem::replace(&mut v, v_next);
            beta = beta_next;
            zeta = zeta_k;
            (c2, s2) = (c1, s1);
            (c1, s1) = (ck, sk);
            vt2 = core::mem::replace(&mut vt1, vt);
            if b.is_some() {
                bt2 = core::mem::replace(&mut bt1, bt);
            }
        }
    }

    let basis = if opts.track_basis {
        let mut m = DMatrix::zeros(n, basis.len());
        for (j, col) in basis.iter().enumerate() {
            m.column_mut(j).copy_from_slice(col);
        }
        Some(m)
    } else {
        None
    };
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
