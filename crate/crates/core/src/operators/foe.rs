//! Fields-of-Experts inpainting lower-level problem
//!
//! `L(x, theta) = 1/2 ||A x - y||^2 + eps/2 ||x||^2 + sum_i exp(theta0_i) ||k_i * x||^2`
//!
//! where `A` keeps a subset of pixels. The cost is quadratic in `x`, so the
//! Hessian does not depend on the point of evaluation.

use alloc::vec;
use alloc::vec::Vec;

use super::conv::{conv2d_adjoint_into, conv2d_into, shift_into, ImageShape, Kernel};
use super::{AdjointJacobian, SymmetricOperator};
use crate::error::{Error, Result};
use crate::vector::{all_finite, dot};

/// Log-weights are clamped to `[-LOG_WEIGHT_CLAMP, LOG_WEIGHT_CLAMP]` before exponentiation.
pub const LOG_WEIGHT_CLAMP: f64 = 30.0;

fn clamped_exp(t: f64) -> (f64, bool) {
    let c = t.clamp(-LOG_WEIGHT_CLAMP, LOG_WEIGHT_CLAMP);
    (libm::exp(c), c != t)
}

/// Filter parameters: one log-weight and one `q x q` kernel per expert.
#[derive(Debug, Clone, PartialEq)]
pub struct FoeParams {
    pub log_weights: Vec<f64>,
    pub kernels: Vec<Kernel>,
}

impl FoeParams {
    pub fn new(log_weights: Vec<f64>, kernels: Vec<Kernel>) -> Result<Self> {
        if log_weights.len() != kernels.len() {
            return Err(Error::shape("FoE log-weights", kernels.len(), log_weights.len()));
        }
        if let Some(first) = kernels.first() {
            if kernels.iter().any(|k| k.size() != first.size()) {
                return Err(Error::InvalidParameter("all FoE kernels must share a size".into()));
            }
        }
        Ok(Self {
            log_weights,
            kernels,
        })
    }

    pub fn num_filters(&self) -> usize {
        self.kernels.len()
    }

    pub fn kernel_size(&self) -> usize {
        self.kernels.first().map_or(0, Kernel::size)
    }

    /// Flattened length `N (1 + q^2)`.
    pub fn len(&self) -> usize {
        let q = self.kernel_size();
        self.num_filters() * (1 + q * q)
    }

    pub fn is_empty(&self) -> bool {
        self.kernels.is_empty()
    }

    /// `[theta0_1, kernel_1..., theta0_2, kernel_2..., ...]`
    pub fn flatten(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.len());
        for (w, k) in self.log_weights.iter().zip(&self.kernels) {
            out.push(*w);
            out.extend_from_slice(k.weights());
        }
        out
    }

    pub fn unflatten(num_filters: usize, kernel_size: usize, theta: &[f64]) -> Result<Self> {
        let block = 1 + kernel_size * kernel_size;
        if theta.len() != num_filters * block {
            return Err(Error::shape("flattened FoE parameters", num_filters * block, theta.len()));
        }
        let mut log_weights = Vec::with_capacity(num_filters);
        let mut kernels = Vec::with_capacity(num_filters);
        for chunk in theta.chunks(block) {
            log_weights.push(chunk[0]);
            kernels.push(Kernel::new(kernel_size, chunk[1..].to_vec())?);
        }
        Ok(Self {
            log_weights,
            kernels,
        })
    }

    /// Same layout, new values.
    pub fn with_values(&self, theta: &[f64]) -> Result<Self> {
        Self::unflatten(self.num_filters(), self.kernel_size(), theta)
    }
}

/// Subsampled, noisy observation of an image together with the ridge weight.
#[derive(Debug, Clone, PartialEq)]
pub struct InpaintingProblem {
    shape: ImageShape,
    mask_rows: Vec<usize>,
    mask: Vec<f64>,
    y: Vec<f64>,
    ridge: f64,
    x_true: Option<Vec<f64>>,
}

impl InpaintingProblem {
    pub fn new(
        shape: ImageShape,
        mask_rows: Vec<usize>,
        y: Vec<f64>,
        ridge: f64,
        x_true: Option<Vec<f64>>,
    ) -> Result<Self> {
        let n = shape.len();
        if !(ridge > 0.0) || !ridge.is_finite() {
            return Err(Error::InvalidParameter(alloc::format!("ridge must be positive, got {ridge}")));
        }
        if y.len() != mask_rows.len() {
            return Err(Error::shape("observation", mask_rows.len(), y.len()));
        }
        if !all_finite(&y) {
            return Err(Error::NonFinite("observation"));
        }
        let mut mask = vec![0.0; n];
        for &i in &mask_rows {
            if i >= n {
                return Err(Error::InvalidParameter(alloc::format!("mask index {i} out of range for n = {n}")));
            }
            if mask[i] != 0.0 {
                return Err(Error::InvalidParameter(alloc::format!("duplicate mask index {i}")));
            }
            mask[i] = 1.0;
        }
        if let Some(x) = &x_true {
            if x.len() != n {
                return Err(Error::shape("ground truth", n, x.len()));
            }
        }
        Ok(Self {
            shape,
            mask_rows,
            mask,
            y,
            ridge,
            x_true,
        })
    }

    pub fn shape(&self) -> ImageShape {
        self.shape
    }
    pub fn dim(&self) -> usize {
        self.shape.len()
    }
    pub fn mask_rows(&self) -> &[usize] {
        &self.mask_rows
    }
    /// Diagonal of `A^T A`.
    pub fn mask(&self) -> &[f64] {
        &self.mask
    }
    pub fn observation(&self) -> &[f64] {
        &self.y
    }
    pub fn ridge(&self) -> f64 {
        self.ridge
    }
    pub fn x_true(&self) -> Option<&[f64]> {
        self.x_true.as_deref()
    }

    /// `A x`
    pub fn subsample(&self, x: &[f64]) -> Vec<f64> {
        self.mask_rows.iter().map(|&i| x[i]).collect()
    }

    /// `A^T y`
    pub fn scatter(&self, y: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.dim()];
        for (&i, &v) in self.mask_rows.iter().zip(y) {
            out[i] = v;
        }
        out
    }

    fn check(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.dim() {
            return Err(Error::shape("image", self.dim(), x.len()));
        }
        Ok(())
    }
}

/// Value of the lower-level cost.
pub fn foe_cost(x: &[f64], theta: &FoeParams, prob: &InpaintingProblem) -> Result<f64> {
    prob.check(x)?;
    let shape = prob.shape;
    let ax = prob.subsample(x);
    let data: f64 = ax.iter().zip(&prob.y).map(|(a, b)| (a - b) * (a - b)).sum();
    let mut value = 0.5 * data + 0.5 * prob.ridge * dot(x, x);
    let mut kx = vec![0.0; x.len()];
    for (t, k) in theta.log_weights.iter().zip(&theta.kernels) {
        conv2d_into(k, shape, x, &mut kx);
        value += clamped_exp(*t).0 * dot(&kx, &kx);
    }
    if !value.is_finite() {
        return Err(Error::NonFinite("lower-level cost"));
    }
    Ok(value)
}

/// `grad_x L = A^T (A x - y) + eps x + 2 sum_i exp(theta0_i) K_i^T K_i x`
pub fn foe_gradient(x: &[f64], theta: &FoeParams, prob: &InpaintingProblem) -> Result<Vec<f64>> {
    prob.check(x)?;
    let mut g: Vec<f64> = x.iter().map(|v| prob.ridge * v).collect();
    for (&i, &yi) in prob.mask_rows.iter().zip(&prob.y) {
        g[i] += x[i] - yi;
    }
    let shape = prob.shape;
    let n = x.len();
    let (mut kx, mut ktkx) = (vec![0.0; n], vec![0.0; n]);
    for (t, k) in theta.log_weights.iter().zip(&theta.kernels) {
        let w = 2.0 * clamped_exp(*t).0;
        conv2d_into(k, shape, x, &mut kx);
        conv2d_adjoint_into(k, shape, &kx, &mut ktkx);
        crate::vector::axpy(w, &ktkx, &mut g);
    }
    Ok(g)
}

/// Hessian `A^T A + eps I + 2 sum_i exp(theta0_i) K_i^T K_i` as a matrix-free operator.
#[derive(Debug, Clone)]
pub struct FoeHessian {
    shape: ImageShape,
    mask: Vec<f64>,
    ridge: f64,
    weights: Vec<f64>,
    kernels: Vec<Kernel>,
    clamped: bool,
}

impl FoeHessian {
    /// True when some log-weight had to be clamped before exponentiation.
    pub fn clamped(&self) -> bool {
        self.clamped
    }

    pub fn kernels(&self) -> &[Kernel] {
        &self.kernels
    }

    /// `2 exp(theta0_i)` per filter.
    pub fn filter_weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn shape(&self) -> ImageShape {
        self.shape
    }

    /// Applies only the filter part `2 sum_i exp(theta0_i) K_i^T K_i`.
    pub fn apply_filters(&self, x: &[f64], y: &mut [f64]) {
        let n = x.len();
        y.iter_mut().for_each(|v| *v = 0.0);
        let (mut kx, mut ktkx) = (vec![0.0; n], vec![0.0; n]);
        for (w, k) in self.weights.iter().zip(&self.kernels) {
            conv2d_into(k, self.shape, x, &mut kx);
            conv2d_adjoint_into(k, self.shape, &kx, &mut ktkx);
            crate::vector::axpy(*w, &ktkx, y);
        }
    }
}

impl SymmetricOperator for FoeHessian {
    fn dim(&self) -> usize {
        self.shape.len()
    }

    fn apply(&self, x: &[f64], y: &mut [f64]) {
        self.apply_filters(x, y);
        for ((yi, xi), mi) in y.iter_mut().zip(x).zip(&self.mask) {
            *yi += (mi + self.ridge) * xi;
        }
    }

    /// Mask and ridge (`3n`) plus, per filter, a convolution and its adjoint
    /// (`2 q^2 n` each) and the weighted accumulation (`2n`).
    fn apply_cost(&self) -> u64 {
        let n = self.dim() as u64;
        let q = self.kernels.first().map_or(0, Kernel::size) as u64;
        3 * n + self.kernels.len() as u64 * (4 * q * q * n + 2 * n)
    }
}

pub fn foe_hessian(theta: &FoeParams, prob: &InpaintingProblem) -> FoeHessian {
    let mut clamped = false;
    let weights = theta
        .log_weights
        .iter()
        .map(|&t| {
            let (e, c) = clamped_exp(t);
            clamped |= c;
            2.0 * e
        })
        .collect();
    FoeHessian {
        shape: prob.shape,
        mask: prob.mask.clone(),
        ridge: prob.ridge,
        weights,
        kernels: theta.kernels.clone(),
        clamped,
    }
}

/// `J = -(D^2_{theta x} L)^T` at a fixed reconstruction.
#[derive(Debug, Clone)]
pub struct MixedJacobian {
    shape: ImageShape,
    exp_weights: Vec<f64>,
    kernels: Vec<Kernel>,
    /// `K_i x` per filter.
    kx: Vec<Vec<f64>>,
    /// `K_i^T K_i x` per filter.
    ktkx: Vec<Vec<f64>>,
    /// `E_a x` for every kernel offset `a`, row-major over the kernel.
    shifted_x: Vec<Vec<f64>>,
}

impl MixedJacobian {
    fn q(&self) -> usize {
        self.kernels.first().map_or(0, Kernel::size)
    }
}

impl AdjointJacobian for MixedJacobian {
    fn rows(&self) -> usize {
        let q = self.q();
        self.kernels.len() * (1 + q * q)
    }

    fn cols(&self) -> usize {
        self.shape.len()
    }

    fn apply(&self, w: &[f64], out: &mut [f64]) {
        let n = self.shape.len();
        let q = self.q();
        let c = (q / 2) as isize;
        let block = 1 + q * q;
        let mut shifted_w = vec![vec![0.0; n]; q * q];
        for a in 0..q {
            for b in 0..q {
                shift_into(self.shape, w, a as isize - c, b as isize - c, &mut shifted_w[a * q + b]);
            }
        }
        let mut kw = vec![0.0; n];
        for (i, k) in self.kernels.iter().enumerate() {
            let scale = -2.0 * self.exp_weights[i];
            let o = &mut out[i * block..(i + 1) * block];
            o[0] = scale * dot(&self.ktkx[i], w);
            conv2d_into(k, self.shape, w, &mut kw);
            for a in 0..q * q {
                o[1 + a] = scale * (dot(&self.kx[i], &shifted_w[a]) + dot(&self.shifted_x[a], &kw));
            }
        }
    }
}

pub fn mixed_jacobian(theta: &FoeParams, x_hat: &[f64], prob: &InpaintingProblem) -> Result<MixedJacobian> {
    prob.check(x_hat)?;
    let shape = prob.shape;
    let n = shape.len();
    let q = theta.kernel_size();
    let c = (q / 2) as isize;
    let mut kx = Vec::with_capacity(theta.num_filters());
    let mut ktkx = Vec::with_capacity(theta.num_filters());
    for k in &theta.kernels {
        let mut a = vec![0.0; n];
        let mut b = vec![0.0; n];
        conv2d_into(k, shape, x_hat, &mut a);
        conv2d_adjoint_into(k, shape, &a, &mut b);
        kx.push(a);
        ktkx.push(b);
    }
    let mut shifted_x = vec![vec![0.0; n]; q * q];
    for a in 0..q {
        for b in 0..q {
            shift_into(shape, x_hat, a as isize - c, b as isize - c, &mut shifted_x[a * q + b]);
        }
    }
    Ok(MixedJacobian {
        shape,
        exp_weights: theta.log_weights.iter().map(|&t| clamped_exp(t).0).collect(),
        kernels: theta.kernels.clone(),
        kx,
        ktkx,
        shifted_x,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dense::materialize;
    use crate::testing::{random_vec, rng, unit_vec};
    use crate::vector::norm;

    fn small_problem(seed: u64, rows: usize, cols: usize, filters: usize, q: usize) -> (InpaintingProblem, FoeParams, Vec<f64>) {
        let mut r = rng(seed);
        let n = rows * cols;
        let mask_rows: Vec<usize> = (0..n).filter(|i| i % 3 != 1).collect();
        let y = random_vec(&mut r, mask_rows.len());
        let prob = InpaintingProblem::new(ImageShape::new(rows, cols), mask_rows, y, 1e-6, None).unwrap();
        let log_weights = random_vec(&mut r, filters).iter().map(|v| 0.3 * v).collect();
        let kernels = (0..filters)
            .map(|_| Kernel::new(q, random_vec(&mut r, q * q).iter().map(|v| 0.5 * v).collect()).unwrap())
            .collect();
        let theta = FoeParams::new(log_weights, kernels).unwrap();
        let x = random_vec(&mut r, n);
        (prob, theta, x)
    }

    /// Scalar-arithmetic evaluation of the cost that avoids the convolution helpers.
    fn cost_oracle(x: &[f64], theta: &FoeParams, prob: &InpaintingProblem) -> f64 {
        let (rows, cols) = (prob.shape().rows as isize, prob.shape().cols as isize);
        let mut v = 0.0;
        for (&i, &yi) in prob.mask_rows().iter().zip(prob.observation()) {
            v += 0.5 * (x[i] - yi) * (x[i] - yi);
        }
        for xi in x {
            v += 0.5 * prob.ridge() * xi * xi;
        }
        for (t, k) in theta.log_weights.iter().zip(&theta.kernels) {
            let q = k.size() as isize;
            let c = q / 2;
            let mut s = 0.0;
            for i in 0..rows {
                for j in 0..cols {
                    let mut acc = 0.0;
                    for a in 0..q {
                        for b in 0..q {
                            let (si, sj) = (i + c - a, j + c - b);
                            if si >= 0 && sj >= 0 && si < rows && sj < cols {
                                acc += k.weights()[(a * q + b) as usize] * x[(si * cols + sj) as usize];
                            }
                        }
                    }
                    s += acc * acc;
                }
            }
            v += t.exp() * s;
        }
        v
    }

    #[test]
    fn params_flatten_round_trip() {
        let (_, theta, _) = small_problem(1, 4, 4, 3, 5);
        let flat = theta.flatten();
        assert_eq!(flat.len(), 78);
        assert_eq!(theta.len(), 78);
        assert_eq!(FoeParams::unflatten(3, 5, &flat).unwrap(), theta);
        assert!(FoeParams::unflatten(3, 5, &flat[1..]).is_err());
    }

    #[test]
    fn cost_zero_image_zero_data() {
        let shape = ImageShape::new(3, 3);
        let prob = InpaintingProblem::new(shape, vec![0, 4, 8], vec![0.0; 3], 1e-6, None).unwrap();
        let theta = FoeParams::new(vec![0.5], vec![Kernel::new(3, (0..9).map(f64::from).collect()).unwrap()]).unwrap();
        assert_eq!(foe_cost(&[0.0; 9], &theta, &prob).unwrap(), 0.0);
        assert!(foe_gradient(&[0.0; 9], &theta, &prob).unwrap().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn zero_kernels_leave_data_and_ridge_terms() {
        let (prob, _, x) = small_problem(2, 4, 5, 2, 3);
        let theta = FoeParams::new(vec![1.0, -2.0], vec![Kernel::zeros(3), Kernel::zeros(3)]).unwrap();
        let ax = prob.subsample(&x);
        let res: Vec<f64> = ax.iter().zip(prob.observation()).map(|(a, b)| a - b).collect();
        let expected = 0.5 * dot(&res, &res) + 0.5 * prob.ridge() * dot(&x, &x);
        assert!((foe_cost(&x, &theta, &prob).unwrap() - expected).abs() < 1e-14);
        let g = foe_gradient(&x, &theta, &prob).unwrap();
        let mut g_expected = prob.scatter(&res);
        crate::vector::axpy(prob.ridge(), &x, &mut g_expected);
        for (a, b) in g.iter().zip(&g_expected) {
            assert!((a - b).abs() < 1e-14);
        }
    }

    #[test]
    fn cost_matches_scalar_oracle() {
        let (prob, theta, x) = small_problem(3, 5, 4, 3, 3);
        let v = foe_cost(&x, &theta, &prob).unwrap();
        let o = cost_oracle(&x, &theta, &prob);
        assert!((v - o).abs() <= 1e-12 * o.abs());
    }

    #[test]
    fn gradient_matches_central_differences() {
        let (prob, theta, x) = small_problem(4, 5, 5, 2, 3);
        let g = foe_gradient(&x, &theta, &prob).unwrap();
        let mut r = rng(40);
        let h = 1e-5;
        for _ in 0..5 {
            let d = unit_vec(&mut r, x.len());
            let xp: Vec<f64> = x.iter().zip(&d).map(|(a, b)| a + h * b).collect();
            let xm: Vec<f64> = x.iter().zip(&d).map(|(a, b)| a - h * b).collect();
            let fp = foe_cost(&xp, &theta, &prob).unwrap();
            let fm = foe_cost(&xm, &theta, &prob).unwrap();
            let fd = (fp - fm) / (2.0 * h);
            let an = dot(&g, &d);
            assert!((fd - an).abs() <= 1e-6 * (1.0 + an.abs()), "fd {fd} vs {an}");
        }
    }

    #[test]
    fn hessian_identity_mask_zero_kernels() {
        let shape = ImageShape::new(3, 4);
        let prob = InpaintingProblem::new(shape, (0..12).collect(), vec![0.0; 12], 1e-6, None).unwrap();
        let theta = FoeParams::new(vec![0.0], vec![Kernel::zeros(5)]).unwrap();
        let h = foe_hessian(&theta, &prob);
        let mut r = rng(5);
        let v = random_vec(&mut r, 12);
        let hv = h.apply_alloc(&v);
        for (a, b) in hv.iter().zip(&v) {
            assert!((a - (1.0 + 1e-6) * b).abs() < 1e-15);
        }
    }

    #[test]
    fn hessian_symmetric_and_positive_definite() {
        let (prob, theta, _) = small_problem(6, 6, 6, 3, 5);
        let h = foe_hessian(&theta, &prob);
        let mut r = rng(60);
        for _ in 0..20 {
            let u = random_vec(&mut r, 36);
            let v = random_vec(&mut r, 36);
            let a = dot(&h.apply_alloc(&u), &v);
            let b = dot(&u, &h.apply_alloc(&v));
            assert!((a - b).abs() <= 1e-10 * a.abs().max(b.abs()).max(1e-300));
            let q = dot(&v, &h.apply_alloc(&v));
            assert!(q >= prob.ridge() * dot(&v, &v));
        }
    }

    #[test]
    fn hessian_matches_gradient_differences_and_dense_columns() {
        let (prob, theta, x) = small_problem(7, 6, 6, 2, 3);
        let h = foe_hessian(&theta, &prob);
        let m = materialize(&h);
        let mut r = rng(70);
        let d = random_vec(&mut r, 36);
        let hd = h.apply_alloc(&d);
        let dense = &m * nalgebra::DVector::from_column_slice(&d);
        let step = 1e-4;
        let xp: Vec<f64> = x.iter().zip(&d).map(|(a, b)| a + step * b).collect();
        let xm: Vec<f64> = x.iter().zip(&d).map(|(a, b)| a - step * b).collect();
        let gp = foe_gradient(&xp, &theta, &prob).unwrap();
        let gm = foe_gradient(&xm, &theta, &prob).unwrap();
        let fd: Vec<f64> = gp.iter().zip(&gm).map(|(a, b)| (a - b) / (2.0 * step)).collect();
        let scale = norm(&hd);
        for i in 0..36 {
            assert!((hd[i] - dense[i]).abs() <= 1e-12 * scale);
            assert!((hd[i] - fd[i]).abs() <= 1e-6 * scale);
        }
    }

    #[test]
    fn jacobian_trivial_cases() {
        let (prob, theta, x) = small_problem(8, 5, 5, 3, 3);
        let j = mixed_jacobian(&theta, &x, &prob).unwrap();
        assert_eq!(j.rows(), 30);
        assert!(j.apply_alloc(&[0.0; 25]).iter().all(|&v| v == 0.0));
        let j0 = mixed_jacobian(&theta, &[0.0; 25], &prob).unwrap();
        let mut r = rng(80);
        assert!(j0.apply_alloc(&random_vec(&mut r, 25)).iter().all(|&v| v == 0.0));
    }

    #[test]
    fn jacobian_matches_finite_differences_in_theta() {
        let (prob, theta, x) = small_problem(9, 5, 6, 2, 3);
        let j = mixed_jacobian(&theta, &x, &prob).unwrap();
        let mut r = rng(90);
        let w = random_vec(&mut r, 30);
        let jw = j.apply_alloc(&w);
        let flat = theta.flatten();
        let h = 1e-6;
        let mut fd = vec![0.0; flat.len()];
        for k in 0..flat.len() {
            let mut tp = flat.clone();
            let mut tm = flat.clone();
            tp[k] += h;
            tm[k] -= h;
            let gp = foe_gradient(&x, &theta.with_values(&tp).unwrap(), &prob).unwrap();
            let gm = foe_gradient(&x, &theta.with_values(&tm).unwrap(), &prob).unwrap();
            // J w = -(d/dtheta grad_x L)^T w
            fd[k] = -(dot(&gp, &w) - dot(&gm, &w)) / (2.0 * h);
        }
        let err = norm(&crate::vector::sub(&jw, &fd));
        assert!(err <= 1e-5 * norm(&fd), "rel err {}", err / norm(&fd));
    }

    #[test]
    fn clamps_large_log_weights() {
        let (prob, _, _) = small_problem(10, 3, 3, 1, 3);
        let theta = FoeParams::new(vec![500.0], vec![Kernel::identity(3)]).unwrap();
        let h = foe_hessian(&theta, &prob);
        assert!(h.clamped());
        assert!(h.apply_alloc(&[1.0; 9]).iter().all(|v| v.is_finite()));
    }

    #[test]
    fn rejects_invalid_problems() {
        let shape = ImageShape::new(2, 2);
        assert!(InpaintingProblem::new(shape, vec![0, 0], vec![0.0; 2], 1e-6, None).is_err());
        assert!(InpaintingProblem::new(shape, vec![4], vec![0.0], 1e-6, None).is_err());
        assert!(InpaintingProblem::new(shape, vec![1], vec![0.0], 0.0, None).is_err());
        assert!(InpaintingProblem::new(shape, vec![1], vec![0.0, 1.0], 1e-6, None).is_err());
    }
}
