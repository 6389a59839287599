use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};

/// Image dimensions; pixels are stored row-major.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct ImageShape {
    pub rows: usize,
    pub cols: usize,
}

impl ImageShape {
    pub fn new(rows: usize, cols: usize) -> Self {
        Self { rows, cols }
    }

    pub fn len(&self) -> usize {
        self.rows * self.cols
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// A flattened image with its shape.
#[derive(Debug, Clone, PartialEq)]
pub struct ImageVector {
    data: Vec<f64>,
    shape: ImageShape,
}

impl ImageVector {
    pub fn new(data: Vec<f64>, shape: ImageShape) -> Result<Self> {
        if data.len() != shape.len() {
            return Err(Error::shape("image data", shape.len(), data.len()));
        }
        if !crate::vector::all_finite(&data) {
            return Err(Error::NonFinite("image data"));
        }
        Ok(Self { data, shape })
    }

    pub fn zeros(shape: ImageShape) -> Self {
        Self {
            data: vec![0.0; shape.len()],
            shape,
        }
    }

    pub fn shape(&self) -> ImageShape {
        self.shape
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.data
    }
}

/// Square convolution kernel of odd side `q`, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Kernel {
    size: usize,
    weights: Vec<f64>,
}

impl Kernel {
    pub fn new(size: usize, weights: Vec<f64>) -> Result<Self> {
        if size.is_multiple_of(2) {
            return Err(Error::InvalidParameter(alloc::format!(
                "kernel size must be odd, got {size}"
            )));
        }
        if weights.len() != size * size {
            return Err(Error::shape("kernel weights", size * size, weights.len()));
        }
        Ok(Self { size, weights })
    }

    pub fn zeros(size: usize) -> Self {
        Self::new(size, vec![0.0; size * size]).expect("odd kernel size")
    }

    /// Kernel with a single one at `(a, b)`.
    pub fn indicator(size: usize, a: usize, b: usize) -> Self {
        let mut k = Self::zeros(size);
        k.weights[a * size + b] = 1.0;
        k
    }

    pub fn identity(size: usize) -> Self {
        Self::indicator(size, size / 2, size / 2)
    }

    pub fn size(&self) -> usize {
        self.size
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn center(&self) -> usize {
        self.size / 2
    }
}

/// Shifts `x` by `(di, dj)` with zero fill: `out[i, j] = x[i - di, j - dj]`.
pub(crate) fn shift_into(shape: ImageShape, x: &[f64], di: isize, dj: isize, out: &mut [f64]) {
    let (rows, cols) = (shape.rows as isize, shape.cols as isize);
    for i in 0..rows {
        let si = i - di;
        let row = &mut out[(i * cols) as usize..((i + 1) * cols) as usize];
        if si < 0 || si >= rows {
            row.iter_mut().for_each(|v| *v = 0.0);
            continue;
        }
        for j in 0..cols {
            let sj = j - dj;
            row[j as usize] = if sj < 0 || sj >= cols {
                0.0
            } else {
                x[(si * cols + sj) as usize]
            };
        }
    }
}

/// `out = k * x`: true convolution (flipped kernel), zero boundary, same size.
///
/// `out[i, j] = sum_{a, b} k[a, b] x[i + c - a, j + c - b]` with `c = q / 2`.
pub fn conv2d_into(kernel: &Kernel, shape: ImageShape, x: &[f64], out: &mut [f64]) {
    let (rows, cols) = (shape.rows as isize, shape.cols as isize);
    let q = kernel.size;
    let c = kernel.center() as isize;
    out.iter_mut().for_each(|v| *v = 0.0);
    for a in 0..q {
        for b in 0..q {
            let w = kernel.weights[a * q + b];
            if w == 0.0 {
                continue;
            }
            let di = a as isize - c;
            let dj = b as isize - c;
            // out[i, j] += w x[i - di, j - dj]
            let i0 = di.max(0);
            let i1 = (rows + di).min(rows);
            let j0 = dj.max(0);
            let j1 = (cols + dj).min(cols);
            for i in i0..i1 {
                let src = ((i - di) * cols) as usize;
                let dst = (i * cols) as usize;
                for j in j0..j1 {
                    out[dst + j as usize] += w * x[src + (j - dj) as usize];
                }
            }
        }
    }
}

/// `out = K^T y`, the adjoint of [`conv2d_into`] (a correlation).
pub fn conv2d_adjoint_into(kernel: &Kernel, shape: ImageShape, y: &[f64], out: &mut [f64]) {
    let (rows, cols) = (shape.rows as isize, shape.cols as isize);
    let q = kernel.size;
    let c = kernel.center() as isize;
    out.iter_mut().for_each(|v| *v = 0.0);
    for a in 0..q {
        for b in 0..q {
            let w = kernel.weights[a * q + b];
            if w == 0.0 {
                continue;
            }
            let di = a as isize - c;
            let dj = b as isize - c;
            // out[m, l] += w y[m + di, l + dj]
            let i0 = (-di).max(0);
            let i1 = (rows - di).min(rows);
            let j0 = (-dj).max(0);
            let j1 = (cols - dj).min(cols);
            for m in i0..i1 {
                let src = ((m + di) * cols) as usize;
                let dst = (m * cols) as usize;
                for l in j0..j1 {
                    out[dst + l as usize] += w * y[src + (l + dj) as usize];
                }
            }
        }
    }
}

pub fn conv2d(kernel: &Kernel, x: &ImageVector) -> Result<ImageVector> {
    let mut out = vec![0.0; x.shape.len()];
    conv2d_into(kernel, x.shape, &x.data, &mut out);
    Ok(ImageVector {
        data: out,
        shape: x.shape,
    })
}

pub fn conv2d_adjoint(kernel: &Kernel, x: &ImageVector) -> Result<ImageVector> {
    let mut out = vec![0.0; x.shape.len()];
    conv2d_adjoint_into(kernel, x.shape, &x.data, &mut out);
    Ok(ImageVector {
        data: out,
        shape: x.shape,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::testing::{random_vec, rng};
    use crate::vector::dot;
    use nalgebra::DMatrix;

    /// Direct quadruple loop, independent of the shifted-block implementation.
    fn brute_conv(k: &Kernel, shape: ImageShape, x: &[f64]) -> Vec<f64> {
        let q = k.size() as isize;
        let c = q / 2;
        let mut out = vec![0.0; shape.len()];
        for i in 0..shape.rows as isize {
            for j in 0..shape.cols as isize {
                let mut acc = 0.0;
                for a in 0..q {
                    for b in 0..q {
                        let si = i + c - a;
                        let sj = j + c - b;
                        if si >= 0 && sj >= 0 && si < shape.rows as isize && sj < shape.cols as isize {
                            acc += k.weights()[(a * q + b) as usize]
                                * x[(si * shape.cols as isize + sj) as usize];
                        }
                    }
                }
                out[(i * shape.cols as isize + j) as usize] = acc;
            }
        }
        out
    }

    fn dense_conv_matrix(k: &Kernel, shape: ImageShape) -> DMatrix<f64> {
        let n = shape.len();
        let mut m = DMatrix::zeros(n, n);
        for j in 0..n {
            let mut e = vec![0.0; n];
            e[j] = 1.0;
            let col = brute_conv(k, shape, &e);
            m.column_mut(j).copy_from_slice(&col);
        }
        m
    }

    #[test]
    fn identity_kernel_is_identity() {
        let mut r = rng(1);
        let shape = ImageShape::new(5, 4);
        let x = ImageVector::new(random_vec(&mut r, 20), shape).unwrap();
        for q in [1, 3, 5] {
            let k = Kernel::identity(q);
            assert_eq!(conv2d(&k, &x).unwrap(), x);
            assert_eq!(conv2d_adjoint(&k, &x).unwrap(), x);
        }
    }

    #[test]
    fn zero_kernel_gives_zero() {
        let mut r = rng(2);
        let shape = ImageShape::new(4, 4);
        let x = ImageVector::new(random_vec(&mut r, 16), shape).unwrap();
        let y = conv2d(&Kernel::zeros(3), &x).unwrap();
        assert!(y.as_slice().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn matches_brute_force_loop() {
        let mut r = rng(3);
        let shape = ImageShape::new(4, 4);
        let k = Kernel::new(3, random_vec(&mut r, 9)).unwrap();
        let x = random_vec(&mut r, 16);
        let mut out = vec![0.0; 16];
        conv2d_into(&k, shape, &x, &mut out);
        let expected = brute_conv(&k, shape, &x);
        for (a, b) in out.iter().zip(&expected) {
            assert!((a - b).abs() < 1e-14);
        }
        // 5x5 kernel on a non-square image exercises both boundaries.
        let shape = ImageShape::new(6, 3);
        let k = Kernel::new(5, random_vec(&mut r, 25)).unwrap();
        let x = random_vec(&mut r, 18);
        let mut out = vec![0.0; 18];
        conv2d_into(&k, shape, &x, &mut out);
        for (a, b) in out.iter().zip(&brute_conv(&k, shape, &x)) {
            assert!((a - b).abs() < 1e-13);
        }
    }

    #[test]
    fn adjoint_matches_transposed_dense_matrix() {
        let mut r = rng(4);
        let shape = ImageShape::new(5, 6);
        let k = Kernel::new(3, random_vec(&mut r, 9)).unwrap();
        let m = dense_conv_matrix(&k, shape);
        let y = random_vec(&mut r, 30);
        let expected = m.transpose() * nalgebra::DVector::from_column_slice(&y);
        let mut out = vec![0.0; 30];
        conv2d_adjoint_into(&k, shape, &y, &mut out);
        for i in 0..30 {
            assert!((out[i] - expected[i]).abs() < 1e-13);
        }
    }

    #[test]
    fn adjoint_identity_on_random_pairs() {
        let mut r = rng(5);
        let shape = ImageShape::new(7, 7);
        let k = Kernel::new(5, random_vec(&mut r, 25)).unwrap();
        for _ in 0..10 {
            let u = random_vec(&mut r, 49);
            let v = random_vec(&mut r, 49);
            let mut ku = vec![0.0; 49];
            let mut ktv = vec![0.0; 49];
            conv2d_into(&k, shape, &u, &mut ku);
            conv2d_adjoint_into(&k, shape, &v, &mut ktv);
            let lhs = dot(&ku, &v);
            let rhs = dot(&u, &ktv);
            assert!((lhs - rhs).abs() <= 1e-12 * lhs.abs().max(1.0));
        }
    }

    #[test]
    fn linear_in_image() {
        let mut r = rng(6);
        let shape = ImageShape::new(6, 5);
        let k = Kernel::new(3, random_vec(&mut r, 9)).unwrap();
        let u = random_vec(&mut r, 30);
        let v = random_vec(&mut r, 30);
        let (alpha, beta) = (0.7, -1.3);
        let comb: Vec<f64> = u.iter().zip(&v).map(|(a, b)| alpha * a + beta * b).collect();
        let (mut ku, mut kv, mut kc) = (vec![0.0; 30], vec![0.0; 30], vec![0.0; 30]);
        conv2d_into(&k, shape, &u, &mut ku);
        conv2d_into(&k, shape, &v, &mut kv);
        conv2d_into(&k, shape, &comb, &mut kc);
        for i in 0..30 {
            assert!((kc[i] - (alpha * ku[i] + beta * kv[i])).abs() < 1e-13);
        }
    }

    #[test]
    fn shift_matches_indicator_kernel() {
        let mut r = rng(7);
        let shape = ImageShape::new(5, 5);
        let x = random_vec(&mut r, 25);
        for a in 0..3 {
            for b in 0..3 {
                let k = Kernel::indicator(3, a, b);
                let mut via_conv = vec![0.0; 25];
                conv2d_into(&k, shape, &x, &mut via_conv);
                let mut via_shift = vec![0.0; 25];
                shift_into(shape, &x, a as isize - 1, b as isize - 1, &mut via_shift);
                assert_eq!(via_conv, via_shift);
            }
        }
    }

    #[test]
    fn rejects_bad_shapes() {
        assert!(Kernel::new(4, vec![0.0; 16]).is_err());
        assert!(Kernel::new(3, vec![0.0; 8]).is_err());
        assert!(ImageVector::new(vec![0.0; 5], ImageShape::new(2, 3)).is_err());
        assert!(ImageVector::new(vec![f64::NAN; 4], ImageShape::new(2, 2)).is_err());
    }
}
