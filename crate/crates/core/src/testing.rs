//! Random fixtures shared by the unit tests.

use alloc::vec::Vec;
use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn random_vec(r: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    (0..n).map(|_| r.random_range(-1.0..1.0)).collect()
}

pub fn unit_vec(r: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    let mut v = random_vec(r, n);
    let nv = crate::vector::norm(&v);
    v.iter_mut().for_each(|x| *x /= nv);
    v
}

pub fn random_matrix(r: &mut ChaCha8Rng, rows: usize, cols: usize) -> DMatrix<f64> {
    DMatrix::from_fn(rows, cols, |_, _| r.random_range(-1.0..1.0))
}

pub fn random_orthonormal(r: &mut ChaCha8Rng, n: usize, t: usize) -> DMatrix<f64> {
    random_matrix(r, n, t).qr().q()
}

/// SPD matrix with eigenvalues spread log-uniformly over `[0.1, 10]`.
pub fn random_spd(r: &mut ChaCha8Rng, n: usize) -> DMatrix<f64> {
    let q = random_orthonormal(r, n, n);
    let eig: Vec<f64> = (0..n).map(|_| libm::pow(10.0, r.random_range(-1.0..1.0))).collect();
    let d = DMatrix::from_diagonal(&nalgebra::DVector::from_vec(eig));
    let m = &q * d * q.transpose();
    (&m + m.transpose()) * 0.5
}
