//! Recycling Krylov solvers for the sequence of Hessian systems that appears
//! when bilevel learning problems are solved with hypergradient descent.
//!
//! The crate is `no_std` (it needs `alloc`). It contains the numerical parts:
//!
//! - [`operators`]: matrix-free symmetric operators, 2-D convolutions and the
//!   Fields-of-Experts inpainting lower-level problem.
//! - [`krylov`]: MINRES, CG and recycling MINRES with FLOP accounting.
//! - [`recycling`]: candidate bases, Ritz / harmonic Ritz / Ritz generalized
//!   singular vector selection and the GSVD of a projected matrix pair.
//! - [`stopping`]: residual, projected hypergradient-error and true
//!   hypergradient-error stop rules.
//! - [`bilevel`]: L-BFGS lower-level solver, hypergradients, Armijo
//!   backtracking and upper-level gradient descent.
//!
//! IO, persistence and the experiment driver live in the `recycle-lab` crate.

#![no_std]
// `!(x > 0.0)` also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

extern crate alloc;

#[cfg(test)]
extern crate std;

pub mod bilevel;
pub mod dense;
pub mod error;
pub mod krylov;
pub mod operators;
pub mod recycling;
pub mod stopping;
pub mod vector;

#[cfg(test)]
pub(crate) mod testing;

pub use error::{Error, Result};
