//! Inverting positive-definite matrices with matrix exponentials.
//!
//! A fixed, matrix-independent set of pairs `(t_j, w_j)` satisfies
//! `(1 - eps)/x <= sum_j w_j exp(-t_j x) <= (1 + eps)/x` for all
//! `x` in `[delta, 1]`, using only polylogarithmically many terms in
//! `1/(eps delta)`. Applied to a symmetric matrix with spectrum in
//! `[delta, 1]` the same sum approximates `A^{-1}` in the Loewner order.
//!
//! - [`bernoulli`]: exact Bernoulli numbers, polynomials and their bounds.
//! - [`em`]: trapezoidal rule, Euler-Maclaurin residuals, derivatives of
//!   the integrand `exp(-x e^s + s)`.
//! - [`expsum`]: parameter selection, node/weight generation, certification.
//! - [`matfun`]: Jacobi eigensolver, exponential actions, inverse application.
//! - [`lapdemo`]: graph-Laplacian solves through heat-kernel actions.
//! - [`cli`]: the `expinv` command line.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bernoulli;
pub mod cli;
pub mod em;
pub mod error;
pub mod expsum;
pub mod lapdemo;
pub mod matfun;
pub mod sum;

pub use error::{Error, Result};
