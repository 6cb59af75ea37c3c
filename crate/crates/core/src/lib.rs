//! Sparse and low-rank index code design.
//!
//! A scalar linear index code for `K` users is summarized by the matrix
//! `X = U Vᵀ` whose rows of `U` are decoders and rows of `V` are precoders.
//! The number of nonzero off-diagonal entries of `X` is the side information
//! the users must hold, and `rank(X)` is the number of channel uses. This
//! crate searches for sparse unit-diagonal matrices of a prescribed rank with
//! a second-order trust-region method on the quotient manifold of fixed-rank
//! factorizations, and compares against an alternating ℓ1 baseline.
//!
//! Layout:
//! - [`linalg`]: dense helpers (rank, SPD solves, seeded Gaussian draws)
//! - [`manifold`]: quotient geometry of `(U, V)` factor pairs
//! - [`objectives`]: the sparsity-pattern and pattern-completion costs
//! - [`trust_region`]: Riemannian trust-region with truncated CG
//! - [`pipeline`]: two-stage solve, restarts and the rank sweep
//! - [`altmin`] and [`lp`]: the alternating-minimization baseline
//! - [`ic_model`]: index-code semantics, alignment checks, decode simulation
//! - [`cli`]: the `indexcode` command line

// `!(x > 0.0)` is used on purpose so that NaN fails validation.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod altmin;
pub mod cli;
pub mod error;
pub mod ic_model;
pub mod linalg;
pub mod lp;
pub mod manifold;
pub mod objectives;
pub mod pipeline;
pub mod trust_region;

pub use error::{Error, Result};
pub use linalg::DenseMatrix;
pub use manifold::{FactorPoint, TangentVector};
