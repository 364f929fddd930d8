//! Estimation algebras of continuous-time filtering systems on Riemannian
//! coordinate charts.
//!
//! The crate builds the operators `L0 = L* - ½|h|²` and multiplication by
//! the observation components, closes them under commutators numerically,
//! produces pointwise certificates that the generated Lie algebra is
//! infinite-dimensional, and solves the unnormalized conditional-density
//! equations on grids for cross-validation.
//!
//! It is `no_std` and needs only `alloc`.

#![no_std]
// whenever std sits anywhere in the build graph (test harness, dev-dependencies)
// its inherent float methods shadow the libm-backed `Float` trait
#![allow(unused_imports)]

extern crate alloc;

pub mod diffop;
pub mod error;
pub mod filter;
pub mod estalg;
pub mod geometry;
pub mod rng;
pub mod symb;
pub mod tol;

#[cfg(test)]
mod testgen;

pub use error::{DomainError, Error, ParseError, Result};
pub use symb::Expr;
pub use tol::Tolerances;
