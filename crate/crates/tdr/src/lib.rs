//! Time-delay reservoir (TDR) computing at desk scale.
//!
//! A TDR samples the solution of a forced delay-differential equation
//! `x'(s) = -x(s) + f(x(s - tau), I(s), theta)` at `N` points per delay
//! period ("virtual neurons") and trains an affine readout on the sampled
//! states by ridge regression. This crate provides
//!
//! * ground-truth simulation of single and parallel TDRs in discrete and
//!   continuous time ([`sim`]),
//! * a VAR(1) moment model of the reservoir obtained by partial
//!   linearization at a stable equilibrium, which makes the memory capacity
//!   of a configuration computable in closed form ([`model`], [`tasks`],
//!   [`readout`]),
//! * the matrix-calculus toolbox the model needs: vec/vech machinery,
//!   hafnians, Gaussian higher-order moments, sparse multivariate
//!   polynomials, and a Stein-equation solver ([`linalg`], [`poly`]),
//! * finite-sample theory for the ridge readout: sampling distribution of
//!   the estimator and the total (characteristic + estimation) error
//!   ([`readout`]).

pub mod error;
pub mod kernels;
pub mod linalg;
pub mod model;
pub mod poly;
pub mod readout;
pub mod sim;
pub mod tasks;

pub use error::{Result, TdrError};
