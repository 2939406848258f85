//! Self-contained numerical kernels: adaptive Runge–Kutta, small-matrix
//! eigensolvers, dense linear solves, logarithmic summation, and the exact
//! propagators used for bidiagonal and tridiagonal flows.
//!
//! Everything here is deliberately dependency-free (beyond `ndarray`
//! containers) and sized for the dimensions this crate actually meets —
//! ladders of a few hundred shells and density matrices up to a few
//! hundred states.

pub mod bidiagonal;
pub mod jacobi;
pub mod linsolve;
pub mod logsum;
pub mod rk;
pub mod tridiag;
pub mod two_by_two;
