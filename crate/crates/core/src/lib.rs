//! Dissipative relaxation of weakly coupled quantum systems towards their
//! ground state.
//!
//! The crate models an `n`-qubit register coupled to a thermal bath within
//! the Born–Markov–secular approximation. It provides:
//!
//! - thermal bath spectra with detailed balance ([`bath`]),
//! - the coupling models whose matrix elements close on small sets of shell
//!   variables ([`model`]),
//! - exact reduced dynamics for those shells: two-level projections, full
//!   shell ladders, and zero-temperature emission cascades ([`reduced`]),
//! - a direct energy-eigenbasis master-equation integrator used as the
//!   reference implementation the reduced forms are checked against
//!   ([`master`]),
//! - relaxation-time extraction, scaling fits, and collective-emission
//!   pulse analysis ([`analysis`]).
//!
//! All physical rates carry the global weak-coupling prefactor `lambda^2`
//! explicitly; nothing is absorbed into rescaled time units.

pub mod analysis;
pub mod bath;
pub mod error;
pub mod master;
pub mod model;
pub mod numeric;
pub mod reduced;

pub use error::{Error, Result};
