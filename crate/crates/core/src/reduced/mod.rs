//! Exact closed dynamics in reduced variables.
//!
//! For every coupling family in [`crate::model`] the full `N x N` master
//! equation closes on a small set of aggregated variables:
//!
//! - the four nonlocal couplings close on **two** variables — the solution
//!   population and one aggregate over everything else ([`two_state`]);
//! - the collective bit flip closes on the `n + 1` Hamming shells, a
//!   tridiagonal ladder ([`ladder`]);
//! - at zero temperature the ladder only flows downward and has a
//!   closed-form solution, the emission cascade ([`cascade`]).
//!
//! Each system is built twice: from the *rate* equations (populations only)
//! and from the full *quantum* master equation (which aggregates coherences
//! as well). Comparing the two is the point of this crate.

pub mod cascade;
pub mod ladder;
pub mod two_state;

pub use cascade::{cascade_solution, CascadeCoefficients, CascadeSolution};
pub use ladder::{build_ladder, ladder_rate_eigenvalues, GroundEvaluator, LadderSystem};
pub use two_state::{
    build_two_state, hadamard_initial_z2, quantum_decay_time, rate_decay_time, TwoStateSystem,
};

use crate::error::{Error, Result};

/// Which master equation the reduced system is derived from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Method {
    /// Populations only: the classical rate equation in the energy eigenbasis.
    Rate,
    /// The full quantum master equation, including coherences.
    Quantum,
}

impl Method {
    pub const ALL: [Method; 2] = [Method::Rate, Method::Quantum];

    pub fn label(&self) -> &'static str {
        match self {
            Method::Rate => "rate",
            Method::Quantum => "quantum",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "rate" => Ok(Method::Rate),
            "quantum" => Ok(Method::Quantum),
            other => Err(Error::InvalidParameter(format!(
                "unknown method '{other}' (expected rate or quantum)"
            ))),
        }
    }
}

/// Supported initial preparations of the register.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InitialState {
    /// The maximally mixed state, every basis label with probability `1/N`.
    Mixed,
    /// The pure uniform superposition of all basis labels.
    Superposition,
}

impl InitialState {
    pub fn label(&self) -> &'static str {
        match self {
            InitialState::Mixed => "mixed",
            InitialState::Superposition => "superposition",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "mixed" => Ok(InitialState::Mixed),
            "superposition" => Ok(InitialState::Superposition),
            other => Err(Error::InvalidParameter(format!(
                "unknown initial state '{other}' (expected mixed or superposition)"
            ))),
        }
    }
}
