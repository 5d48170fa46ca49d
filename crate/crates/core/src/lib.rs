//! Dual-rail quantum gates on bosonic lattices.
//!
//! Fixed-particle-number Fock sectors ([`fock`]), Bose-Hubbard Hamiltonians
//! for qubit registers ([`model`]), control pulses ([`pulses`]), exact
//! sector propagation with closed-form oracles ([`propagator`]), synthesis
//! and scoring of `{H, P_phi, C_phi}` ([`gates`]), and the scenario runner
//! behind the `boselat` binary ([`config`], [`scenario`]).

pub mod config;
pub mod error;
pub mod fock;
pub mod gates;
pub mod model;
pub mod propagator;
pub mod pulses;
pub mod scenario;

pub use error::{Error, Result};
