//! Numerical toolkit for quantum-limited loss sensing on truncated
//! Fock spaces.
//!
//! The crate models ancilla-assisted probing of bosonic pure-loss
//! channels: probe construction under signal-energy constraints, exact
//! channel evolution by Kraus operators or explicit purification,
//! quantum/classical Fisher information in both the transmittance and
//! angle parametrizations, concrete optimal measurements, Monte Carlo
//! estimation against the Cramer-Rao bound, and the energy-constrained
//! Bures distance between loss channels.

pub mod bures;
pub mod channel;
pub mod error;
pub mod fock;
pub mod linalg;
pub mod measurements;
pub mod metrology;
pub mod sim;

pub use error::{Error, Result};
