//! Truncated multimode Fock-space representation: layouts, states,
//! density operators, Schmidt decompositions, and probe constructors.

pub mod density;
pub mod io;
pub mod layout;
pub mod probe;
pub mod schmidt;
pub mod state;

pub use density::DensityOperator;
pub use layout::{Mode, ModeLayout, ModeRole};
pub use probe::{build_probe, signal_number_distribution, AncillaPolicy, Distribution, ProbeKind, ProbeSpec};
pub use schmidt::{schmidt_ancilla_signal, schmidt_decompose, SchmidtDecomposition, SchmidtTerm};
pub use state::{PureState, DEFAULT_TRUNC_TOL};
