//! Entanglement detection from a handful of local correlation measurements.
//!
//! A state is certified entangled once the squared correlations of distinct
//! full-weight Pauli settings add up to more than one. The crate provides the
//! pieces to pick those settings well: a Schmidt-frame protocol for two
//! qubits, commuting-string decision trees for any number of qubits, and a
//! Monte-Carlo lab to measure how fast each strategy gets there.

pub mod criterion;
pub mod decision;
pub mod error;
pub mod lab;
pub mod pauli;
pub mod schmidt;
pub mod state;
pub mod strings;
pub mod tensor;

pub use criterion::{criterion_sum, CriterionResult, DETECTION_MARGIN};
pub use decision::{
    priorities, two_qubit_tree, DecisionPolicy, MeasureMode, Session, SessionStatus, Strategy,
};
pub use error::{Error, Result};
pub use pauli::{AxisPermutation, PauliAxis, PauliString};
pub use state::QuantumState;
pub use strings::{
    build_branch, commutant_of_seed, maximal_commuting_strings, CommutingString, TreeBranch,
};
pub use tensor::{bloch_vector, correlation, full_tensor, BlochVector, CorrelationTensor};

pub type C64 = num_complex::Complex64;
