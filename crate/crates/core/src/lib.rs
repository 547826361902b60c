//! Quantum imaginary time evolution on dense state vectors, with randomised
//! (drift) and deterministic single-rotation variants, shot-noise budgeting and
//! diagnostics of the underlying linear systems.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analysis;
#[cfg(feature = "cli")]
pub mod cli;
pub mod error;
pub mod ham_io;
pub mod measurement;
pub mod pauli;
pub mod pool;
pub mod qite;
pub mod statevector;

pub use error::{Error, Result};
pub use pauli::{Pauli, PauliString, PauliSum};
pub use pool::{build_uccsd_pool, load_pool, OperatorPool};
pub use qite::{Method, QiteConfig, RunStatus, ShotMode};
pub use statevector::StateVector;
