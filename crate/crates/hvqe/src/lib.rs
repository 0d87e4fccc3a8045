//! Hybrid gate-based / measurement-based VQE toolkit.
//!
//! The crate provides, bottom up:
//!
//! * [`pauli`] — Pauli strings, Pauli-sum Hamiltonians and qubit-wise
//!   commuting measurement groups;
//! * [`statevector`] — dense simulation of dynamic circuits with mid-circuit
//!   measurement, classical conditioning and a simple noise model;
//! * [`tableau`] — stabilizer tableau simulation and graph-state extraction;
//! * [`mbqc`] — measurement pattern algebra: multi-qubit rotation gadgets,
//!   pattern concatenation, Clifford reduction and lowering to circuits;
//! * [`models`] — benchmark Hamiltonians (planar code, SU(3), Z2 plaquette,
//!   LiH) with exact and perturbative references;
//! * [`estimation`] — shot-based energy estimation with readout mitigation,
//!   Pauli twirling and self-mitigation;
//! * [`optimize`] — derivative-free local and global (dividing-rectangles)
//!   optimizers;
//! * [`vqe`] — ansatz construction and the variational driver.

pub mod error;
pub mod estimation;
pub mod mbqc;
pub mod models;
pub mod optimize;
pub mod pauli;
pub mod statevector;
pub mod tableau;
pub mod vqe;

pub use error::Error;
