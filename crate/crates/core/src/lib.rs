//! Topology-aware synthesis of unitary matrices into U3/CNOT circuits.
//!
//! The pipeline grows a circuit of generic multi-qubit blocks whose
//! locations are chosen by numerical optimization, converts each block into
//! native gates with a pluggable backend, then stitches and peephole-optimizes
//! the result.

pub mod circuit;
pub mod cli;
pub mod decomposer;
pub mod error;
pub mod gatemodel;
pub mod instantiate;
pub mod numkit;
pub mod optimizer;
pub mod paulis;
pub mod pipeline;
pub mod qasm;
pub mod recombine;
pub mod targets;
pub mod topology;
pub mod verify;

pub use error::{Result, SynthError};
