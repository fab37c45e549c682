//! Restore approximate two-particle reduced density matrices to approximate
//! N-representability: correct symmetry and normalization plus the
//! particle-particle, hole-hole and particle-hole positivity conditions, in
//! the general spin-orbital and in the seniority-zero representations. A
//! pairing-model testbed supplies exact reference matrices and response
//! matrices from a pair-coupled-cluster solver.

pub mod error;
pub mod fixer;
pub mod io;
pub mod pairing;
pub mod rdm;
pub mod specproj;
pub mod sweep;

pub use error::{RdmError, Result};
