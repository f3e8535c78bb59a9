//! Excitation transport and entanglement in truncated Fock-space models of
//! coupled pigments.
//!
//! The crate builds two-mode exchange dynamics for coherent, number and
//! leveled coherent inputs, computes concurrence before and after
//! excitation-number projections, and runs Lindblad transport on small
//! coupled-site networks.

pub mod cli;
pub mod dynamics;
pub mod entanglement;
pub mod error;
pub mod hilbert;
pub mod linalg;
pub mod states;
pub mod transport;

pub use error::{Error, Result};
