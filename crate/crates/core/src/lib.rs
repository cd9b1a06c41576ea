//! Pulse-sequence synthesis and verification for shortcuts to adiabaticity
//! by modulation.
//!
//! A [`protocol::GaugeSpec`] fixes a constant generator `G` and the
//! eigenbasis at the start of the path; [`protocol::compile`] turns it into a
//! [`protocol::PulseSequence`] that applies the original Hamiltonian only at
//! discrete path points, with durations chosen so that every coupled pair of
//! levels picks up an odd multiple of `pi` in relative dynamic phase.

pub mod diagnostics;
pub mod dynamics;
pub mod error;
pub mod figures;
pub mod format;
pub mod models;
pub mod protocol;
pub mod qla;
pub mod robustness;
pub mod seeding;
pub mod tol;

pub use error::{Error, Result};
