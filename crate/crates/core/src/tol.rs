//! Tolerance ladder shared by every module.
//!
//! | rung | value | used for |
//! |------|-------|----------|
//! | [`CONSTRUCTION`] | 1e-12 | Hermiticity, gauge and coupling checks on inputs |
//! | [`PROPAGATION`] | 1e-10 | unitarity, orthonormality, checkpoint identities |
//! | [`PHYSICS`] | 1e-8 | trace drift, positivity, physical assertions |

pub const CONSTRUCTION: f64 = 1e-12;
pub const PROPAGATION: f64 = 1e-10;
pub const PHYSICS: f64 = 1e-8;

/// Allowed deviation of `(E_n - E_m) * tau mod 2pi` from `pi`.
pub const PHASE_CONDITION: f64 = 1e-9;

/// Largest Hilbert-space dimension accepted by [`crate::qla::Operator`].
pub const DEFAULT_MAX_DIM: usize = 256;
