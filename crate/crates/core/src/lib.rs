//! Delocalized eta invariants on covering spaces of the circle, and the
//! group-theoretic constants (growth rates, injective radii, separation
//! rates) that control when finite-cover invariants converge to the
//! invariant of the infinite cover.
//!
//! The crate is split in three layers:
//!
//! * [`group`]: finitely generated groups, finite quotients, conjugacy
//!   classes, Cayley-ball growth and group-algebra traces.
//! * [`spectral`]: a one-dimensional family of first-order self-adjoint
//!   operators on the circle, its finite covers and its line cover, with
//!   heat-type kernels `D exp(-t^2 D^2)`, folding and delocalized traces.
//! * [`eta`]: certified evaluation of delocalized eta integrals and tower
//!   convergence experiments.

pub mod error;
pub mod eta;
pub mod group;
pub mod quad;
pub mod spectral;

pub use error::{Error, Result};
