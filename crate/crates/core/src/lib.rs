//! Simulation and verification of the entwined-pair stochastic model.
//!
//! A single particle hops on a space-time lattice, reversing direction or
//! dropping markers in response to a stochastic "stutter" process, and then
//! retraces a deterministic return path through its markers. Counting the
//! signed charge carried by the two outer envelopes of such loops gives four
//! real densities whose difference equations approach the Schrödinger
//! equation (diffusive scaling) or a 1+1 Dirac-form system (fixed signal
//! velocity).
//!
//! The crate is split along those lines:
//!
//! * [`lattice`] holds geometry, scaling regimes, potentials and the
//!   [`ChargeField`](lattice::ChargeField) container.
//! * [`walker`] generates entwined paths, tallies their charge and provides an
//!   exhaustive enumeration oracle.
//! * [`evolve`] iterates the envelope difference equations.
//! * [`continuum`] has the reference PDE solvers and dispersion relations.
//! * [`analysis`] compares all of the above.
//! * [`sweep`] runs δ-refinement studies of the diffusive limit.

pub mod analysis;
pub mod continuum;
mod error;
pub mod evolve;
pub mod lattice;
pub mod sweep;
pub mod walker;

pub use error::{Error, Result};
