//! Characteristic initial-value solver for the Dirac equation on light-cones.
//!
//! The crate integrates the singular transport (constraint) equations along the
//! null generators of a future light-cone, recovers the tangential field
//! components from the transverse ones, evolves the field off the cone through
//! a family of spacelike "opened" cones, and verifies trace isometries, vertex
//! matching conditions and norm equivalences against exact Minkowski solutions.
//!
//! Half-integer angular dependence is handled spectrally through spin-weighted
//! spherical harmonics, so all angular operators are exact; only the radial /
//! null direction is discretized.

pub mod angular;
pub mod config;
pub mod constraints;
pub mod diagnostics;
pub mod evolution;
pub mod experiments;
pub mod geometry;
pub mod oracle;

pub use num_complex::Complex64;

/// Doubled half-integer bookkeeping: spins and mode indices are stored as
/// `2s`, `2l`, `2m` so that every legal value is an exact integer.
pub type Half = i32;
