//! Generalized summation-by-parts (SBP) operators with simultaneous
//! approximation terms (SATs) for the one-dimensional diffusion equation.
//!
//! The crate builds classical finite-difference and element-type SBP
//! operators, couples elements with interface/boundary penalties (BR2, LDG,
//! Baumann-Oden, Carpenter-Nordstrom-Gottlieb), verifies conservation,
//! adjoint-consistency, and energy-stability conditions algebraically, and
//! runs steady-diffusion convergence studies against manufactured solutions.

pub mod numerics;
pub mod assembly;
pub mod operators;
pub mod sats;
pub mod study;

pub use nalgebra::{DMatrix, DVector};
