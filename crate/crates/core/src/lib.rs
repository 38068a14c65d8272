//! Numerical engine for KAM reducibility of the 1-D quantum harmonic
//! oscillator driven by a bounded time quasi-periodic potential.
//!
//! The crate builds the perturbation matrix in the truncated Hermite
//! eigenbasis, solves homological equations in Fourier space with
//! small-divisor carving, iterates the quadratically convergent KAM step
//! until the system is diagonal, and checks the quantitative estimates
//! (element decay, norm hierarchy, excluded-frequency measure, Sobolev
//! stability) along the way.

pub mod dynamics;
pub mod hermite;
pub mod homological;
pub mod kam;
pub mod matrix_spaces;
pub mod perturbation;
pub mod quadrature;
pub mod sampler;
pub mod verify;

pub use matrix_spaces::{MatrixStructure, NormReport, TruncMatrix};
