//! Moment dynamics for multimode bosonic systems driven by quadratic GKSL
//! generators and by their Poisson-averaged counterparts.
//!
//! Phase-space vectors use the fixed ordering `(a_1..a_n, a_1†..a_n†)`:
//! index `k < n` is the annihilator of mode `k`, index `n + k` its creator.
//! Every tensor in the crate inherits that convention.
//!
//! The crate is organized bottom-up:
//!
//! - [`algebra`]: structural matrices `J`, `E`, tilde conjugation, generator data.
//! - [`propagators`]: drift data `(B, φ, Ξ)` and the propagator bundle `(G, ψ, β)`.
//! - [`moments`]: moment hierarchies, partition combinatorics, Heisenberg flow and its solution.
//! - [`wick`]: Isserlis–Wick synthesis and Gaussianity residuals.
//! - [`poisson`]: Poisson-averaged generators as a block lower-triangular linear system.
//! - [`fock`]: a truncated Fock-space density-matrix oracle.

pub mod algebra;
pub mod defaults;
pub mod error;
pub mod fock;
pub mod linalg;
pub mod moments;
pub mod ode;
pub mod poisson;
pub mod propagators;
pub mod quadrature;
pub mod random;
pub mod wick;

pub use error::{Error, Result};
pub use linalg::{CMatrix, CVector, C64};
