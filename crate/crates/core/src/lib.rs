//! Simulation and exact analysis of adaptive qubit-chain circuits built from
//! SWAP measurements with `σᶻ` feedback, optionally perturbed by single-site
//! Pauli measurements.
//!
//! The crate is organised bottom-up:
//!
//! * [`hilbert`]: bitstring bases, charge sectors and reference states.
//! * [`ops`]: projectors, gates and the measure-with-feedback primitive,
//!   plus an explicit ancilla/controlled-SWAP implementation of the same
//!   measurement.
//! * [`trajectory`]: stochastic pure-state trajectories and observables.
//! * [`channel`]: the trajectory-averaged channel as a sparse superoperator,
//!   its steady states and spectral gaps.
//! * [`analytic`]: closed-form steady-state results used as oracles.
//! * [`scaling`]: finite-size scaling collapse fits.
//!
//! Conventions: bit value `1` is spin up (`Sᶻ = +1/2`), site `0` is the least
//! significant bit, bond `i` couples sites `i` and `i + 1` (open chain), and
//! all entropies use the natural logarithm.

pub mod analytic;
pub mod channel;
pub mod error;
pub mod hilbert;
pub mod ops;
pub mod scaling;
pub mod trajectory;

pub use error::{Error, Result};
pub use num_complex::Complex64;
