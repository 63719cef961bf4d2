//! Solving and learning AC power-flow solutions with a classically
//! simulated variational quantum circuit.
//!
//! The pipeline: parse a MATPOWER-style case ([`case`]), build the bus
//! admittance matrix and the Hermitian specification matrices whose
//! quadratic forms encode the power-flow equations ([`grid`]), decompose
//! those matrices over a shared family of short measurement circuits
//! ([`xbm`]), prepare states on an exact statevector simulator ([`qsim`])
//! with a hardware-efficient ansatz and optional data embedding ([`vqc`]),
//! and fit the circuit by projected gradient descent with parameter-shift
//! gradients ([`solver`]). A small classical network trained on the same
//! physics residual serves as the comparison baseline ([`dnn`]).

pub mod case;
pub mod dnn;
pub mod error;
pub mod grid;
pub mod qsim;
pub mod solver;
pub mod vqc;
pub mod xbm;

pub use error::{Error, Result};
