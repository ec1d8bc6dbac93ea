//! Quantum Jarzynski annealing (QJA) simulator.
//!
//! The crate maps a classical cost function onto a stoquastic Hamiltonian
//! whose zero-energy ground state is the square root of the Gibbs
//! distribution, then anneals a wavefunction either by plain unitary
//! evolution (ordinary QA) or by interleaving unitary steps with
//! exponentiated-work weights (QJA). The non-unitary weights can also be
//! realized exactly on an enlarged system with one ancilla qubit per step.
//!
//! Module map:
//!
//! - [`model`]: cost functions, Gibbs states and annealing schedules.
//! - [`stochastic`]: detailed-balance kernels and the classical Jarzynski check.
//! - [`qmap`]: the classical-quantum mapping and its spectral certification.
//! - [`anneal`]: wavefunction propagation for QA and QJA.
//! - [`dilation`]: ancilla dilation of the work weights and cost estimates.
//! - [`cli`]: experiment configs, runners and CSV/JSON artifacts.

pub mod anneal;
pub mod cli;
pub mod dilation;
pub mod error;
pub mod linalg;
pub mod model;
pub mod qmap;
pub mod rng;
pub mod stochastic;

pub use error::{Error, Result};
