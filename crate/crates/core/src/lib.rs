//! Self-refining amortized Hartree-Fock.
//!
//! An electronic-state model predicts orthonormal orbital coefficients for a
//! molecular geometry and is trained by minimizing the restricted
//! Hartree-Fock energy of its own prediction. Training geometries come from
//! Langevin dynamics on the model's energy surface, exchanged with the
//! learner through a FIFO replay buffer. A built-in SCF solver provides the
//! reference energies, Fock matrices and orbital energies used for
//! evaluation.

// `!(x > 0.0)` is used on purpose so that NaN fails validation.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod chem;
pub mod cli;
pub mod config;
pub mod energy;
pub mod error;
pub mod eval;
pub mod integrals;
pub mod linalg;
pub mod model;
pub mod sampler;
pub mod scf;
pub mod train;

pub use error::{Error, Result};
