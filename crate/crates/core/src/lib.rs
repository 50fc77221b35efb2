//! Simulation, estimation and random-matrix predictions for the nested
//! matrix-tensor model `T = β_T M ⊗ z + W/√n_T`, `M = β_M x yᵀ + Z/√n_M`.
//!
//! Modules, bottom-up:
//!
//! * [`tensor`]: dense order-3 tensors, unfoldings, outer and Kronecker products.
//! * [`model`]: parameters and seeded samplers for the general and multi-view models.
//! * [`spectra`]: Gram matrices, centering transforms, Jacobi eigensolver, ESDs.
//! * [`theory`]: closed-form limiting laws, spike locations, alignments, accuracy.
//! * [`estimators`]: unfolding, weighted-mean and rank-one tensor estimators.
//! * [`experiments`]: config, Monte Carlo runners, CSV output and the CLI.

pub mod error;
pub mod estimators;
pub mod experiments;
pub mod model;
pub mod spectra;
pub mod stats;
pub mod tensor;
pub mod theory;

pub use error::{Error, Result};
pub use tensor::{Mat, Mode, Tensor3};
