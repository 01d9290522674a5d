//! Least-squares and back-projection fidelity terms for linear inverse problems.
//!
//! The crate pairs a dense operator core ([`linops`]) with the two data terms
//! ([`fidelity`]), the priors they are combined with ([`priors`]), the
//! iterative solvers ([`solvers`]), rate estimators ([`rate_lab`]), image
//! metrics ([`metrics`]) and operator constructors ([`transforms`]).

pub mod acceptance;
pub mod bench;
pub mod error;
pub mod fidelity;
pub mod linops;
pub mod metrics;
pub mod priors;
pub mod rate_lab;
pub mod rng;
pub mod solvers;
pub mod transforms;
pub mod vecops;

pub use error::{Error, Result};
pub use fidelity::{FidelityKind, FidelityTerm};
pub use linops::DenseOperator;
pub use priors::Prior;
pub use rng::SeededRng;
