//! Driven magnetic Schrödinger operators on periodic graphs: Floquet-Bloch
//! bands, time-periodic propagators, quasienergies, gauge transforms and
//! wave-operator diagnostics.
//!
//! Numerical kernels are generic over [`scalar::Real`]; the aliases below fix
//! the scalar to `f64`, which is what reports and the batch runner use.

pub mod driving;
pub mod error;
pub mod evolution;
pub mod experiment;
pub mod gauge;
pub mod graph;
pub mod howland;
pub mod linalg;
pub mod scalar;
pub mod scattering;
pub mod spectral;

pub use error::{Error, Result};
pub use experiment::{ExperimentConfig, ExperimentKind};
pub use graph::{FiniteLattice, PeriodicGraph};

pub type Complex = scalar::C<f64>;
pub type StateVector = graph::StateVector<f64>;
pub type HermitianOperator = linalg::HermitianOperator<f64>;
pub type DrivenHamiltonian = evolution::DrivenHamiltonian<f64>;
pub type Propagator = evolution::Propagator<f64>;
pub type StepSequence = evolution::StepSequence<f64>;
pub type HowlandVector = howland::HowlandVector<f64>;
