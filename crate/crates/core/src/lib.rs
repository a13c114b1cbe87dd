//! Spiked tensor PCA through bosonic Hamiltonians.

pub mod error;
pub mod fock;
pub mod hamiltonian;
pub mod io;
pub mod path_integral;
pub mod quantum;
pub mod rng;
pub mod scalar;
pub mod spectral;
pub mod tensor;
pub mod wick;

pub use error::{Error, Result};
pub use scalar::{Real, C};

pub type Tensor = tensor::DenseTensor<f64>;
pub type Fock = fock::FockVector<f64>;
pub type Hamiltonian = hamiltonian::HamiltonianOperator<f64>;
pub type Signal = tensor::SignalVector<f64>;
pub type Instance = tensor::SpikedInstance<f64>;
