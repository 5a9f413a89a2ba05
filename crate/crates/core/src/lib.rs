//! Shallow networks over abstract input spaces.
//!
//! Inputs are elements of matrix, sequence or function spaces and reach the
//! hidden layer through continuous linear functionals. The crate provides the
//! model, a trainer, and a constructive approximation pipeline built from
//! divided differences, mollification and exponential dictionaries.

pub mod activations;
pub mod chebyshev;
pub mod constructive;
pub mod error;
pub mod network;
pub mod numeric;
pub mod quadrature;
pub mod spaces;

pub use activations::{Activation, MollifiedActivation, ThresholdSet, Univariate};
pub use constructive::{ConstructionReport, ExpModel, OneDNetwork};
pub use error::{Error, Result};
pub use network::{NetActivation, Neuron, ShallowNetwork, TrainConfig};
pub use spaces::{CompactSampler, Element, Functional, Space, SpaceDescriptor, SpaceKind};

/// Version tag embedded in serialized records.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
