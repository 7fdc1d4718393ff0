//! Learning capacity-achieving input distributions with a cooperative
//! generator/discriminator pair.

pub mod analysis;
pub mod autodiff;
pub mod baselines;
pub mod channels;
pub mod error;
pub mod experiment;
pub mod gradcheck;
pub mod nn;
pub mod optim;
pub mod rng;
pub mod tensor;
pub mod trainer;

pub use error::{Error, Result};
pub use tensor::Tensor;
