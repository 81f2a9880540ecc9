//! Quasiprobability error mitigation on a simulated noisy one- or two-qubit device.
//!
//! The pipeline characterizes the device with gate set tomography, decomposes
//! ideal measurements and gates into signed mixtures of noisy operations, and
//! recovers unbiased expectation values by weighted random-circuit sampling.

pub mod circuit;
pub mod device;
pub mod experiments;
pub mod error;
pub mod gates;
pub mod gst;
pub mod noise;
pub mod pauli;
pub mod ptm;
pub mod qem;
pub mod rng;

pub use error::{Error, Result};
