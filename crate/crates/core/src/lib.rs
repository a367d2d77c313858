pub mod dynamics;
pub mod error;
pub mod hamiltonians;
pub mod metrics;
pub mod protocol;
pub mod pulses;
pub mod su3;
pub mod sweeps;
pub mod tomography;

pub use error::{Error, Result};
