//! Noisy variational quantum eigensolver on dense density matrices.

pub mod analysis;
pub mod ansatz;
pub mod channels;
pub mod densmat;
pub mod devices;
pub mod error;
pub mod hamiltonians;
pub mod meanfield;
pub mod measurement;
pub mod vqe;

pub use error::{Error, Result};
