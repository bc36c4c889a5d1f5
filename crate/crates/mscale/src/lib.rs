pub mod error;
pub mod mc;
pub mod models;
pub mod observables;
pub mod averaging;
pub mod cli;
pub mod diffusion;
pub mod specfun;
pub mod spectral;

pub use error::{Error, Result};
