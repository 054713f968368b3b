pub mod comparison;
pub mod error;
pub mod homotopy;
pub mod kernel;
pub mod measure;
pub mod quantization;

pub use error::{Error, Result};
