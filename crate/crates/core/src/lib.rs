pub mod characteristics;
pub mod error;
pub mod experiment;
pub mod fem;
pub mod inverse;
pub mod forward;
pub mod mesh;
pub mod rwf;
pub mod sparse;
pub mod tensors;

pub use error::{Error, Result};
