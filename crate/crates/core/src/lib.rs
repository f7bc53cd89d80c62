pub mod cluster;
pub mod error;
pub mod io;
pub mod recovery;
pub mod synth;
pub mod tensor;

pub use error::{Error, Result};
