pub mod cli;
pub mod clustering;
pub mod compress;
pub mod conv;
pub mod error;
pub mod gen;
pub mod io;
pub mod linalg;
pub mod matrix;
pub mod metrics;
pub mod rng;
pub mod sweep;
pub mod tensor;

pub use error::{Error, Result};
