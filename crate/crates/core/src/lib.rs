pub mod baselines;
pub mod cli;
pub mod codebook;
pub mod codec;
pub mod directions;
pub mod error;
pub mod eval;
pub mod points;
pub mod quantizer;
pub mod rng;
pub mod source;
pub mod tensor;
pub mod special;
mod wire;

pub use codebook::{Codebook, LloydConfig};
pub use error::{Error, FormatError, Result};
pub use points::PointSet;
pub use quantizer::BlockQuantizer;
