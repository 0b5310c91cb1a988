pub mod bof;
pub mod dbof;
pub mod dsp;
pub mod error;
pub mod eval;
pub mod header;
pub mod net;
pub mod pipeline;
pub mod rbm;
pub mod rng;
pub mod sampling;
pub mod whitening;

pub use error::{Error, Result};
