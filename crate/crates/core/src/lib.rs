//! ContextNet click-through-rate model with a hand-written backward pass.

pub mod cli;
pub mod data;
pub mod error;
pub mod interpret;
pub mod model;
pub mod numeric;
pub mod synth;
pub mod train;

pub use error::{Error, Result};
