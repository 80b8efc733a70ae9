pub mod dataset;
pub mod error;
pub mod eval;
pub mod experiments;
pub mod model;
pub mod numerics;
pub mod train;

pub use error::{Error, Result};
