//! Indoor cell-free mmWave network simulator with an exposure assessment
//! grid and low-rank tensor approximation surrogates of exposure metrics.

pub mod analysis;
pub mod config;
pub mod error;
pub mod exposure;
pub mod geometry;
pub mod lra;
pub mod pipeline;
pub mod propagation;
pub mod scenario;
pub mod table;

pub use error::{Error, Result};
