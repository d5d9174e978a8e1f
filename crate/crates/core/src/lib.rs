//! Numerical verification engine for static vacuum systems.

pub mod boundary;
pub mod error;
pub mod exec;
pub mod geometry;
pub mod jets;
pub mod levelsets;
pub mod robinson;
pub mod solutions;
pub mod static_vacuum;

pub use error::{Error, Result};
pub use exec::Execution;
