//! IO, experiment driver and CLI support for the dispatch simulator.

pub mod config;
pub mod error;
pub mod experiment;
pub mod io;
pub mod parallel;
pub mod synth;

pub use error::{DispatchError, Result};
