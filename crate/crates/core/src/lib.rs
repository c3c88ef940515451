//! Ride-hailing dispatch with demand-aware relocation of idle vehicles.
//!
//! The crate is `no_std` and only needs `alloc`. File formats, the command
//! line driver and parallel restart execution live in the `dispatch` crate.
//!
//! - [`graph`]: directed road graph with time-sloted travel times.
//! - [`demand`]: trip stores, historical-average prediction, supply/demand gaps.
//! - [`relocation`]: demand-weighted relocation-center search.
//! - [`baseline`]: greedy reach-based and power-iteration partitioners.
//! - [`matching`]: Hopcroft-Karp and the two bipartite graph builders.
//! - [`sim`]: discrete-event dispatch simulation and metrics.
#![no_std]

extern crate alloc;

#[cfg(test)]
extern crate std;

pub mod baseline;
pub mod demand;
pub mod error;
pub mod fixtures;
pub mod graph;
pub mod matching;
pub mod relocation;
pub mod rng;
pub mod sim;

/// Seconds since the Unix epoch, UTC.
pub type Timestamp = i64;

pub use error::{DemandError, GraphError, RelocationError, SimError};
pub use graph::{DistanceMatrix, DistanceOracle, Point, RoadGraph, VertexId};
pub use relocation::{ActivationKind, Partition};
