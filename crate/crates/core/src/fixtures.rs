//! Small hand-checkable instances shared by tests and examples.

use alloc::vec;
use alloc::vec::Vec;

use crate::graph::{Edge, Point, RoadGraph, TravelTimeProfile, VertexId};

/// Four-vertex toy network (A, B, C, D = 0..3). Its all-pairs shortest
/// travel times, in minutes, are
///
/// ```text
///      A   B   C   D
///  A   0   5  13   8
///  B   4   0   8   3
///  C   5   6   0   9
///  D  10  11   5   0
/// ```
pub fn toy_graph() -> RoadGraph {
    let minutes = [
        (0, 1, 5.0),
        (1, 0, 4.0),
        (1, 3, 3.0),
        (2, 0, 5.0),
        (2, 1, 6.0),
        (3, 2, 5.0),
    ];
    let edges = minutes
        .iter()
        .map(|&(from, to, m)| Edge {
            from: VertexId(from),
            to: VertexId(to),
            profile: TravelTimeProfile::constant(m * 60.0),
            length_m: Some(m * 500.0),
        })
        .collect();
    let positions = vec![
        Point::new(0.0, 0.0),
        Point::new(1000.0, 0.0),
        Point::new(0.0, 1000.0),
        Point::new(1000.0, 1000.0),
    ];
    RoadGraph::from_edges(positions, edges, 86_400).expect("toy graph is valid")
}

/// Pickup-dropoff gaps of the toy network: A +1, B -1, C 0, D +1.
pub fn toy_gaps() -> Vec<f64> {
    vec![1.0, -1.0, 0.0, 1.0]
}

pub const TOY_LABELS: [&str; 4] = ["A", "B", "C", "D"];
