use thiserror::Error;

use crate::graph::VertexId;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum GraphError {
    #[error("graph has no vertices")]
    NoVertices,
    #[error("slot length must be positive")]
    NonPositiveSlotLength,
    #[error("line {line}: vertex id {id} is outside 0..{n}; ids must be dense")]
    SparseVertexId { line: usize, id: u32, n: usize },
    #[error("line {line}: vertex {id} declared twice")]
    DuplicateVertex { line: usize, id: u32 },
    #[error("line {line}: edge references unknown vertex {vertex}")]
    DanglingEdge { line: usize, vertex: u32 },
    #[error("line {line}: travel times must be positive and finite")]
    NonPositiveTime { line: usize },
    #[error("line {line}: edge length must be finite and non-negative")]
    InvalidLength { line: usize },
    #[error("line {line}: expected {expected} slot columns, found {found}")]
    SlotCountMismatch {
        line: usize,
        expected: usize,
        found: usize,
    },
    #[error("travel time profile has no slots")]
    EmptyProfile,
    #[error("unknown vertex {0}")]
    UnknownVertex(u32),
    #[error("distance matrix shape does not match its sources")]
    MatrixShape,
    #[error("snapping requires a positive maximum edge length")]
    InvalidSnapRadius,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum DemandError {
    #[error("bucket length {0} s must be positive and divide 24 h")]
    InvalidBucket(i64),
    #[error("window lengths must be positive")]
    InvalidWindow,
    #[error("vertex {0} is outside the demand profile")]
    UnknownVertex(VertexId),
    #[error("partition covers {found} vertices, profile has {expected}")]
    PartitionSize { expected: usize, found: usize },
    #[error("supply counts given for {found} subareas, partition has {expected}")]
    SupplySize { expected: usize, found: usize },
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum RelocationError {
    #[error("distance matrix must have every vertex as a source")]
    IncompleteMatrix,
    #[error("{gaps} gaps given for {vertices} vertices")]
    GapCount { gaps: usize, vertices: usize },
    #[error("k = {k} is invalid for {n} vertices")]
    InvalidK { k: usize, n: usize },
    #[error("center set is invalid: {0}")]
    InvalidCenters(&'static str),
    #[error("vertex {0} is unreachable from every center")]
    Unreachable(VertexId),
    #[error("{combinations} center combinations exceed the cap of {cap}")]
    TooManyCombinations { combinations: u128, cap: u128 },
    #[error("no restart seeds given")]
    NoSeeds,
    #[error("similarity matrix has no edges")]
    EmptySimilarity,
    #[error("n_max must be at least 1")]
    InvalidNMax,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SimError {
    #[error("invalid configuration: {0}")]
    Config(&'static str),
    #[error("trip {0} references a vertex outside the graph")]
    TripVertex(u32),
    #[error(transparent)]
    Relocation(#[from] RelocationError),
    #[error(transparent)]
    Demand(#[from] DemandError),
}
