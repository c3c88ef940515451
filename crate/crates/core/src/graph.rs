//! Directed, time-sloted road graph and shortest travel-time queries.
//!
//! Travel times are piecewise constant over slots of `slot_length` seconds and
//! the slot pattern repeats. A query at time `t` freezes the slot containing
//! `t` for the whole path.

use alloc::collections::{BTreeMap, BinaryHeap};
use alloc::vec;
use alloc::vec::Vec;
use core::cmp::Ordering;
use core::fmt;

use crate::error::GraphError;
use crate::Timestamp;

/// Dense vertex index in `0..n`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(transparent))]
pub struct VertexId(pub u32);

impl VertexId {
    #[inline]
    pub fn index(self) -> usize {
        self.0 as usize
    }

    #[inline]
    pub fn from_index(i: usize) -> Self {
        VertexId(i as u32)
    }
}

impl fmt::Display for VertexId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// Default speed used to derive edge lengths when a record carries none.
pub const DEFAULT_REFERENCE_SPEED_MPS: f64 = 8.0;

/// Planar coordinate in projected meters.
#[derive(Clone, Copy, Debug, PartialEq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub fn new(x: f64, y: f64) -> Self {
        Point { x, y }
    }

    pub fn distance(&self, other: &Point) -> f64 {
        libm::hypot(self.x - other.x, self.y - other.y)
    }
}

/// One row of the node table.
#[derive(Clone, Debug, PartialEq)]
pub struct NodeRecord {
    /// Source line number, used in error messages.
    pub line: usize,
    pub id: u32,
    pub position: Point,
}

/// One row of the edge table.
#[derive(Clone, Debug, PartialEq)]
pub struct EdgeRecord {
    pub line: usize,
    pub from: u32,
    pub to: u32,
    /// Seconds per slot.
    pub slot_times: Vec<f64>,
    pub length_m: Option<f64>,
}

/// Per-slot travel time of one edge, in seconds.
#[derive(Clone, Debug, PartialEq)]
pub struct TravelTimeProfile(Vec<f64>);

impl TravelTimeProfile {
    pub fn new(times: Vec<f64>) -> Result<Self, GraphError> {
        if times.is_empty() {
            return Err(GraphError::EmptyProfile);
        }
        if times.iter().any(|t| !(t.is_finite() && *t > 0.0)) {
            return Err(GraphError::NonPositiveTime { line: 0 });
        }
        Ok(TravelTimeProfile(times))
    }

    pub fn constant(seconds: f64) -> Self {
        TravelTimeProfile(vec![seconds])
    }

    #[inline]
    pub fn at_slot(&self, slot: usize) -> f64 {
        self.0[slot]
    }

    pub fn slots(&self) -> &[f64] {
        &self.0
    }

    fn free_flow(&self) -> f64 {
        self.0.iter().copied().fold(f64::INFINITY, f64::min)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Edge {
    pub from: VertexId,
    pub to: VertexId,
    pub profile: TravelTimeProfile,
    pub length_m: Option<f64>,
}

/// Summary of what `RoadGraph::from_records` had to clean up.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct LoadReport {
    /// Directed edges declared more than once (merged into the minimum-time edge).
    pub duplicate_edges: usize,
}

/// Directed road graph with time-sloted edge travel times.
///
/// Immutable after construction. All shortest-path queries take `&self`.
#[derive(Clone, Debug)]
pub struct RoadGraph {
    positions: Vec<Point>,
    edges: Vec<Edge>,
    slot_length: i64,
    n_slots: usize,
    reference_speed_mps: f64,
    // CSR adjacency into `edges`
    out_start: Vec<usize>,
    out_edges: Vec<u32>,
    in_start: Vec<usize>,
    in_edges: Vec<u32>,
}

impl RoadGraph {
    /// Validates node and edge records and builds the graph.
    pub fn from_records(
        nodes: &[NodeRecord],
        edges: &[EdgeRecord],
        slot_length: i64,
    ) -> Result<(RoadGraph, LoadReport), GraphError> {
        if slot_length <= 0 {
            return Err(GraphError::NonPositiveSlotLength);
        }
        if nodes.is_empty() {
            return Err(GraphError::NoVertices);
        }
        let n = nodes.len();
        let mut positions = vec![None; n];
        for rec in nodes {
            let idx = rec.id as usize;
            if idx >= n {
                return Err(GraphError::SparseVertexId {
                    line: rec.line,
                    id: rec.id,
                    n,
                });
            }
            if positions[idx].is_some() {
                return Err(GraphError::DuplicateVertex {
                    line: rec.line,
                    id: rec.id,
                });
            }
            positions[idx] = Some(rec.position);
        }
        let positions: Vec<Point> = positions
            .into_iter()
            .map(|p| p.unwrap_or_default())
            .collect();

        let mut n_slots = None;
        let mut merged: BTreeMap<(u32, u32), Edge> = BTreeMap::new();
        let mut report = LoadReport::default();
        for rec in edges {
            for v in [rec.from, rec.to] {
                if v as usize >= n {
                    return Err(GraphError::DanglingEdge {
                        line: rec.line,
                        vertex: v,
                    });
                }
            }
            if rec.slot_times.is_empty() {
                return Err(GraphError::EmptyProfile);
            }
            match n_slots {
                None => n_slots = Some(rec.slot_times.len()),
                Some(s) if s != rec.slot_times.len() => {
                    return Err(GraphError::SlotCountMismatch {
                        line: rec.line,
                        expected: s,
                        found: rec.slot_times.len(),
                    })
                }
                _ => {}
            }
            if rec.slot_times.iter().any(|t| !(t.is_finite() && *t > 0.0)) {
                return Err(GraphError::NonPositiveTime { line: rec.line });
            }
            if let Some(len) = rec.length_m {
                if !(len.is_finite() && len >= 0.0) {
                    return Err(GraphError::InvalidLength { line: rec.line });
                }
            }
            let edge = Edge {
                from: VertexId(rec.from),
                to: VertexId(rec.to),
                profile: TravelTimeProfile(rec.slot_times.clone()),
                length_m: rec.length_m,
            };
            match merged.get_mut(&(rec.from, rec.to)) {
                Some(existing) => {
                    report.duplicate_edges += 1;
                    log::warn!(
                        "line {}: duplicate edge {}->{}, keeping minimum travel time",
                        rec.line,
                        rec.from,
                        rec.to
                    );
                    for (a, b) in existing.profile.0.iter_mut().zip(edge.profile.0.iter()) {
                        *a = a.min(*b);
                    }
                    existing.length_m = match (existing.length_m, edge.length_m) {
                        (Some(a), Some(b)) => Some(a.min(b)),
                        (a, b) => a.or(b),
                    };
                }
                None => {
                    merged.insert((rec.from, rec.to), edge);
                }
            }
        }
        let edges: Vec<Edge> = merged.into_values().collect();
        let graph = RoadGraph::assemble(positions, edges, slot_length, n_slots.unwrap_or(1));
        Ok((graph, report))
    }

    /// Builds a graph from already-validated parts. Edges must be unique per
    /// direction and share one slot count.
    pub fn from_edges(
        positions: Vec<Point>,
        edges: Vec<Edge>,
        slot_length: i64,
    ) -> Result<RoadGraph, GraphError> {
        let nodes: Vec<NodeRecord> = positions
            .iter()
            .enumerate()
            .map(|(i, p)| NodeRecord {
                line: i + 1,
                id: i as u32,
                position: *p,
            })
            .collect();
        let recs: Vec<EdgeRecord> = edges
            .into_iter()
            .enumerate()
            .map(|(i, e)| EdgeRecord {
                line: i + 1,
                from: e.from.0,
                to: e.to.0,
                slot_times: e.profile.0,
                length_m: e.length_m,
            })
            .collect();
        Ok(RoadGraph::from_records(&nodes, &recs, slot_length)?.0)
    }

    fn assemble(positions: Vec<Point>, edges: Vec<Edge>, slot_length: i64, n_slots: usize) -> Self {
        let n = positions.len();
        let mut out_start = vec![0usize; n + 1];
        let mut in_start = vec![0usize; n + 1];
        for e in &edges {
            out_start[e.from.index() + 1] += 1;
            in_start[e.to.index() + 1] += 1;
        }
        for i in 0..n {
            out_start[i + 1] += out_start[i];
            in_start[i + 1] += in_start[i];
        }
        let mut out_edges = vec![0u32; edges.len()];
        let mut in_edges = vec![0u32; edges.len()];
        let mut out_fill = out_start.clone();
        let mut in_fill = in_start.clone();
        for (i, e) in edges.iter().enumerate() {
            out_edges[out_fill[e.from.index()]] = i as u32;
            out_fill[e.from.index()] += 1;
            in_edges[in_fill[e.to.index()]] = i as u32;
            in_fill[e.to.index()] += 1;
        }
        RoadGraph {
            positions,
            edges,
            slot_length,
            n_slots,
            reference_speed_mps: DEFAULT_REFERENCE_SPEED_MPS,
            out_start,
            out_edges,
            in_start,
            in_edges,
        }
    }

    /// Speed used to derive lengths for edges without an explicit length.
    pub fn with_reference_speed(mut self, mps: f64) -> Self {
        assert!(
            mps > 0.0 && mps.is_finite(),
            "reference speed must be positive"
        );
        self.reference_speed_mps = mps;
        self
    }

    pub fn reference_speed_mps(&self) -> f64 {
        self.reference_speed_mps
    }

    pub fn vertex_count(&self) -> usize {
        self.positions.len()
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn slot_length(&self) -> i64 {
        self.slot_length
    }

    pub fn slot_count(&self) -> usize {
        self.n_slots
    }

    pub fn vertices(&self) -> impl Iterator<Item = VertexId> + '_ {
        (0..self.positions.len()).map(VertexId::from_index)
    }

    pub fn position(&self, v: VertexId) -> Point {
        self.positions[v.index()]
    }

    pub fn positions(&self) -> &[Point] {
        &self.positions
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn contains(&self, v: VertexId) -> bool {
        v.index() < self.positions.len()
    }

    pub fn out_edges(&self, v: VertexId) -> impl Iterator<Item = &Edge> + '_ {
        let r = self.out_start[v.index()]..self.out_start[v.index() + 1];
        self.out_edges[r]
            .iter()
            .map(move |&e| &self.edges[e as usize])
    }

    pub fn in_edges(&self, v: VertexId) -> impl Iterator<Item = &Edge> + '_ {
        let r = self.in_start[v.index()]..self.in_start[v.index() + 1];
        self.in_edges[r]
            .iter()
            .map(move |&e| &self.edges[e as usize])
    }

    /// Slot index holding timestamp `t`; the slot pattern wraps around.
    pub fn slot_at(&self, t: Timestamp) -> usize {
        (t.div_euclid(self.slot_length) as u64 % self.n_slots as u64) as usize
    }

    /// Edge length in meters, falling back to free-flow time times the
    /// reference speed.
    pub fn edge_length_m(&self, e: &Edge) -> f64 {
        e.length_m
            .unwrap_or_else(|| e.profile.free_flow() * self.reference_speed_mps)
    }

    /// Shortest travel time from `origin` to `dest` at time `t`, or
    /// `f64::INFINITY` when `dest` cannot be reached.
    pub fn travel_time(
        &self,
        origin: VertexId,
        dest: VertexId,
        t: Timestamp,
    ) -> Result<f64, GraphError> {
        self.check(origin)?;
        self.check(dest)?;
        if origin == dest {
            return Ok(0.0);
        }
        let tree = self.shortest_path_tree(origin, Direction::Forward, self.slot_at(t), Some(dest));
        Ok(tree.time(dest))
    }

    /// Single-source (or single-target for `Direction::Backward`) label-setting
    /// search on one slot. With `stop_at` set, the search ends once that vertex
    /// is settled and other labels may be incomplete.
    pub fn shortest_path_tree(
        &self,
        root: VertexId,
        direction: Direction,
        slot: usize,
        stop_at: Option<VertexId>,
    ) -> ShortestPathTree {
        let n = self.vertex_count();
        let mut time = vec![f64::INFINITY; n];
        let mut length = vec![f64::INFINITY; n];
        let mut parent = vec![NO_PARENT; n];
        let mut settled = vec![false; n];
        let mut heap = BinaryHeap::new();
        time[root.index()] = 0.0;
        length[root.index()] = 0.0;
        heap.push(Label {
            time: 0.0,
            vertex: root.0,
        });
        while let Some(Label { time: t, vertex }) = heap.pop() {
            let u = vertex as usize;
            if settled[u] {
                continue;
            }
            settled[u] = true;
            if stop_at.map(|s| s.index() == u).unwrap_or(false) {
                break;
            }
            let (start, end, list) = match direction {
                Direction::Forward => (self.out_start[u], self.out_start[u + 1], &self.out_edges),
                Direction::Backward => (self.in_start[u], self.in_start[u + 1], &self.in_edges),
            };
            for &ei in &list[start..end] {
                let e = &self.edges[ei as usize];
                let w = match direction {
                    Direction::Forward => e.to,
                    Direction::Backward => e.from,
                }
                .index();
                if settled[w] {
                    continue;
                }
                let cand = t + e.profile.at_slot(slot);
                if cand < time[w] {
                    time[w] = cand;
                    length[w] = length[u] + self.edge_length_m(e);
                    parent[w] = u as u32;
                    heap.push(Label {
                        time: cand,
                        vertex: w as u32,
                    });
                }
            }
        }
        ShortestPathTree {
            root,
            direction,
            slot,
            time,
            length_m: length,
            parent,
        }
    }

    fn check(&self, v: VertexId) -> Result<(), GraphError> {
        if self.contains(v) {
            Ok(())
        } else {
            Err(GraphError::UnknownVertex(v.0))
        }
    }
}

const NO_PARENT: u32 = u32::MAX;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Direction {
    /// Times from the root to every vertex.
    Forward,
    /// Times from every vertex to the root.
    Backward,
}

#[derive(PartialEq)]
struct Label {
    time: f64,
    vertex: u32,
}

impl Eq for Label {}

impl Ord for Label {
    fn cmp(&self, other: &Self) -> Ordering {
        // min-heap on time, then on vertex id
        other
            .time
            .total_cmp(&self.time)
            .then_with(|| other.vertex.cmp(&self.vertex))
    }
}

impl PartialOrd for Label {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// Result of one label-setting run.
#[derive(Clone, Debug)]
pub struct ShortestPathTree {
    root: VertexId,
    direction: Direction,
    slot: usize,
    time: Vec<f64>,
    length_m: Vec<f64>,
    parent: Vec<u32>,
}

impl ShortestPathTree {
    pub fn root(&self) -> VertexId {
        self.root
    }

    pub fn direction(&self) -> Direction {
        self.direction
    }

    pub fn slot(&self) -> usize {
        self.slot
    }

    #[inline]
    pub fn time(&self, v: VertexId) -> f64 {
        self.time[v.index()]
    }

    /// Length in meters of the time-shortest path.
    #[inline]
    pub fn length_m(&self, v: VertexId) -> f64 {
        self.length_m[v.index()]
    }

    pub fn times(&self) -> &[f64] {
        &self.time
    }

    /// Vertices of the path between the root and `v`, in driving order.
    pub fn path(&self, v: VertexId) -> Option<Vec<VertexId>> {
        if !self.time[v.index()].is_finite() {
            return None;
        }
        let mut out = vec![v];
        let mut cur = v.index();
        while cur != self.root.index() {
            cur = self.parent[cur] as usize;
            out.push(VertexId::from_index(cur));
        }
        if self.direction == Direction::Forward {
            out.reverse();
        }
        Some(out)
    }
}

/// Shortest travel times from a set of sources, all at one query time.
#[derive(Clone, Debug, PartialEq)]
pub struct DistanceMatrix {
    sources: Vec<VertexId>,
    row_of: Vec<u32>,
    n_targets: usize,
    values: Vec<f64>,
    query_time: Timestamp,
}

impl DistanceMatrix {
    /// Builds a matrix directly from row-major values. Rows correspond to
    /// `sources`; every row has `n_targets` entries.
    pub fn from_rows(
        sources: Vec<VertexId>,
        n_targets: usize,
        values: Vec<f64>,
        query_time: Timestamp,
    ) -> Result<Self, GraphError> {
        if values.len() != sources.len() * n_targets {
            return Err(GraphError::MatrixShape);
        }
        let mut row_of = vec![u32::MAX; n_targets];
        for (i, s) in sources.iter().enumerate() {
            if s.index() >= n_targets {
                return Err(GraphError::UnknownVertex(s.0));
            }
            row_of[s.index()] = i as u32;
        }
        Ok(DistanceMatrix {
            sources,
            row_of,
            n_targets,
            values,
            query_time,
        })
    }

    /// Square matrix over `0..n` given as nested rows; handy for fixtures.
    pub fn square(rows: &[Vec<f64>]) -> Result<Self, GraphError> {
        let n = rows.len();
        let mut values = Vec::with_capacity(n * n);
        for r in rows {
            if r.len() != n {
                return Err(GraphError::MatrixShape);
            }
            values.extend_from_slice(r);
        }
        DistanceMatrix::from_rows((0..n).map(VertexId::from_index).collect(), n, values, 0)
    }

    pub fn sources(&self) -> &[VertexId] {
        &self.sources
    }

    pub fn n_targets(&self) -> usize {
        self.n_targets
    }

    pub fn query_time(&self) -> Timestamp {
        self.query_time
    }

    /// True when every vertex is a source, in index order.
    pub fn is_complete(&self) -> bool {
        self.sources.len() == self.n_targets
            && self.sources.iter().enumerate().all(|(i, s)| s.index() == i)
    }

    pub fn row(&self, source: VertexId) -> Option<&[f64]> {
        let r = *self.row_of.get(source.index())?;
        if r == u32::MAX {
            return None;
        }
        let start = r as usize * self.n_targets;
        Some(&self.values[start..start + self.n_targets])
    }

    /// Travel time from `source` to `target`. Panics if `source` is not a row.
    #[inline]
    pub fn get(&self, source: VertexId, target: VertexId) -> f64 {
        let r = self.row_of[source.index()];
        assert!(r != u32::MAX, "vertex {} is not a source row", source);
        self.values[r as usize * self.n_targets + target.index()]
    }
}

/// One label-setting run per source, all frozen at the slot holding `t`.
pub fn distance_matrix(
    g: &RoadGraph,
    sources: &[VertexId],
    t: Timestamp,
) -> Result<DistanceMatrix, GraphError> {
    let slot = g.slot_at(t);
    let n = g.vertex_count();
    let mut values = Vec::with_capacity(sources.len() * n);
    for &s in sources {
        g.check(s)?;
        let tree = g.shortest_path_tree(s, Direction::Forward, slot, None);
        values.extend_from_slice(tree.times());
    }
    DistanceMatrix::from_rows(sources.to_vec(), n, values, t)
}

/// All-pairs matrix with every vertex as a source.
pub fn full_distance_matrix(g: &RoadGraph, t: Timestamp) -> DistanceMatrix {
    let sources: Vec<VertexId> = g.vertices().collect();
    distance_matrix(g, &sources, t).expect("all vertices are valid")
}

/// Memoized shortest-path trees keyed by (root, slot).
///
/// Owned by one worker; the cache is dropped whenever a query lands in a
/// different slot than the cached trees.
#[derive(Debug)]
pub struct DistanceOracle<'g> {
    graph: &'g RoadGraph,
    slot: usize,
    forward: BTreeMap<u32, ShortestPathTree>,
    backward: BTreeMap<u32, ShortestPathTree>,
    capacity: usize,
}

impl<'g> DistanceOracle<'g> {
    pub fn new(graph: &'g RoadGraph) -> Self {
        DistanceOracle {
            graph,
            slot: 0,
            forward: BTreeMap::new(),
            backward: BTreeMap::new(),
            capacity: 4096,
        }
    }

    /// Maximum number of cached trees per direction before the cache is reset.
    pub fn with_capacity(mut self, trees: usize) -> Self {
        self.capacity = trees.max(1);
        self
    }

    pub fn graph(&self) -> &'g RoadGraph {
        self.graph
    }

    fn sync_slot(&mut self, t: Timestamp) -> usize {
        let slot = self.graph.slot_at(t);
        if slot != self.slot {
            self.forward.clear();
            self.backward.clear();
            self.slot = slot;
        }
        slot
    }

    pub fn tree_from(&mut self, source: VertexId, t: Timestamp) -> &ShortestPathTree {
        let slot = self.sync_slot(t);
        if self.forward.len() >= self.capacity && !self.forward.contains_key(&source.0) {
            self.forward.clear();
        }
        let g = self.graph;
        self.forward
            .entry(source.0)
            .or_insert_with(|| g.shortest_path_tree(source, Direction::Forward, slot, None))
    }

    pub fn tree_to(&mut self, target: VertexId, t: Timestamp) -> &ShortestPathTree {
        let slot = self.sync_slot(t);
        if self.backward.len() >= self.capacity && !self.backward.contains_key(&target.0) {
            self.backward.clear();
        }
        let g = self.graph;
        self.backward
            .entry(target.0)
            .or_insert_with(|| g.shortest_path_tree(target, Direction::Backward, slot, None))
    }

    pub fn travel_time(&mut self, origin: VertexId, dest: VertexId, t: Timestamp) -> f64 {
        if origin == dest {
            return 0.0;
        }
        self.tree_from(origin, t).time(dest)
    }

    /// (seconds, meters) along the time-shortest path.
    pub fn trip(&mut self, origin: VertexId, dest: VertexId, t: Timestamp) -> (f64, f64) {
        if origin == dest {
            return (0.0, 0.0);
        }
        let tree = self.tree_from(origin, t);
        (tree.time(dest), tree.length_m(dest))
    }
}

/// Uniform-grid index for snapping coordinates onto vertices.
#[derive(Clone, Debug)]
pub struct SnapIndex {
    radius: f64,
    cell: f64,
    cells: BTreeMap<(i64, i64), Vec<u32>>,
    positions: Vec<Point>,
}

impl SnapIndex {
    /// `l_max` is the maximum edge length; the snapping radius is `l_max / 2`.
    pub fn new(g: &RoadGraph, l_max: f64) -> Result<Self, GraphError> {
        if !(l_max.is_finite() && l_max > 0.0) {
            return Err(GraphError::InvalidSnapRadius);
        }
        let radius = l_max / 2.0;
        let cell = radius;
        let mut cells: BTreeMap<(i64, i64), Vec<u32>> = BTreeMap::new();
        for (i, p) in g.positions().iter().enumerate() {
            cells.entry(cell_of(p, cell)).or_default().push(i as u32);
        }
        Ok(SnapIndex {
            radius,
            cell,
            cells,
            positions: g.positions().to_vec(),
        })
    }

    pub fn radius(&self) -> f64 {
        self.radius
    }

    /// Nearest vertex within the radius; ties go to the lowest index.
    pub fn snap(&self, p: Point) -> Option<VertexId> {
        let (cx, cy) = cell_of(&p, self.cell);
        let mut best: Option<(f64, u32)> = None;
        for dx in -1..=1 {
            for dy in -1..=1 {
                let Some(list) = self.cells.get(&(cx + dx, cy + dy)) else {
                    continue;
                };
                for &v in list {
                    let d = self.positions[v as usize].distance(&p);
                    if d > self.radius {
                        continue;
                    }
                    let better = match best {
                        None => true,
                        Some((bd, bv)) => d < bd || (d == bd && v < bv),
                    };
                    if better {
                        best = Some((d, v));
                    }
                }
            }
        }
        best.map(|(_, v)| VertexId(v))
    }
}

fn cell_of(p: &Point, cell: f64) -> (i64, i64) {
    (
        libm::floor(p.x / cell) as i64,
        libm::floor(p.y / cell) as i64,
    )
}

/// Snaps one coordinate onto the graph. Builds a throwaway index; use
/// [`SnapIndex`] for bulk work.
pub fn snap_point(g: &RoadGraph, p: Point, l_max: f64) -> Result<Option<VertexId>, GraphError> {
    Ok(SnapIndex::new(g, l_max)?.snap(p))
}
