//! Maximum-cardinality bipartite matching and the two dispatch graphs built
//! on top of it.

use alloc::collections::VecDeque;
use alloc::vec;
use alloc::vec::Vec;

use crate::graph::{DistanceOracle, VertexId};
use crate::Timestamp;

/// Bipartite graph over `0..n_left` and `0..n_right`. Edge costs only rank
/// adjacency; the matching itself maximizes cardinality.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct BipartiteGraph {
    n_left: usize,
    n_right: usize,
    edges: Vec<(u32, u32, f64)>,
}

impl BipartiteGraph {
    pub fn new(n_left: usize, n_right: usize) -> Self {
        BipartiteGraph {
            n_left,
            n_right,
            edges: Vec::new(),
        }
    }

    /// Adds an edge. Panics on out-of-range ids.
    pub fn add_edge(&mut self, left: usize, right: usize, cost: f64) {
        assert!(
            left < self.n_left && right < self.n_right,
            "edge ({left}, {right}) out of range"
        );
        self.edges.push((left as u32, right as u32, cost));
    }

    pub fn n_left(&self) -> usize {
        self.n_left
    }

    pub fn n_right(&self) -> usize {
        self.n_right
    }

    pub fn edges(&self) -> &[(u32, u32, f64)] {
        &self.edges
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn has_edge(&self, left: usize, right: usize) -> bool {
        self.edges
            .iter()
            .any(|&(l, r, _)| l as usize == left && r as usize == right)
    }

    /// Adjacency sorted by (cost, right id), duplicates collapsed to the
    /// cheapest copy.
    fn sorted_adjacency(&self) -> Vec<Vec<u32>> {
        let mut adj: Vec<Vec<(f64, u32)>> = vec![Vec::new(); self.n_left];
        for &(l, r, c) in &self.edges {
            adj[l as usize].push((c, r));
        }
        adj.into_iter()
            .map(|mut list| {
                list.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
                let mut out: Vec<u32> = Vec::with_capacity(list.len());
                for (_, r) in list {
                    if !out.contains(&r) {
                        out.push(r);
                    }
                }
                out
            })
            .collect()
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Matching {
    /// `(left, right)` pairs sorted by left id.
    pub pairs: Vec<(u32, u32)>,
}

impl Matching {
    pub fn cardinality(&self) -> usize {
        self.pairs.len()
    }

    /// Every vertex used at most once and every pair an edge of `bg`.
    pub fn is_valid_for(&self, bg: &BipartiteGraph) -> bool {
        let mut l = vec![false; bg.n_left()];
        let mut r = vec![false; bg.n_right()];
        self.pairs.iter().all(|&(a, b)| {
            let fresh = !core::mem::replace(&mut l[a as usize], true)
                && !core::mem::replace(&mut r[b as usize], true);
            fresh && bg.has_edge(a as usize, b as usize)
        })
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct MatchingStats {
    /// Number of BFS layering phases that found at least one augmenting path.
    pub phases: usize,
}

const FREE: u32 = u32::MAX;

/// Hopcroft-Karp over cost-sorted adjacency, so the result is deterministic and
/// leans toward cheap edges among maximum matchings.
pub fn hopcroft_karp(bg: &BipartiteGraph) -> (Matching, MatchingStats) {
    let adj = bg.sorted_adjacency();
    let nl = bg.n_left();
    let mut match_l = vec![FREE; nl];
    let mut match_r = vec![FREE; bg.n_right()];
    let mut dist = vec![u32::MAX; nl];
    let mut stats = MatchingStats::default();

    // Greedy warm start along the cheapest free edge.
    for (l, list) in adj.iter().enumerate() {
        if let Some(&r) = list.iter().find(|&&r| match_r[r as usize] == FREE) {
            match_l[l] = r;
            match_r[r as usize] = l as u32;
        }
    }

    loop {
        // BFS from free left vertices builds the layered graph.
        let mut queue = VecDeque::new();
        for l in 0..nl {
            if match_l[l] == FREE {
                dist[l] = 0;
                queue.push_back(l as u32);
            } else {
                dist[l] = u32::MAX;
            }
        }
        let mut found = false;
        while let Some(l) = queue.pop_front() {
            for &r in &adj[l as usize] {
                let m = match_r[r as usize];
                if m == FREE {
                    found = true;
                } else if dist[m as usize] == u32::MAX {
                    dist[m as usize] = dist[l as usize] + 1;
                    queue.push_back(m);
                }
            }
        }
        if !found {
            break;
        }
        let mut augmented = false;
        let mut next_edge = vec![0usize; nl];
        for l in 0..nl {
            if match_l[l] == FREE
                && augment(
                    l,
                    &adj,
                    &mut match_l,
                    &mut match_r,
                    &mut dist,
                    &mut next_edge,
                )
            {
                augmented = true;
            }
        }
        if !augmented {
            break;
        }
        stats.phases += 1;
    }

    let pairs = match_l
        .iter()
        .enumerate()
        .filter(|(_, &r)| r != FREE)
        .map(|(l, &r)| (l as u32, r))
        .collect();
    (Matching { pairs }, stats)
}

// Iterative DFS along the layered graph.
fn augment(
    root: usize,
    adj: &[Vec<u32>],
    match_l: &mut [u32],
    match_r: &mut [u32],
    dist: &mut [u32],
    next_edge: &mut [usize],
) -> bool {
    let mut stack: Vec<usize> = vec![root];
    while let Some(&l) = stack.last() {
        if next_edge[l] >= adj[l].len() {
            // dead end: drop l for the rest of this phase
            dist[l] = u32::MAX;
            stack.pop();
            if let Some(&parent) = stack.last() {
                next_edge[parent] += 1;
            }
            continue;
        }
        let r = adj[l][next_edge[l]];
        let m = match_r[r as usize];
        if m == FREE {
            // flip the alternating path held on the stack
            let mut r = r;
            while let Some(l) = stack.pop() {
                let prev = match_l[l];
                match_l[l] = r;
                match_r[r as usize] = l as u32;
                r = prev;
            }
            return true;
        }
        let m = m as usize;
        if dist[m] != u32::MAX && dist[m] == dist[l] + 1 {
            stack.push(m);
        } else {
            next_edge[l] += 1;
        }
    }
    false
}

pub fn max_bipartite_matching(bg: &BipartiteGraph) -> Matching {
    hopcroft_karp(bg).0
}

/// A waiting request and the latest admissible pickup time.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PendingRequest {
    pub request: u32,
    pub pickup: VertexId,
    /// `t_p + max_wait`.
    pub deadline: Timestamp,
}

/// A vehicle that may take a request: where it can start from and how many
/// seconds until it is there.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AvailableVehicle {
    pub vehicle: u32,
    pub location: VertexId,
    pub ready_in: f64,
}

/// Edge `(r, v)` iff `v` reaches the pickup of `r` by its deadline when
/// leaving at `t`. Cost is the arrival delay in seconds.
pub fn build_request_vehicle_graph(
    requests: &[PendingRequest],
    vehicles: &[AvailableVehicle],
    oracle: &mut DistanceOracle<'_>,
    t: Timestamp,
) -> BipartiteGraph {
    let mut bg = BipartiteGraph::new(requests.len(), vehicles.len());
    for (ri, req) in requests.iter().enumerate() {
        let budget = (req.deadline - t) as f64;
        if budget < 0.0 {
            continue;
        }
        let tree = oracle.tree_to(req.pickup, t);
        for (vi, veh) in vehicles.iter().enumerate() {
            let eta = veh.ready_in + tree.time(veh.location);
            if eta <= budget {
                bg.add_edge(ri, vi, eta);
            }
        }
    }
    bg
}

/// Relocation targets: one slot per vehicle a center needs.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct RelocationSlots {
    /// Subarea index of each slot.
    pub subarea: Vec<u32>,
    /// Center vertex of each slot.
    pub center: Vec<VertexId>,
}

/// `ceil(gap)` slots per subarea with a positive gap, in subarea order.
pub fn relocation_slots(region_gaps: &[f64], centers: &[VertexId]) -> RelocationSlots {
    let mut slots = RelocationSlots::default();
    for (j, (&gap, &c)) in region_gaps.iter().zip(centers).enumerate() {
        if gap > 0.0 {
            for _ in 0..libm::ceil(gap) as usize {
                slots.subarea.push(j as u32);
                slots.center.push(c);
            }
        }
    }
    slots
}

/// Edge `(vehicle, slot)` iff the vehicle reaches the slot's center within
/// `max_relocation` seconds at time `t`; cost is that travel time.
pub fn build_relocation_graph(
    idle: &[AvailableVehicle],
    slots: &RelocationSlots,
    oracle: &mut DistanceOracle<'_>,
    max_relocation: f64,
    t: Timestamp,
) -> BipartiteGraph {
    let mut bg = BipartiteGraph::new(idle.len(), slots.center.len());
    let mut s = 0;
    while s < slots.center.len() {
        // slots of one center are contiguous
        let c = slots.center[s];
        let mut e = s;
        while e < slots.center.len() && slots.center[e] == c {
            e += 1;
        }
        let tree = oracle.tree_to(c, t);
        for (vi, veh) in idle.iter().enumerate() {
            let tt = veh.ready_in + tree.time(veh.location);
            if tt <= max_relocation {
                for slot in s..e {
                    bg.add_edge(vi, slot, tt);
                }
            }
        }
        s = e;
    }
    bg
}
