#![allow(dead_code)]

use dispatch_core::graph::{Edge, Point, TravelTimeProfile};
use dispatch_core::rng;
use dispatch_core::{RoadGraph, VertexId};
use rand::Rng;

/// Strongly connected random digraph with integer edge times in `1..=max_time`.
/// A directed ring keeps every pair reachable; `extra` chords are added on top.
pub fn random_graph(seed: u64, n: usize, extra: usize, max_time: u32) -> RoadGraph {
    let mut r = rng::seeded(seed);
    let mut edges = Vec::new();
    let mut push = |u: usize, v: usize, t: u32| {
        edges.push(Edge {
            from: VertexId::from_index(u),
            to: VertexId::from_index(v),
            profile: TravelTimeProfile::constant(t as f64),
            length_m: None,
        })
    };
    if n > 1 {
        for u in 0..n {
            push(u, (u + 1) % n, r.gen_range(1..=max_time));
        }
        for _ in 0..extra {
            let u = r.gen_range(0..n);
            let v = r.gen_range(0..n);
            if u != v {
                push(u, v, r.gen_range(1..=max_time));
            }
        }
    }
    let positions = (0..n)
        .map(|_| Point::new(r.gen_range(0.0..5000.0), r.gen_range(0.0..5000.0)))
        .collect();
    RoadGraph::from_edges(positions, edges, 86_400).unwrap()
}

/// Random integer-valued gaps in `-3..=3`.
pub fn random_gaps(seed: u64, n: usize) -> Vec<f64> {
    let mut r = rng::seeded(seed ^ 0xA5A5);
    (0..n).map(|_| r.gen_range(-3i32..=3) as f64).collect()
}

/// All k-subsets of 0..n in lexicographic order.
pub fn subsets(n: usize, k: usize) -> Vec<Vec<VertexId>> {
    fn rec(
        start: usize,
        n: usize,
        k: usize,
        cur: &mut Vec<VertexId>,
        out: &mut Vec<Vec<VertexId>>,
    ) {
        if cur.len() == k {
            out.push(cur.clone());
            return;
        }
        for i in start..n {
            cur.push(VertexId::from_index(i));
            rec(i + 1, n, k, cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    rec(0, n, k, &mut Vec::new(), &mut out);
    out
}

/// `w x h` grid with two-way streets of `secs` seconds, 100 m apart.
pub fn grid(w: usize, h: usize, secs: f64) -> RoadGraph {
    let id = |x: usize, y: usize| VertexId::from_index(y * w + x);
    let mut edges = Vec::new();
    let mut link = |a: VertexId, b: VertexId| {
        for (u, v) in [(a, b), (b, a)] {
            edges.push(Edge {
                from: u,
                to: v,
                profile: TravelTimeProfile::constant(secs),
                length_m: Some(100.0),
            });
        }
    };
    for y in 0..h {
        for x in 0..w {
            if x + 1 < w {
                link(id(x, y), id(x + 1, y));
            }
            if y + 1 < h {
                link(id(x, y), id(x, y + 1));
            }
        }
    }
    let positions = (0..w * h)
        .map(|i| Point::new((i % w) as f64 * 100.0, (i / w) as f64 * 100.0))
        .collect();
    RoadGraph::from_edges(positions, edges, 86_400).unwrap()
}
