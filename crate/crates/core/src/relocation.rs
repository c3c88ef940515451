//! Demand-weighted relocation-center search.
//!
//! The cost of a center set `C` is
//!
//! ```text
//! F(C) = sum over vertices v of  min over c in C of  d(c, v) * S(g_v)
//! ```
//!
//! where `d` is the center-to-vertex shortest travel time, `g_v` the predicted
//! pickup-dropoff gap and `S` an [`ActivationKind`]. Every center belongs to
//! its own subarea and contributes zero; the minimum over signed products only
//! applies to non-center vertices, so a vertex with a negative weight picks the
//! farthest center.
//!
//! [`CenterProblem::search_from`] alternates assignment and center update
//! (a k-medoids style descent) and stops as soon as an update does not
//! strictly lower the cost.

use alloc::vec;
use alloc::vec::Vec;
use core::cmp::Ordering;
use core::fmt;
use core::str::FromStr;

use rand::seq::index;

use crate::error::RelocationError;
use crate::graph::{full_distance_matrix, DistanceMatrix, RoadGraph, VertexId};
use crate::rng;
use crate::Timestamp;

/// Default cap on the number of center sets `brute_force_centers` enumerates.
pub const BRUTE_FORCE_CAP: u128 = 1_000_000;

const MAX_ITERATIONS: u32 = 10_000;

/// Relative threshold below which an objective change counts as no change.
pub fn change_tolerance(reference: f64) -> f64 {
    1e-9 * reference.abs().max(1.0)
}

/// Transform from a pickup-dropoff gap to a distance weight.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "lowercase"))]
pub enum ActivationKind {
    /// Constant 1; the plain k-medoids cost.
    Ignore,
    Identity,
    Sigmoid,
    Softplus,
    Relu,
}

impl ActivationKind {
    pub const ALL: [ActivationKind; 5] = [
        ActivationKind::Ignore,
        ActivationKind::Identity,
        ActivationKind::Sigmoid,
        ActivationKind::Softplus,
        ActivationKind::Relu,
    ];

    pub fn apply(self, g: f64) -> f64 {
        match self {
            ActivationKind::Ignore => 1.0,
            ActivationKind::Identity => g,
            ActivationKind::Sigmoid => {
                if g >= 0.0 {
                    1.0 / (1.0 + libm::exp(-g))
                } else {
                    let e = libm::exp(g);
                    e / (1.0 + e)
                }
            }
            // ln(1 + e^g) without overflow
            ActivationKind::Softplus => g.max(0.0) + libm::log1p(libm::exp(-g.abs())),
            ActivationKind::Relu => g.max(0.0),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            ActivationKind::Ignore => "ignore",
            ActivationKind::Identity => "identity",
            ActivationKind::Sigmoid => "sigmoid",
            ActivationKind::Softplus => "softplus",
            ActivationKind::Relu => "relu",
        }
    }
}

impl fmt::Display for ActivationKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ActivationKind {
    type Err = &'static str;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        ActivationKind::ALL
            .into_iter()
            .find(|k| k.name().eq_ignore_ascii_case(s))
            .ok_or("expected one of ignore, identity, sigmoid, softplus, relu")
    }
}

pub fn activation(kind: ActivationKind, g: f64) -> f64 {
    kind.apply(g)
}

/// How a subarea's new center is scored.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "lowercase"))]
pub enum CenterUpdate {
    /// `argmin_x sum_{v in A} d(x, v) * S(g_v)`; keeps the descent exact.
    #[default]
    Weighted,
    /// `argmin_x sum_{v in A} d(x, v)`.
    Unweighted,
}

/// Centers plus the subarea each vertex belongs to.
#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Partition {
    /// `centers[j]` is the center of subarea `j`.
    pub centers: Vec<VertexId>,
    /// Subarea index per vertex.
    pub assignment: Vec<u32>,
    pub objective: f64,
    pub iterations: u32,
    pub seed: u64,
}

impl Partition {
    /// Builds a partition from an explicit assignment; the objective is left
    /// at zero for callers that score it separately.
    pub fn from_assignment(centers: Vec<VertexId>, assignment: Vec<u32>) -> Self {
        Partition {
            centers,
            assignment,
            objective: 0.0,
            iterations: 0,
            seed: 0,
        }
    }

    pub fn k(&self) -> usize {
        self.centers.len()
    }

    pub fn vertex_count(&self) -> usize {
        self.assignment.len()
    }

    pub fn subarea_of(&self, v: VertexId) -> usize {
        self.assignment[v.index()] as usize
    }

    pub fn center_of(&self, v: VertexId) -> VertexId {
        self.centers[self.subarea_of(v)]
    }

    pub fn subareas(&self) -> Vec<Vec<VertexId>> {
        let mut out = vec![Vec::new(); self.k()];
        for (v, &a) in self.assignment.iter().enumerate() {
            out[a as usize].push(VertexId::from_index(v));
        }
        out
    }

    /// Checks the disjoint-cover invariants: `k` distinct centers, every
    /// vertex in exactly one subarea, each center inside its own subarea.
    pub fn validate(&self, n: usize) -> Result<(), &'static str> {
        if self.assignment.len() != n {
            return Err("assignment does not cover every vertex");
        }
        if self.centers.is_empty() || self.centers.len() > n {
            return Err("center count out of range");
        }
        let mut seen = vec![false; n];
        for c in &self.centers {
            if c.index() >= n {
                return Err("center outside the vertex set");
            }
            if seen[c.index()] {
                return Err("duplicate center");
            }
            seen[c.index()] = true;
        }
        if self.assignment.iter().any(|&a| a as usize >= self.k()) {
            return Err("subarea index out of range");
        }
        for (j, c) in self.centers.iter().enumerate() {
            if self.assignment[c.index()] as usize != j {
                return Err("center not in its own subarea");
            }
        }
        Ok(())
    }

    fn sorted_centers(&self) -> Vec<VertexId> {
        let mut c = self.centers.clone();
        c.sort_unstable();
        c
    }
}

/// Outcome of one descent run.
#[derive(Clone, Debug, PartialEq)]
pub struct SearchRun {
    pub partition: Partition,
    /// Objective of every accepted center set, starting with the initial one.
    pub trace: Vec<f64>,
}

/// A relocation-center instance: all-pairs distances plus vertex weights.
#[derive(Clone, Debug)]
pub struct CenterProblem<'a> {
    dm: &'a DistanceMatrix,
    weights: Vec<f64>,
    kind: ActivationKind,
    update: CenterUpdate,
}

impl<'a> CenterProblem<'a> {
    /// `dm` must have every vertex as a source; `gaps[v]` is `g_v`.
    pub fn new(
        dm: &'a DistanceMatrix,
        gaps: &[f64],
        kind: ActivationKind,
    ) -> Result<Self, RelocationError> {
        if !dm.is_complete() {
            return Err(RelocationError::IncompleteMatrix);
        }
        if gaps.len() != dm.n_targets() {
            return Err(RelocationError::GapCount {
                gaps: gaps.len(),
                vertices: dm.n_targets(),
            });
        }
        Ok(CenterProblem {
            dm,
            weights: gaps.iter().map(|&g| kind.apply(g)).collect(),
            kind,
            update: CenterUpdate::Weighted,
        })
    }

    pub fn with_update(mut self, update: CenterUpdate) -> Self {
        self.update = update;
        self
    }

    pub fn n(&self) -> usize {
        self.weights.len()
    }

    pub fn kind(&self) -> ActivationKind {
        self.kind
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    fn check_centers(&self, centers: &[VertexId]) -> Result<(), RelocationError> {
        let n = self.n();
        if centers.is_empty() || centers.len() > n {
            return Err(RelocationError::InvalidK {
                k: centers.len(),
                n,
            });
        }
        let mut seen = vec![false; n];
        for c in centers {
            if c.index() >= n {
                return Err(RelocationError::InvalidCenters(
                    "center outside the vertex set",
                ));
            }
            if core::mem::replace(&mut seen[c.index()], true) {
                return Err(RelocationError::InvalidCenters("duplicate center"));
            }
        }
        Ok(())
    }

    /// Assigns each vertex to the center minimizing `d(c, v) * S(g_v)`
    /// (lowest center index on ties) and scores the result.
    pub fn assign(&self, centers: &[VertexId]) -> Result<Partition, RelocationError> {
        self.check_centers(centers)?;
        let n = self.n();
        let mut best = vec![f64::INFINITY; n];
        let mut owner = vec![u32::MAX; n];
        for (j, &c) in centers.iter().enumerate() {
            let row = self.dm.row(c).expect("complete matrix");
            for v in 0..n {
                let d = row[v];
                if !d.is_finite() {
                    continue;
                }
                let p = d * self.weights[v];
                if owner[v] == u32::MAX || p < best[v] {
                    best[v] = p;
                    owner[v] = j as u32;
                }
            }
        }
        for (j, &c) in centers.iter().enumerate() {
            best[c.index()] = 0.0;
            owner[c.index()] = j as u32;
        }
        let mut objective = 0.0;
        for v in 0..n {
            if owner[v] == u32::MAX {
                return Err(RelocationError::Unreachable(VertexId::from_index(v)));
            }
            objective += best[v];
        }
        Ok(Partition {
            centers: centers.to_vec(),
            assignment: owner,
            objective,
            iterations: 0,
            seed: 0,
        })
    }

    pub fn objective(&self, centers: &[VertexId]) -> Result<f64, RelocationError> {
        Ok(self.assign(centers)?.objective)
    }

    /// Cost of serving `members` from candidate `x`, `None` if some member is
    /// unreachable from `x`.
    fn subarea_cost(&self, x: VertexId, members: &[VertexId]) -> Option<f64> {
        let row = self.dm.row(x).expect("complete matrix");
        let mut sum = 0.0;
        for &v in members {
            let d = row[v.index()];
            if !d.is_finite() {
                return None;
            }
            sum += match self.update {
                CenterUpdate::Weighted => d * self.weights[v.index()],
                CenterUpdate::Unweighted => d,
            };
        }
        Some(sum)
    }

    /// Picks a new center for every subarea over all vertices as candidates.
    ///
    /// The incumbent wins ties, then the lowest index. Centers stay distinct:
    /// a candidate already chosen by an earlier subarea is skipped. Empty
    /// subareas keep their center. If some subarea has no admissible
    /// candidate the previous centers are returned unchanged.
    pub fn update_centers(&self, partition: &Partition) -> Vec<VertexId> {
        let n = self.n();
        let mut taken = vec![false; n];
        let mut next = Vec::with_capacity(partition.k());
        let subareas = partition.subareas();
        for (j, members) in subareas.iter().enumerate() {
            let incumbent = partition.centers[j];
            if members.is_empty() {
                if taken[incumbent.index()] {
                    return partition.centers.clone();
                }
                taken[incumbent.index()] = true;
                next.push(incumbent);
                continue;
            }
            let mut best: Option<(f64, VertexId)> = None;
            let mut incumbent_cost = None;
            for x in (0..n).map(VertexId::from_index) {
                let Some(cost) = self.subarea_cost(x, members) else {
                    continue;
                };
                if x == incumbent {
                    incumbent_cost = Some(cost);
                }
                if taken[x.index()] {
                    continue;
                }
                if best.is_none_or(|(b, _)| cost < b) {
                    best = Some((cost, x));
                }
            }
            let Some((best_cost, best_x)) = best else {
                return partition.centers.clone();
            };
            let chosen = match incumbent_cost {
                Some(ic)
                    if !taken[incumbent.index()]
                        && ic <= best_cost + change_tolerance(best_cost) =>
                {
                    incumbent
                }
                _ => best_x,
            };
            taken[chosen.index()] = true;
            next.push(chosen);
        }
        next
    }

    /// Descent from an explicit initial center set.
    pub fn search_from(
        &self,
        initial: &[VertexId],
        seed: u64,
    ) -> Result<SearchRun, RelocationError> {
        let mut current = self.assign(initial)?;
        let mut trace = vec![current.objective];
        let mut iterations = 0;
        loop {
            iterations += 1;
            let next = self.update_centers(&current);
            if next == current.centers {
                break;
            }
            let candidate = self.assign(&next)?;
            if candidate.objective < current.objective - change_tolerance(current.objective) {
                trace.push(candidate.objective);
                current = candidate;
            } else {
                break;
            }
            if iterations >= MAX_ITERATIONS {
                log::warn!("center search stopped after {MAX_ITERATIONS} iterations");
                break;
            }
        }
        current.iterations = iterations;
        current.seed = seed;
        Ok(SearchRun {
            partition: current,
            trace,
        })
    }

    /// Descent from `k` centers drawn uniformly without replacement.
    pub fn search(&self, k: usize, seed: u64) -> Result<SearchRun, RelocationError> {
        let init = self.random_centers(k, seed)?;
        self.search_from(&init, seed)
    }

    pub fn random_centers(&self, k: usize, seed: u64) -> Result<Vec<VertexId>, RelocationError> {
        let n = self.n();
        if k == 0 || k > n {
            return Err(RelocationError::InvalidK { k, n });
        }
        let mut rng = rng::seeded(seed);
        let mut init: Vec<VertexId> = index::sample(&mut rng, n, k)
            .into_iter()
            .map(VertexId::from_index)
            .collect();
        init.sort_unstable();
        Ok(init)
    }

    /// Best of independent runs, one per seed.
    pub fn multi_restart(&self, k: usize, seeds: &[u64]) -> Result<Partition, RelocationError> {
        if seeds.is_empty() {
            return Err(RelocationError::NoSeeds);
        }
        let mut runs = Vec::with_capacity(seeds.len());
        for &s in seeds {
            runs.push(self.search(k, s)?.partition);
        }
        Ok(best_partition(runs).expect("at least one run"))
    }

    /// Exact minimum over all `C(n, k)` center sets.
    pub fn brute_force(&self, k: usize, cap: u128) -> Result<Partition, RelocationError> {
        let n = self.n();
        if k == 0 || k > n {
            return Err(RelocationError::InvalidK { k, n });
        }
        let combinations = binomial(n as u128, k as u128);
        if combinations > cap {
            return Err(RelocationError::TooManyCombinations { combinations, cap });
        }
        let mut idx: Vec<usize> = (0..k).collect();
        let mut best: Option<Partition> = None;
        let mut first_err = None;
        loop {
            let centers: Vec<VertexId> = idx.iter().map(|&i| VertexId::from_index(i)).collect();
            match self.assign(&centers) {
                Ok(p) => {
                    if best.as_ref().is_none_or(|b| p.objective < b.objective) {
                        best = Some(p);
                    }
                }
                Err(e) => {
                    first_err.get_or_insert(e);
                }
            }
            // next combination in lexicographic order
            let mut i = k;
            loop {
                if i == 0 {
                    return best.ok_or_else(|| first_err.expect("no feasible set"));
                }
                i -= 1;
                if idx[i] < n - k + i {
                    idx[i] += 1;
                    for j in i + 1..k {
                        idx[j] = idx[j - 1] + 1;
                    }
                    break;
                }
            }
        }
    }
}

fn binomial(n: u128, k: u128) -> u128 {
    let k = k.min(n - k);
    let mut r: u128 = 1;
    for i in 0..k {
        r = r.saturating_mul(n - i) / (i + 1);
    }
    r
}

/// Deterministic reduction over restart results: lowest objective, then
/// lexicographically smallest sorted center set, then center order, then seed.
/// The result does not depend on the input order.
pub fn best_partition<I: IntoIterator<Item = Partition>>(runs: I) -> Option<Partition> {
    runs.into_iter().min_by(compare_partitions)
}

pub fn compare_partitions(a: &Partition, b: &Partition) -> Ordering {
    a.objective
        .total_cmp(&b.objective)
        .then_with(|| a.sorted_centers().cmp(&b.sorted_centers()))
        .then_with(|| a.centers.cmp(&b.centers))
        .then_with(|| a.seed.cmp(&b.seed))
}

/// Derives `count` restart seeds from a base seed.
pub fn restart_seeds(base: u64, count: usize) -> Vec<u64> {
    (0..count as u64).map(|i| rng::mix(base, i)).collect()
}

pub fn objective(
    dm: &DistanceMatrix,
    centers: &[VertexId],
    gaps: &[f64],
    kind: ActivationKind,
) -> Result<f64, RelocationError> {
    CenterProblem::new(dm, gaps, kind)?.objective(centers)
}

pub fn assign_subareas(
    dm: &DistanceMatrix,
    centers: &[VertexId],
    gaps: &[f64],
    kind: ActivationKind,
) -> Result<Partition, RelocationError> {
    CenterProblem::new(dm, gaps, kind)?.assign(centers)
}

pub fn update_centers(
    dm: &DistanceMatrix,
    partition: &Partition,
    gaps: &[f64],
    kind: ActivationKind,
    update: CenterUpdate,
) -> Result<Vec<VertexId>, RelocationError> {
    Ok(CenterProblem::new(dm, gaps, kind)?
        .with_update(update)
        .update_centers(partition))
}

/// One descent run on the graph snapshot at `t`.
pub fn search_centers(
    g: &RoadGraph,
    k: usize,
    gaps: &[f64],
    kind: ActivationKind,
    seed: u64,
    t: Timestamp,
) -> Result<Partition, RelocationError> {
    let dm = full_distance_matrix(g, t);
    Ok(CenterProblem::new(&dm, gaps, kind)?
        .search(k, seed)?
        .partition)
}

pub fn multi_restart_search(
    g: &RoadGraph,
    k: usize,
    gaps: &[f64],
    kind: ActivationKind,
    seeds: &[u64],
    t: Timestamp,
) -> Result<Partition, RelocationError> {
    let dm = full_distance_matrix(g, t);
    CenterProblem::new(&dm, gaps, kind)?.multi_restart(k, seeds)
}

pub fn brute_force_centers(
    g: &RoadGraph,
    k: usize,
    gaps: &[f64],
    kind: ActivationKind,
    t: Timestamp,
) -> Result<Partition, RelocationError> {
    let dm = full_distance_matrix(g, t);
    CenterProblem::new(&dm, gaps, kind)?.brute_force(k, BRUTE_FORCE_CAP)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures::{toy_gaps, toy_graph};
    use crate::graph::full_distance_matrix;

    fn v(ids: &[u32]) -> Vec<VertexId> {
        ids.iter().map(|&i| VertexId(i)).collect()
    }

    #[test]
    fn activation_values() {
        assert_eq!(activation(ActivationKind::Relu, -1.0), 0.0);
        assert_eq!(activation(ActivationKind::Sigmoid, 0.0), 0.5);
        assert_eq!(activation(ActivationKind::Identity, -1.0), -1.0);
        assert_eq!(activation(ActivationKind::Ignore, -7.0), 1.0);
        assert!(
            (activation(ActivationKind::Softplus, 0.0) - core::f64::consts::LN_2).abs() < 1e-15
        );
        // no overflow at the extremes
        assert_eq!(activation(ActivationKind::Softplus, 1000.0), 1000.0);
        assert_eq!(activation(ActivationKind::Sigmoid, -1000.0), 0.0);
        assert_eq!(
            "ReLU".parse::<ActivationKind>().unwrap(),
            ActivationKind::Relu
        );
    }

    #[test]
    fn toy_assignment_follows_signed_products() {
        let g = toy_graph();
        let dm = full_distance_matrix(&g, 0);
        let p = assign_subareas(&dm, &v(&[0, 3]), &toy_gaps(), ActivationKind::Identity).unwrap();
        // B goes to D: -11 min beats -5 min
        assert_eq!(p.center_of(VertexId(1)), VertexId(3));
        assert_eq!(p.objective, -11.0 * 60.0);
        p.validate(4).unwrap();
    }

    #[test]
    fn every_vertex_a_center_costs_zero() {
        let g = toy_graph();
        let dm = full_distance_matrix(&g, 0);
        for kind in ActivationKind::ALL {
            assert_eq!(
                objective(&dm, &v(&[0, 1, 2, 3]), &toy_gaps(), kind).unwrap(),
                0.0
            );
        }
        let problem = CenterProblem::new(&dm, &toy_gaps(), ActivationKind::Relu).unwrap();
        let run = problem.search(4, 3).unwrap();
        assert_eq!(run.partition.objective, 0.0);
        assert_eq!(run.partition.iterations, 1);
    }

    #[test]
    fn equidistant_ties_go_to_lowest_center() {
        let rows = vec![
            vec![0.0, 5.0, 5.0, 5.0],
            vec![5.0, 0.0, 5.0, 5.0],
            vec![5.0, 5.0, 0.0, 5.0],
            vec![5.0, 5.0, 5.0, 0.0],
        ];
        let dm = DistanceMatrix::square(&rows).unwrap();
        let p = assign_subareas(&dm, &v(&[2, 1]), &[0.0; 4], ActivationKind::Ignore).unwrap();
        assert_eq!(p.assignment, vec![0, 1, 0, 0]);
    }

    #[test]
    fn update_keeps_singleton_and_zero_weight_centers() {
        let rows = vec![
            vec![0.0, 1.0, 9.0],
            vec![1.0, 0.0, 9.0],
            vec![9.0, 9.0, 0.0],
        ];
        let dm = DistanceMatrix::square(&rows).unwrap();
        // ReLU on non-positive gaps: every weight is zero
        let problem = CenterProblem::new(&dm, &[-1.0, 0.0, -2.0], ActivationKind::Relu).unwrap();
        let p = problem.assign(&v(&[1, 2])).unwrap();
        assert_eq!(problem.update_centers(&p), v(&[1, 2]));
        // singleton subarea with positive weight stays on itself
        let problem = CenterProblem::new(&dm, &[1.0, 1.0, 1.0], ActivationKind::Ignore).unwrap();
        let p = problem.assign(&v(&[0, 2])).unwrap();
        assert_eq!(p.subareas()[1], v(&[2]));
        assert_eq!(problem.update_centers(&p)[1], VertexId(2));
    }

    #[test]
    fn unreachable_vertex_is_an_error() {
        let rows = vec![vec![0.0, f64::INFINITY], vec![f64::INFINITY, 0.0]];
        let dm = DistanceMatrix::square(&rows).unwrap();
        let err = objective(&dm, &v(&[0]), &[1.0, 1.0], ActivationKind::Ignore).unwrap_err();
        assert_eq!(err, RelocationError::Unreachable(VertexId(1)));
    }

    #[test]
    fn rejects_bad_center_sets() {
        let dm = full_distance_matrix(&toy_graph(), 0);
        let problem = CenterProblem::new(&dm, &toy_gaps(), ActivationKind::Identity).unwrap();
        assert!(problem.assign(&v(&[1, 1])).is_err());
        assert!(problem.assign(&[]).is_err());
        assert!(problem.search(5, 0).is_err());
        assert!(matches!(
            problem.brute_force(2, 5),
            Err(RelocationError::TooManyCombinations {
                combinations: 6,
                cap: 5
            })
        ));
        assert!(CenterProblem::new(&dm, &[1.0], ActivationKind::Relu).is_err());
    }

    #[test]
    fn binomial_small_values() {
        assert_eq!(binomial(4, 2), 6);
        assert_eq!(binomial(12, 4), 495);
        assert_eq!(binomial(5, 5), 1);
        assert!(binomial(2000, 37) > BRUTE_FORCE_CAP);
    }

    #[test]
    fn reduction_ignores_input_order() {
        let mk = |c: &[u32], obj: f64, seed: u64| Partition {
            centers: v(c),
            assignment: vec![],
            objective: obj,
            iterations: 1,
            seed,
        };
        let runs = vec![
            mk(&[3, 1], 5.0, 9),
            mk(&[1, 3], 5.0, 2),
            mk(&[0, 2], 6.0, 1),
        ];
        let mut rev = runs.clone();
        rev.reverse();
        assert_eq!(best_partition(runs.clone()), best_partition(rev));
        assert_eq!(best_partition(runs).unwrap().centers, v(&[1, 3]));
    }
}
