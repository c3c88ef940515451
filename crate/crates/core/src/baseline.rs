//! Edge-only baseline partitioners: greedy reach-based subareas and power
//! iteration clustering on a travel-time similarity graph. Neither looks at
//! demand.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::RelocationError;
use crate::graph::{full_distance_matrix, DistanceMatrix, RoadGraph, VertexId};
use crate::relocation::Partition;
use crate::rng;
use crate::Timestamp;

use rand::Rng;

/// Symmetric similarity `A[i][j] = s(i,j) + s(j,i)`, with `s(i,j)` the inverse
/// travel time of edge `i -> j` (zero without an edge).
#[derive(Clone, Debug, PartialEq)]
pub struct SimilarityMatrix {
    n: usize,
    values: Vec<f64>,
}

impl SimilarityMatrix {
    pub fn from_dense(n: usize, values: Vec<f64>) -> Self {
        assert_eq!(values.len(), n * n);
        SimilarityMatrix { n, values }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.n + j]
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.values[i * self.n..(i + 1) * self.n]
    }

    pub fn scaled(&self, factor: f64) -> Self {
        SimilarityMatrix {
            n: self.n,
            values: self.values.iter().map(|v| v * factor).collect(),
        }
    }

    pub fn degrees(&self) -> Vec<f64> {
        (0..self.n).map(|i| self.row(i).iter().sum()).collect()
    }
}

pub fn similarity_graph(g: &RoadGraph, t: Timestamp) -> SimilarityMatrix {
    let n = g.vertex_count();
    let slot = g.slot_at(t);
    let mut values = vec![0.0; n * n];
    for e in g.edges() {
        let s = 1.0 / e.profile.at_slot(slot);
        let (i, j) = (e.from.index(), e.to.index());
        values[i * n + j] += s;
        values[j * n + i] += s;
    }
    SimilarityMatrix { n, values }
}

/// Power-iteration settings.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PicConfig {
    pub max_iterations: usize,
    /// Stop once the largest change in per-vertex velocity drops below
    /// `epsilon / n`.
    pub epsilon: f64,
    /// Independent 1-D k-means starts; the lowest within-cluster error wins.
    pub kmeans_starts: usize,
}

impl Default for PicConfig {
    fn default() -> Self {
        PicConfig {
            max_iterations: 1000,
            epsilon: 1e-5,
            kmeans_starts: 10,
        }
    }
}

/// One-dimensional embedding from truncated power iteration on the
/// row-normalized similarity matrix. Isolated vertices keep 0.
///
/// The start vector is the degree vector jittered by a seeded factor in
/// `[1, 1.5)`; a plain degree vector is already stationary when all degrees
/// are equal and would never separate disconnected blocks.
pub fn pic_embedding(
    sim: &SimilarityMatrix,
    seed: u64,
    cfg: &PicConfig,
) -> Result<Vec<f64>, RelocationError> {
    let n = sim.n();
    let deg = sim.degrees();
    if deg.iter().sum::<f64>() <= 0.0 {
        return Err(RelocationError::EmptySimilarity);
    }
    let mut jitter = rng::seeded(rng::mix(seed, 0x9105));
    let mut v: Vec<f64> = deg
        .iter()
        .map(|d| d * (1.0 + 0.5 * jitter.gen::<f64>()))
        .collect();
    let volume: f64 = v.iter().sum();
    v.iter_mut().for_each(|x| *x /= volume);
    let mut velocity = vec![0.0; n];
    let threshold = cfg.epsilon / n as f64;
    for iter in 0..cfg.max_iterations {
        let mut next = vec![0.0; n];
        for i in 0..n {
            if deg[i] > 0.0 {
                let row = sim.row(i);
                let mut acc = 0.0;
                for j in 0..n {
                    acc += row[j] * v[j];
                }
                next[i] = acc / deg[i];
            }
        }
        let norm: f64 = next.iter().map(|x| x.abs()).sum();
        if norm > 0.0 {
            next.iter_mut().for_each(|x| *x /= norm);
        }
        let mut accel: f64 = 0.0;
        for i in 0..n {
            let vel = (next[i] - v[i]).abs();
            accel = accel.max((vel - velocity[i]).abs());
            velocity[i] = vel;
        }
        v = next;
        if iter > 0 && accel < threshold {
            break;
        }
    }
    Ok(v)
}

/// Lloyd iterations on scalars from k-means++ seeding; ties go to the lower
/// centroid. Returns sorted centroids and the cluster of each value.
fn kmeans_1d(
    values: &[f64],
    k: usize,
    rng: &mut rng::Rng,
    starts: usize,
) -> (Vec<f64>, Vec<usize>) {
    let mut best: Option<(f64, Vec<f64>, Vec<usize>)> = None;
    for _ in 0..starts.max(1) {
        let mut centroids = Vec::with_capacity(k);
        centroids.push(values[rng.gen_range(0..values.len())]);
        while centroids.len() < k {
            let d2: Vec<f64> = values
                .iter()
                .map(|x| {
                    centroids
                        .iter()
                        .map(|c| (x - c) * (x - c))
                        .fold(f64::INFINITY, f64::min)
                })
                .collect();
            let total: f64 = d2.iter().sum();
            if total <= 0.0 {
                centroids.push(values[rng.gen_range(0..values.len())]);
                continue;
            }
            let mut target = rng.gen::<f64>() * total;
            let mut pick = values.len() - 1;
            for (i, d) in d2.iter().enumerate() {
                if target < *d {
                    pick = i;
                    break;
                }
                target -= d;
            }
            centroids.push(values[pick]);
        }
        centroids.sort_by(f64::total_cmp);
        let mut labels = vec![0usize; values.len()];
        for _ in 0..100 {
            let mut changed = false;
            for (i, x) in values.iter().enumerate() {
                let mut bj = 0;
                for j in 1..k {
                    if (x - centroids[j]).abs() < (x - centroids[bj]).abs() {
                        bj = j;
                    }
                }
                if labels[i] != bj {
                    labels[i] = bj;
                    changed = true;
                }
            }
            let mut sums = vec![0.0; k];
            let mut counts = vec![0usize; k];
            for (i, &l) in labels.iter().enumerate() {
                sums[l] += values[i];
                counts[l] += 1;
            }
            for j in 0..k {
                if counts[j] > 0 {
                    centroids[j] = sums[j] / counts[j] as f64;
                }
            }
            if !changed {
                break;
            }
        }
        let sse: f64 = values
            .iter()
            .zip(&labels)
            .map(|(x, &l)| (x - centroids[l]) * (x - centroids[l]))
            .sum();
        if best.as_ref().is_none_or(|(b, _, _)| sse < *b) {
            best = Some((sse, centroids, labels));
        }
    }
    let (_, c, l) = best.expect("at least one start");
    (c, l)
}

/// Power iteration clustering into `k` subareas. Each subarea's center is
/// the member minimizing the summed travel time to the other members.
pub fn pic_partition(
    sim: &SimilarityMatrix,
    dm: &DistanceMatrix,
    k: usize,
    seed: u64,
    cfg: &PicConfig,
) -> Result<Partition, RelocationError> {
    let n = sim.n();
    if k == 0 || k > n {
        return Err(RelocationError::InvalidK { k, n });
    }
    if !dm.is_complete() || dm.n_targets() != n {
        return Err(RelocationError::IncompleteMatrix);
    }
    let embedding = pic_embedding(sim, seed, cfg)?;
    let deg = sim.degrees();
    let connected: Vec<usize> = (0..n).filter(|&i| deg[i] > 0.0).collect();
    let values: Vec<f64> = connected.iter().map(|&i| embedding[i]).collect();
    let mut rng = rng::seeded(seed);
    let (centroids, labels) = kmeans_1d(&values, k, &mut rng, cfg.kmeans_starts);

    let mut assignment = vec![0u32; n];
    for (pos, &i) in connected.iter().enumerate() {
        assignment[i] = labels[pos] as u32;
    }
    let mut sizes = vec![0usize; k];
    for &l in &labels {
        sizes[l] += 1;
    }
    for i in 0..n {
        if deg[i] > 0.0 {
            continue;
        }
        // isolated vertex: nearest nonempty cluster by embedding value
        let x = embedding[i];
        let mut bj = None;
        for j in 0..k {
            if sizes[j] == 0 {
                continue;
            }
            if bj.is_none_or(|b: usize| (x - centroids[j]).abs() < (x - centroids[b]).abs()) {
                bj = Some(j);
            }
        }
        let j = bj.unwrap_or(0);
        assignment[i] = j as u32;
        sizes[j] += 1;
    }
    fill_empty_clusters(&mut assignment, &mut sizes, &embedding, &centroids);

    let mut members = vec![Vec::new(); k];
    for (v, &a) in assignment.iter().enumerate() {
        members[a as usize].push(VertexId::from_index(v));
    }
    let centers: Vec<VertexId> = members.iter().map(|m| medoid(dm, m)).collect();
    let mut p = Partition::from_assignment(centers, assignment);
    p.objective = unweighted_cost(dm, &p);
    p.seed = seed;
    Ok(p)
}

// Moves the worst-fitting vertex of the largest cluster into each empty one.
fn fill_empty_clusters(
    assignment: &mut [u32],
    sizes: &mut [usize],
    embedding: &[f64],
    centroids: &[f64],
) {
    while let Some(empty) = sizes.iter().position(|&s| s == 0) {
        let donor = (0..sizes.len())
            .max_by(|&a, &b| sizes[a].cmp(&sizes[b]).then(b.cmp(&a)))
            .expect("k > 0");
        if sizes[donor] <= 1 {
            break;
        }
        let mut pick = None;
        for (v, &a) in assignment.iter().enumerate() {
            if a as usize != donor {
                continue;
            }
            let d = (embedding[v] - centroids[donor]).abs();
            if pick.is_none_or(|(bd, _)| d > bd) {
                pick = Some((d, v));
            }
        }
        let (_, v) = pick.expect("donor has members");
        assignment[v] = empty as u32;
        sizes[donor] -= 1;
        sizes[empty] += 1;
    }
}

/// Member minimizing (unreachable members, summed travel time, index).
fn medoid(dm: &DistanceMatrix, members: &[VertexId]) -> VertexId {
    let mut best: Option<(usize, f64, VertexId)> = None;
    for &x in members {
        let row = dm.row(x).expect("complete matrix");
        let mut missing = 0;
        let mut sum = 0.0;
        for &v in members {
            let d = row[v.index()];
            if d.is_finite() {
                sum += d;
            } else {
                missing += 1;
            }
        }
        let better = match best {
            None => true,
            Some((bm, bs, _)) => missing < bm || (missing == bm && sum < bs),
        };
        if better {
            best = Some((missing, sum, x));
        }
    }
    best.expect("cluster is nonempty").2
}

fn unweighted_cost(dm: &DistanceMatrix, p: &Partition) -> f64 {
    (0..p.vertex_count())
        .map(VertexId::from_index)
        .map(|v| dm.get(p.center_of(v), v))
        .filter(|d| d.is_finite())
        .sum()
}

/// Greedy reach-based partitioning settings.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FdaVedConfig {
    /// Maximum vertices per subarea, center included.
    pub n_max: usize,
    /// Reach threshold in seconds.
    pub reach_seconds: f64,
}

impl FdaVedConfig {
    pub fn new(n_max: usize, reach_seconds: f64) -> Result<Self, RelocationError> {
        if n_max == 0 {
            return Err(RelocationError::InvalidNMax);
        }
        Ok(FdaVedConfig {
            n_max,
            reach_seconds,
        })
    }

    /// `floor(n_points / n_max)` full-size subareas.
    pub fn n_sub(&self, n_points: usize) -> usize {
        n_points / self.n_max
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct FdaVedStats {
    pub distance_lookups: u64,
    pub rounds: usize,
}

/// Repeatedly takes the remaining vertex that reaches the most remaining
/// vertices within the threshold (lowest index on ties), makes it a center
/// and gives it its `n_max` nearest remaining vertices. A final subarea may
/// be smaller than `n_max`.
pub fn fda_ved_partition_with(
    dm: &DistanceMatrix,
    cfg: &FdaVedConfig,
) -> Result<(Partition, FdaVedStats), RelocationError> {
    if cfg.n_max == 0 {
        return Err(RelocationError::InvalidNMax);
    }
    if !dm.is_complete() {
        return Err(RelocationError::IncompleteMatrix);
    }
    let n = dm.n_targets();
    let mut remaining: Vec<VertexId> = (0..n).map(VertexId::from_index).collect();
    let mut assignment = vec![u32::MAX; n];
    let mut centers = Vec::new();
    let mut stats = FdaVedStats::default();
    while !remaining.is_empty() {
        let mut best: Option<(usize, VertexId)> = None;
        for &u in &remaining {
            let row = dm.row(u).expect("complete matrix");
            let reach = remaining
                .iter()
                .filter(|v| row[v.index()] <= cfg.reach_seconds)
                .count();
            stats.distance_lookups += remaining.len() as u64;
            if best.is_none_or(|(b, _)| reach > b) {
                best = Some((reach, u));
            }
        }
        let (_, center) = best.expect("remaining is nonempty");
        let row = dm.row(center).expect("complete matrix");
        stats.distance_lookups += remaining.len() as u64;
        let mut order = remaining.clone();
        order.sort_by(|a, b| {
            let da = if *a == center {
                f64::NEG_INFINITY
            } else {
                row[a.index()]
            };
            let db = if *b == center {
                f64::NEG_INFINITY
            } else {
                row[b.index()]
            };
            da.total_cmp(&db).then(a.cmp(b))
        });
        let j = centers.len() as u32;
        for v in order.iter().take(cfg.n_max) {
            assignment[v.index()] = j;
        }
        centers.push(center);
        remaining.retain(|v| assignment[v.index()] == u32::MAX);
        stats.rounds += 1;
    }
    let mut p = Partition::from_assignment(centers, assignment);
    p.objective = unweighted_cost(dm, &p);
    Ok((p, stats))
}

pub fn fda_ved_partition(
    g: &RoadGraph,
    cfg: &FdaVedConfig,
    t: Timestamp,
) -> Result<Partition, RelocationError> {
    let dm = full_distance_matrix(g, t);
    Ok(fda_ved_partition_with(&dm, cfg)?.0)
}
