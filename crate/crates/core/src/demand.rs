//! Trip stores, point-level historical-average demand and supply/demand gaps.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::DemandError;
use crate::graph::{Point, RoadGraph, SnapIndex, VertexId};
use crate::relocation::Partition;
use crate::Timestamp;

pub const SECONDS_PER_DAY: i64 = 86_400;

/// Day index since the epoch.
pub fn day_of(t: Timestamp) -> i64 {
    t.div_euclid(SECONDS_PER_DAY)
}

/// Saturday and Sunday, UTC. Day 0 (1970-01-01) was a Thursday.
pub fn is_weekend_day(day: i64) -> bool {
    matches!((day + 3).rem_euclid(7), 5 | 6)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum DayType {
    Weekday = 0,
    Weekend = 1,
}

impl DayType {
    pub fn of_day(day: i64) -> Self {
        if is_weekend_day(day) {
            DayType::Weekend
        } else {
            DayType::Weekday
        }
    }
}

/// A trip endpoint as it appears in a trip file.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Location {
    Node(u32),
    Point(Point),
}

/// Parsed but not yet validated trip row.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RawTrip {
    pub line: usize,
    pub request_time: Timestamp,
    pub pickup: Location,
    pub dropoff: Location,
}

/// A passenger request `(t_p, l_p, l_d)`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct TripRequest {
    pub id: u32,
    pub request_time: Timestamp,
    pub pickup: VertexId,
    pub dropoff: VertexId,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "lowercase"))]
pub enum TripStatus {
    Served,
    Expired,
}

/// Realized service record of one request.
#[derive(Clone, Copy, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct TripOutcome {
    pub request: u32,
    pub request_time: Timestamp,
    pub status: TripStatus,
    pub actual_pickup_time: Option<Timestamp>,
    pub vehicle: Option<u32>,
    pub pickup_deadhead_km: f64,
    pub trip_km: f64,
}

/// Trips sorted by request time, ids assigned in that order.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct TripStore {
    trips: Vec<TripRequest>,
}

impl TripStore {
    /// Sorts by `(request_time, pickup, dropoff)` and renumbers ids `0..n`,
    /// so the store does not depend on input order.
    pub fn from_requests(mut trips: Vec<TripRequest>) -> Self {
        trips.sort_by_key(|t| (t.request_time, t.pickup, t.dropoff));
        for (i, t) in trips.iter_mut().enumerate() {
            t.id = i as u32;
        }
        TripStore { trips }
    }

    pub fn trips(&self) -> &[TripRequest] {
        &self.trips
    }

    pub fn len(&self) -> usize {
        self.trips.len()
    }

    pub fn is_empty(&self) -> bool {
        self.trips.is_empty()
    }

    /// Trips with `start <= t_p < end`.
    pub fn between(&self, start: Timestamp, end: Timestamp) -> &[TripRequest] {
        let lo = self.trips.partition_point(|t| t.request_time < start);
        let hi = self.trips.partition_point(|t| t.request_time < end);
        &self.trips[lo..hi.max(lo)]
    }

    /// Sub-store with `start <= t_p < end`, renumbered.
    pub fn window(&self, start: Timestamp, end: Timestamp) -> TripStore {
        TripStore::from_requests(self.between(start, end).to_vec())
    }

    /// Inclusive range of days touched by the store.
    pub fn day_span(&self) -> Option<(i64, i64)> {
        Some((
            day_of(self.trips.first()?.request_time),
            day_of(self.trips.last()?.request_time),
        ))
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct IngestSummary {
    pub accepted: usize,
    /// Endpoint farther than the snapping radius from every vertex.
    pub dropped_unsnapped: usize,
    /// Pickup and dropoff on the same vertex after snapping.
    pub dropped_same_vertex: usize,
    /// Node id outside the graph.
    pub dropped_unknown_node: usize,
}

impl IngestSummary {
    pub fn dropped(&self) -> usize {
        self.dropped_unsnapped + self.dropped_same_vertex + self.dropped_unknown_node
    }
}

/// Resolves trip endpoints onto vertices and builds a sorted store.
pub fn ingest_trips(
    rows: &[RawTrip],
    g: &RoadGraph,
    snap: &SnapIndex,
) -> (TripStore, IngestSummary) {
    let mut summary = IngestSummary::default();
    let mut trips = Vec::with_capacity(rows.len());
    let resolve = |loc: Location| -> Result<VertexId, bool> {
        match loc {
            Location::Node(id) if (id as usize) < g.vertex_count() => Ok(VertexId(id)),
            Location::Node(_) => Err(false),
            Location::Point(p) => snap.snap(p).ok_or(true),
        }
    };
    for row in rows {
        let endpoints = resolve(row.pickup).and_then(|p| resolve(row.dropoff).map(|d| (p, d)));
        match endpoints {
            Err(true) => summary.dropped_unsnapped += 1,
            Err(false) => summary.dropped_unknown_node += 1,
            Ok((p, d)) if p == d => summary.dropped_same_vertex += 1,
            Ok((pickup, dropoff)) => trips.push(TripRequest {
                id: 0,
                request_time: row.request_time,
                pickup,
                dropoff,
            }),
        }
    }
    summary.accepted = trips.len();
    if summary.dropped() > 0 {
        log::warn!(
            "dropped {} of {} trips ({} unsnapped, {} same vertex, {} unknown node)",
            summary.dropped(),
            rows.len(),
            summary.dropped_unsnapped,
            summary.dropped_same_vertex,
            summary.dropped_unknown_node
        );
    }
    (TripStore::from_requests(trips), summary)
}

/// Mean pickups and dropoffs at `v` in the time-of-day bucket holding `t`,
/// over the history days before `t`'s day with the same day type (all prior
/// days if none share the type).
///
/// This is the direct, per-query form; [`DemandProfile`] precomputes the same
/// averages for every vertex and bucket.
pub fn predict_point_demand(
    history: &TripStore,
    v: VertexId,
    t: Timestamp,
    bucket_len: i64,
) -> (f64, f64) {
    let Some((first_day, _)) = history.day_span() else {
        log::warn!("empty demand history; predicting zero");
        return (0.0, 0.0);
    };
    let day = day_of(t);
    let bucket = t.rem_euclid(SECONDS_PER_DAY) / bucket_len;
    let day_type = DayType::of_day(day);
    let prior: Vec<i64> = (first_day..day).collect();
    if prior.is_empty() {
        return (0.0, 0.0);
    }
    let same_type = prior
        .iter()
        .filter(|&&d| DayType::of_day(d) == day_type)
        .count();
    let use_type = same_type > 0;
    let n_days = if use_type { same_type } else { prior.len() };
    let (mut pk, mut dp) = (0usize, 0usize);
    for trip in history.trips() {
        let d = day_of(trip.request_time);
        if d >= day || (use_type && DayType::of_day(d) != day_type) {
            continue;
        }
        if trip.request_time.rem_euclid(SECONDS_PER_DAY) / bucket_len != bucket {
            continue;
        }
        pk += (trip.pickup == v) as usize;
        dp += (trip.dropoff == v) as usize;
    }
    (pk as f64 / n_days as f64, dp as f64 / n_days as f64)
}

/// Windows used when turning history into predictions.
#[derive(Clone, Copy, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ProfileConfig {
    /// Prediction bucket length `t_f`, seconds. Must divide a day.
    pub bucket_len: i64,
    /// Advance interval `t_a`, seconds.
    pub lookahead: i64,
    /// Relocation horizon `t_r`, seconds; the gap window length.
    pub horizon: i64,
}

impl Default for ProfileConfig {
    fn default() -> Self {
        ProfileConfig {
            bucket_len: 600,
            lookahead: 600,
            horizon: 600,
        }
    }
}

/// Predicted pickups and dropoffs per (day type, time-of-day bucket, vertex).
#[derive(Clone, Debug, PartialEq)]
pub struct DemandProfile {
    config: ProfileConfig,
    n_vertices: usize,
    buckets_per_day: usize,
    // [day_type][bucket][vertex]
    pickups: Vec<f64>,
    dropoffs: Vec<f64>,
}

impl DemandProfile {
    /// Averages the history over the days it spans.
    pub fn from_history(
        history: &TripStore,
        n_vertices: usize,
        config: ProfileConfig,
    ) -> Result<Self, DemandError> {
        match history.day_span() {
            Some((first, last)) => {
                Self::from_history_days(history, n_vertices, first, last - first + 1, config)
            }
            None => {
                log::warn!("empty demand history; all predictions are zero");
                Self::from_history_days(history, n_vertices, 0, 0, config)
            }
        }
    }

    /// Averages over `n_days` days starting at `first_day`; trips outside that
    /// range are ignored.
    pub fn from_history_days(
        history: &TripStore,
        n_vertices: usize,
        first_day: i64,
        n_days: i64,
        config: ProfileConfig,
    ) -> Result<Self, DemandError> {
        let bl = config.bucket_len;
        if bl <= 0 || SECONDS_PER_DAY % bl != 0 {
            return Err(DemandError::InvalidBucket(bl));
        }
        if config.horizon <= 0 || config.lookahead < 0 {
            return Err(DemandError::InvalidWindow);
        }
        let buckets_per_day = (SECONDS_PER_DAY / bl) as usize;
        let plane = buckets_per_day * n_vertices;
        let mut pk = vec![0.0; 2 * plane];
        let mut dp = vec![0.0; 2 * plane];
        let mut day_counts = [0usize; 2];
        for d in first_day..first_day + n_days.max(0) {
            day_counts[DayType::of_day(d) as usize] += 1;
        }
        let total_days = day_counts[0] + day_counts[1];
        let mut raw_pk = vec![0.0; 2 * plane];
        let mut raw_dp = vec![0.0; 2 * plane];
        for trip in history.trips() {
            let d = day_of(trip.request_time);
            if d < first_day || d >= first_day + n_days {
                continue;
            }
            let ty = DayType::of_day(d) as usize;
            let b = (trip.request_time.rem_euclid(SECONDS_PER_DAY) / bl) as usize;
            for (v, store) in [(trip.pickup, &mut raw_pk), (trip.dropoff, &mut raw_dp)] {
                if v.index() >= n_vertices {
                    return Err(DemandError::UnknownVertex(v));
                }
                store[ty * plane + b * n_vertices + v.index()] += 1.0;
            }
        }
        for (ty, &count) in day_counts.iter().enumerate() {
            let range = ty * plane..(ty + 1) * plane;
            if count > 0 {
                let n = count as f64;
                for i in range {
                    pk[i] = raw_pk[i] / n;
                    dp[i] = raw_dp[i] / n;
                }
            } else if total_days > 0 {
                // no day of this type: pool both types
                let n = total_days as f64;
                for i in range {
                    let off = i - ty * plane;
                    pk[i] = (raw_pk[off] + raw_pk[plane + off]) / n;
                    dp[i] = (raw_dp[off] + raw_dp[plane + off]) / n;
                }
            }
        }
        Ok(DemandProfile {
            config,
            n_vertices,
            buckets_per_day,
            pickups: pk,
            dropoffs: dp,
        })
    }

    pub fn config(&self) -> ProfileConfig {
        self.config
    }

    pub fn vertex_count(&self) -> usize {
        self.n_vertices
    }

    fn slot(&self, day_type: DayType, bucket: usize, v: VertexId) -> usize {
        (day_type as usize * self.buckets_per_day + bucket) * self.n_vertices + v.index()
    }

    /// Predicted (pickups, dropoffs) at `v` for the bucket holding `t`.
    pub fn bucket_prediction(&self, v: VertexId, t: Timestamp) -> (f64, f64) {
        let ty = DayType::of_day(day_of(t));
        let b = (t.rem_euclid(SECONDS_PER_DAY) / self.config.bucket_len) as usize;
        let i = self.slot(ty, b, v);
        (self.pickups[i], self.dropoffs[i])
    }

    /// Predicted (pickups, dropoffs) at `v` over `[start, end)`, prorating
    /// buckets that overlap the window partially.
    pub fn window_prediction(&self, v: VertexId, start: Timestamp, end: Timestamp) -> (f64, f64) {
        let bl = self.config.bucket_len;
        let (mut pk, mut dp) = (0.0, 0.0);
        let mut t = start;
        while t < end {
            let bucket_end = (t.div_euclid(bl) + 1) * bl;
            let seg_end = bucket_end.min(end);
            let frac = (seg_end - t) as f64 / bl as f64;
            let (p, d) = self.bucket_prediction(v, t);
            pk += p * frac;
            dp += d * frac;
            t = seg_end;
        }
        (pk, dp)
    }

    /// `g_v`: predicted pickups minus dropoffs over `[t, t + t_r)`.
    pub fn gap(&self, v: VertexId, t: Timestamp) -> f64 {
        let (pk, dp) = self.window_prediction(v, t, t + self.config.horizon);
        pk - dp
    }

    pub fn gaps(&self, t: Timestamp) -> Vec<f64> {
        (0..self.n_vertices)
            .map(|v| self.gap(VertexId::from_index(v), t))
            .collect()
    }
}

pub fn pickup_dropoff_gap(profile: &DemandProfile, v: VertexId, t: Timestamp) -> f64 {
    profile.gap(v, t)
}

/// Per-subarea signed gap: predicted net demand minus available supply.
/// Positive means the subarea needs vehicles.
pub fn region_gap(
    partition: &Partition,
    profile: &DemandProfile,
    supply: &[usize],
    t: Timestamp,
) -> Result<Vec<f64>, DemandError> {
    region_gap_from_vertex_gaps(partition, &profile.gaps(t), supply)
}

/// [`region_gap`] with vertex gaps computed by the caller.
pub fn region_gap_from_vertex_gaps(
    partition: &Partition,
    vertex_gaps: &[f64],
    supply: &[usize],
) -> Result<Vec<f64>, DemandError> {
    if partition.vertex_count() != vertex_gaps.len() {
        return Err(DemandError::PartitionSize {
            expected: vertex_gaps.len(),
            found: partition.vertex_count(),
        });
    }
    if supply.len() != partition.k() {
        return Err(DemandError::SupplySize {
            expected: partition.k(),
            found: supply.len(),
        });
    }
    let mut out: Vec<f64> = supply.iter().map(|&s| -(s as f64)).collect();
    for (v, &a) in partition.assignment.iter().enumerate() {
        out[a as usize] += vertex_gaps[v];
    }
    Ok(out)
}
