//! Discrete-event dispatch simulation.
//!
//! Requests are matched to vehicles in fixed batches; every relocation
//! interval the road graph is re-partitioned, region gaps are computed and
//! idle vehicles in over-supplied subareas are sent to the centers of
//! under-supplied ones. Vehicle movement is abstracted to arrival events at
//! shortest-path travel times, and distance accrues as shortest-path length.

use alloc::boxed::Box;
use alloc::collections::BinaryHeap;
use alloc::vec;
use alloc::vec::Vec;
use core::cmp::Reverse;
use core::fmt;
use core::str::FromStr;

use rand::Rng;

use crate::baseline::{
    fda_ved_partition_with, pic_partition, similarity_graph, FdaVedConfig, PicConfig,
    SimilarityMatrix,
};
use crate::demand::{
    region_gap_from_vertex_gaps, DemandProfile, TripOutcome, TripStatus, TripStore,
};
use crate::error::{RelocationError, SimError};
use crate::graph::{full_distance_matrix, DistanceMatrix, DistanceOracle, RoadGraph, VertexId};
use crate::matching::{
    build_relocation_graph, build_request_vehicle_graph, max_bipartite_matching, relocation_slots,
    AvailableVehicle, PendingRequest,
};
use crate::relocation::{restart_seeds, ActivationKind, CenterProblem, CenterUpdate, Partition};
use crate::rng;
use crate::Timestamp;

/// Relocation-center method used by `rebalance`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "lowercase"))]
pub enum Method {
    /// Demand-weighted center search with multiple restarts.
    Dfda,
    /// Greedy reach-based partition.
    #[cfg_attr(feature = "serde", serde(rename = "fda"))]
    FdaVed,
    /// Power iteration clustering.
    Pic,
    /// No relocation.
    None,
}

impl Method {
    pub const ALL: [Method; 4] = [Method::Dfda, Method::FdaVed, Method::Pic, Method::None];

    pub fn name(self) -> &'static str {
        match self {
            Method::Dfda => "dfda",
            Method::FdaVed => "fda",
            Method::Pic => "pic",
            Method::None => "none",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Method {
    type Err = &'static str;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Method::ALL
            .into_iter()
            .find(|m| m.name().eq_ignore_ascii_case(s))
            .ok_or("expected one of dfda, fda, pic, none")
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum PartitionSchedule {
    #[default]
    EveryCycle,
    OncePerRun,
}

#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(default, deny_unknown_fields))]
pub struct SimConfig {
    pub n_vehicles: usize,
    /// Passenger maximum wait, seconds.
    pub max_wait: i64,
    /// A relocated vehicle must reach its center within this many seconds.
    pub relocation_time: i64,
    /// Prediction bucket length, seconds.
    pub prediction_window: i64,
    /// Advance interval of the prediction, seconds.
    pub lookahead: i64,
    /// Maximum edge length in meters; trips snap within half of it.
    pub l_max: f64,
    pub batch_interval: i64,
    pub relocation_interval: i64,
    pub k: usize,
    pub activation: ActivationKind,
    pub method: Method,
    pub restarts: usize,
    pub seed: u64,
    /// Relocating vehicles may be claimed by new requests.
    pub divertible: bool,
    pub center_update: CenterUpdate,
    pub schedule: PartitionSchedule,
    /// Subarea size for the greedy baseline; defaults to `ceil(n / k)`.
    pub fda_n_max: Option<usize>,
}

impl Default for SimConfig {
    fn default() -> Self {
        SimConfig {
            n_vehicles: 100,
            max_wait: 300,
            relocation_time: 600,
            prediction_window: 600,
            lookahead: 600,
            l_max: 200.0,
            batch_interval: 60,
            relocation_interval: 600,
            k: 10,
            activation: ActivationKind::Relu,
            method: Method::Dfda,
            restarts: 8,
            seed: 0,
            divertible: true,
            center_update: CenterUpdate::Weighted,
            schedule: PartitionSchedule::EveryCycle,
            fda_n_max: None,
        }
    }
}

impl SimConfig {
    pub fn validate(&self) -> Result<(), SimError> {
        let durations = [
            self.max_wait,
            self.relocation_time,
            self.prediction_window,
            self.lookahead,
            self.batch_interval,
            self.relocation_interval,
        ];
        if durations.iter().any(|&d| d <= 0) {
            return Err(SimError::Config("durations must be positive"));
        }
        if self.relocation_interval % self.batch_interval != 0 {
            return Err(SimError::Config(
                "batch interval must divide the relocation interval",
            ));
        }
        if self.l_max.is_nan() || self.l_max <= 0.0 {
            return Err(SimError::Config("l_max must be positive"));
        }
        if self.method != Method::None && self.k == 0 {
            return Err(SimError::Config("k must be at least 1"));
        }
        if self.restarts == 0 {
            return Err(SimError::Config("restarts must be at least 1"));
        }
        if self.fda_n_max == Some(0) {
            return Err(SimError::Config("fda_n_max must be at least 1"));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum EventKind {
    Request,
    Assign,
    Pickup,
    Dropoff,
    Expire,
    Relocate,
    RelocateEnd,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct EventIds {
    #[cfg_attr(
        feature = "serde",
        serde(default, skip_serializing_if = "Option::is_none")
    )]
    pub request: Option<u32>,
    #[cfg_attr(
        feature = "serde",
        serde(default, skip_serializing_if = "Option::is_none")
    )]
    pub vehicle: Option<u32>,
    #[cfg_attr(
        feature = "serde",
        serde(default, skip_serializing_if = "Option::is_none")
    )]
    pub vertex: Option<u32>,
}

/// One log record.
///
/// `km` is the distance a movement added to the odometer and is only
/// non-zero on `pickup` (deadhead), `dropoff` (trip) and `relocate_end`
/// (relocation, possibly cut short by a diversion).
#[derive(Clone, Copy, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Event {
    pub time: Timestamp,
    pub kind: EventKind,
    pub ids: EventIds,
    pub km: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum VehicleState {
    Free,
    ToPickup,
    WithPassenger,
    Relocating,
}

#[derive(Clone, Debug, PartialEq)]
struct Leg {
    vertex: VertexId,
    arrival: Timestamp,
    km: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Vehicle {
    pub id: u32,
    pub state: VehicleState,
    /// Parked position, or where the current movement started.
    pub location: VertexId,
    pub busy_until: Timestamp,
    pub odometer_km: f64,
    pub request: Option<u32>,
    pending_km: f64,
    route: Vec<Leg>,
    token: u64,
}

/// Partition used in one relocation cycle.
#[derive(Clone, Debug, PartialEq)]
pub struct PartitionSnapshot {
    pub time: Timestamp,
    pub partition: Partition,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RelocationOrder {
    pub vehicle: u32,
    pub from: VertexId,
    pub center: VertexId,
    pub arrival: Timestamp,
}

#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct HourlyRatio {
    pub hour: u32,
    pub requests: usize,
    pub served: usize,
    pub ratio: Option<f64>,
}

#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct MetricsReport {
    pub n_vehicles: usize,
    pub requests: usize,
    pub served: usize,
    pub expired: usize,
    /// Served ratio; 1.0 with `no_demand` set when there were no requests.
    pub served_ratio: f64,
    pub no_demand: bool,
    pub vkm: f64,
    pub tkm: f64,
    /// VKM / TKM, undefined when TKM is zero.
    pub rho: Option<f64>,
    /// TKM per vehicle, undefined without vehicles.
    pub kappa: Option<f64>,
    /// Mean wait of served trips in seconds.
    pub mean_wait: Option<f64>,
    /// Served ratio by hour of day of the request time.
    pub hourly: Vec<HourlyRatio>,
}

/// Recomputes every metric from an event log.
pub fn compute_metrics(log: &[Event], n_vehicles: usize) -> MetricsReport {
    let mut request_time: Vec<Option<Timestamp>> = Vec::new();
    let mut served = 0usize;
    let mut expired = 0usize;
    let mut vkm = 0.0;
    let mut tkm = 0.0;
    let mut wait_sum = 0.0;
    let mut hourly_req = [0usize; 24];
    let mut hourly_served = [0usize; 24];
    let hour = |t: Timestamp| (t.rem_euclid(86_400) / 3600) as usize;
    for e in log {
        match e.kind {
            EventKind::Request => {
                let r = e.ids.request.expect("request id") as usize;
                if request_time.len() <= r {
                    request_time.resize(r + 1, None);
                }
                request_time[r] = Some(e.time);
                hourly_req[hour(e.time)] += 1;
            }
            EventKind::Pickup => {
                served += 1;
                vkm += e.km;
                let r = e.ids.request.expect("request id") as usize;
                let tp = request_time[r].expect("pickup of an unseen request");
                wait_sum += (e.time - tp) as f64;
                hourly_served[hour(tp)] += 1;
            }
            EventKind::Dropoff => {
                vkm += e.km;
                tkm += e.km;
            }
            EventKind::RelocateEnd => vkm += e.km,
            EventKind::Expire => expired += 1,
            EventKind::Assign | EventKind::Relocate => {}
        }
    }
    let requests = request_time.iter().filter(|t| t.is_some()).count();
    let no_demand = requests == 0;
    MetricsReport {
        n_vehicles,
        requests,
        served,
        expired,
        served_ratio: if no_demand {
            1.0
        } else {
            served as f64 / requests as f64
        },
        no_demand,
        vkm,
        tkm,
        rho: (tkm > 0.0).then(|| vkm / tkm),
        kappa: (n_vehicles > 0).then(|| tkm / n_vehicles as f64),
        mean_wait: (served > 0).then(|| wait_sum / served as f64),
        hourly: (0..24)
            .map(|h| HourlyRatio {
                hour: h as u32,
                requests: hourly_req[h],
                served: hourly_served[h],
                ratio: (hourly_req[h] > 0).then(|| hourly_served[h] as f64 / hourly_req[h] as f64),
            })
            .collect(),
    }
}

/// Runs the restarts of one center search. The default runs them in order;
/// parallel runners must reduce with [`crate::relocation::best_partition`].
pub type RestartRunner =
    dyn Fn(&CenterProblem<'_>, usize, &[u64]) -> Result<Partition, RelocationError> + Sync;

#[derive(Clone, Debug, PartialEq)]
pub struct SimOutput {
    pub log: Vec<Event>,
    pub outcomes: Vec<TripOutcome>,
    pub report: MetricsReport,
    pub snapshots: Vec<PartitionSnapshot>,
}

#[derive(Clone, Copy, Debug)]
struct Waiting {
    trip: usize,
    deadline: Timestamp,
}

pub struct Simulation<'a> {
    graph: &'a RoadGraph,
    trips: &'a TripStore,
    profile: &'a DemandProfile,
    cfg: SimConfig,
    oracle: DistanceOracle<'a>,
    vehicles: Vec<Vehicle>,
    events: BinaryHeap<Reverse<(Timestamp, u64, u32, u64)>>,
    seq: u64,
    waiting: Vec<Waiting>,
    next_trip: usize,
    trip_end: usize,
    log: Vec<Event>,
    outcomes: Vec<Option<TripOutcome>>,
    matrix: Option<(usize, DistanceMatrix)>,
    similarity: Option<(usize, SimilarityMatrix)>,
    fixed_partition: Option<Partition>,
    snapshots: Vec<PartitionSnapshot>,
    cycle: u64,
    runner: Option<Box<RestartRunner>>,
}

impl<'a> Simulation<'a> {
    pub fn new(
        graph: &'a RoadGraph,
        trips: &'a TripStore,
        profile: &'a DemandProfile,
        cfg: SimConfig,
    ) -> Result<Self, SimError> {
        cfg.validate()?;
        let n = graph.vertex_count();
        if let Some(t) = trips
            .trips()
            .iter()
            .find(|t| t.pickup.index() >= n || t.dropoff.index() >= n)
        {
            return Err(SimError::TripVertex(t.id));
        }
        if profile.vertex_count() != n {
            return Err(SimError::Config("demand profile does not match the graph"));
        }
        if cfg.method != Method::None && cfg.k > n {
            return Err(SimError::Config("k exceeds the number of vertices"));
        }
        let mut rng = rng::seeded(rng::mix(cfg.seed, 0x5EED_F1EE7));
        let positions: Vec<VertexId> = (0..cfg.n_vehicles)
            .map(|_| VertexId::from_index(rng.gen_range(0..n)))
            .collect();
        let mut sim = Simulation {
            graph,
            trips,
            profile,
            oracle: DistanceOracle::new(graph),
            vehicles: Vec::new(),
            events: BinaryHeap::new(),
            seq: 0,
            waiting: Vec::new(),
            next_trip: 0,
            trip_end: trips.len(),
            log: Vec::new(),
            outcomes: vec![None; trips.len()],
            matrix: None,
            similarity: None,
            fixed_partition: None,
            snapshots: Vec::new(),
            cycle: 0,
            runner: None,
            cfg,
        };
        sim.place_vehicles(&positions);
        Ok(sim)
    }

    /// Overrides the seeded initial fleet positions.
    pub fn with_initial_positions(mut self, positions: &[VertexId]) -> Result<Self, SimError> {
        if positions.len() != self.cfg.n_vehicles {
            return Err(SimError::Config(
                "one initial position per vehicle required",
            ));
        }
        if positions.iter().any(|p| !self.graph.contains(*p)) {
            return Err(SimError::Config("initial position outside the graph"));
        }
        self.place_vehicles(positions);
        Ok(self)
    }

    pub fn with_restart_runner(mut self, runner: Box<RestartRunner>) -> Self {
        self.runner = Some(runner);
        self
    }

    fn place_vehicles(&mut self, positions: &[VertexId]) {
        self.vehicles = positions
            .iter()
            .enumerate()
            .map(|(i, &p)| Vehicle {
                id: i as u32,
                state: VehicleState::Free,
                location: p,
                busy_until: Timestamp::MIN,
                odometer_km: 0.0,
                request: None,
                pending_km: 0.0,
                route: Vec::new(),
                token: 0,
            })
            .collect();
    }

    pub fn config(&self) -> &SimConfig {
        &self.cfg
    }

    pub fn vehicles(&self) -> &[Vehicle] {
        &self.vehicles
    }

    pub fn log(&self) -> &[Event] {
        &self.log
    }

    pub fn snapshots(&self) -> &[PartitionSnapshot] {
        &self.snapshots
    }

    fn emit(
        &mut self,
        time: Timestamp,
        kind: EventKind,
        request: Option<u32>,
        vehicle: Option<u32>,
        vertex: Option<VertexId>,
        km: f64,
    ) {
        self.log.push(Event {
            time,
            kind,
            ids: EventIds {
                request,
                vehicle,
                vertex: vertex.map(|v| v.0),
            },
            km,
        });
    }

    fn schedule(&mut self, time: Timestamp, vehicle: u32) {
        let token = self.vehicles[vehicle as usize].token;
        self.seq += 1;
        self.events.push(Reverse((time, self.seq, vehicle, token)));
    }

    /// Processes every vehicle arrival with time `<= now`.
    pub fn advance_to(&mut self, now: Timestamp) {
        while let Some(&Reverse((time, _, vid, token))) = self.events.peek() {
            if time > now {
                break;
            }
            self.events.pop();
            if self.vehicles[vid as usize].token != token {
                continue; // superseded by a diversion
            }
            self.arrive(vid, time);
        }
    }

    fn arrive(&mut self, vid: u32, time: Timestamp) {
        let state = self.vehicles[vid as usize].state;
        match state {
            VehicleState::ToPickup => {
                let v = &mut self.vehicles[vid as usize];
                let req = v.request.expect("assigned request");
                let km = v.pending_km;
                v.odometer_km += km;
                let trip = self.trips.trips()[req as usize];
                v.location = trip.pickup;
                self.emit(
                    time,
                    EventKind::Pickup,
                    Some(req),
                    Some(vid),
                    Some(trip.pickup),
                    km,
                );
                let (tt, meters) = self.oracle.trip(trip.pickup, trip.dropoff, time);
                let dropoff_at = time + libm::ceil(tt) as Timestamp;
                let v = &mut self.vehicles[vid as usize];
                v.state = VehicleState::WithPassenger;
                v.busy_until = dropoff_at;
                v.pending_km = meters / 1000.0;
                if let Some(o) = self.outcomes[req as usize].as_mut() {
                    o.actual_pickup_time = Some(time);
                    o.trip_km = meters / 1000.0;
                }
                self.schedule(dropoff_at, vid);
            }
            VehicleState::WithPassenger => {
                let v = &mut self.vehicles[vid as usize];
                let req = v.request.take().expect("assigned request");
                let km = v.pending_km;
                v.odometer_km += km;
                v.pending_km = 0.0;
                v.state = VehicleState::Free;
                let dropoff = self.trips.trips()[req as usize].dropoff;
                v.location = dropoff;
                self.emit(
                    time,
                    EventKind::Dropoff,
                    Some(req),
                    Some(vid),
                    Some(dropoff),
                    km,
                );
            }
            VehicleState::Relocating => {
                let v = &mut self.vehicles[vid as usize];
                let last = v.route.last().cloned().expect("relocation route");
                v.odometer_km += last.km;
                v.location = last.vertex;
                v.state = VehicleState::Free;
                v.route.clear();
                self.emit(
                    time,
                    EventKind::RelocateEnd,
                    None,
                    Some(vid),
                    Some(last.vertex),
                    last.km,
                );
            }
            VehicleState::Free => {}
        }
    }

    /// Where a vehicle can be claimed from at `now`, if at all.
    fn availability(&self, v: &Vehicle, now: Timestamp) -> Option<AvailableVehicle> {
        match v.state {
            VehicleState::Free => Some(AvailableVehicle {
                vehicle: v.id,
                location: v.location,
                ready_in: 0.0,
            }),
            VehicleState::Relocating if self.cfg.divertible => {
                let leg = v.route.iter().find(|l| l.arrival >= now)?;
                Some(AvailableVehicle {
                    vehicle: v.id,
                    location: leg.vertex,
                    ready_in: (leg.arrival - now) as f64,
                })
            }
            _ => None,
        }
    }

    /// One matching batch at `now`.
    pub fn step(&mut self, now: Timestamp) -> usize {
        while self.next_trip < self.trip_end
            && self.trips.trips()[self.next_trip].request_time <= now
        {
            let trip = self.trips.trips()[self.next_trip];
            self.emit(
                trip.request_time,
                EventKind::Request,
                Some(trip.id),
                None,
                Some(trip.pickup),
                0.0,
            );
            self.waiting.push(Waiting {
                trip: self.next_trip,
                deadline: trip.request_time + self.cfg.max_wait,
            });
            self.next_trip += 1;
        }
        if self.waiting.is_empty() {
            return 0;
        }
        let requests: Vec<PendingRequest> = self
            .waiting
            .iter()
            .map(|w| PendingRequest {
                request: w.trip as u32,
                pickup: self.trips.trips()[w.trip].pickup,
                deadline: w.deadline,
            })
            .collect();
        let available: Vec<AvailableVehicle> = self
            .vehicles
            .iter()
            .filter_map(|v| self.availability(v, now))
            .collect();
        let bg = build_request_vehicle_graph(&requests, &available, &mut self.oracle, now);
        let matching = max_bipartite_matching(&bg);
        let mut matched = vec![false; requests.len()];
        for &(ri, vi) in &matching.pairs {
            matched[ri as usize] = true;
            self.assign(&requests[ri as usize], &available[vi as usize], now);
        }
        let batch = self.cfg.batch_interval;
        let mut kept = Vec::with_capacity(self.waiting.len());
        let waiting = core::mem::take(&mut self.waiting);
        for (i, w) in waiting.into_iter().enumerate() {
            if matched[i] {
                continue;
            }
            if now + batch > w.deadline {
                let trip = self.trips.trips()[w.trip];
                self.emit(
                    w.deadline,
                    EventKind::Expire,
                    Some(trip.id),
                    None,
                    Some(trip.pickup),
                    0.0,
                );
                self.outcomes[w.trip] = Some(TripOutcome {
                    request: trip.id,
                    request_time: trip.request_time,
                    status: TripStatus::Expired,
                    actual_pickup_time: None,
                    vehicle: None,
                    pickup_deadhead_km: 0.0,
                    trip_km: 0.0,
                });
            } else {
                kept.push(w);
            }
        }
        self.waiting = kept;
        matching.cardinality()
    }

    fn divert(&mut self, vid: u32, now: Timestamp, at: VertexId) {
        let v = &mut self.vehicles[vid as usize];
        let km = v
            .route
            .iter()
            .find(|l| l.vertex == at && l.arrival >= now)
            .map(|l| l.km)
            .unwrap_or(0.0);
        v.odometer_km += km;
        v.location = at;
        v.route.clear();
        v.state = VehicleState::Free;
        v.token += 1;
        self.emit(now, EventKind::RelocateEnd, None, Some(vid), Some(at), km);
    }

    fn assign(&mut self, req: &PendingRequest, veh: &AvailableVehicle, now: Timestamp) {
        let vid = veh.vehicle;
        let state = self.vehicles[vid as usize].state;
        debug_assert!(matches!(
            state,
            VehicleState::Free | VehicleState::Relocating
        ));
        if state == VehicleState::Relocating {
            self.divert(vid, now, veh.location);
        }
        let (tt, meters) = self.oracle.trip(veh.location, req.pickup, now);
        let pickup_at = now + libm::ceil(veh.ready_in + tt) as Timestamp;
        debug_assert!(pickup_at <= req.deadline);
        self.emit(
            now,
            EventKind::Assign,
            Some(req.request),
            Some(vid),
            Some(req.pickup),
            0.0,
        );
        let trip = self.trips.trips()[req.request as usize];
        self.outcomes[req.request as usize] = Some(TripOutcome {
            request: trip.id,
            request_time: trip.request_time,
            status: TripStatus::Served,
            actual_pickup_time: Some(pickup_at),
            vehicle: Some(vid),
            pickup_deadhead_km: meters / 1000.0,
            trip_km: 0.0,
        });
        let v = &mut self.vehicles[vid as usize];
        v.state = VehicleState::ToPickup;
        v.request = Some(req.request);
        v.pending_km = meters / 1000.0;
        v.busy_until = pickup_at;
        v.token += 1;
        self.schedule(pickup_at, vid);
    }

    fn distance_matrix(&mut self, now: Timestamp) -> &DistanceMatrix {
        let slot = self.graph.slot_at(now);
        if self.matrix.as_ref().is_none_or(|(s, _)| *s != slot) {
            self.matrix = Some((slot, full_distance_matrix(self.graph, now)));
        }
        &self.matrix.as_ref().expect("just filled").1
    }

    fn compute_partition(&mut self, now: Timestamp, gaps: &[f64]) -> Result<Partition, SimError> {
        let cfg = self.cfg.clone();
        let n = self.graph.vertex_count();
        let cycle_seed = rng::mix(cfg.seed, self.cycle);
        let partition = match cfg.method {
            Method::None => unreachable!("no partition without relocation"),
            Method::Dfda => {
                self.distance_matrix(now);
                let dm = &self.matrix.as_ref().expect("filled").1;
                let problem =
                    CenterProblem::new(dm, gaps, cfg.activation)?.with_update(cfg.center_update);
                let seeds = restart_seeds(cycle_seed, cfg.restarts);
                match &self.runner {
                    Some(run) => run(&problem, cfg.k, &seeds)?,
                    None => problem.multi_restart(cfg.k, &seeds)?,
                }
            }
            Method::FdaVed => {
                let n_max = cfg.fda_n_max.unwrap_or_else(|| n.div_ceil(cfg.k));
                let fda = FdaVedConfig::new(n_max, cfg.max_wait as f64)?;
                fda_ved_partition_with(self.distance_matrix(now), &fda)?.0
            }
            Method::Pic => {
                let slot = self.graph.slot_at(now);
                if self.similarity.as_ref().is_none_or(|(s, _)| *s != slot) {
                    self.similarity = Some((slot, similarity_graph(self.graph, now)));
                }
                self.distance_matrix(now);
                let dm = &self.matrix.as_ref().expect("filled").1;
                let sim = &self.similarity.as_ref().expect("filled").1;
                pic_partition(sim, dm, cfg.k, cycle_seed, &PicConfig::default())?
            }
        };
        Ok(partition)
    }

    /// One relocation cycle at `now`.
    pub fn rebalance(&mut self, now: Timestamp) -> Result<Vec<RelocationOrder>, SimError> {
        if self.cfg.method == Method::None {
            return Ok(Vec::new());
        }
        let gaps = self.profile.gaps(now);
        let partition = match (&self.fixed_partition, self.cfg.schedule) {
            (Some(p), PartitionSchedule::OncePerRun) => p.clone(),
            _ => {
                let p = self.compute_partition(now, &gaps)?;
                if self.cfg.schedule == PartitionSchedule::OncePerRun {
                    self.fixed_partition = Some(p.clone());
                }
                p
            }
        };
        self.cycle += 1;

        let mut supply = vec![0usize; partition.k()];
        for v in &self.vehicles {
            match v.state {
                VehicleState::Free => supply[partition.subarea_of(v.location)] += 1,
                VehicleState::Relocating => {
                    if let Some(last) = v.route.last() {
                        supply[partition.subarea_of(last.vertex)] += 1;
                    }
                }
                _ => {}
            }
        }
        let region = region_gap_from_vertex_gaps(&partition, &gaps, &supply)?;
        let idle: Vec<AvailableVehicle> = self
            .vehicles
            .iter()
            .filter(|v| {
                v.state == VehicleState::Free && region[partition.subarea_of(v.location)] < 0.0
            })
            .map(|v| AvailableVehicle {
                vehicle: v.id,
                location: v.location,
                ready_in: 0.0,
            })
            .collect();
        let slots = relocation_slots(&region, &partition.centers);
        let bg = build_relocation_graph(
            &idle,
            &slots,
            &mut self.oracle,
            self.cfg.relocation_time as f64,
            now,
        );
        let matching = max_bipartite_matching(&bg);
        let mut orders = Vec::with_capacity(matching.cardinality());
        for &(vi, si) in &matching.pairs {
            let vid = idle[vi as usize].vehicle;
            let center = slots.center[si as usize];
            let from = self.vehicles[vid as usize].location;
            let tree = self.oracle.tree_from(from, now);
            let path = tree
                .path(center)
                .expect("reachable within the relocation time");
            let route: Vec<Leg> = path[1..]
                .iter()
                .map(|&w| Leg {
                    vertex: w,
                    arrival: now + libm::ceil(tree.time(w)) as Timestamp,
                    km: tree.length_m(w) / 1000.0,
                })
                .collect();
            let arrival = route.last().expect("center differs from origin").arrival;
            self.emit(now, EventKind::Relocate, None, Some(vid), Some(center), 0.0);
            let v = &mut self.vehicles[vid as usize];
            v.state = VehicleState::Relocating;
            v.route = route;
            v.busy_until = arrival;
            v.token += 1;
            self.schedule(arrival, vid);
            orders.push(RelocationOrder {
                vehicle: vid,
                from,
                center,
                arrival,
            });
        }
        self.snapshots.push(PartitionSnapshot {
            time: now,
            partition,
        });
        Ok(orders)
    }

    /// Runs over requests with `start <= t_p < end`, then keeps matching
    /// carryovers until they are served or expire and lets every vehicle
    /// finish its current movement.
    pub fn run(mut self, start: Timestamp, end: Timestamp) -> Result<SimOutput, SimError> {
        let trips = self.trips.trips();
        self.next_trip = trips.partition_point(|t| t.request_time < start);
        self.trip_end = trips
            .partition_point(|t| t.request_time < end)
            .max(self.next_trip);
        let first = self.next_trip;
        let batch = self.cfg.batch_interval;
        let mut now = start;
        loop {
            self.advance_to(now);
            self.step(now);
            if now < end && (now - start) % self.cfg.relocation_interval == 0 {
                self.rebalance(now)?;
            }
            self.advance_to(now);
            if now >= end && self.waiting.is_empty() && self.next_trip >= self.trip_end {
                break;
            }
            now += batch;
        }
        self.advance_to(Timestamp::MAX);
        let outcomes: Vec<TripOutcome> = self.outcomes[first..self.trip_end]
            .iter()
            .map(|o| o.expect("every request resolved"))
            .collect();
        let report = compute_metrics(&self.log, self.cfg.n_vehicles);
        Ok(SimOutput {
            log: self.log,
            outcomes,
            report,
            snapshots: self.snapshots,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::demand::{ProfileConfig, TripRequest};
    use crate::fixtures::toy_graph;

    fn one_trip(t: Timestamp, p: u32, d: u32) -> TripStore {
        TripStore::from_requests(vec![TripRequest {
            id: 0,
            request_time: t,
            pickup: VertexId(p),
            dropoff: VertexId(d),
        }])
    }

    fn cfg(n_vehicles: usize, method: Method) -> SimConfig {
        SimConfig {
            n_vehicles,
            k: 2,
            method,
            ..SimConfig::default()
        }
    }

    fn empty_profile(n: usize) -> DemandProfile {
        DemandProfile::from_history(&TripStore::default(), n, ProfileConfig::default()).unwrap()
    }

    #[test]
    fn co_located_vehicle_serves_immediately() {
        let g = toy_graph();
        let trips = one_trip(60, 1, 3);
        let profile = empty_profile(4);
        let sim = Simulation::new(&g, &trips, &profile, cfg(1, Method::None))
            .unwrap()
            .with_initial_positions(&[VertexId(1)])
            .unwrap();
        let out = sim.run(0, 3600).unwrap();
        assert_eq!(out.report.served, 1);
        assert_eq!(out.report.mean_wait, Some(0.0));
        assert_eq!(out.outcomes[0].status, TripStatus::Served);
        // B->D is 3 min at 500 m/min
        assert_eq!(out.report.tkm, 1.5);
        assert_eq!(out.report.vkm, 1.5);
        assert_eq!(out.report.rho, Some(1.0));
    }

    #[test]
    fn vehicle_one_second_too_far_lets_request_expire() {
        // 301 s away with a 300 s wait limit
        let positions = vec![crate::graph::Point::default(); 2];
        let edges = vec![crate::graph::Edge {
            from: VertexId(0),
            to: VertexId(1),
            profile: crate::graph::TravelTimeProfile::constant(301.0),
            length_m: None,
        }];
        let g = RoadGraph::from_edges(positions, edges, 86_400).unwrap();
        let trips = one_trip(0, 1, 0);
        let profile = empty_profile(2);
        let sim = Simulation::new(&g, &trips, &profile, cfg(1, Method::None))
            .unwrap()
            .with_initial_positions(&[VertexId(0)])
            .unwrap();
        let out = sim.run(0, 600).unwrap();
        assert_eq!(out.report.served, 0);
        assert_eq!(out.report.expired, 1);
        assert_eq!(out.report.served_ratio, 0.0);
        assert_eq!(out.report.rho, None);
    }

    #[test]
    fn empty_demand_and_empty_fleet() {
        let g = toy_graph();
        let none = TripStore::default();
        let profile = empty_profile(4);
        let out = Simulation::new(&g, &none, &profile, cfg(3, Method::Dfda))
            .unwrap()
            .run(0, 1200)
            .unwrap();
        assert!(out.report.no_demand);
        assert_eq!(out.report.served_ratio, 1.0);

        let trips = one_trip(10, 0, 1);
        let out = Simulation::new(&g, &trips, &profile, cfg(0, Method::None))
            .unwrap()
            .run(0, 600)
            .unwrap();
        assert_eq!(out.report.served_ratio, 0.0);
        assert_eq!(out.report.expired, 1);
        assert_eq!(out.report.kappa, None);
    }

    #[test]
    fn config_validation() {
        let c = SimConfig {
            batch_interval: 70,
            ..SimConfig::default()
        };
        assert!(c.validate().is_err());
        let c = SimConfig {
            max_wait: 0,
            ..SimConfig::default()
        };
        assert!(c.validate().is_err());
        assert!(SimConfig::default().validate().is_ok());
        assert_eq!("FDA".parse::<Method>().unwrap(), Method::FdaVed);
    }

    #[test]
    fn metrics_arithmetic() {
        let ev = |time, kind, request: Option<u32>, km| Event {
            time,
            kind,
            ids: EventIds {
                request,
                vehicle: Some(0),
                vertex: None,
            },
            km,
        };
        let log = vec![
            ev(0, EventKind::Request, Some(0), 0.0),
            ev(0, EventKind::Assign, Some(0), 0.0),
            ev(100, EventKind::Pickup, Some(0), 1.0),
            ev(400, EventKind::Dropoff, Some(0), 3.0),
        ];
        let m = compute_metrics(&log, 2);
        assert_eq!(m.rho, Some(4.0 / 3.0));
        assert_eq!(m.kappa, Some(1.5));
        assert_eq!(m.mean_wait, Some(100.0));
        assert_eq!(m.hourly[0].ratio, Some(1.0));
        assert_eq!(m.hourly[1].ratio, None);
    }
}
