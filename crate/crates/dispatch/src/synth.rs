//! Seeded synthetic city: a grid road network with a morning commute, where
//! most trips start on the west side and end on the east side.

use std::path::Path;

use dispatch_core::demand::{
    DayType, DemandProfile, ProfileConfig, TripRequest, TripStore, SECONDS_PER_DAY,
};
use dispatch_core::graph::{EdgeRecord, NodeRecord};
use dispatch_core::sim::{Method, SimConfig};
use dispatch_core::{rng, ActivationKind, Point, RoadGraph, Timestamp, VertexId};
use rand::Rng;

use crate::config::{DataConfig, ExperimentConfig, HorizonConfig, SweepConfig, CONFIG_VERSION};
use crate::error::{DispatchError, Result};
use crate::io;

/// 2024-01-08, a Monday.
pub const DEFAULT_DAY: Timestamp = 19_730 * SECONDS_PER_DAY;

/// Fleet size and center count used with the default scenario.
pub const DEFAULT_VEHICLES: usize = 45;
pub const DEFAULT_K: usize = 6;

#[derive(Clone, Debug, PartialEq)]
pub struct SynthConfig {
    pub width: usize,
    pub height: usize,
    pub spacing_m: f64,
    pub speed_mps: f64,
    /// Travel-time multiplier during `rush_hours`.
    pub rush_factor: f64,
    pub rush_hours: std::ops::Range<u32>,
    /// Weekdays of history before the simulated day.
    pub history_days: usize,
    /// Requests per day inside the window.
    pub requests: usize,
    pub day: Timestamp,
    pub start_hour: u32,
    pub hours: u32,
    /// Share of trips starting in the west third and ending in the east third.
    pub commute_share: f64,
    pub seed: u64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            width: 14,
            height: 14,
            spacing_m: 400.0,
            speed_mps: 8.0,
            rush_factor: 1.2,
            rush_hours: 7..10,
            history_days: 5,
            requests: 600,
            day: DEFAULT_DAY,
            start_hour: 7,
            hours: 2,
            commute_share: 0.4,
            seed: 1,
        }
    }
}

#[derive(Clone, Debug)]
pub struct Scenario {
    pub nodes: Vec<NodeRecord>,
    pub edges: Vec<EdgeRecord>,
    pub history: Vec<TripRequest>,
    pub trips: Vec<TripRequest>,
    pub start: Timestamp,
    pub end: Timestamp,
}

impl SynthConfig {
    pub fn generate(&self) -> Scenario {
        let (w, h) = (self.width, self.height);
        let mut r = rng::seeded(rng::mix(self.seed, 0x6121D));
        let nodes: Vec<NodeRecord> = (0..w * h)
            .map(|i| NodeRecord {
                line: i + 2,
                id: i as u32,
                position: Point::new(
                    (i % w) as f64 * self.spacing_m,
                    (i / w) as f64 * self.spacing_m,
                ),
            })
            .collect();
        let base = self.spacing_m / self.speed_mps;
        let mut edges = Vec::new();
        let mut link = |a: usize, b: usize, r: &mut rng::Rng| {
            for (u, v) in [(a, b), (b, a)] {
                let f = r.gen_range(0.85..1.25);
                let slot_times = (0..24u32)
                    .map(|hr| {
                        let rush = if self.rush_hours.contains(&hr) {
                            self.rush_factor
                        } else {
                            1.0
                        };
                        (base * f * rush).round().max(1.0)
                    })
                    .collect();
                edges.push(EdgeRecord {
                    line: edges.len() + 2,
                    from: u as u32,
                    to: v as u32,
                    slot_times,
                    length_m: Some(self.spacing_m),
                });
            }
        };
        for y in 0..h {
            for x in 0..w {
                let i = y * w + x;
                if x + 1 < w {
                    link(i, i + 1, &mut r);
                }
                if y + 1 < h {
                    link(i, i + w, &mut r);
                }
            }
        }

        let mut days = Vec::new();
        let mut d = self.day / SECONDS_PER_DAY - 1;
        while days.len() < self.history_days {
            if DayType::of_day(d) == DayType::of_day(self.day / SECONDS_PER_DAY) {
                days.push(d);
            }
            d -= 1;
        }
        days.reverse();
        let mut history = Vec::new();
        for &day in &days {
            history.extend(self.day_trips(day * SECONDS_PER_DAY, &mut r));
        }
        let trips = self.day_trips(self.day, &mut r);
        let start = self.day + self.start_hour as i64 * 3600;
        Scenario {
            nodes,
            edges,
            history,
            trips,
            start,
            end: start + self.hours as i64 * 3600,
        }
    }

    fn day_trips(&self, day_start: Timestamp, r: &mut rng::Rng) -> Vec<TripRequest> {
        let (w, h) = (self.width, self.height);
        let zone = |r: &mut rng::Rng, lo: usize, hi: usize| -> u32 {
            let x = r.gen_range(lo..hi);
            let y = r.gen_range(0..h);
            (y * w + x) as u32
        };
        let start = day_start + self.start_hour as i64 * 3600;
        let span = self.hours as i64 * 3600;
        (0..self.requests)
            .map(|_| {
                let (p, mut d) = if r.gen_bool(self.commute_share) {
                    (zone(r, 0, w.div_ceil(3)), zone(r, w - w.div_ceil(3), w))
                } else {
                    (zone(r, 0, w), zone(r, 0, w))
                };
                if d == p {
                    d = (p + 1) % (w * h) as u32;
                }
                TripRequest {
                    id: 0,
                    request_time: start + r.gen_range(0..span),
                    pickup: VertexId(p),
                    dropoff: VertexId(d),
                }
            })
            .collect()
    }
}

impl Scenario {
    pub fn graph(&self) -> RoadGraph {
        RoadGraph::from_records(&self.nodes, &self.edges, 3600)
            .expect("generated graph is valid")
            .0
    }

    pub fn trip_store(&self) -> TripStore {
        TripStore::from_requests(self.trips.clone())
    }

    pub fn profile(&self, cfg: ProfileConfig) -> DemandProfile {
        let history = TripStore::from_requests(self.history.clone());
        DemandProfile::from_history(&history, self.nodes.len(), cfg).expect("valid bucket")
    }

    /// Writes `nodes.csv`, `edges.csv` and `trips.csv` (history and
    /// simulated day together).
    pub fn write(&self, dir: &Path) -> Result<()> {
        io::write_nodes(io::create(&dir.join("nodes.csv"))?, &self.nodes)?;
        io::write_edges(io::create(&dir.join("edges.csv"))?, &self.edges)?;
        let mut all = self.history.clone();
        all.extend_from_slice(&self.trips);
        io::write_trips(
            io::create(&dir.join("trips.csv"))?,
            TripStore::from_requests(all).trips(),
        )?;
        Ok(())
    }

    /// Config for the files written by [`Scenario::write`], with paths
    /// relative to the same directory.
    pub fn config(&self, seed: u64) -> ExperimentConfig {
        let history_days = (self.start / SECONDS_PER_DAY)
            - self.history.first().map_or(self.start, |t| t.request_time) / SECONDS_PER_DAY;
        ExperimentConfig {
            version: CONFIG_VERSION,
            data: DataConfig {
                nodes: "nodes.csv".into(),
                edges: "edges.csv".into(),
                trips: "trips.csv".into(),
                history: None,
                output: "out".into(),
                slot_length_s: 3600,
                reference_speed_mps: dispatch_core::graph::DEFAULT_REFERENCE_SPEED_MPS,
            },
            horizon: HorizonConfig {
                start: io::format_time(self.start),
                end: io::format_time(self.end),
                history_days,
            },
            sim: SimConfig {
                n_vehicles: DEFAULT_VEHICLES,
                k: DEFAULT_K,
                seed,
                ..Default::default()
            },
            sweep: SweepConfig {
                methods: vec![Method::Dfda, Method::FdaVed, Method::None],
                vehicles: vec![DEFAULT_VEHICLES],
                activations: vec![ActivationKind::Relu],
                seeds: vec![seed],
            },
        }
    }

    /// Writes the data files plus `config.toml`.
    pub fn write_with_config(&self, dir: &Path, seed: u64) -> Result<()> {
        self.write(dir)?;
        let path = dir.join("config.toml");
        std::fs::write(&path, self.config(seed).to_toml()).map_err(|e| DispatchError::io(&path, e))
    }
}
