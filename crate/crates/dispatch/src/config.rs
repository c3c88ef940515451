//! Versioned TOML experiment configuration.
//!
//! ```toml
//! version = 1
//!
//! [data]
//! nodes = "nodes.csv"
//! edges = "edges.csv"
//! trips = "trips.csv"
//! # history = "history.csv"   # defaults to the trips file
//! output = "out"
//! slot_length_s = 3600
//! reference_speed_mps = 8.0
//!
//! [horizon]
//! start = "2024-01-08T07:00:00Z"
//! end = "2024-01-08T09:00:00Z"
//! history_days = 5
//!
//! [sim]          # any SimConfig field; omitted ones take defaults
//! k = 6
//!
//! [sweep]
//! methods = ["dfda", "none"]
//! vehicles = [45]
//! activations = ["relu"]
//! seeds = [1]
//! ```
//!
//! `k` is an input: choose it externally for the network at hand.

use std::path::{Path, PathBuf};

use dispatch_core::sim::{Method, SimConfig};
use dispatch_core::{ActivationKind, Timestamp};
use serde::{Deserialize, Serialize};

use crate::error::{DispatchError, Result};
use crate::io::parse_time;

pub const CONFIG_VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DataConfig {
    pub nodes: PathBuf,
    pub edges: PathBuf,
    pub trips: PathBuf,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub history: Option<PathBuf>,
    pub output: PathBuf,
    #[serde(default = "default_slot_length")]
    pub slot_length_s: i64,
    #[serde(default = "default_speed")]
    pub reference_speed_mps: f64,
}

fn default_slot_length() -> i64 {
    3600
}

fn default_speed() -> f64 {
    dispatch_core::graph::DEFAULT_REFERENCE_SPEED_MPS
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HorizonConfig {
    /// ISO-8601.
    pub start: String,
    pub end: String,
    /// Days before `start` averaged into the demand prediction.
    pub history_days: i64,
}

impl HorizonConfig {
    pub fn bounds(&self) -> Result<(Timestamp, Timestamp)> {
        let parse = |s: &str| {
            parse_time(s).ok_or_else(|| DispatchError::Config(format!("bad timestamp `{s}`")))
        };
        Ok((parse(&self.start)?, parse(&self.end)?))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    pub methods: Vec<Method>,
    pub vehicles: Vec<usize>,
    pub activations: Vec<ActivationKind>,
    /// Empty means `[sim.seed]`.
    #[serde(default)]
    pub seeds: Vec<u64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub version: u32,
    pub data: DataConfig,
    pub horizon: HorizonConfig,
    #[serde(default)]
    pub sim: SimConfig,
    pub sweep: SweepConfig,
}

/// One sweep cell.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Cell {
    pub method: Method,
    pub vehicles: usize,
    pub activation: ActivationKind,
    pub seed: u64,
}

impl ExperimentConfig {
    /// Reads a config file; relative data paths resolve against its directory.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| DispatchError::io(path, e))?;
        let mut cfg = Self::parse(&text)?;
        cfg.resolve_paths(path.parent().unwrap_or(Path::new(".")));
        Ok(cfg)
    }

    pub fn parse(text: &str) -> Result<Self> {
        let cfg: ExperimentConfig =
            toml::from_str(text).map_err(|e| DispatchError::Config(e.to_string()))?;
        if cfg.version != CONFIG_VERSION {
            return Err(DispatchError::Config(format!(
                "unsupported config version {} (expected {CONFIG_VERSION})",
                cfg.version
            )));
        }
        Ok(cfg)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn resolve_paths(&mut self, base: &Path) {
        let d = &mut self.data;
        for p in [&mut d.nodes, &mut d.edges, &mut d.trips, &mut d.output] {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        }
        if let Some(h) = d.history.as_mut() {
            if h.is_relative() {
                *h = base.join(&*h);
            }
        }
    }

    /// Checks everything that can be checked without running.
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(DispatchError::Config(m.to_string()));
        if self.sweep.methods.is_empty()
            || self.sweep.vehicles.is_empty()
            || self.sweep.activations.is_empty()
        {
            return bad("sweep axes must be non-empty");
        }
        self.sim
            .validate()
            .map_err(|e| DispatchError::Config(e.to_string()))?;
        let (start, end) = self.horizon.bounds()?;
        if start >= end {
            return bad("horizon start must precede its end");
        }
        if self.horizon.history_days < 0 {
            return bad("history_days must be non-negative");
        }
        if self.data.slot_length_s <= 0
            || self.data.reference_speed_mps.is_nan()
            || self.data.reference_speed_mps <= 0.0
        {
            return bad("slot length and reference speed must be positive");
        }
        let d = &self.data;
        for p in [
            Some(&d.nodes),
            Some(&d.edges),
            Some(&d.trips),
            d.history.as_ref(),
        ]
        .into_iter()
        .flatten()
        {
            if !p.is_file() {
                return Err(DispatchError::MissingFile(p.clone()));
            }
        }
        Ok(())
    }

    pub fn cells(&self) -> Vec<Cell> {
        let seeds = if self.sweep.seeds.is_empty() {
            vec![self.sim.seed]
        } else {
            self.sweep.seeds.clone()
        };
        let mut out = Vec::new();
        for &method in &self.sweep.methods {
            for &vehicles in &self.sweep.vehicles {
                for &activation in &self.sweep.activations {
                    for &seed in &seeds {
                        out.push(Cell {
                            method,
                            vehicles,
                            activation,
                            seed,
                        });
                    }
                }
            }
        }
        out
    }

    pub fn sim_for(&self, cell: &Cell) -> SimConfig {
        SimConfig {
            method: cell.method,
            n_vehicles: cell.vehicles,
            activation: cell.activation,
            seed: cell.seed,
            ..self.sim.clone()
        }
    }
}
