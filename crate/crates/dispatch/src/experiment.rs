//! Sweep runner, run manifests, reproduction and method comparison.
//!
//! Output layout under `data.output`:
//!
//! ```text
//! manifest.json            experiment manifest
//! metrics.csv              one row per sweep cell
//! hourly.csv               per-hour served ratio, all cells
//! runs/<cell>/manifest.json
//! runs/<cell>/report.json
//! runs/<cell>/events.ndjson
//! runs/<cell>/outcomes.csv
//! runs/<cell>/hourly.csv
//! runs/<cell>/partitions.jsonl          one summary per relocation cycle
//! runs/<cell>/partitions/cycle_NNNN.csv
//! ```

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use dispatch_core::demand::{day_of, DemandProfile, ProfileConfig, TripStore};
use dispatch_core::sim::{MetricsReport, SimConfig, SimOutput, Simulation};
use dispatch_core::{ActivationKind, RoadGraph};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::config::{
    Cell, DataConfig, ExperimentConfig, HorizonConfig, SweepConfig, CONFIG_VERSION,
};
use crate::error::{DispatchError, Result};
use crate::io::{self, format_time, RunKey};
use crate::parallel::rayon_runner;

pub const CODE_VERSION: &str = env!("CARGO_PKG_VERSION");

/// Everything needed to rerun one sweep cell.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub code_version: String,
    pub config_hash: String,
    pub data_hash: String,
    pub key: RunKey,
    pub seed: u64,
    pub sim: SimConfig,
    pub data: DataConfig,
    pub horizon: HorizonConfig,
    pub events_sha256: String,
    pub report_sha256: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentManifest {
    pub code_version: String,
    pub config_hash: String,
    pub data_hash: String,
    pub config: ExperimentConfig,
    /// Cell directories relative to the output root.
    pub runs: Vec<String>,
}

#[derive(Clone, Debug)]
pub struct RunRecord {
    pub dir: PathBuf,
    pub manifest: RunManifest,
    pub report: MetricsReport,
}

#[derive(Clone, Debug)]
pub struct ExperimentResult {
    pub root: PathBuf,
    pub runs: Vec<RunRecord>,
}

fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

fn read_bytes(path: &Path) -> Result<Vec<u8>> {
    fs::read(path).map_err(|e| DispatchError::io(path, e))
}

fn write_bytes(path: &Path, bytes: &[u8]) -> Result<()> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir).map_err(|e| DispatchError::io(dir, e))?;
    }
    fs::write(path, bytes).map_err(|e| DispatchError::io(path, e))
}

fn to_json<T: Serialize>(value: &T) -> Vec<u8> {
    let mut s = serde_json::to_vec_pretty(value).expect("plain data serializes");
    s.push(b'\n');
    s
}

/// Hash over the contents of every input file, in a fixed order.
pub fn data_hash(data: &DataConfig) -> Result<String> {
    let mut h = Sha256::new();
    let history = data.history.as_ref().unwrap_or(&data.trips);
    for (label, path) in [
        ("nodes", &data.nodes),
        ("edges", &data.edges),
        ("trips", &data.trips),
        ("history", history),
    ] {
        let bytes = read_bytes(path)?;
        h.update(label.as_bytes());
        h.update((bytes.len() as u64).to_le_bytes());
        h.update(&bytes);
    }
    Ok(hex::encode(h.finalize()))
}

pub fn config_hash(cfg: &ExperimentConfig) -> String {
    sha256_hex(cfg.to_toml().as_bytes())
}

pub fn cell_key(cell: &Cell) -> RunKey {
    RunKey {
        method: cell.method.name().to_string(),
        activation: cell.activation.name().to_string(),
        vehicles: cell.vehicles,
        seed: cell.seed,
    }
}

fn cell_dir_name(key: &RunKey) -> String {
    format!(
        "{}-{}-v{}-s{}",
        key.method, key.activation, key.vehicles, key.seed
    )
}

pub fn profile_config(sim: &SimConfig) -> ProfileConfig {
    ProfileConfig {
        bucket_len: sim.prediction_window,
        lookahead: sim.lookahead,
        horizon: sim.relocation_time,
    }
}

/// Loaded inputs shared by every cell.
pub struct Inputs {
    pub graph: RoadGraph,
    pub trips: TripStore,
    pub history: TripStore,
}

impl Inputs {
    pub fn load(data: &DataConfig, l_max: f64) -> Result<Self> {
        let (graph, report) = io::load_graph(&data.nodes, &data.edges, data.slot_length_s)?;
        if report.duplicate_edges > 0 {
            log::warn!("graph load: {report:?}");
        }
        let graph = graph.with_reference_speed(data.reference_speed_mps);
        let (trips, summary) = io::load_trips(&data.trips, &graph, l_max)?;
        if summary.dropped() > 0 {
            log::warn!("{}: {summary:?}", data.trips.display());
        }
        let history = match &data.history {
            Some(p) => io::load_trips(p, &graph, l_max)?.0,
            None => trips.clone(),
        };
        Ok(Inputs {
            graph,
            trips,
            history,
        })
    }

    /// Demand profile averaged over the `history_days` days before `start`.
    pub fn profile(&self, sim: &SimConfig, start: i64, history_days: i64) -> Result<DemandProfile> {
        let first = day_of(start) - history_days;
        Ok(DemandProfile::from_history_days(
            &self.history,
            self.graph.vertex_count(),
            first,
            history_days,
            profile_config(sim),
        )?)
    }

    pub fn simulate(
        &self,
        sim: SimConfig,
        start: i64,
        end: i64,
        history_days: i64,
    ) -> Result<SimOutput> {
        let profile = self.profile(&sim, start, history_days)?;
        let out = Simulation::new(&self.graph, &self.trips, &profile, sim)?
            .with_restart_runner(rayon_runner())
            .run(start, end)?;
        Ok(out)
    }
}

fn write_cell(
    dir: &Path,
    out: &SimOutput,
    key: &RunKey,
    activation: ActivationKind,
) -> Result<(String, String)> {
    let mut events = Vec::new();
    io::write_event_log(&mut events, &out.log)?;
    write_bytes(&dir.join("events.ndjson"), &events)?;
    let report = to_json(&out.report);
    write_bytes(&dir.join("report.json"), &report)?;
    io::write_outcomes(io::create(&dir.join("outcomes.csv"))?, &out.outcomes)?;
    io::write_hourly(
        io::create(&dir.join("hourly.csv"))?,
        &[(key.clone(), out.report.clone())],
    )?;
    let mut summaries = String::new();
    for (i, snap) in out.snapshots.iter().enumerate() {
        io::write_partition(
            io::create(&dir.join("partitions").join(format!("cycle_{i:04}.csv")))?,
            &snap.partition,
        )?;
        let mut line: serde_json::Value =
            serde_json::from_str(&io::partition_summary(&snap.partition, activation))?;
        line["cycle"] = i.into();
        line["time"] = format_time(snap.time).into();
        summaries.push_str(&line.to_string());
        summaries.push('\n');
    }
    write_bytes(&dir.join("partitions.jsonl"), summaries.as_bytes())?;
    Ok((sha256_hex(&events), sha256_hex(&report)))
}

/// Runs every sweep cell and writes the report tree. The config is validated
/// before anything runs.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentResult> {
    cfg.validate()?;
    let (start, end) = cfg.horizon.bounds()?;
    let cfg_hash = config_hash(cfg);
    let d_hash = data_hash(&cfg.data)?;
    let inputs = Inputs::load(&cfg.data, cfg.sim.l_max)?;
    log::info!(
        "{} vertices, {} trips; {} cells from {} to {}",
        inputs.graph.vertex_count(),
        inputs.trips.between(start, end).len(),
        cfg.cells().len(),
        format_time(start),
        format_time(end)
    );
    let root = cfg.data.output.clone();
    let cells = cfg.cells();
    let runs = cells
        .par_iter()
        .map(|cell| {
            let key = cell_key(cell);
            let sim = cfg.sim_for(cell);
            let out = inputs.simulate(sim.clone(), start, end, cfg.horizon.history_days)?;
            let dir = root.join("runs").join(cell_dir_name(&key));
            let (events_sha256, report_sha256) = write_cell(&dir, &out, &key, cell.activation)?;
            let manifest = RunManifest {
                code_version: CODE_VERSION.to_string(),
                config_hash: cfg_hash.clone(),
                data_hash: d_hash.clone(),
                key: key.clone(),
                seed: cell.seed,
                sim,
                data: cfg.data.clone(),
                horizon: cfg.horizon.clone(),
                events_sha256,
                report_sha256,
            };
            write_bytes(&dir.join("manifest.json"), &to_json(&manifest))?;
            log::info!(
                "{}: served {}/{} (R = {:.4})",
                cell_dir_name(&key),
                out.report.served,
                out.report.requests,
                out.report.served_ratio
            );
            Ok(RunRecord {
                dir,
                manifest,
                report: out.report,
            })
        })
        .collect::<Result<Vec<_>>>()?;

    let rows: Vec<(RunKey, MetricsReport)> = runs
        .iter()
        .map(|r| (r.manifest.key.clone(), r.report.clone()))
        .collect();
    io::write_metrics(io::create(&root.join("metrics.csv"))?, &rows)?;
    io::write_hourly(io::create(&root.join("hourly.csv"))?, &rows)?;
    let manifest = ExperimentManifest {
        code_version: CODE_VERSION.to_string(),
        config_hash: cfg_hash,
        data_hash: d_hash,
        config: cfg.clone(),
        runs: runs
            .iter()
            .map(|r| format!("runs/{}", cell_dir_name(&r.manifest.key)))
            .collect(),
    };
    write_bytes(&root.join("manifest.json"), &to_json(&manifest))?;
    Ok(ExperimentResult { root, runs })
}

pub fn read_run(dir: &Path) -> Result<RunRecord> {
    let manifest: RunManifest = serde_json::from_slice(&read_bytes(&dir.join("manifest.json"))?)?;
    let report: MetricsReport = serde_json::from_slice(&read_bytes(&dir.join("report.json"))?)?;
    Ok(RunRecord {
        dir: dir.to_path_buf(),
        manifest,
        report,
    })
}

/// Accepts cell directories or experiment roots; roots expand to their cells.
pub fn read_runs(paths: &[PathBuf]) -> Result<Vec<RunRecord>> {
    let mut out = Vec::new();
    for p in paths {
        let bytes = read_bytes(&p.join("manifest.json"))?;
        if let Ok(exp) = serde_json::from_slice::<ExperimentManifest>(&bytes) {
            for r in &exp.runs {
                out.push(read_run(&p.join(r))?);
            }
        } else {
            out.push(read_run(p)?);
        }
    }
    Ok(out)
}

#[derive(Clone, Debug, PartialEq)]
pub struct Reproduction {
    pub dir: PathBuf,
    pub events_match: bool,
    pub report_match: bool,
}

/// Reruns one cell from its manifest into `out` and checks the hashes.
pub fn reproduce(manifest_path: &Path, out: &Path) -> Result<Reproduction> {
    let m: RunManifest = serde_json::from_slice(&read_bytes(manifest_path)?)?;
    if m.data_hash != data_hash(&m.data)? {
        return Err(DispatchError::Mismatch(format!(
            "input data changed since {} was written",
            manifest_path.display()
        )));
    }
    if m.code_version != CODE_VERSION {
        log::warn!(
            "manifest written by version {}, running {}",
            m.code_version,
            CODE_VERSION
        );
    }
    let method = m.sim.method;
    let cfg = ExperimentConfig {
        version: CONFIG_VERSION,
        data: DataConfig {
            output: out.to_path_buf(),
            ..m.data.clone()
        },
        horizon: m.horizon.clone(),
        sim: m.sim.clone(),
        sweep: SweepConfig {
            methods: vec![method],
            vehicles: vec![m.sim.n_vehicles],
            activations: vec![m.sim.activation],
            seeds: vec![m.seed],
        },
    };
    let res = run_experiment(&cfg)?;
    let run = &res.runs[0].manifest;
    Ok(Reproduction {
        dir: res.runs[0].dir.clone(),
        events_match: run.events_sha256 == m.events_sha256,
        report_match: run.report_sha256 == m.report_sha256,
    })
}

/// One row of the side-by-side table.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct MethodRow {
    pub method: String,
    pub activation: String,
    pub vehicles: usize,
    pub seed: u64,
    pub served_ratio: f64,
    pub rho: Option<f64>,
    pub kappa: Option<f64>,
    pub tau_s: Option<f64>,
}

/// `a - b` for one pair of runs sharing vehicles and seed.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PairDiff {
    pub a: String,
    pub b: String,
    pub vehicles: usize,
    pub seed: u64,
    pub d_served_ratio: f64,
    pub d_rho: Option<f64>,
    pub d_kappa: Option<f64>,
    pub d_tau_s: Option<f64>,
    /// Per hour of day: R(a) - R(b); `None` where either has no requests.
    pub hourly: Vec<(u32, Option<f64>)>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Comparison {
    pub rows: Vec<MethodRow>,
    pub diffs: Vec<PairDiff>,
}

fn label(k: &RunKey) -> String {
    format!("{}/{}", k.method, k.activation)
}

fn sub(a: Option<f64>, b: Option<f64>) -> Option<f64> {
    Some(a? - b?)
}

fn pair(a: &RunRecord, b: &RunRecord) -> PairDiff {
    let (ra, rb) = (&a.report, &b.report);
    let hours: BTreeMap<u32, (Option<f64>, Option<f64>)> = ra
        .hourly
        .iter()
        .map(|h| (h.hour, (h.ratio, None)))
        .chain(rb.hourly.iter().map(|h| (h.hour, (None, h.ratio))))
        .fold(BTreeMap::new(), |mut m, (hr, (x, y))| {
            let e = m.entry(hr).or_insert((None, None));
            e.0 = e.0.or(x);
            e.1 = e.1.or(y);
            m
        });
    PairDiff {
        a: label(&a.manifest.key),
        b: label(&b.manifest.key),
        vehicles: a.manifest.key.vehicles,
        seed: a.manifest.seed,
        d_served_ratio: ra.served_ratio - rb.served_ratio,
        d_rho: sub(ra.rho, rb.rho),
        d_kappa: sub(ra.kappa, rb.kappa),
        d_tau_s: sub(ra.mean_wait, rb.mean_wait),
        hourly: hours
            .into_iter()
            .map(|(h, (x, y))| (h, sub(x, y)))
            .collect(),
    }
}

/// Side-by-side metrics plus differences. With a baseline method every other
/// run is compared against the baseline run with the same vehicle count and
/// seed; without one, every pair is compared in input order.
pub fn compare_methods(runs: &[RunRecord], baseline: Option<&str>) -> Result<Comparison> {
    if runs.len() < 2 {
        return Err(DispatchError::Mismatch("need at least two runs".into()));
    }
    let data = &runs[0].manifest.data_hash;
    if let Some(r) = runs.iter().find(|r| &r.manifest.data_hash != data) {
        return Err(DispatchError::Mismatch(format!(
            "{} and {} were run on different input data",
            runs[0].dir.display(),
            r.dir.display()
        )));
    }
    let same_cell = |a: &RunRecord, b: &RunRecord| {
        a.manifest.seed == b.manifest.seed && a.manifest.key.vehicles == b.manifest.key.vehicles
    };
    let mut diffs = Vec::new();
    match baseline {
        Some(base) => {
            for a in runs.iter().filter(|r| r.manifest.key.method != base) {
                if let Some(b) = runs
                    .iter()
                    .find(|b| b.manifest.key.method == base && same_cell(a, b))
                {
                    diffs.push(pair(a, b));
                }
            }
        }
        None => {
            for (i, a) in runs.iter().enumerate() {
                for b in &runs[i + 1..] {
                    if same_cell(a, b) {
                        diffs.push(pair(a, b));
                    }
                }
            }
        }
    }
    if diffs.is_empty() {
        return Err(DispatchError::Mismatch(
            "no two runs share a seed and vehicle count (or no baseline run matches)".into(),
        ));
    }
    let rows = runs
        .iter()
        .map(|r| MethodRow {
            method: r.manifest.key.method.clone(),
            activation: r.manifest.key.activation.clone(),
            vehicles: r.manifest.key.vehicles,
            seed: r.manifest.seed,
            served_ratio: r.report.served_ratio,
            rho: r.report.rho,
            kappa: r.report.kappa,
            tau_s: r.report.mean_wait,
        })
        .collect();
    Ok(Comparison { rows, diffs })
}

fn opt(x: Option<f64>) -> String {
    x.map(|v| v.to_string()).unwrap_or_default()
}

/// Writes `comparison.csv`, `differences.csv` and `hourly_diff.csv`.
pub fn write_comparison(dir: &Path, c: &Comparison) -> Result<()> {
    let mut w = csv::Writer::from_writer(io::create(&dir.join("comparison.csv"))?);
    for row in &c.rows {
        w.serialize(row)?;
    }
    w.flush().map_err(csv::Error::from)?;

    let mut w = csv::Writer::from_writer(io::create(&dir.join("differences.csv"))?);
    w.write_record([
        "a",
        "b",
        "vehicles",
        "seed",
        "d_served_ratio",
        "d_rho",
        "d_kappa",
        "d_tau_s",
    ])?;
    for d in &c.diffs {
        w.write_record([
            d.a.clone(),
            d.b.clone(),
            d.vehicles.to_string(),
            d.seed.to_string(),
            d.d_served_ratio.to_string(),
            opt(d.d_rho),
            opt(d.d_kappa),
            opt(d.d_tau_s),
        ])?;
    }
    w.flush().map_err(csv::Error::from)?;

    let mut w = csv::Writer::from_writer(io::create(&dir.join("hourly_diff.csv"))?);
    w.write_record(["a", "b", "vehicles", "seed", "hour", "d_served_ratio"])?;
    for d in &c.diffs {
        for (h, x) in &d.hourly {
            w.write_record([
                d.a.clone(),
                d.b.clone(),
                d.vehicles.to_string(),
                d.seed.to_string(),
                h.to_string(),
                opt(*x),
            ])?;
        }
    }
    w.flush().map_err(csv::Error::from)?;
    Ok(())
}
