//! CSV and JSON file formats.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use chrono::{DateTime, NaiveDateTime, SecondsFormat, Utc};
use dispatch_core::demand::{
    ingest_trips, IngestSummary, Location, RawTrip, TripOutcome, TripRequest, TripStore,
};
use dispatch_core::graph::{EdgeRecord, LoadReport, NodeRecord, SnapIndex};
use dispatch_core::sim::{Event, MetricsReport};
use dispatch_core::{ActivationKind, Partition, Point, RoadGraph, Timestamp};
use serde::Serialize;

use crate::error::{DispatchError, Result};

pub fn open(path: &Path) -> Result<BufReader<File>> {
    File::open(path)
        .map(BufReader::new)
        .map_err(|e| DispatchError::io(path, e))
}

pub fn create(path: &Path) -> Result<BufWriter<File>> {
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir).map_err(|e| DispatchError::io(dir, e))?;
    }
    File::create(path)
        .map(BufWriter::new)
        .map_err(|e| DispatchError::io(path, e))
}

/// Parses an ISO-8601 timestamp. Offsets are honored; timestamps without one
/// are taken as UTC.
pub fn parse_time(s: &str) -> Option<Timestamp> {
    let s = s.trim();
    if let Ok(t) = DateTime::parse_from_rfc3339(s) {
        return Some(t.timestamp());
    }
    [
        "%Y-%m-%dT%H:%M:%S",
        "%Y-%m-%d %H:%M:%S",
        "%Y-%m-%dT%H:%M:%S%.f",
        "%Y-%m-%d %H:%M:%S%.f",
    ]
    .iter()
    .find_map(|f| NaiveDateTime::parse_from_str(s, f).ok())
    .map(|t| t.and_utc().timestamp())
}

pub fn format_time(t: Timestamp) -> String {
    DateTime::<Utc>::from_timestamp(t, 0)
        .map(|d| d.to_rfc3339_opts(SecondsFormat::Secs, true))
        .unwrap_or_else(|| t.to_string())
}

struct Table<'p> {
    path: &'p Path,
    headers: csv::StringRecord,
}

impl<'p> Table<'p> {
    fn column(&self, name: &str) -> Option<usize> {
        self.headers.iter().position(|h| h.trim() == name)
    }

    fn require(&self, name: &str) -> Result<usize> {
        self.column(name).ok_or_else(|| DispatchError::Parse {
            path: self.path.to_path_buf(),
            line: 1,
            message: format!("missing column `{name}`"),
        })
    }

    fn err(&self, line: usize, message: impl Into<String>) -> DispatchError {
        DispatchError::Parse {
            path: self.path.to_path_buf(),
            line,
            message: message.into(),
        }
    }

    fn field<'r>(&self, rec: &'r csv::StringRecord, line: usize, col: usize) -> Result<&'r str> {
        rec.get(col)
            .map(str::trim)
            .ok_or_else(|| self.err(line, "short row"))
    }

    fn number<T: std::str::FromStr>(
        &self,
        rec: &csv::StringRecord,
        line: usize,
        col: usize,
    ) -> Result<T> {
        let raw = self.field(rec, line, col)?;
        raw.parse().map_err(|_| {
            self.err(
                line,
                format!("`{}` is not a valid {}", raw, &self.headers[col]),
            )
        })
    }
}

fn rows<R: Read>(reader: R, path: &Path) -> Result<(Table<'_>, Vec<(usize, csv::StringRecord)>)> {
    let mut rdr = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(reader);
    let headers = rdr.headers()?.clone();
    let mut out = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| DispatchError::Parse {
            path: path.to_path_buf(),
            line: e.position().map_or(0, |p| p.line() as usize),
            message: e.to_string(),
        })?;
        let line = rec.position().map_or(0, |p| p.line() as usize);
        out.push((line, rec));
    }
    Ok((Table { path, headers }, out))
}

/// Node table with header `node_id,x_m,y_m`.
pub fn read_nodes<R: Read>(reader: R, path: &Path) -> Result<Vec<NodeRecord>> {
    let (t, recs) = rows(reader, path)?;
    let (id, x, y) = (t.require("node_id")?, t.require("x_m")?, t.require("y_m")?);
    recs.iter()
        .map(|(line, r)| {
            Ok(NodeRecord {
                line: *line,
                id: t.number(r, *line, id)?,
                position: Point::new(t.number(r, *line, x)?, t.number(r, *line, y)?),
            })
        })
        .collect()
}

/// Edge table with header `from,to,slot_0,slot_1,...` and an optional
/// `length_m` column.
pub fn read_edges<R: Read>(reader: R, path: &Path) -> Result<Vec<EdgeRecord>> {
    let (t, recs) = rows(reader, path)?;
    let (from, to) = (t.require("from")?, t.require("to")?);
    let length = t.column("length_m");
    let slots: Vec<usize> = (0..)
        .map_while(|i| t.column(&format!("slot_{i}")))
        .collect();
    if slots.is_empty() {
        return Err(t.err(1, "no `slot_0` column"));
    }
    recs.iter()
        .map(|(line, r)| {
            let length_m = match length {
                Some(c) if !t.field(r, *line, c)?.is_empty() => Some(t.number(r, *line, c)?),
                _ => None,
            };
            Ok(EdgeRecord {
                line: *line,
                from: t.number(r, *line, from)?,
                to: t.number(r, *line, to)?,
                slot_times: slots
                    .iter()
                    .map(|&c| t.number(r, *line, c))
                    .collect::<Result<_>>()?,
                length_m,
            })
        })
        .collect()
}

pub fn load_graph(nodes: &Path, edges: &Path, slot_length: i64) -> Result<(RoadGraph, LoadReport)> {
    let node_rows = read_nodes(open(nodes)?, nodes)?;
    let edge_rows = read_edges(open(edges)?, edges)?;
    RoadGraph::from_records(&node_rows, &edge_rows, slot_length).map_err(|source| {
        DispatchError::Graph {
            // node-level problems are reported against the node file
            path: match source {
                dispatch_core::GraphError::SparseVertexId { .. }
                | dispatch_core::GraphError::DuplicateVertex { .. } => nodes.to_path_buf(),
                _ => edges.to_path_buf(),
            },
            source,
        }
    })
}

/// Trip table: `request_time` plus either `pickup_node,dropoff_node` or
/// `pickup_x,pickup_y,dropoff_x,dropoff_y`. A row may leave the node columns
/// empty and use coordinates instead.
pub fn read_trips<R: Read>(reader: R, path: &Path) -> Result<Vec<RawTrip>> {
    let (t, recs) = rows(reader, path)?;
    let time = t.require("request_time")?;
    let nodes = t.column("pickup_node").zip(t.column("dropoff_node"));
    let coords = match (
        t.column("pickup_x"),
        t.column("pickup_y"),
        t.column("dropoff_x"),
        t.column("dropoff_y"),
    ) {
        (Some(a), Some(b), Some(c), Some(d)) => Some((a, b, c, d)),
        _ => None,
    };
    if nodes.is_none() && coords.is_none() {
        return Err(t.err(
            1,
            "need pickup_node,dropoff_node or pickup_x,pickup_y,dropoff_x,dropoff_y",
        ));
    }
    recs.iter()
        .map(|(line, r)| {
            let raw = t.field(r, *line, time)?;
            let request_time = parse_time(raw)
                .ok_or_else(|| t.err(*line, format!("bad ISO-8601 time `{raw}`")))?;
            let (pickup, dropoff) = match (nodes, coords) {
                (Some((p, d)), _) if !t.field(r, *line, p)?.is_empty() => (
                    Location::Node(t.number(r, *line, p)?),
                    Location::Node(t.number(r, *line, d)?),
                ),
                (_, Some((px, py, dx, dy))) => (
                    Location::Point(Point::new(t.number(r, *line, px)?, t.number(r, *line, py)?)),
                    Location::Point(Point::new(t.number(r, *line, dx)?, t.number(r, *line, dy)?)),
                ),
                _ => return Err(t.err(*line, "row has neither node ids nor coordinates")),
            };
            Ok(RawTrip {
                line: *line,
                request_time,
                pickup,
                dropoff,
            })
        })
        .collect()
}

pub fn load_trips(path: &Path, g: &RoadGraph, l_max: f64) -> Result<(TripStore, IngestSummary)> {
    let rows = read_trips(open(path)?, path)?;
    let snap = SnapIndex::new(g, l_max).map_err(|source| DispatchError::Graph {
        path: path.to_path_buf(),
        source,
    })?;
    Ok(ingest_trips(&rows, g, &snap))
}

pub fn write_nodes<W: Write>(w: W, nodes: &[NodeRecord]) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(["node_id", "x_m", "y_m"])?;
    for n in nodes {
        out.write_record([
            n.id.to_string(),
            n.position.x.to_string(),
            n.position.y.to_string(),
        ])?;
    }
    out.flush().map_err(csv::Error::from)?;
    Ok(())
}

pub fn write_edges<W: Write>(w: W, edges: &[EdgeRecord]) -> Result<()> {
    let slots = edges.first().map_or(1, |e| e.slot_times.len());
    let mut out = csv::Writer::from_writer(w);
    let mut header = vec!["from".to_string(), "to".to_string()];
    header.extend((0..slots).map(|i| format!("slot_{i}")));
    header.push("length_m".into());
    out.write_record(&header)?;
    for e in edges {
        let mut rec = vec![e.from.to_string(), e.to.to_string()];
        rec.extend(e.slot_times.iter().map(f64::to_string));
        rec.push(e.length_m.map(|l| l.to_string()).unwrap_or_default());
        out.write_record(&rec)?;
    }
    out.flush().map_err(csv::Error::from)?;
    Ok(())
}

pub fn write_trips<W: Write>(w: W, trips: &[TripRequest]) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(["request_time", "pickup_node", "dropoff_node"])?;
    for t in trips {
        out.write_record([
            format_time(t.request_time),
            t.pickup.0.to_string(),
            t.dropoff.0.to_string(),
        ])?;
    }
    out.flush().map_err(csv::Error::from)?;
    Ok(())
}

/// `vertex_id,subarea_index,center_id`, one row per vertex.
pub fn write_partition<W: Write>(w: W, p: &Partition) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(["vertex_id", "subarea_index", "center_id"])?;
    for (v, &a) in p.assignment.iter().enumerate() {
        out.write_record([
            v.to_string(),
            a.to_string(),
            p.centers[a as usize].0.to_string(),
        ])?;
    }
    out.flush().map_err(csv::Error::from)?;
    Ok(())
}

#[derive(Clone, Debug, PartialEq, Serialize, serde::Deserialize)]
pub struct PartitionSummary {
    pub objective: f64,
    pub iterations: u32,
    pub seed: u64,
    pub activation: ActivationKind,
}

/// One-line JSON summary accompanying a partition export.
pub fn partition_summary(p: &Partition, activation: ActivationKind) -> String {
    serde_json::to_string(&PartitionSummary {
        objective: p.objective,
        iterations: p.iterations,
        seed: p.seed,
        activation,
    })
    .expect("plain struct serializes")
}

/// Newline-delimited JSON, one event per line.
pub fn write_event_log<W: Write>(mut w: W, log: &[Event]) -> Result<()> {
    for e in log {
        serde_json::to_writer(&mut w, e)?;
        w.write_all(b"\n")
            .map_err(|e| DispatchError::io("<event log>", e))?;
    }
    w.flush().map_err(|e| DispatchError::io("<event log>", e))?;
    Ok(())
}

pub fn read_event_log<R: Read>(reader: R) -> Result<Vec<Event>> {
    serde_json::Deserializer::from_reader(reader)
        .into_iter::<Event>()
        .map(|e| e.map_err(DispatchError::from))
        .collect()
}

/// Labels identifying one run in report tables.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, serde::Deserialize)]
pub struct RunKey {
    pub method: String,
    pub activation: String,
    pub vehicles: usize,
    pub seed: u64,
}

fn opt(x: Option<f64>) -> String {
    x.map(|v| v.to_string()).unwrap_or_default()
}

pub const METRICS_HEADER: [&str; 14] = [
    "method",
    "activation",
    "vehicles",
    "seed",
    "requests",
    "served",
    "expired",
    "served_ratio",
    "no_demand",
    "rho",
    "kappa",
    "tau_s",
    "vkm",
    "tkm",
];

pub fn write_metrics<W: Write>(w: W, rows: &[(RunKey, MetricsReport)]) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(METRICS_HEADER)?;
    for (k, m) in rows {
        out.write_record([
            k.method.clone(),
            k.activation.clone(),
            k.vehicles.to_string(),
            k.seed.to_string(),
            m.requests.to_string(),
            m.served.to_string(),
            m.expired.to_string(),
            m.served_ratio.to_string(),
            m.no_demand.to_string(),
            opt(m.rho),
            opt(m.kappa),
            opt(m.mean_wait),
            m.vkm.to_string(),
            m.tkm.to_string(),
        ])?;
    }
    out.flush().map_err(csv::Error::from)?;
    Ok(())
}

/// Served ratio per hour of day, one row per run and hour.
pub fn write_hourly<W: Write>(w: W, rows: &[(RunKey, MetricsReport)]) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record([
        "method",
        "activation",
        "vehicles",
        "seed",
        "hour",
        "requests",
        "served",
        "served_ratio",
    ])?;
    for (k, m) in rows {
        for h in &m.hourly {
            out.write_record([
                k.method.clone(),
                k.activation.clone(),
                k.vehicles.to_string(),
                k.seed.to_string(),
                h.hour.to_string(),
                h.requests.to_string(),
                h.served.to_string(),
                opt(h.ratio),
            ])?;
        }
    }
    out.flush().map_err(csv::Error::from)?;
    Ok(())
}

pub fn write_outcomes<W: Write>(w: W, outcomes: &[TripOutcome]) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record([
        "request",
        "request_time",
        "status",
        "actual_pickup_time",
        "vehicle",
        "pickup_deadhead_km",
        "trip_km",
    ])?;
    for o in outcomes {
        out.write_record([
            o.request.to_string(),
            format_time(o.request_time),
            format!("{:?}", o.status).to_lowercase(),
            o.actual_pickup_time.map(format_time).unwrap_or_default(),
            o.vehicle.map(|v| v.to_string()).unwrap_or_default(),
            o.pickup_deadhead_km.to_string(),
            o.trip_km.to_string(),
        ])?;
    }
    out.flush().map_err(csv::Error::from)?;
    Ok(())
}
