//! Comma-separated text formats for datasets, mask ledgers, predictions and
//! metrics.
//!
//! Floats are written with Rust's shortest round-trip formatting, so a write
//! followed by a read reproduces every value bit for bit.

use std::collections::{HashMap, HashSet};
use std::path::Path;

use crate::error::{Error, Result};
use crate::kernel::TimeGrid;
use crate::model::{AttributeSeries, EdgeValue, MultiplexGraphSeries};
use crate::simulate::{MaskLedger, Scenario};

pub const EDGE_HEADER: [&str; 6] = ["time", "layer", "i", "j", "value", "observed"];
pub const ATTR_HEADER: [&str; 5] = ["time", "node", "attr", "value", "observed"];
pub const LEDGER_EDGE_HEADER: [&str; 6] = ["time", "layer", "i", "j", "value", "scenario"];
pub const LEDGER_ATTR_HEADER: [&str; 5] = ["time", "node", "attr", "value", "scenario"];
pub const EDGE_PRED_HEADER: [&str; 7] = ["scenario", "time", "layer", "i", "j", "probability", "predicted"];
pub const ATTR_PRED_HEADER: [&str; 7] = ["scenario", "time", "node", "attr", "point", "lo", "hi"];
pub const METRICS_HEADER: [&str; 3] = ["scenario", "metric", "value"];

/// Graph and attributes over one grid, with external node ids by index.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub graph: MultiplexGraphSeries,
    pub attrs: AttributeSeries,
    pub node_ids: Vec<String>,
}

/// Default ids `"0"`, `"1"`, ...
pub fn index_ids(n: usize) -> Vec<String> {
    (0..n).map(|i| i.to_string()).collect()
}

fn writer(path: &Path, header: &[&str]) -> Result<csv::Writer<std::fs::File>> {
    let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = csv::Writer::from_writer(file);
    w.write_record(header).map_err(|e| csv_error(path, e))?;
    Ok(w)
}

fn csv_error(path: &Path, e: csv::Error) -> Error {
    let line = e.position().map_or(0, |p| p.line() as usize);
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::io(path, io),
        other => Error::Parse {
            path: path.to_path_buf(),
            line,
            message: format!("{other:?}"),
        },
    }
}

/// Reads all records after checking the header; yields `(line, record)`.
fn read_records(path: &Path, header: &[&str]) -> Result<Vec<(usize, csv::StringRecord)>> {
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut r = csv::ReaderBuilder::new().has_headers(true).from_reader(file);
    let found = r.headers().map_err(|e| csv_error(path, e))?.clone();
    if found.iter().map(str::trim).ne(header.iter().copied()) {
        return Err(Error::Parse {
            path: path.to_path_buf(),
            line: 1,
            message: format!("expected header {}, found {}", header.join(","), found.iter().collect::<Vec<_>>().join(",")),
        });
    }
    let mut out = Vec::new();
    for rec in r.records() {
        let rec = rec.map_err(|e| csv_error(path, e))?;
        let line = rec.position().map_or(0, |p| p.line() as usize);
        out.push((line, rec));
    }
    Ok(out)
}

fn parse_err(path: &Path, line: usize, message: impl Into<String>) -> Error {
    Error::Parse {
        path: path.to_path_buf(),
        line,
        message: message.into(),
    }
}

fn field<'r>(path: &Path, line: usize, rec: &'r csv::StringRecord, i: usize) -> Result<&'r str> {
    rec.get(i)
        .map(str::trim)
        .ok_or_else(|| parse_err(path, line, format!("missing column {}", i + 1)))
}

fn parse_f64(path: &Path, line: usize, s: &str, what: &str) -> Result<f64> {
    let v: f64 = s
        .parse()
        .map_err(|_| parse_err(path, line, format!("{what} '{s}' is not a number")))?;
    if !v.is_finite() {
        return Err(parse_err(path, line, format!("{what} '{s}' is not finite")));
    }
    Ok(v)
}

fn parse_usize(path: &Path, line: usize, s: &str, what: &str) -> Result<usize> {
    s.parse()
        .map_err(|_| parse_err(path, line, format!("{what} '{s}' is not a nonnegative integer")))
}

fn parse_bool(path: &Path, line: usize, s: &str) -> Result<bool> {
    match s {
        "true" | "1" => Ok(true),
        "false" | "0" => Ok(false),
        _ => Err(parse_err(path, line, format!("'{s}' is not a boolean"))),
    }
}

fn fmt(v: f64) -> String {
    format!("{v}")
}

fn edge_str(v: EdgeValue) -> &'static str {
    match v {
        EdgeValue::Absent => "0",
        EdgeValue::Present => "1",
        EdgeValue::Unknown => "NA",
    }
}

/// Writes every cell of the graph, observed or not.
pub fn write_edges(path: &Path, graph: &MultiplexGraphSeries, ids: &[String]) -> Result<()> {
    let mut w = writer(path, &EDGE_HEADER)?;
    let times = graph.grid().times();
    for t in 0..graph.num_times() {
        for l in 0..graph.num_layers() {
            for pair in 0..graph.num_pairs() {
                let (i, j) = graph.pair_nodes(pair);
                let v = graph.value(graph.cell_at(pair, l, t));
                w.write_record([
                    fmt(times[t]),
                    l.to_string(),
                    ids[i].clone(),
                    ids[j].clone(),
                    edge_str(v).to_string(),
                    v.is_observed().to_string(),
                ])
                .map_err(|e| csv_error(path, e))?;
            }
        }
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn write_attributes(path: &Path, attrs: &AttributeSeries, ids: &[String]) -> Result<()> {
    let mut w = writer(path, &ATTR_HEADER)?;
    let times = attrs.grid().times();
    for t in 0..attrs.num_times() {
        for j in 0..attrs.num_nodes() {
            for k in 0..attrs.num_attrs() {
                let v = attrs.get(j, k, t)?;
                w.write_record([
                    fmt(times[t]),
                    ids[j].clone(),
                    k.to_string(),
                    v.map_or_else(|| "NA".to_string(), fmt),
                    v.is_some().to_string(),
                ])
                .map_err(|e| csv_error(path, e))?;
            }
        }
    }
    w.flush().map_err(|e| Error::io(path, e))
}

struct NodeIndex {
    ids: Vec<String>,
    index: HashMap<String, usize>,
}

impl NodeIndex {
    fn new() -> Self {
        NodeIndex {
            ids: Vec::new(),
            index: HashMap::new(),
        }
    }

    fn get_or_insert(&mut self, id: &str) -> usize {
        if let Some(&i) = self.index.get(id) {
            return i;
        }
        self.ids.push(id.to_string());
        self.index.insert(id.to_string(), self.ids.len() - 1);
        self.ids.len() - 1
    }
}

struct EdgeRow {
    line: usize,
    time: f64,
    layer: usize,
    i: usize,
    j: usize,
    value: Option<bool>,
}

struct AttrRow {
    line: usize,
    time: f64,
    node: usize,
    attr: usize,
    value: Option<f64>,
}

/// Reads an edge list and attribute table into tensors on a common grid.
///
/// Node ids are numbered in order of first appearance (edges first); the grid
/// is the sorted set of distinct times in either file; cells without a record
/// are unobserved. Self-pairs, duplicates, and observed cells without a value
/// are rejected with their line number.
pub fn read_dataset(edges_path: &Path, attrs_path: &Path) -> Result<Dataset> {
    let mut nodes = NodeIndex::new();
    let mut edges = Vec::new();
    for (line, rec) in read_records(edges_path, &EDGE_HEADER)? {
        let p = edges_path;
        let time = parse_f64(p, line, field(p, line, &rec, 0)?, "time")?;
        let layer = parse_usize(p, line, field(p, line, &rec, 1)?, "layer")?;
        let (a, b) = (field(p, line, &rec, 2)?, field(p, line, &rec, 3)?);
        if a == b {
            return Err(parse_err(p, line, format!("self-pair ({a}, {b})")));
        }
        let observed = parse_bool(p, line, field(p, line, &rec, 5)?)?;
        let value = match (field(p, line, &rec, 4)?, observed) {
            (_, false) => None,
            ("0", true) => Some(false),
            ("1", true) => Some(true),
            (v, true) => return Err(parse_err(p, line, format!("observed edge value '{v}' is not 0 or 1"))),
        };
        let i = nodes.get_or_insert(a);
        let j = nodes.get_or_insert(b);
        edges.push(EdgeRow {
            line,
            time,
            layer,
            i,
            j,
            value,
        });
    }
    let mut attr_rows = Vec::new();
    for (line, rec) in read_records(attrs_path, &ATTR_HEADER)? {
        let p = attrs_path;
        let time = parse_f64(p, line, field(p, line, &rec, 0)?, "time")?;
        let node = nodes.get_or_insert(field(p, line, &rec, 1)?);
        let attr = parse_usize(p, line, field(p, line, &rec, 2)?, "attr")?;
        let observed = parse_bool(p, line, field(p, line, &rec, 4)?)?;
        let value = if observed {
            Some(parse_f64(p, line, field(p, line, &rec, 3)?, "value")?)
        } else {
            None
        };
        attr_rows.push(AttrRow {
            line,
            time,
            node,
            attr,
            value,
        });
    }

    let mut times: Vec<f64> = edges.iter().map(|e| e.time).chain(attr_rows.iter().map(|a| a.time)).collect();
    times.sort_by(f64::total_cmp);
    times.dedup();
    let grid = TimeGrid::new(times)
        .map_err(|e| parse_err(edges_path, 0, format!("no usable time grid: {e}")))?;
    let num_layers = edges.iter().map(|e| e.layer + 1).max().unwrap_or(1);
    let num_attrs = attr_rows.iter().map(|a| a.attr + 1).max().unwrap_or(0);
    let n = nodes.ids.len();

    let mut graph = MultiplexGraphSeries::unobserved(n, num_layers, grid.clone())
        .map_err(|e| parse_err(edges_path, 0, e.to_string()))?;
    let mut seen = HashSet::new();
    for e in &edges {
        let t = grid.position(e.time).expect("time is on the grid");
        let key = (t, e.layer, e.i.min(e.j), e.i.max(e.j));
        if !seen.insert(key) {
            return Err(parse_err(edges_path, e.line, "duplicate (time, layer, i, j) record"));
        }
        if let Some(v) = e.value {
            graph.set(e.i, e.j, e.layer, t, EdgeValue::from_bool(v))?;
        }
    }
    let mut attrs = AttributeSeries::unobserved(n, num_attrs, grid.clone());
    let mut seen = HashSet::new();
    for a in &attr_rows {
        let t = grid.position(a.time).expect("time is on the grid");
        if !seen.insert((t, a.node, a.attr)) {
            return Err(parse_err(attrs_path, a.line, "duplicate (time, node, attr) record"));
        }
        attrs.set(a.node, a.attr, t, a.value)?;
    }
    Ok(Dataset {
        graph,
        attrs,
        node_ids: nodes.ids,
    })
}

/// Hidden edge with external ids.
#[derive(Debug, Clone, PartialEq)]
pub struct LedgerEdgeRecord {
    pub time: f64,
    pub layer: usize,
    pub i: String,
    pub j: String,
    pub value: bool,
    pub scenario: Scenario,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LedgerAttrRecord {
    pub time: f64,
    pub node: String,
    pub attr: usize,
    pub value: f64,
    pub scenario: Scenario,
}

/// Writes the observed hidden cells of a ledger.
pub fn write_ledger(edges_path: &Path, attrs_path: &Path, ledger: &MaskLedger, ids: &[String]) -> Result<()> {
    let times = ledger.full_grid.times();
    let mut w = writer(edges_path, &LEDGER_EDGE_HEADER)?;
    for h in &ledger.edges {
        w.write_record([
            fmt(times[h.t]),
            h.layer.to_string(),
            ids[h.i].clone(),
            ids[h.j].clone(),
            edge_str(h.value).to_string(),
            h.scenario.name().to_string(),
        ])
        .map_err(|e| csv_error(edges_path, e))?;
    }
    w.flush().map_err(|e| Error::io(edges_path, e))?;
    let mut w = writer(attrs_path, &LEDGER_ATTR_HEADER)?;
    for h in &ledger.attrs {
        let Some(v) = h.value else { continue };
        w.write_record([
            fmt(times[h.t]),
            ids[h.node].clone(),
            h.attr.to_string(),
            fmt(v),
            h.scenario.name().to_string(),
        ])
        .map_err(|e| csv_error(attrs_path, e))?;
    }
    w.flush().map_err(|e| Error::io(attrs_path, e))
}

fn parse_scenario(path: &Path, line: usize, s: &str) -> Result<Scenario> {
    Scenario::parse(s).ok_or_else(|| parse_err(path, line, format!("unknown scenario '{s}'")))
}

pub fn read_ledger(edges_path: &Path, attrs_path: &Path) -> Result<(Vec<LedgerEdgeRecord>, Vec<LedgerAttrRecord>)> {
    let p = edges_path;
    let mut edges = Vec::new();
    for (line, rec) in read_records(p, &LEDGER_EDGE_HEADER)? {
        let value = match field(p, line, &rec, 4)? {
            "0" => false,
            "1" => true,
            v => return Err(parse_err(p, line, format!("ledger edge value '{v}' is not 0 or 1"))),
        };
        let (i, j) = (field(p, line, &rec, 2)?, field(p, line, &rec, 3)?);
        if i == j {
            return Err(parse_err(p, line, format!("self-pair ({i}, {j})")));
        }
        edges.push(LedgerEdgeRecord {
            time: parse_f64(p, line, field(p, line, &rec, 0)?, "time")?,
            layer: parse_usize(p, line, field(p, line, &rec, 1)?, "layer")?,
            i: i.to_string(),
            j: j.to_string(),
            value,
            scenario: parse_scenario(p, line, field(p, line, &rec, 5)?)?,
        });
    }
    let p = attrs_path;
    let mut attrs = Vec::new();
    for (line, rec) in read_records(p, &LEDGER_ATTR_HEADER)? {
        attrs.push(LedgerAttrRecord {
            time: parse_f64(p, line, field(p, line, &rec, 0)?, "time")?,
            node: field(p, line, &rec, 1)?.to_string(),
            attr: parse_usize(p, line, field(p, line, &rec, 2)?, "attr")?,
            value: parse_f64(p, line, field(p, line, &rec, 3)?, "value")?,
            scenario: parse_scenario(p, line, field(p, line, &rec, 4)?)?,
        });
    }
    Ok((edges, attrs))
}

#[derive(Debug, Clone, PartialEq)]
pub struct EdgePredictionRecord {
    pub scenario: Scenario,
    pub time: f64,
    pub layer: usize,
    pub i: String,
    pub j: String,
    pub probability: f64,
    pub predicted: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AttrPredictionRecord {
    pub scenario: Scenario,
    pub time: f64,
    pub node: String,
    pub attr: usize,
    pub point: f64,
    pub lo: f64,
    pub hi: f64,
}

pub fn write_edge_predictions(path: &Path, rows: &[EdgePredictionRecord]) -> Result<()> {
    let mut w = writer(path, &EDGE_PRED_HEADER)?;
    for r in rows {
        w.write_record([
            r.scenario.name().to_string(),
            fmt(r.time),
            r.layer.to_string(),
            r.i.clone(),
            r.j.clone(),
            fmt(r.probability),
            u8::from(r.predicted).to_string(),
        ])
        .map_err(|e| csv_error(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn read_edge_predictions(path: &Path) -> Result<Vec<EdgePredictionRecord>> {
    read_records(path, &EDGE_PRED_HEADER)?
        .into_iter()
        .map(|(line, rec)| {
            let probability = parse_f64(path, line, field(path, line, &rec, 5)?, "probability")?;
            if !(0.0..=1.0).contains(&probability) {
                return Err(parse_err(path, line, format!("probability {probability} outside [0, 1]")));
            }
            Ok(EdgePredictionRecord {
                scenario: parse_scenario(path, line, field(path, line, &rec, 0)?)?,
                time: parse_f64(path, line, field(path, line, &rec, 1)?, "time")?,
                layer: parse_usize(path, line, field(path, line, &rec, 2)?, "layer")?,
                i: field(path, line, &rec, 3)?.to_string(),
                j: field(path, line, &rec, 4)?.to_string(),
                probability,
                predicted: parse_bool(path, line, field(path, line, &rec, 6)?)?,
            })
        })
        .collect()
}

pub fn write_attr_predictions(path: &Path, rows: &[AttrPredictionRecord]) -> Result<()> {
    let mut w = writer(path, &ATTR_PRED_HEADER)?;
    for r in rows {
        w.write_record([
            r.scenario.name().to_string(),
            fmt(r.time),
            r.node.clone(),
            r.attr.to_string(),
            fmt(r.point),
            fmt(r.lo),
            fmt(r.hi),
        ])
        .map_err(|e| csv_error(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn read_attr_predictions(path: &Path) -> Result<Vec<AttrPredictionRecord>> {
    read_records(path, &ATTR_PRED_HEADER)?
        .into_iter()
        .map(|(line, rec)| {
            Ok(AttrPredictionRecord {
                scenario: parse_scenario(path, line, field(path, line, &rec, 0)?)?,
                time: parse_f64(path, line, field(path, line, &rec, 1)?, "time")?,
                node: field(path, line, &rec, 2)?.to_string(),
                attr: parse_usize(path, line, field(path, line, &rec, 3)?, "attr")?,
                point: parse_f64(path, line, field(path, line, &rec, 4)?, "point")?,
                lo: parse_f64(path, line, field(path, line, &rec, 5)?, "lo")?,
                hi: parse_f64(path, line, field(path, line, &rec, 6)?, "hi")?,
            })
        })
        .collect()
}

/// `(scenario, metric, value)` rows.
pub fn write_metrics(path: &Path, rows: &[(String, String, f64)]) -> Result<()> {
    let mut w = writer(path, &METRICS_HEADER)?;
    for (s, m, v) in rows {
        w.write_record([s.clone(), m.clone(), fmt(*v)]).map_err(|e| csv_error(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn read_metrics(path: &Path) -> Result<Vec<(String, String, f64)>> {
    read_records(path, &METRICS_HEADER)?
        .into_iter()
        .map(|(line, rec)| {
            let value: f64 = field(path, line, &rec, 2)?
                .parse()
                .map_err(|_| parse_err(path, line, "metric value is not a number"))?;
            Ok((
                field(path, line, &rec, 0)?.to_string(),
                field(path, line, &rec, 1)?.to_string(),
                value,
            ))
        })
        .collect()
}
