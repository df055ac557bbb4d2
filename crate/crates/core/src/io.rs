//! File formats: similarity matrices as CSV, events as JSON lines, raw
//! series as long-format CSV, and JSON documents for dendrograms,
//! clusterings and detection reports.

use std::collections::HashMap;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use log::warn;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::detection::{ClusterSummary, DetectionReport};
use crate::error::{Error, Result};
use crate::hierarchy::{Clustering, CutThreshold, Dendrogram, NodeKind};
use crate::matrix::SimilarityMatrix;
use crate::similarity::{Event, EventSeries};

/// Tolerance used when repairing near-valid matrix files.
pub const MATRIX_TOLERANCE: f64 = 1e-9;

fn open(path: &Path) -> Result<File> {
    File::open(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    File::create(path)
        .map(BufWriter::new)
        .map_err(|source| Error::Io {
            path: path.to_path_buf(),
            source,
        })
}

fn write_err(path: &Path) -> impl Fn(std::io::Error) -> Error + '_ {
    move |source| Error::Io {
        path: path.to_path_buf(),
        source,
    }
}

/// Round to nine significant digits and print the shortest representation of the result.
pub fn format_sig9(x: f64) -> String {
    let rounded: f64 = format!("{x:.8e}").parse().expect("formatted float parses");
    format!("{rounded}")
}

/// Round to six decimals.
pub fn round6(x: f64) -> f64 {
    let r = (x * 1e6).round() / 1e6;
    if r == 0.0 {
        0.0
    } else {
        r
    }
}

// ---------------------------------------------------------------------------
// similarity matrix CSV

/// Parse a matrix CSV: a header row of ids (first cell ignored), then one row
/// per object with its id followed by its similarities.
///
/// Asymmetry, diagonal error and range excursions up to [`MATRIX_TOLERANCE`]
/// are repaired with a warning; anything larger is an invariant error naming
/// the cell.
pub fn read_similarity_matrix<R: Read>(reader: R) -> Result<SimilarityMatrix> {
    let mut csv = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let mut records = csv.records();
    let header = match records.next() {
        None => return Err(Error::format(Some(1), "empty matrix file")),
        Some(r) => r.map_err(|e| Error::format(Some(1), e.to_string()))?,
    };
    let ids: Vec<String> = header.iter().skip(1).map(str::to_owned).collect();
    let n = ids.len();
    if n == 0 {
        return Err(Error::format(Some(1), "header row lists no object ids"));
    }

    let mut values = vec![0.0; n * n];
    let mut rows = 0;
    for (r, record) in records.enumerate() {
        let line = r as u64 + 2;
        let record = record.map_err(|e| Error::format(Some(line), e.to_string()))?;
        if record.iter().all(str::is_empty) {
            continue;
        }
        if rows == n {
            return Err(Error::format(Some(line), format!("more than {n} data rows")));
        }
        if record.len() != n + 1 {
            return Err(Error::format(
                Some(line),
                format!("expected {} fields, found {}", n + 1, record.len()),
            ));
        }
        if record[0] != ids[rows] {
            return Err(Error::format(
                Some(line),
                format!("row id `{}` does not match column id `{}`", &record[0], ids[rows]),
            ));
        }
        for (c, cell) in record.iter().skip(1).enumerate() {
            let v: f64 = cell.parse().map_err(|_| {
                Error::format(
                    Some(line),
                    format!("cell ({}, {}) is not a number: `{cell}`", ids[rows], ids[c]),
                )
            })?;
            if !v.is_finite() {
                return Err(Error::format(
                    Some(line),
                    format!("cell ({}, {}) is not finite", ids[rows], ids[c]),
                ));
            }
            values[rows * n + c] = v;
        }
        rows += 1;
    }
    if rows != n {
        return Err(Error::format(None, format!("expected {n} data rows, found {rows}")));
    }

    for i in 0..n {
        for j in 0..n {
            let v = values[i * n + j];
            if !(-MATRIX_TOLERANCE..=1.0 + MATRIX_TOLERANCE).contains(&v) {
                return Err(Error::invariant(format!(
                    "cell ({}, {}) = {v} is outside [0, 1]",
                    ids[i], ids[j]
                )));
            }
            if i == j && (v - 1.0).abs() > MATRIX_TOLERANCE {
                return Err(Error::invariant(format!(
                    "diagonal cell ({}, {}) = {v}, expected 1",
                    ids[i], ids[j]
                )));
            }
            if j > i && (v - values[j * n + i]).abs() > MATRIX_TOLERANCE {
                return Err(Error::invariant(format!(
                    "cells ({0}, {1}) = {v} and ({1}, {0}) = {2} are not symmetric",
                    ids[i],
                    ids[j],
                    values[j * n + i]
                )));
            }
        }
    }

    let mut repaired = 0usize;
    for i in 0..n {
        for j in i..n {
            let (a, b) = (values[i * n + j], values[j * n + i]);
            let v = if i == j { 1.0 } else { ((a + b) / 2.0).clamp(0.0, 1.0) };
            if v != a || v != b {
                repaired += 1;
            }
            values[i * n + j] = v;
            values[j * n + i] = v;
        }
    }
    if repaired > 0 {
        warn!("repaired {repaired} matrix cell(s) within tolerance {MATRIX_TOLERANCE:e}");
    }
    SimilarityMatrix::new(ids, values)
}

pub fn load_similarity_matrix(path: impl AsRef<Path>) -> Result<SimilarityMatrix> {
    let path = path.as_ref();
    read_similarity_matrix(BufReader::new(open(path)?)).map_err(|e| e.with_path(path))
}

pub fn write_similarity_matrix<W: Write>(matrix: &SimilarityMatrix, writer: W) -> Result<()> {
    let mut csv = csv::Writer::from_writer(writer);
    let to_err = |e: csv::Error| Error::invalid(format!("failed to write matrix: {e}"));
    let mut header = vec![String::new()];
    header.extend(matrix.ids().iter().cloned());
    csv.write_record(&header).map_err(to_err)?;
    for (i, id) in matrix.ids().iter().enumerate() {
        let mut row = vec![id.clone()];
        row.extend(matrix.row(i).iter().map(|&v| format_sig9(v)));
        csv.write_record(&row).map_err(to_err)?;
    }
    csv.flush()
        .map_err(|e| Error::invalid(format!("failed to write matrix: {e}")))
}

pub fn save_similarity_matrix(matrix: &SimilarityMatrix, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    write_similarity_matrix(matrix, create(path)?).map_err(|e| match e {
        Error::InvalidInput(msg) => Error::Io {
            path: path.to_path_buf(),
            source: std::io::Error::other(msg),
        },
        other => other,
    })
}

// ---------------------------------------------------------------------------
// events JSONL

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct EventRecord {
    series_id: String,
    event_id: String,
    start: f64,
    end: f64,
    features: Vec<f64>,
}

/// Parse one event per line, grouping by series in order of first appearance.
pub fn read_events<R: BufRead>(reader: R) -> Result<Vec<EventSeries>> {
    let mut order: Vec<String> = Vec::new();
    let mut grouped: HashMap<String, Vec<Event>> = HashMap::new();
    let mut dimension: Option<(usize, u64)> = None;

    for (i, line) in reader.lines().enumerate() {
        let line_no = i as u64 + 1;
        let line = line.map_err(|e| Error::format(Some(line_no), e.to_string()))?;
        if line.trim().is_empty() {
            continue;
        }
        let rec: EventRecord = serde_json::from_str(&line)
            .map_err(|e| Error::format(Some(line_no), e.to_string()))?;
        let event = Event::new(rec.series_id, rec.event_id, rec.start, rec.end, rec.features)
            .map_err(|e| Error::format(Some(line_no), e.to_string()))?;
        match dimension {
            None => dimension = Some((event.dimension(), line_no)),
            Some((p, first)) if p != event.dimension() => {
                return Err(Error::format(
                    Some(line_no),
                    format!(
                        "event has {} features but line {first} has {p}",
                        event.dimension()
                    ),
                ))
            }
            _ => {}
        }
        if !grouped.contains_key(&event.series_id) {
            order.push(event.series_id.clone());
        }
        grouped.entry(event.series_id.clone()).or_default().push(event);
    }

    order
        .into_iter()
        .map(|id| {
            let events = grouped.remove(&id).unwrap_or_default();
            EventSeries::new(id, events)
        })
        .collect()
}

pub fn load_events(path: impl AsRef<Path>) -> Result<Vec<EventSeries>> {
    let path = path.as_ref();
    read_events(BufReader::new(open(path)?)).map_err(|e| e.with_path(path))
}

// ---------------------------------------------------------------------------
// raw series CSV and the experimental threshold-crossing detector

/// One raw time series as `(t, value)` samples in file order.
#[derive(Debug, Clone, PartialEq)]
pub struct RawSeries {
    pub series_id: String,
    pub samples: Vec<(f64, f64)>,
}

#[derive(Debug, Deserialize)]
struct RawRecord {
    series_id: String,
    t: f64,
    value: f64,
}

/// Parse long-format `series_id,t,value` rows.
pub fn read_raw_series<R: Read>(reader: R) -> Result<Vec<RawSeries>> {
    let mut csv = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(reader);
    let headers = csv
        .headers()
        .map_err(|e| Error::format(Some(1), e.to_string()))?
        .clone();
    if headers.iter().collect::<Vec<_>>() != ["series_id", "t", "value"] {
        return Err(Error::format(Some(1), "expected header `series_id,t,value`"));
    }
    let mut out: Vec<RawSeries> = Vec::new();
    let mut index: HashMap<String, usize> = HashMap::new();
    for (i, rec) in csv.deserialize::<RawRecord>().enumerate() {
        let line = i as u64 + 2;
        let rec = rec.map_err(|e| Error::format(Some(line), e.to_string()))?;
        if !rec.t.is_finite() || !rec.value.is_finite() {
            return Err(Error::format(Some(line), "non-finite sample"));
        }
        let slot = *index.entry(rec.series_id.clone()).or_insert_with(|| {
            out.push(RawSeries {
                series_id: rec.series_id.clone(),
                samples: Vec::new(),
            });
            out.len() - 1
        });
        out[slot].samples.push((rec.t, rec.value));
    }
    for s in &mut out {
        s.samples.sort_by(|a, b| a.0.total_cmp(&b.0));
    }
    Ok(out)
}

pub fn load_raw_series(path: impl AsRef<Path>) -> Result<Vec<RawSeries>> {
    let path = path.as_ref();
    read_raw_series(BufReader::new(open(path)?)).map_err(|e| e.with_path(path))
}

/// Experimental: events are maximal runs of samples strictly above a level.
///
/// The level is `threshold` when given, otherwise the series mean plus one
/// population standard deviation. Each event is described by its peak value,
/// its mean value and its duration.
pub fn detect_threshold_events(series: &RawSeries, threshold: Option<f64>) -> Result<EventSeries> {
    let values: Vec<f64> = series.samples.iter().map(|s| s.1).collect();
    let level = threshold.unwrap_or_else(|| {
        if values.is_empty() {
            return f64::INFINITY;
        }
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
        mean + var.sqrt()
    });

    let mut events = Vec::new();
    let mut run: Option<usize> = None;
    let close = |from: usize, to: usize, events: &mut Vec<Event>| -> Result<()> {
        let slice = &series.samples[from..to];
        let peak = slice.iter().map(|s| s.1).fold(f64::NEG_INFINITY, f64::max);
        let mean = slice.iter().map(|s| s.1).sum::<f64>() / slice.len() as f64;
        let (start, end) = (slice[0].0, slice[slice.len() - 1].0);
        let id = format!("{}#{}", series.series_id, events.len() + 1);
        events.push(Event::new(
            series.series_id.clone(),
            id,
            start,
            end,
            vec![peak, mean, end - start],
        )?);
        Ok(())
    };
    for (i, &(_, v)) in series.samples.iter().enumerate() {
        match (run, v > level) {
            (None, true) => run = Some(i),
            (Some(from), false) => {
                close(from, i, &mut events)?;
                run = None;
            }
            _ => {}
        }
    }
    if let Some(from) = run {
        close(from, series.samples.len(), &mut events)?;
    }
    let mut out = EventSeries::new(series.series_id.clone(), events)?;
    out.timestamps = Some(series.samples.len() as u64);
    Ok(out)
}

// ---------------------------------------------------------------------------
// dendrogram JSON

/// Nested `{node_id, value, children}` / `{node_id, value, object_id}` tree.
pub fn dendrogram_to_json(dendrogram: &Dendrogram) -> Value {
    fn node(d: &Dendrogram, id: usize) -> Value {
        let n = d.node(id);
        match n.kind {
            NodeKind::Leaf { object } => json!({
                "node_id": n.id,
                "value": n.value,
                "object_id": d.ids()[object],
            }),
            NodeKind::Internal { left, right } => json!({
                "node_id": n.id,
                "value": n.value,
                "children": [node(d, left), node(d, right)],
            }),
        }
    }
    node(dendrogram, dendrogram.root().id)
}

// ---------------------------------------------------------------------------
// clusters JSON

#[derive(Debug, Serialize, Deserialize)]
struct ClusterEntry {
    id: String,
    members: Vec<String>,
}

#[derive(Debug, Serialize, Deserialize)]
struct ClustersDocument {
    threshold: CutThreshold,
    clusters: Vec<ClusterEntry>,
}

pub fn clustering_to_json(clustering: &Clustering) -> Value {
    let doc = ClustersDocument {
        threshold: clustering.threshold(),
        clusters: clustering
            .clusters()
            .iter()
            .enumerate()
            .map(|(i, members)| ClusterEntry {
                id: format!("C{}", i + 1),
                members: members.clone(),
            })
            .collect(),
    };
    serde_json::to_value(doc).expect("clustering serializes")
}

/// Parse a clusters document. Source ids are the members in listed order.
pub fn clustering_from_json(text: &str) -> Result<Clustering> {
    let doc: ClustersDocument = serde_json::from_str(text).map_err(|e| {
        Error::format(Some(e.line() as u64), e.to_string())
    })?;
    let clusters: Vec<Vec<String>> = doc.clusters.into_iter().map(|c| c.members).collect();
    let ids = clusters.iter().flatten().cloned().collect();
    Clustering::new(ids, clusters, doc.threshold).map_err(|e| Error::format(None, e.to_string()))
}

pub fn load_clustering(path: impl AsRef<Path>) -> Result<Clustering> {
    let path = path.as_ref();
    let mut text = String::new();
    open(path)?
        .read_to_string(&mut text)
        .map_err(write_err(path))?;
    clustering_from_json(&text).map_err(|e| e.with_path(path))
}

// ---------------------------------------------------------------------------
// detection report JSON

/// Report as JSON with sorted keys and every number rounded to six decimals.
pub fn report_to_json(report: &DetectionReport) -> Value {
    let clusters: Vec<Value> = report
        .clusters
        .iter()
        .map(|c: &ClusterSummary| {
            json!({
                "id": c.id,
                "size": c.size,
                "mean_of": round6(c.mean_of),
                "std_of": round6(c.std_of),
                "outlier_count": c.outlier_count,
            })
        })
        .collect();
    let scores: Vec<Value> = report
        .scores
        .iter()
        .map(|s| {
            json!({
                "object_id": s.object_id,
                "of_neighbors": round6(s.of_neighbors),
                "of_location": round6(s.of_location),
                "of": round6(s.of),
                "is_outlier": report.is_outlier(&s.object_id),
            })
        })
        .collect();
    json!({
        "config": { "dispersion": report.config.dispersion },
        "clusters": clusters,
        "mu_of": round6(report.mu_of),
        "sigma_of": round6(report.sigma_of),
        "ot": round6(report.ot),
        "scores": scores,
        "outliers": report.outliers.iter().collect::<Vec<_>>(),
    })
}

/// Pretty JSON followed by a newline.
pub fn write_json(value: &Value, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut w = create(path)?;
    serde_json::to_writer_pretty(&mut w, value)
        .map_err(|e| Error::Io {
            path: path.to_path_buf(),
            source: e.into(),
        })?;
    w.write_all(b"\n").map_err(write_err(path))?;
    w.flush().map_err(write_err(path))
}
