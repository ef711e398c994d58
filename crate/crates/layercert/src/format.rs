//! Network JSON, points CSV and benchmark record files.

use std::io::{Read, Write};
use std::path::Path;

use layercert_core::{Layer, NetworkError, ReluNetwork};
use serde::{Deserialize, Serialize};

#[derive(Debug, thiserror::Error)]
pub enum FormatError {
    #[error("io error")]
    Io(#[from] std::io::Error),
    #[error("malformed json")]
    Json(#[from] serde_json::Error),
    #[error("invalid network: {0}")]
    Network(NetworkError),
    #[error("layer {0} has a softmax activation; strip it, it does not change the decision boundaries")]
    Softmax(usize),
    #[error("layer {layer}: unsupported activation {name:?}")]
    Activation { layer: usize, name: String },
    #[error("malformed csv")]
    Csv(#[from] csv::Error),
    #[error("points file row {row}: {msg}")]
    Points { row: usize, msg: String },
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct LayerJson {
    weights: Vec<Vec<f64>>,
    bias: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    activation: Option<String>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct NetworkJson {
    input_dim: usize,
    layers: Vec<LayerJson>,
}

pub fn parse_network(text: &str) -> Result<ReluNetwork, FormatError> {
    let raw: NetworkJson = serde_json::from_str(text)?;
    let last = raw.layers.len().saturating_sub(1);
    let mut layers = Vec::with_capacity(raw.layers.len());
    for (i, l) in raw.layers.iter().enumerate() {
        if let Some(name) = &l.activation {
            let name = name.to_ascii_lowercase();
            let ok = if i == last { matches!(name.as_str(), "linear" | "none" | "identity") } else { name == "relu" };
            if name == "softmax" {
                return Err(FormatError::Softmax(i));
            }
            if !ok {
                return Err(FormatError::Activation { layer: i, name });
            }
        }
        layers.push(
            Layer::from_rows(&l.weights, l.bias.clone())
                .map_err(|e| match e {
                    NetworkError::RaggedWeights { .. } => NetworkError::RaggedWeights { layer: i },
                    NetworkError::DimensionMismatch { expected, found, .. } => {
                        NetworkError::DimensionMismatch { layer: i, expected, found }
                    }
                    other => other,
                })
                .map_err(FormatError::Network)?,
        );
    }
    ReluNetwork::new(raw.input_dim, layers).map_err(FormatError::Network)
}

pub fn read_network(mut source: impl Read) -> Result<ReluNetwork, FormatError> {
    let mut text = String::new();
    source.read_to_string(&mut text)?;
    parse_network(&text)
}

pub fn load_network(path: &Path) -> Result<ReluNetwork, FormatError> {
    read_network(std::fs::File::open(path)?)
}

pub fn network_to_json(net: &ReluNetwork) -> String {
    let layers = net
        .layers()
        .iter()
        .map(|l| LayerJson {
            weights: (0..l.rows()).map(|r| l.row(r).to_vec()).collect(),
            bias: l.bias().to_vec(),
            activation: None,
        })
        .collect();
    let raw = NetworkJson { input_dim: net.input_dim(), layers };
    serde_json::to_string_pretty(&raw).expect("plain data serializes")
}

/// One input vector, with the label column if the file had one.
#[derive(Debug, Clone, PartialEq)]
pub struct Point {
    pub x: Vec<f64>,
    pub label: Option<usize>,
}

/// Points CSV without a header: `dim` values per row, optionally followed by
/// an integer label.
pub fn read_points(source: impl Read, dim: usize) -> Result<Vec<Point>, FormatError> {
    let mut reader =
        csv::ReaderBuilder::new().has_headers(false).trim(csv::Trim::All).flexible(true).from_reader(source);
    let mut out = Vec::new();
    for (row, rec) in reader.records().enumerate() {
        let rec = rec?;
        if rec.iter().all(|f| f.is_empty()) {
            continue;
        }
        let fields: Vec<&str> = rec.iter().collect();
        let label = match fields.len() {
            n if n == dim => None,
            n if n == dim + 1 => {
                let s = fields[dim];
                let v: f64 = s.parse().map_err(|_| FormatError::Points { row, msg: format!("bad label {s:?}") })?;
                if v < 0.0 || v.fract() != 0.0 {
                    return Err(FormatError::Points { row, msg: format!("bad label {s:?}") });
                }
                Some(v as usize)
            }
            n => {
                return Err(FormatError::Points {
                    row,
                    msg: format!("expected {dim} or {} fields, found {n}", dim + 1),
                })
            }
        };
        let x = fields[..dim]
            .iter()
            .map(|s| s.parse::<f64>().map_err(|_| FormatError::Points { row, msg: format!("bad number {s:?}") }))
            .collect::<Result<Vec<f64>, _>>()?;
        if x.iter().any(|v| !v.is_finite()) {
            return Err(FormatError::Points { row, msg: "non-finite value".into() });
        }
        out.push(Point { x, label });
    }
    Ok(out)
}

pub fn load_points(path: &Path, dim: usize) -> Result<Vec<Point>, FormatError> {
    read_points(std::fs::File::open(path)?, dim)
}

pub fn write_points(mut out: impl Write, points: &[Point]) -> std::io::Result<()> {
    for p in points {
        let mut line: Vec<String> = p.x.iter().map(|v| format!("{v}")).collect();
        if let Some(l) = p.label {
            line.push(l.to_string());
        }
        writeln!(out, "{}", line.join(","))?;
    }
    Ok(())
}

/// One verification query's outcome; the CSV columns are these fields in order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchRecord {
    pub input_id: usize,
    pub method: String,
    pub norm: String,
    /// `exact`, `certified`, `timeout` or `numerical_failure`.
    pub status: String,
    /// Distance, certified radius or lower bound, according to `status`.
    pub value: f64,
    pub priority_programs: usize,
    pub decision_programs: usize,
    pub feasibility_programs: usize,
    pub patterns_popped: usize,
    pub patterns_pruned: usize,
    pub wall_time: f64,
}

impl BenchRecord {
    pub fn programs(&self) -> usize {
        self.priority_programs + self.decision_programs + self.feasibility_programs
    }

    pub fn solved(&self) -> bool {
        self.status == "exact" || self.status == "certified"
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RecordFormat {
    Csv,
    Json,
}

pub fn write_records(out: impl Write, records: &[BenchRecord], format: RecordFormat) -> Result<(), FormatError> {
    match format {
        RecordFormat::Csv => {
            let mut w = csv::Writer::from_writer(out);
            for r in records {
                w.serialize(r)?;
            }
            w.flush()?;
        }
        RecordFormat::Json => {
            let mut out = out;
            serde_json::to_writer_pretty(&mut out, records)?;
            writeln!(out)?;
        }
    }
    Ok(())
}

/// Reads records written by [`write_records`] in either format.
pub fn read_records(mut source: impl Read) -> Result<Vec<BenchRecord>, FormatError> {
    let mut text = String::new();
    source.read_to_string(&mut text)?;
    if text.trim_start().starts_with('[') {
        return Ok(serde_json::from_str(&text)?);
    }
    let mut reader = csv::Reader::from_reader(text.as_bytes());
    Ok(reader.deserialize().collect::<Result<Vec<BenchRecord>, _>>()?)
}
