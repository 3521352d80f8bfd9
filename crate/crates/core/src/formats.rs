//! On-disk formats: binary and CSV records, PGM stage dumps, JSON outputs.
//!
//! Binary record layout (little endian):
//!
//! ```text
//! "MFL1" | u32 M | u32 N | f64 sampling_rate_hz | f64 speed_mps | M*N f64 row-major
//! ```
//!
//! CSV records start with `# sampling_rate_hz=<f>, speed_mps=<v>, channels=<N>`
//! followed by one line of `N` comma-separated values per axial sample.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{MflError, Result};
use crate::evaluate::EvalReport;
use crate::ingest::MflRecord;
use crate::localize::Detection;
use crate::matrix::Matrix;
use crate::pipeline::{Method, RecordDetections};
use crate::scalar::Real;
use crate::ssr::SsrContext;
use crate::synth::GroundTruthFlaw;

pub const MAGIC: &[u8; 4] = b"MFL1";
pub const SCHEMA_VERSION: u32 = 1;
const HEADER_LEN: usize = 4 + 4 + 4 + 8 + 8;

pub fn encode_binary(record: &MflRecord<f64>) -> Vec<u8> {
    let (m, n) = record.samples.dims();
    let mut out = Vec::with_capacity(HEADER_LEN + 8 * m * n);
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&(m as u32).to_le_bytes());
    out.extend_from_slice(&(n as u32).to_le_bytes());
    out.extend_from_slice(&record.sampling_rate_hz.to_le_bytes());
    out.extend_from_slice(&record.inspection_speed_mps.to_le_bytes());
    for v in record.samples.as_slice() {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out
}

pub fn decode_binary(bytes: &[u8], label: &str) -> Result<MflRecord<f64>> {
    if bytes.len() < HEADER_LEN || &bytes[..4] != MAGIC {
        return Err(MflError::Format("missing MFL1 magic".into()));
    }
    let u32_at = |o: usize| u32::from_le_bytes(bytes[o..o + 4].try_into().expect("4 bytes")) as usize;
    let f64_at = |o: usize| f64::from_le_bytes(bytes[o..o + 8].try_into().expect("8 bytes"));
    let (m, n) = (u32_at(4), u32_at(8));
    let rate = f64_at(12);
    let speed = f64_at(20);
    let expected = m
        .checked_mul(n)
        .and_then(|c| c.checked_mul(8))
        .and_then(|c| c.checked_add(HEADER_LEN))
        .ok_or_else(|| MflError::Format("record dimensions overflow".into()))?;
    if bytes.len() != expected {
        return Err(MflError::Format(format!(
            "{m}x{n} record needs {expected} bytes, file has {}",
            bytes.len()
        )));
    }
    let data = bytes[HEADER_LEN..].chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes"))).collect();
    MflRecord::new(Matrix::from_vec(m, n, data)?, rate, speed, label)
}

pub fn encode_csv(record: &MflRecord<f64>) -> String {
    let mut out = format!(
        "# sampling_rate_hz={}, speed_mps={}, channels={}\n",
        record.sampling_rate_hz,
        record.inspection_speed_mps,
        record.channel_count()
    );
    for m in 0..record.sample_count() {
        let row: Vec<String> = record.samples.row(m).iter().map(|v| v.to_string()).collect();
        out.push_str(&row.join(","));
        out.push('\n');
    }
    out
}

pub fn parse_csv(text: &str, label: &str) -> Result<MflRecord<f64>> {
    let mut lines = text.lines().enumerate();
    let (_, header) = lines.next().ok_or(MflError::Parse {
        line: 1,
        message: "empty file".into(),
    })?;
    let header = header.trim().strip_prefix('#').ok_or(MflError::Parse {
        line: 1,
        message: "expected `# sampling_rate_hz=..., speed_mps=..., channels=...` header".into(),
    })?;
    let (mut rate, mut speed, mut channels) = (None, None, None);
    for item in header.split(',') {
        let (key, value) = item.split_once('=').ok_or(MflError::Parse {
            line: 1,
            message: format!("malformed header item `{}`", item.trim()),
        })?;
        let bad = |what: &str| MflError::Parse {
            line: 1,
            message: format!("invalid {what} `{}`", value.trim()),
        };
        match key.trim() {
            "sampling_rate_hz" => rate = Some(value.trim().parse::<f64>().map_err(|_| bad("sampling rate"))?),
            "speed_mps" => speed = Some(value.trim().parse::<f64>().map_err(|_| bad("speed"))?),
            "channels" => channels = Some(value.trim().parse::<usize>().map_err(|_| bad("channel count"))?),
            other => {
                return Err(MflError::Parse {
                    line: 1,
                    message: format!("unknown header key `{other}`"),
                })
            }
        }
    }
    let missing = |k: &str| MflError::Parse {
        line: 1,
        message: format!("header lacks `{k}`"),
    };
    let rate = rate.ok_or_else(|| missing("sampling_rate_hz"))?;
    let speed = speed.ok_or_else(|| missing("speed_mps"))?;
    let channels = channels.ok_or_else(|| missing("channels"))?;

    let mut data = Vec::new();
    let mut rows = 0;
    for (i, line) in lines {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let before = data.len();
        for field in line.split(',') {
            let v = field.trim().parse::<f64>().map_err(|_| MflError::Parse {
                line: i + 1,
                message: format!("invalid number `{}`", field.trim()),
            })?;
            data.push(v);
        }
        if data.len() - before != channels {
            return Err(MflError::Parse {
                line: i + 1,
                message: format!("expected {channels} values, found {}", data.len() - before),
            });
        }
        rows += 1;
    }
    MflRecord::new(Matrix::from_vec(rows, channels, data)?, rate, speed, label)
}

/// Reads a record, picking binary or CSV from the leading bytes.
pub fn read_record(path: &Path) -> Result<MflRecord<f64>> {
    let bytes = fs::read(path)?;
    let label = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    if bytes.starts_with(MAGIC) {
        decode_binary(&bytes, &label)
    } else {
        let text = String::from_utf8(bytes).map_err(|_| MflError::Format("record is neither MFL1 nor UTF-8 CSV".into()))?;
        parse_csv(&text, &label)
    }
}

pub fn write_binary(path: &Path, record: &MflRecord<f64>) -> Result<()> {
    fs::write(path, encode_binary(record))?;
    Ok(())
}

/// 8-bit binary PGM of values in `[-1, 1]`: `round(255 (v + 1) / 2)`.
pub fn encode_pgm<T: Real>(image: &Matrix<T>) -> Vec<u8> {
    let (rows, cols) = image.dims();
    let mut out = format!("P5\n{cols} {rows}\n255\n").into_bytes();
    out.extend(
        image
            .as_slice()
            .iter()
            .map(|v| (255.0 * (v.as_f64().clamp(-1.0, 1.0) + 1.0) / 2.0).round() as u8),
    );
    out
}

/// Min-max stretches an image onto `[-1, 1]` for display.
pub fn display_scaled<T: Real>(image: &Matrix<T>) -> Matrix<T> {
    match image.min_max() {
        Some((lo, hi)) if hi > lo => {
            let two = T::lit(2.0);
            image.map(|v| two * (v - lo) / (hi - lo) - T::one())
        }
        _ => image.map(|_| -T::one()),
    }
}

pub fn write_pgm<T: Real>(path: &Path, image: &Matrix<T>) -> Result<()> {
    fs::write(path, encode_pgm(image))?;
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DetectionsFile {
    pub schema_version: u32,
    pub record: String,
    pub f_spatial: f64,
    #[serde(rename = "K_a")]
    pub kernel_size: usize,
    pub method: String,
    pub detections: Vec<Detection>,
}

impl From<&RecordDetections> for DetectionsFile {
    fn from(r: &RecordDetections) -> Self {
        Self {
            schema_version: SCHEMA_VERSION,
            record: r.record.clone(),
            f_spatial: r.f_spatial,
            kernel_size: r.kernel_size,
            method: r.method.as_str().to_string(),
            detections: r.detections.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TruthFile {
    pub schema_version: u32,
    pub record: String,
    pub flaws: Vec<GroundTruthFlaw>,
}

impl TruthFile {
    pub fn new(record: impl Into<String>, flaws: Vec<GroundTruthFlaw>) -> Self {
        Self {
            schema_version: SCHEMA_VERSION,
            record: record.into(),
            flaws,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct InspectReport {
    pub schema_version: u32,
    pub record: String,
    pub samples: usize,
    pub channels: usize,
    pub segments: usize,
    #[serde(flatten)]
    pub ssr: SsrContext,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EvalFile {
    pub schema_version: u32,
    pub reports: Vec<EvalReport>,
}

pub fn method_label(m: Method) -> &'static str {
    match m {
        Method::SingleScale => "Single-scale",
        Method::UnweightedMultiscale => "Unweighted multi-scale",
        Method::Adaptive => "Adaptive",
    }
}

/// Pretty JSON with a trailing newline.
pub fn to_json<S: Serialize>(value: &S) -> Result<String> {
    let mut s = serde_json::to_string_pretty(value)?;
    let _ = writeln!(s);
    Ok(s)
}
