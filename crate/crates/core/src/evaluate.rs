//! Detection-to-truth matching and precision / recall / F1 reporting.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::Serialize;

use crate::error::Result;
use crate::ingest::MflRecord;
use crate::localize::Detection;
use crate::pipeline::{Method, Pipeline};
use crate::synth::GroundTruthFlaw;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct Counts {
    pub tp: usize,
    pub fp: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
}

impl Counts {
    pub fn new(tp: usize, fp: usize, fn_: usize) -> Self {
        Self { tp, fp, fn_ }
    }

    pub fn metrics(&self) -> Metrics {
        score(self.tp, self.fp, self.fn_)
    }
}

impl std::ops::AddAssign for Counts {
    fn add_assign(&mut self, rhs: Self) {
        self.tp += rhs.tp;
        self.fp += rhs.fp;
        self.fn_ += rhs.fn_;
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Metrics {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

/// Precision, recall and their harmonic mean. Empty denominators count as 1.
pub fn score(tp: usize, fp: usize, fn_: usize) -> Metrics {
    let ratio = |num: usize, den: usize| if den == 0 { 1.0 } else { num as f64 / den as f64 };
    let precision = ratio(tp, tp + fp);
    let recall = ratio(tp, tp + fn_);
    let f1 = if precision + recall == 0.0 {
        0.0
    } else {
        2.0 * precision * recall / (precision + recall)
    };
    Metrics {
        precision,
        recall,
        f1,
    }
}

/// Greedy one-to-one matching along the rope axis.
///
/// A detection is a candidate for a truth when its axial extent in meters
/// overlaps the truth interval widened by `kernel_px / f_spatial` on each side.
/// Candidate pairs are taken closest-center first.
pub fn match_detections(
    dets: &[Detection],
    truths: &[GroundTruthFlaw],
    f_spatial: f64,
    kernel_px: usize,
) -> Counts {
    let tolerance = kernel_px as f64 / f_spatial;
    let mut pairs = Vec::new();
    for (di, d) in dets.iter().enumerate() {
        // axial_m is the box center, so the box spans half its pixel width either side
        let half = 0.5 * (d.axial_end() - d.axial_start()) as f64 / f_spatial;
        let (start, end) = (d.axial_position_m - half, d.axial_position_m + half);
        for (ti, t) in truths.iter().enumerate() {
            let (lo, hi) = t.interval_m();
            if start <= hi + tolerance && end >= lo - tolerance {
                pairs.push(((d.axial_position_m - t.axial_position_m).abs(), di, ti));
            }
        }
    }
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2)));
    let mut det_used = vec![false; dets.len()];
    let mut truth_used = vec![false; truths.len()];
    let mut tp = 0;
    for (_, di, ti) in pairs {
        if !det_used[di] && !truth_used[ti] {
            det_used[di] = true;
            truth_used[ti] = true;
            tp += 1;
        }
    }
    Counts::new(tp, dets.len() - tp, truths.len() - tp)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScenarioReport {
    #[serde(flatten)]
    pub counts: Counts,
    #[serde(flatten)]
    pub metrics: Metrics,
}

impl From<Counts> for ScenarioReport {
    fn from(counts: Counts) -> Self {
        Self {
            counts,
            metrics: counts.metrics(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EvalReport {
    pub method: Method,
    #[serde(flatten)]
    pub total: ScenarioReport,
    pub per_scenario: BTreeMap<String, ScenarioReport>,
}

impl EvalReport {
    /// Builds a report from per-scenario counts; the total is their sum.
    pub fn from_counts(method: Method, per_scenario: BTreeMap<String, Counts>) -> Self {
        let mut total = Counts::default();
        for c in per_scenario.values() {
            total += *c;
        }
        Self {
            method,
            total: total.into(),
            per_scenario: per_scenario.into_iter().map(|(k, v)| (k, v.into())).collect(),
        }
    }

    pub fn metrics(&self) -> Metrics {
        self.total.metrics
    }

    pub fn scenario(&self, name: &str) -> Option<&ScenarioReport> {
        self.per_scenario.get(name)
    }
}

/// One evaluation record with its ground truth.
#[derive(Debug, Clone)]
pub struct LabeledRecord {
    pub scenario: String,
    pub record: MflRecord<f64>,
    pub truths: Vec<GroundTruthFlaw>,
}

/// Runs one pipeline variant over a dataset and aggregates the matches.
pub fn run_ablation(pipeline: &Pipeline, dataset: &[LabeledRecord], method: Method) -> Result<EvalReport> {
    let mut per: BTreeMap<String, Counts> = BTreeMap::new();
    for item in dataset {
        let out = pipeline.detect(&item.record, method)?;
        let counts = match_detections(&out.detections, &item.truths, out.f_spatial, out.kernel_size);
        *per.entry(item.scenario.clone()).or_default() += counts;
    }
    Ok(EvalReport::from_counts(method, per))
}

fn pct(x: f64) -> String {
    format!("{:.2}%", 100.0 * x)
}

/// Plain-text comparison table, one column per report.
pub fn format_table(title: &str, columns: &[(String, Counts)]) -> String {
    let mut rows: Vec<(String, Vec<String>)> = vec![
        ("TP".into(), columns.iter().map(|(_, c)| c.tp.to_string()).collect()),
        ("FP".into(), columns.iter().map(|(_, c)| c.fp.to_string()).collect()),
        ("FN".into(), columns.iter().map(|(_, c)| c.fn_.to_string()).collect()),
    ];
    let metrics: Vec<Metrics> = columns.iter().map(|(_, c)| c.metrics()).collect();
    rows.push(("Precision".into(), metrics.iter().map(|m| pct(m.precision)).collect()));
    rows.push(("Recall".into(), metrics.iter().map(|m| pct(m.recall)).collect()));
    rows.push(("F1 score".into(), metrics.iter().map(|m| pct(m.f1)).collect()));

    let label_width = rows.iter().map(|(l, _)| l.len()).max().unwrap_or(0).max("Metric".len());
    let widths: Vec<usize> = columns
        .iter()
        .enumerate()
        .map(|(i, (name, _))| rows.iter().map(|(_, v)| v[i].len()).max().unwrap_or(0).max(name.len()))
        .collect();

    let mut out = String::new();
    let _ = writeln!(out, "{title}");
    let _ = write!(out, "{:<label_width$}", "Metric");
    for ((name, _), w) in columns.iter().zip(&widths) {
        let _ = write!(out, "  {name:>w$}");
    }
    out.push('\n');
    for (label, values) in rows {
        let _ = write!(out, "{label:<label_width$}");
        for (v, w) in values.iter().zip(&widths) {
            let _ = write!(out, "  {v:>w$}");
        }
        out.push('\n');
    }
    out
}
