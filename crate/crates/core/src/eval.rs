//! Scoring a detection trace against labeled anomalies.
//!
//! An anomaly at `t` counts as detected when some detection lands in
//! `[t - K, t + K]`; a detection counts as matched when it lands in some
//! anomaly's window. Undefined ratios are reported as `n/a`.

use std::fmt::{self, Write as _};

use serde::{Serialize, Serializer};
use thiserror::Error;

use crate::detector::Phase;
use crate::trace::TraceRecord;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EvalError {
    #[error("label set is empty, recall is undefined")]
    EmptyLabels,
    #[error("invalid input: {0}")]
    InvalidInput(String),
}

/// Strictly increasing anomaly time indices.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct LabelSet(Vec<usize>);

impl LabelSet {
    pub fn new(indices: Vec<usize>) -> Result<Self, EvalError> {
        if indices.windows(2).any(|w| w[0] >= w[1]) {
            return Err(EvalError::InvalidInput(
                "labels must be strictly increasing".into(),
            ));
        }
        Ok(Self(indices))
    }

    pub fn indices(&self) -> &[usize] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn contains(&self, t: usize) -> bool {
        self.0.binary_search(&t).is_ok()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum MatchMode {
    /// Every flagged point is scored on its own.
    Point,
    /// Runs of consecutive flagged points are merged into one event.
    Event,
}

impl std::str::FromStr for MatchMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "point" => Ok(Self::Point),
            "event" => Ok(Self::Event),
            other => Err(format!("unknown match mode {other:?} (expected point or event)")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct EvalConfig {
    /// Half-width of the matching window, in time points.
    pub k: usize,
    pub mode: MatchMode,
    /// Accept an empty label set (recall is then `n/a`).
    pub allow_empty_labels: bool,
}

impl Default for EvalConfig {
    fn default() -> Self {
        Self {
            k: 0,
            mode: MatchMode::Point,
            allow_empty_labels: false,
        }
    }
}

fn na<S: Serializer>(v: &Option<f64>, s: S) -> Result<S::Ok, S::Error> {
    match v {
        Some(x) => s.serialize_f64(*x),
        None => s.serialize_str("n/a"),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RetrainingRatio {
    pub steps: usize,
    pub retrained1: usize,
    pub retrained2: Option<usize>,
    /// Steps where either detector retrained.
    pub retrained_any: usize,
    pub detector1: f64,
    pub detector2: Option<f64>,
    pub combined: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TraceStats {
    pub retraining: RetrainingRatio,
    pub mean_detection_secs: f64,
    pub std_detection_secs: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Metrics {
    pub k: usize,
    pub mode: MatchMode,
    pub labels: usize,
    /// Scored detection units: points, or events in event mode.
    pub detections: usize,
    pub tp_anomalies: usize,
    pub missed_anomalies: usize,
    pub matched_detections: usize,
    pub unmatched_detections: usize,
    #[serde(serialize_with = "na")]
    pub precision: Option<f64>,
    #[serde(serialize_with = "na")]
    pub recall: Option<f64>,
    #[serde(serialize_with = "na")]
    pub fscore: Option<f64>,
    pub stats: Option<TraceStats>,
}

/// Harmonic mean of precision and recall; `None` when both are zero.
pub fn fscore(precision: f64, recall: f64) -> Result<Option<f64>, EvalError> {
    for (name, v) in [("precision", precision), ("recall", recall)] {
        if !(0.0..=1.0).contains(&v) {
            return Err(EvalError::InvalidInput(format!("{name} {v} outside [0, 1]")));
        }
    }
    let sum = precision + recall;
    Ok((sum > 0.0).then(|| 2.0 * precision * recall / sum))
}

/// Merges consecutive indices into inclusive `(start, end)` runs.
fn events(points: &[usize]) -> Vec<(usize, usize)> {
    let mut out: Vec<(usize, usize)> = Vec::new();
    for &p in points {
        match out.last_mut() {
            Some((_, end)) if *end + 1 == p => *end = p,
            _ => out.push((p, p)),
        }
    }
    out
}

/// Does any label fall within `k` of the inclusive span `[start, end]`?
fn near_label(labels: &[usize], start: usize, end: usize, k: usize) -> bool {
    let lo = start.saturating_sub(k);
    let i = labels.partition_point(|&a| a < lo);
    labels.get(i).is_some_and(|&a| a <= end + k)
}

/// Scores detection time points against labels.
pub fn score_detections(detections: &[usize], labels: &LabelSet, cfg: &EvalConfig) -> Result<Metrics, EvalError> {
    if detections.windows(2).any(|w| w[0] >= w[1]) {
        return Err(EvalError::InvalidInput(
            "detections must be strictly increasing".into(),
        ));
    }
    if labels.is_empty() && !cfg.allow_empty_labels {
        return Err(EvalError::EmptyLabels);
    }
    let k = cfg.k;
    let tp_anomalies = labels
        .indices()
        .iter()
        .filter(|&&a| {
            let lo = a.saturating_sub(k);
            let i = detections.partition_point(|&d| d < lo);
            detections.get(i).is_some_and(|&d| d <= a + k)
        })
        .count();

    let units: Vec<(usize, usize)> = match cfg.mode {
        MatchMode::Point => detections.iter().map(|&d| (d, d)).collect(),
        MatchMode::Event => events(detections),
    };
    let matched = units
        .iter()
        .filter(|&&(s, e)| near_label(labels.indices(), s, e, k))
        .count();
    let unmatched = units.len() - matched;

    let recall = (!labels.is_empty()).then(|| tp_anomalies as f64 / labels.len() as f64);
    let precision = (!units.is_empty()).then(|| matched as f64 / units.len() as f64);
    let f = match (precision, recall) {
        (Some(p), Some(r)) => fscore(p, r)?,
        _ => None,
    };
    Ok(Metrics {
        k,
        mode: cfg.mode,
        labels: labels.len(),
        detections: units.len(),
        tp_anomalies,
        missed_anomalies: labels.len() - tp_anomalies,
        matched_detections: matched,
        unmatched_detections: unmatched,
        precision,
        recall,
        fscore: f,
        stats: None,
    })
}

/// Scores a trace: anomaly-flagged records are the detections.
pub fn evaluate(trace: &[TraceRecord], labels: &LabelSet, cfg: &EvalConfig) -> Result<Metrics, EvalError> {
    if trace.windows(2).any(|w| w[0].t >= w[1].t) {
        return Err(EvalError::InvalidInput(
            "trace time indices must be strictly increasing".into(),
        ));
    }
    let detections: Vec<usize> = trace.iter().filter(|r| r.is_detection()).map(|r| r.t).collect();
    let mut metrics = score_detections(&detections, labels, cfg)?;
    metrics.stats = trace_stats(trace).ok();
    Ok(metrics)
}

/// Retraining ratios and per-step time over the post-probation part of a trace.
pub fn trace_stats(trace: &[TraceRecord]) -> Result<TraceStats, EvalError> {
    let steps: Vec<&TraceRecord> = trace.iter().filter(|r| r.phase == Phase::Detecting).collect();
    if steps.is_empty() {
        return Err(EvalError::InvalidInput(
            "trace has no post-probation steps".into(),
        ));
    }
    let n = steps.len();
    let flag = |v: Option<bool>| v == Some(true);
    let retrained1 = steps.iter().filter(|r| flag(r.detector1.retrained)).count();
    let dual = steps.iter().any(|r| r.detector2.is_some());
    let retrained2 = dual.then(|| {
        steps
            .iter()
            .filter(|r| r.detector2.is_some_and(|d| flag(d.retrained)))
            .count()
    });
    let retrained_any = steps
        .iter()
        .filter(|r| flag(r.detector1.retrained) || r.detector2.is_some_and(|d| flag(d.retrained)))
        .count();
    let ratio = |c: usize| c as f64 / n as f64;

    let secs: Vec<f64> = steps.iter().map(|r| r.elapsed_ms / 1e3).collect();
    let mean = secs.iter().sum::<f64>() / n as f64;
    let var = secs.iter().map(|s| (s - mean).powi(2)).sum::<f64>() / n as f64;
    Ok(TraceStats {
        retraining: RetrainingRatio {
            steps: n,
            retrained1,
            retrained2,
            retrained_any,
            detector1: ratio(retrained1),
            detector2: retrained2.map(ratio),
            combined: ratio(retrained_any),
        },
        mean_detection_secs: mean,
        std_detection_secs: var.sqrt(),
    })
}

struct Na(Option<f64>);

impl fmt::Display for Na {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.0 {
            Some(v) => write!(f, "{v:.4}"),
            None => f.pad("n/a"),
        }
    }
}

impl Metrics {
    /// Aligned two-column text rendering.
    pub fn to_table(&self) -> String {
        let mode = match self.mode {
            MatchMode::Point => "point",
            MatchMode::Event => "event",
        };
        let mut rows: Vec<(&str, String)> = vec![
            ("K", self.k.to_string()),
            ("match", mode.to_string()),
            ("labels", self.labels.to_string()),
            ("detections", self.detections.to_string()),
            ("detected anomalies", self.tp_anomalies.to_string()),
            ("missed anomalies", self.missed_anomalies.to_string()),
            ("matched detections", self.matched_detections.to_string()),
            ("unmatched detections", self.unmatched_detections.to_string()),
            ("precision", Na(self.precision).to_string()),
            ("recall", Na(self.recall).to_string()),
            ("F-score", Na(self.fscore).to_string()),
        ];
        if let Some(s) = &self.stats {
            let r = &s.retraining;
            rows.push(("steps", r.steps.to_string()));
            rows.push((
                "retraining ratio 1",
                format!("{:.2}% ({}/{})", 100.0 * r.detector1, r.retrained1, r.steps),
            ));
            if let (Some(ratio), Some(count)) = (r.detector2, r.retrained2) {
                rows.push((
                    "retraining ratio 2",
                    format!("{:.2}% ({}/{})", 100.0 * ratio, count, r.steps),
                ));
            }
            rows.push((
                "retraining ratio",
                format!("{:.2}% ({}/{})", 100.0 * r.combined, r.retrained_any, r.steps),
            ));
            rows.push(("mean step time", format!("{:.6} s", s.mean_detection_secs)));
            rows.push(("std step time", format!("{:.6} s", s.std_detection_secs)));
        }
        let width = rows.iter().map(|(k, _)| k.len()).max().unwrap_or(0);
        let mut out = String::new();
        for (k, v) in rows {
            let _ = writeln!(out, "{k:<width$}  {v:>12}");
        }
        out
    }
}
