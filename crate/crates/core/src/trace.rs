//! JSON Lines trace records: one object per processed time point.
//!
//! Field order is fixed: `t, timestamp, value, phase, predicted1, aare1,
//! thd1, abnormal1, retrained1`, then the same five fields suffixed `2` in
//! dual mode, then `anomaly, elapsed_ms`. Fields without a value (probation
//! steps, missing timestamps) are written as `null`.

use std::io::{BufRead, BufReader, Read, Write};

use serde::ser::SerializeMap;
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

use crate::detector::{Phase, StepOutcome, StepVerdict};
use crate::ingest::Timestamp;

#[derive(Debug, Error)]
pub enum TraceError {
    #[error("trace line {line}: {source}")]
    Json {
        line: u64,
        #[source]
        source: serde_json::Error,
    },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// One detector's view of a time point.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct DetectorFields {
    pub predicted: Option<f64>,
    pub aare: Option<f64>,
    pub thd: Option<f64>,
    pub abnormal: Option<bool>,
    pub retrained: Option<bool>,
}

impl From<&StepVerdict> for DetectorFields {
    fn from(v: &StepVerdict) -> Self {
        Self {
            predicted: Some(v.predicted),
            aare: Some(v.aare),
            thd: Some(v.threshold),
            abnormal: Some(v.is_abnormal),
            retrained: Some(v.retrained),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TraceRecord {
    pub t: usize,
    pub timestamp: Option<Timestamp>,
    pub value: f64,
    pub phase: Phase,
    pub detector1: DetectorFields,
    /// Absent in single-detector traces.
    pub detector2: Option<DetectorFields>,
    /// `None` during probation.
    pub anomaly: Option<bool>,
    pub elapsed_ms: f64,
}

impl TraceRecord {
    pub fn from_step(step: &StepOutcome, timestamp: Option<Timestamp>, dual: bool) -> Self {
        let elapsed_ms = step.elapsed().as_secs_f64() * 1e3;
        match step {
            StepOutcome::Probation(p) => {
                let shared = DetectorFields {
                    predicted: p.predicted,
                    aare: p.aare,
                    ..DetectorFields::default()
                };
                Self {
                    t: p.t,
                    timestamp,
                    value: p.value,
                    phase: Phase::Probation,
                    detector1: shared,
                    detector2: dual.then_some(shared),
                    anomaly: None,
                    elapsed_ms,
                }
            }
            StepOutcome::Verdict(f) => Self {
                t: f.t,
                timestamp,
                value: f.value,
                phase: Phase::Detecting,
                detector1: (&f.detector1).into(),
                detector2: f.detector2.as_ref().map(Into::into),
                anomaly: Some(f.anomaly),
                elapsed_ms,
            },
        }
    }

    pub fn is_detection(&self) -> bool {
        self.anomaly == Some(true)
    }
}

impl Serialize for TraceRecord {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        let len = if self.detector2.is_some() { 16 } else { 11 };
        let mut m = s.serialize_map(Some(len))?;
        m.serialize_entry("t", &self.t)?;
        m.serialize_entry("timestamp", &self.timestamp)?;
        m.serialize_entry("value", &self.value)?;
        m.serialize_entry("phase", &self.phase)?;
        let detectors = std::iter::once(("1", &self.detector1)).chain(self.detector2.as_ref().map(|d| ("2", d)));
        for (suffix, d) in detectors {
            m.serialize_entry(&format!("predicted{suffix}"), &d.predicted)?;
            m.serialize_entry(&format!("aare{suffix}"), &d.aare)?;
            m.serialize_entry(&format!("thd{suffix}"), &d.thd)?;
            m.serialize_entry(&format!("abnormal{suffix}"), &d.abnormal)?;
            m.serialize_entry(&format!("retrained{suffix}"), &d.retrained)?;
        }
        m.serialize_entry("anomaly", &self.anomaly)?;
        m.serialize_entry("elapsed_ms", &self.elapsed_ms)?;
        m.end()
    }
}

/// Distinguishes a missing key (`None`) from an explicit `null` (`Some(None)`).
fn present<'de, D, T>(d: D) -> Result<Option<Option<T>>, D::Error>
where
    D: Deserializer<'de>,
    T: Deserialize<'de>,
{
    Option::<T>::deserialize(d).map(Some)
}

#[derive(Deserialize)]
struct RawRecord {
    t: usize,
    #[serde(default)]
    timestamp: Option<Timestamp>,
    value: f64,
    phase: Phase,
    predicted1: Option<f64>,
    aare1: Option<f64>,
    thd1: Option<f64>,
    abnormal1: Option<bool>,
    retrained1: Option<bool>,
    #[serde(default, deserialize_with = "present")]
    predicted2: Option<Option<f64>>,
    #[serde(default, deserialize_with = "present")]
    aare2: Option<Option<f64>>,
    #[serde(default, deserialize_with = "present")]
    thd2: Option<Option<f64>>,
    #[serde(default, deserialize_with = "present")]
    abnormal2: Option<Option<bool>>,
    #[serde(default, deserialize_with = "present")]
    retrained2: Option<Option<bool>>,
    anomaly: Option<bool>,
    elapsed_ms: f64,
}

impl<'de> Deserialize<'de> for TraceRecord {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let r = RawRecord::deserialize(d)?;
        let dual = r.predicted2.is_some()
            || r.aare2.is_some()
            || r.thd2.is_some()
            || r.abnormal2.is_some()
            || r.retrained2.is_some();
        Ok(Self {
            t: r.t,
            timestamp: r.timestamp,
            value: r.value,
            phase: r.phase,
            detector1: DetectorFields {
                predicted: r.predicted1,
                aare: r.aare1,
                thd: r.thd1,
                abnormal: r.abnormal1,
                retrained: r.retrained1,
            },
            detector2: dual.then(|| DetectorFields {
                predicted: r.predicted2.flatten(),
                aare: r.aare2.flatten(),
                thd: r.thd2.flatten(),
                abnormal: r.abnormal2.flatten(),
                retrained: r.retrained2.flatten(),
            }),
            anomaly: r.anomaly,
            elapsed_ms: r.elapsed_ms,
        })
    }
}

pub fn write_record<W: Write>(mut out: W, record: &TraceRecord) -> Result<(), TraceError> {
    serde_json::to_writer(&mut out, record).map_err(|source| TraceError::Json { line: 0, source })?;
    out.write_all(b"\n")?;
    Ok(())
}

/// Reads a JSON Lines trace, skipping blank lines.
pub fn read_trace<R: Read>(input: R) -> Result<Vec<TraceRecord>, TraceError> {
    let mut out = Vec::new();
    for (i, line) in BufReader::new(input).lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let record = serde_json::from_str(&line).map_err(|source| TraceError::Json {
            line: i as u64 + 1,
            source,
        })?;
        out.push(record);
    }
    Ok(out)
}
