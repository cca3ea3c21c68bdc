//! Dataset parsing: NAB-style (`timestamp,value`), Yahoo-style
//! (`timestamp,value,is_anomaly`) and plain one-value-per-line files, plus
//! label files. The engine only ever sees integer time indices; timestamps
//! ride along as metadata.

use std::fmt;
use std::io::{BufRead, BufReader, Read, Write};
use std::str::FromStr;

use chrono::NaiveDateTime;
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

use crate::eval::LabelSet;

const TIME_FORMATS: [&str; 4] = [
    "%Y-%m-%d %H:%M:%S",
    "%Y-%m-%dT%H:%M:%S",
    "%Y-%m-%d %H:%M:%S%.f",
    "%Y-%m-%dT%H:%M:%S%.f",
];
const TIME_OUTPUT: &str = "%Y-%m-%d %H:%M:%S";

#[derive(Debug, Error)]
pub enum IngestError {
    #[error("line {line}: {msg}")]
    Parse { line: u64, msg: String },
    #[error("line {line}: timestamp {current} does not follow {previous}")]
    Ordering {
        line: u64,
        previous: String,
        current: String,
    },
    #[error("line {line}: label {label} is outside the series (0..{len})")]
    Range { line: u64, label: String, len: usize },
    #[error("line {line}: cannot resolve label {label:?}: {msg}")]
    Resolution { line: u64, label: String, msg: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DatasetFormat {
    Nab,
    Yahoo,
    Plain,
}

impl FromStr for DatasetFormat {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "nab" => Ok(Self::Nab),
            "yahoo" => Ok(Self::Yahoo),
            "plain" => Ok(Self::Plain),
            other => Err(format!("unknown format {other:?} (expected nab, yahoo or plain)")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Timestamp {
    Index(i64),
    Time(NaiveDateTime),
}

impl Timestamp {
    pub fn parse(raw: &str) -> Option<Self> {
        let raw = raw.trim();
        if let Ok(i) = raw.parse::<i64>() {
            return Some(Self::Index(i));
        }
        parse_time(raw).map(Self::Time)
    }

    /// Distance to `other` in seconds (time) or steps (index).
    fn delta(&self, other: &Self) -> Option<i64> {
        match (self, other) {
            (Self::Index(a), Self::Index(b)) => Some(b - a),
            (Self::Time(a), Self::Time(b)) => Some((*b - *a).num_seconds()),
            _ => None,
        }
    }
}

fn parse_time(raw: &str) -> Option<NaiveDateTime> {
    TIME_FORMATS
        .iter()
        .find_map(|f| NaiveDateTime::parse_from_str(raw, f).ok())
}

impl fmt::Display for Timestamp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Index(i) => write!(f, "{i}"),
            Self::Time(t) => write!(f, "{}", t.format(TIME_OUTPUT)),
        }
    }
}

impl Serialize for Timestamp {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        match self {
            Self::Index(i) => s.serialize_i64(*i),
            Self::Time(_) => s.collect_str(self),
        }
    }
}

impl<'de> Deserialize<'de> for Timestamp {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Index(i64),
            Text(String),
        }
        match Raw::deserialize(d)? {
            Raw::Index(i) => Ok(Self::Index(i)),
            Raw::Text(s) => Timestamp::parse(&s)
                .ok_or_else(|| serde::de::Error::custom(format!("unparseable timestamp {s:?}"))),
        }
    }
}

/// Typical spacing between consecutive points.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Interval {
    Seconds(i64),
    Steps(i64),
}

impl Interval {
    fn amount(&self) -> i64 {
        match self {
            Self::Seconds(s) | Self::Steps(s) => *s,
        }
    }
}

/// A spacing between two consecutive points that differs from the inferred interval.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Gap {
    /// Index of the later point.
    pub index: usize,
    pub spacing: i64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Series {
    timestamps: Vec<Timestamp>,
    values: Vec<f64>,
    interval: Option<Interval>,
    gaps: Vec<Gap>,
}

impl Series {
    /// Builds a series with implicit indices `0..n`.
    pub fn from_values(values: Vec<f64>) -> Self {
        let timestamps = (0..values.len() as i64).map(Timestamp::Index).collect();
        Self::from_parts(timestamps, values)
    }

    /// Pairs timestamps with values; `None` when the lengths differ.
    pub fn with_timestamps(timestamps: Vec<Timestamp>, values: Vec<f64>) -> Option<Self> {
        (timestamps.len() == values.len()).then(|| Self::from_parts(timestamps, values))
    }

    fn from_parts(timestamps: Vec<Timestamp>, values: Vec<f64>) -> Self {
        let deltas: Vec<i64> = timestamps
            .windows(2)
            .filter_map(|w| w[0].delta(&w[1]))
            .collect();
        let interval = median(&deltas).map(|d| match timestamps.first() {
            Some(Timestamp::Time(_)) => Interval::Seconds(d),
            _ => Interval::Steps(d),
        });
        let gaps = match interval {
            Some(iv) => deltas
                .iter()
                .enumerate()
                .filter(|(_, &d)| d != iv.amount())
                .map(|(i, &d)| Gap {
                    index: i + 1,
                    spacing: d,
                })
                .collect(),
            None => Vec::new(),
        };
        Self {
            timestamps,
            values,
            interval,
            gaps,
        }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn timestamps(&self) -> &[Timestamp] {
        &self.timestamps
    }

    pub fn interval(&self) -> Option<Interval> {
        self.interval
    }

    /// Irregular spacings, reported but never corrected.
    pub fn gaps(&self) -> &[Gap] {
        &self.gaps
    }

    /// Replays the series in file order as `(t, timestamp, value)`.
    pub fn replay(&self) -> impl Iterator<Item = (usize, &Timestamp, f64)> + '_ {
        self.timestamps
            .iter()
            .zip(&self.values)
            .enumerate()
            .map(|(t, (ts, &v))| (t, ts, v))
    }

    /// Index of the point closest to `at`, if within half an interval.
    pub fn resolve(&self, at: &Timestamp) -> Result<usize, String> {
        let idx = self
            .timestamps
            .partition_point(|ts| ts < at)
            .min(self.len().saturating_sub(1));
        let candidates = [idx.checked_sub(1), Some(idx)];
        let (best, dist) = candidates
            .into_iter()
            .flatten()
            .filter_map(|i| self.timestamps.get(i).and_then(|ts| ts.delta(at)).map(|d| (i, d.abs())))
            .min_by_key(|&(_, d)| d)
            .ok_or_else(|| "timestamp kind does not match the series".to_string())?;
        let tolerance = self.interval.map_or(0, |iv| iv.amount()) as f64 / 2.0;
        if dist as f64 > tolerance {
            return Err(format!("nearest point is {dist} away, more than half an interval"));
        }
        Ok(best)
    }
}

fn median(xs: &[i64]) -> Option<i64> {
    if xs.is_empty() {
        return None;
    }
    let mut v = xs.to_vec();
    v.sort_unstable();
    Some(v[v.len() / 2])
}

#[derive(Debug, Clone, PartialEq)]
pub struct ParsedDataset {
    pub series: Series,
    /// Present for Yahoo-style input.
    pub labels: Option<LabelSet>,
}

fn parse_value(raw: &str, line: u64) -> Result<f64, IngestError> {
    let v: f64 = raw.trim().parse().map_err(|_| IngestError::Parse {
        line,
        msg: format!("value {raw:?} is not a number"),
    })?;
    if !v.is_finite() {
        return Err(IngestError::Parse {
            line,
            msg: format!("value {raw:?} is not finite"),
        });
    }
    Ok(v)
}

pub fn parse_series<R: Read>(input: R, format: DatasetFormat) -> Result<ParsedDataset, IngestError> {
    match format {
        DatasetFormat::Plain => parse_plain(input),
        DatasetFormat::Nab => parse_csv(input, &["timestamp", "value"]),
        DatasetFormat::Yahoo => parse_csv(input, &["timestamp", "value", "is_anomaly"]),
    }
}

fn parse_plain<R: Read>(input: R) -> Result<ParsedDataset, IngestError> {
    let mut values = Vec::new();
    for (i, line) in BufReader::new(input).lines().enumerate() {
        let line = line?;
        let trimmed = line.trim();
        if trimmed.is_empty() {
            continue;
        }
        values.push(parse_value(trimmed, i as u64 + 1)?);
    }
    Ok(ParsedDataset {
        series: Series::from_values(values),
        labels: None,
    })
}

fn parse_csv<R: Read>(input: R, header: &[&str]) -> Result<ParsedDataset, IngestError> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(input);
    let found = reader.headers().map_err(|e| IngestError::Parse {
        line: 1,
        msg: e.to_string(),
    })?;
    let matches = found.len() == header.len()
        && found
            .iter()
            .zip(header)
            .all(|(a, b)| a.trim_start_matches('\u{feff}').eq_ignore_ascii_case(b));
    if !matches {
        return Err(IngestError::Parse {
            line: 1,
            msg: format!("expected header {:?}, found {:?}", header.join(","), found.iter().collect::<Vec<_>>().join(",")),
        });
    }

    let with_labels = header.len() == 3;
    let mut timestamps: Vec<Timestamp> = Vec::new();
    let mut values = Vec::new();
    let mut anomalies = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| IngestError::Parse {
            line: e.position().map_or(0, |p| p.line()),
            msg: e.to_string(),
        })?;
        let line = record.position().map_or(0, |p| p.line());
        if record.len() != header.len() {
            return Err(IngestError::Parse {
                line,
                msg: format!("expected {} fields, found {}", header.len(), record.len()),
            });
        }
        let ts = Timestamp::parse(&record[0]).ok_or_else(|| IngestError::Parse {
            line,
            msg: format!("unparseable timestamp {:?}", &record[0]),
        })?;
        if let Some(prev) = timestamps.last() {
            let ordered = match prev.delta(&ts) {
                Some(d) => d > 0,
                None => false,
            };
            if !ordered {
                return Err(IngestError::Ordering {
                    line,
                    previous: prev.to_string(),
                    current: ts.to_string(),
                });
            }
        }
        let value = parse_value(&record[1], line)?;
        if with_labels {
            match record[2].trim() {
                "0" => {}
                "1" => anomalies.push(values.len()),
                other => {
                    return Err(IngestError::Parse {
                        line,
                        msg: format!("is_anomaly must be 0 or 1, found {other:?}"),
                    })
                }
            }
        }
        timestamps.push(ts);
        values.push(value);
    }
    let labels = if with_labels {
        Some(LabelSet::new(anomalies).expect("row order yields strictly increasing labels"))
    } else {
        None
    };
    Ok(ParsedDataset {
        series: Series::from_parts(timestamps, values),
        labels,
    })
}

/// Reads a label file: one index or timestamp per line; blank lines and
/// `#` comments are skipped. Integers are series indices; anything else is
/// resolved to the nearest timestamp.
pub fn load_labels<R: Read>(input: R, series: &Series) -> Result<LabelSet, IngestError> {
    let mut out = Vec::new();
    for (i, line) in BufReader::new(input).lines().enumerate() {
        let line = line?;
        let line_no = i as u64 + 1;
        let entry = line.split('#').next().unwrap_or("").trim();
        if entry.is_empty() {
            continue;
        }
        if let Ok(idx) = entry.parse::<i64>() {
            if idx < 0 || idx as usize >= series.len() {
                return Err(IngestError::Range {
                    line: line_no,
                    label: entry.to_string(),
                    len: series.len(),
                });
            }
            out.push(idx as usize);
            continue;
        }
        let at = parse_time(entry).ok_or_else(|| IngestError::Resolution {
            line: line_no,
            label: entry.to_string(),
            msg: "neither an index nor a timestamp".into(),
        })?;
        let idx = series
            .resolve(&Timestamp::Time(at))
            .map_err(|msg| IngestError::Resolution {
                line: line_no,
                label: entry.to_string(),
                msg,
            })?;
        out.push(idx);
    }
    out.sort_unstable();
    out.dedup();
    Ok(LabelSet::new(out).expect("sorted and deduplicated"))
}

/// Writes `series` in `format`. Yahoo output marks the points in `labels`.
pub fn write_series<W: Write>(
    mut out: W,
    series: &Series,
    format: DatasetFormat,
    labels: Option<&LabelSet>,
) -> std::io::Result<()> {
    match format {
        DatasetFormat::Plain => {
            for v in series.values() {
                writeln!(out, "{v}")?;
            }
        }
        DatasetFormat::Nab => {
            writeln!(out, "timestamp,value")?;
            for (_, ts, v) in series.replay() {
                writeln!(out, "{ts},{v}")?;
            }
        }
        DatasetFormat::Yahoo => {
            writeln!(out, "timestamp,value,is_anomaly")?;
            for (t, ts, v) in series.replay() {
                let flag = labels.is_some_and(|l| l.contains(t)) as u8;
                writeln!(out, "{ts},{v},{flag}")?;
            }
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    const NAB: &str = "timestamp,value\n2014-04-10 00:04:00,35.5\n2014-04-10 00:09:00,36.1\n";

    #[test]
    fn nab_two_points_five_minutes() {
        let parsed = parse_series(NAB.as_bytes(), DatasetFormat::Nab).unwrap();
        assert_eq!(parsed.series.values(), &[35.5, 36.1]);
        assert_eq!(parsed.series.interval(), Some(Interval::Seconds(300)));
        assert!(parsed.labels.is_none());
        assert!(parsed.series.gaps().is_empty());
    }

    #[test]
    fn yahoo_labels_come_from_is_anomaly() {
        let input = "timestamp,value,is_anomaly\n1,83,0\n2,605,1\n";
        let parsed = parse_series(input.as_bytes(), DatasetFormat::Yahoo).unwrap();
        assert_eq!(parsed.series.values(), &[83.0, 605.0]);
        let labels = parsed.labels.unwrap();
        // the flagged row carries timestamp 2, which is series index 1
        assert_eq!(labels.indices(), &[1]);
        assert_eq!(parsed.series.timestamps()[1], Timestamp::Index(2));
        assert_eq!(parsed.series.interval(), Some(Interval::Steps(1)));
    }

    #[test]
    fn malformed_value_reports_line() {
        let input = "timestamp,value\n2014-04-10 00:04:00,35.5\n2014-04-10 00:09:00,abc\n";
        match parse_series(input.as_bytes(), DatasetFormat::Nab) {
            Err(IngestError::Parse { line, .. }) => assert_eq!(line, 3),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn crlf_and_scientific_notation() {
        let input = "timestamp,value\r\n2014-04-10 00:04:00,3.55e1\r\n2014-04-10 00:09:00,1E-2\r\n";
        let parsed = parse_series(input.as_bytes(), DatasetFormat::Nab).unwrap();
        assert_eq!(parsed.series.values(), &[35.5, 0.01]);
    }

    #[test]
    fn non_monotonic_timestamps_are_rejected() {
        let input = "timestamp,value\n2014-04-10 00:09:00,1\n2014-04-10 00:04:00,2\n";
        assert!(matches!(
            parse_series(input.as_bytes(), DatasetFormat::Nab),
            Err(IngestError::Ordering { line: 3, .. })
        ));
    }

    #[test]
    fn wrong_header_is_rejected() {
        let input = "time,val\n1,2\n";
        assert!(matches!(
            parse_series(input.as_bytes(), DatasetFormat::Nab),
            Err(IngestError::Parse { line: 1, .. })
        ));
    }

    #[test]
    fn gaps_are_reported_not_filled() {
        let input = "timestamp,value\n2014-04-10 00:00:00,1\n2014-04-10 00:05:00,2\n2014-04-10 00:10:00,3\n2014-04-10 00:30:00,4\n";
        let s = parse_series(input.as_bytes(), DatasetFormat::Nab).unwrap().series;
        assert_eq!(s.len(), 4);
        assert_eq!(s.gaps(), &[Gap { index: 3, spacing: 1200 }]);
        let t: Vec<usize> = s.replay().map(|(t, _, _)| t).collect();
        assert_eq!(t, vec![0, 1, 2, 3]);
    }

    #[test]
    fn plain_format_skips_blank_lines() {
        let s = parse_series("1\n\n2.5\n3\n".as_bytes(), DatasetFormat::Plain).unwrap().series;
        assert_eq!(s.values(), &[1.0, 2.5, 3.0]);
        assert!(matches!(
            parse_series("1\nx\n".as_bytes(), DatasetFormat::Plain),
            Err(IngestError::Parse { line: 2, .. })
        ));
    }

    #[test]
    fn labels_by_index() {
        let series = Series::from_values(vec![1.0; 100]);
        let labels = load_labels("3\n# comment\n\n17\n".as_bytes(), &series).unwrap();
        assert_eq!(labels.indices(), &[3, 17]);
        assert!(matches!(
            load_labels("500\n".as_bytes(), &series),
            Err(IngestError::Range { line: 1, .. })
        ));
    }

    #[test]
    fn labels_by_timestamp() {
        let series = parse_series(NAB.as_bytes(), DatasetFormat::Nab).unwrap().series;
        let labels = load_labels("2014-04-10 00:09:00\n".as_bytes(), &series).unwrap();
        assert_eq!(labels.indices(), &[1]);
        // within half an interval snaps to the nearest point
        let labels = load_labels("2014-04-10 00:05:30\n".as_bytes(), &series).unwrap();
        assert_eq!(labels.indices(), &[0]);
        assert!(matches!(
            load_labels("2014-04-11 00:00:00\n".as_bytes(), &series),
            Err(IngestError::Resolution { .. })
        ));
        assert!(matches!(
            load_labels("yesterday\n".as_bytes(), &series),
            Err(IngestError::Resolution { .. })
        ));
    }

    proptest! {
        #[test]
        fn values_survive_a_write_read_cycle(
            values in prop::collection::vec(-1e9f64..1e9, 1..50),
            format in prop::sample::select(vec![DatasetFormat::Plain, DatasetFormat::Nab, DatasetFormat::Yahoo]),
        ) {
            let series = Series::from_values(values.clone());
            let mut buf = Vec::new();
            write_series(&mut buf, &series, format, None).unwrap();
            let back = parse_series(buf.as_slice(), format).unwrap();
            prop_assert_eq!(back.series.values(), values.as_slice());
        }
    }
}
