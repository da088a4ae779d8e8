//! The 31-value engineered feature vector: per-channel min/mean/max of
//! acceleration, angle and integrated velocity, plus net displacements.

use std::cmp::Ordering::Greater;

use thiserror::Error;

use crate::numfmt::sig17;
use crate::trace::{validate_segment, Dataset, Digit, Segment, Violation};

pub const N_FEATURES: usize = 31;

const CHANNELS: [&str; 9] = ["ax", "ay", "az", "gx", "gy", "gz", "vx", "vy", "vz"];

const NAMES: [&str; N_FEATURES] = [
    "ax_min", "ax_mean", "ax_max", "ay_min", "ay_mean", "ay_max", "az_min", "az_mean", "az_max", "gx_min", "gx_mean", "gx_max", "gy_min",
    "gy_mean", "gy_max", "gz_min", "gz_mean", "gz_max", "vx_min", "vx_mean", "vx_max", "vy_min", "vy_mean", "vy_max", "vz_min", "vz_mean",
    "vz_max", "dx", "dy", "dz", "d_total",
];

/// Canonical feature names, in vector order.
pub fn feature_names() -> &'static [&'static str; N_FEATURES] {
    &NAMES
}

/// Position of a feature in the canonical order.
pub fn feature_index(name: &str) -> Option<usize> {
    NAMES.iter().position(|&n| n == name)
}

/// Feature vector in canonical order.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EngineeredFeatures(pub [f64; N_FEATURES]);

impl EngineeredFeatures {
    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn get(&self, name: &str) -> Option<f64> {
        feature_index(name).map(|i| self.0[i])
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum FeatureError {
    #[error("length mismatch: {times} times vs {values} values")]
    LengthMismatch { times: usize, values: usize },
    #[error("need at least 2 points to integrate, got {0}")]
    TooFewPoints(usize),
    #[error("times not strictly increasing at index {0}")]
    NonMonotone(usize),
    #[error("invalid segment: {}", join(.0))]
    InvalidSegment(Vec<Violation>),
    #[error("segment {index}: {source}")]
    AtSegment { index: usize, source: Box<FeatureError> },
    #[error("segment {0} has no label")]
    Unlabeled(usize),
}

fn join(v: &[Violation]) -> String {
    v.iter().map(ToString::to_string).collect::<Vec<_>>().join("; ")
}

/// Cumulative trapezoidal integral starting from zero.
pub fn integrate_trapezoid(times: &[f64], values: &[f64]) -> Result<Vec<f64>, FeatureError> {
    if times.len() != values.len() {
        return Err(FeatureError::LengthMismatch { times: times.len(), values: values.len() });
    }
    if times.len() < 2 {
        return Err(FeatureError::TooFewPoints(times.len()));
    }
    if let Some(i) = (1..times.len()).find(|&i| times[i].partial_cmp(&times[i - 1]) != Some(Greater)) {
        return Err(FeatureError::NonMonotone(i));
    }
    Ok(cumtrapz(times, values))
}

fn cumtrapz(times: &[f64], values: &[f64]) -> Vec<f64> {
    let mut out = Vec::with_capacity(values.len());
    let mut acc = 0.0;
    out.push(acc);
    for i in 1..values.len() {
        acc += (values[i] + values[i - 1]) / 2.0 * (times[i] - times[i - 1]);
        out.push(acc);
    }
    out
}

fn min_mean_max(xs: &[f64]) -> [f64; 3] {
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    let mut sum = 0.0;
    for &x in xs {
        lo = lo.min(x);
        hi = hi.max(x);
        sum += x;
    }
    // Rounding in the sum can push the mean a hair outside [min, max].
    let mean = (sum / xs.len() as f64).clamp(lo, hi);
    [lo, mean, hi]
}

/// Computes the feature vector of a valid segment.
pub fn extract_features(segment: &Segment) -> Result<EngineeredFeatures, FeatureError> {
    let violations = validate_segment(segment);
    if !violations.is_empty() {
        return Err(FeatureError::InvalidSegment(violations));
    }
    let t: Vec<f64> = segment.samples.iter().map(|s| s.t).collect();
    let mut raw: [Vec<f64>; 6] = Default::default();
    for s in &segment.samples {
        for (ch, v) in raw.iter_mut().zip(s.channels()) {
            ch.push(v);
        }
    }
    let mut out = [0.0; N_FEATURES];
    let mut slot = 0;
    let mut put = |stats: [f64; 3]| {
        out[slot..slot + 3].copy_from_slice(&stats);
        slot += 3;
    };
    for ch in &raw {
        put(min_mean_max(ch));
    }
    let mut net = [0.0; 3];
    for (axis, accel) in raw[..3].iter().enumerate() {
        let v = cumtrapz(&t, accel);
        let d = cumtrapz(&t, &v);
        put(min_mean_max(&v));
        net[axis] = *d.last().expect("segment has at least 4 samples");
    }
    out[27..30].copy_from_slice(&net);
    out[30] = (net[0] * net[0] + net[1] * net[1] + net[2] * net[2]).sqrt();
    Ok(EngineeredFeatures(out))
}

/// Row-major feature matrix and aligned labels.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct FeatureMatrix {
    pub rows: Vec<[f64; N_FEATURES]>,
    pub labels: Vec<Digit>,
}

impl FeatureMatrix {
    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    /// Labels as 0/1 targets.
    pub fn targets(&self) -> Vec<f64> {
        self.labels.iter().map(|d| d.target()).collect()
    }

    /// Rows as owned vectors, the shape the model APIs take.
    pub fn row_vecs(&self) -> Vec<Vec<f64>> {
        self.rows.iter().map(|r| r.to_vec()).collect()
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        self.rows.iter().map(|r| r[j]).collect()
    }

    pub fn select(&self, indices: &[usize]) -> FeatureMatrix {
        FeatureMatrix { rows: indices.iter().map(|&i| self.rows[i]).collect(), labels: indices.iter().map(|&i| self.labels[i]).collect() }
    }
}

/// Extracts one row per segment of a labeled dataset.
pub fn extract_matrix(dataset: &Dataset) -> Result<FeatureMatrix, FeatureError> {
    let mut m = FeatureMatrix::default();
    for (index, seg) in dataset.segments().iter().enumerate() {
        let f = extract_features(seg).map_err(|e| FeatureError::AtSegment { index, source: Box::new(e) })?;
        m.rows.push(f.0);
        m.labels.push(seg.label.ok_or(FeatureError::Unlabeled(index))?);
    }
    Ok(m)
}

/// Channel prefixes in feature order, for callers building their own reports.
pub fn channel_names() -> &'static [&'static str; 9] {
    &CHANNELS
}

/// Named numeric columns with an optional label per row, as stored in feature CSV files.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct FeatureTable {
    pub names: Vec<String>,
    pub rows: Vec<Vec<f64>>,
    pub labels: Vec<Option<Digit>>,
}

impl FeatureTable {
    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    /// Whether the columns are exactly the canonical features in order.
    pub fn is_canonical(&self) -> bool {
        self.names.iter().map(String::as_str).eq(NAMES.iter().copied())
    }

    /// All labels, or the index of the first unlabeled row.
    pub fn digits(&self) -> Result<Vec<Digit>, FeatureError> {
        self.labels.iter().enumerate().map(|(i, l)| l.ok_or(FeatureError::Unlabeled(i))).collect()
    }
}

impl From<&FeatureMatrix> for FeatureTable {
    fn from(m: &FeatureMatrix) -> Self {
        FeatureTable {
            names: NAMES.iter().map(|s| s.to_string()).collect(),
            rows: m.row_vecs(),
            labels: m.labels.iter().copied().map(Some).collect(),
        }
    }
}

#[derive(Debug, Error)]
pub enum TableError {
    #[error("line {line}: {message}")]
    Parse { line: u64, message: String },
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}

/// Writes a header of the column names plus `label`, then one row per sample
/// with 17 significant digits. Missing labels are written as `-1`.
pub fn write_feature_csv<W: std::io::Write>(table: &FeatureTable, writer: W) -> Result<(), TableError> {
    let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(writer);
    w.write_record(table.names.iter().map(String::as_str).chain(["label"]))?;
    for (row, label) in table.rows.iter().zip(&table.labels) {
        let label = label.map_or("-1".to_string(), |d| d.to_string());
        w.write_record(row.iter().map(|&v| sig17(v)).chain([label]))?;
    }
    w.flush()?;
    Ok(())
}

/// Reads a feature CSV; the last column must be `label`.
pub fn read_feature_csv<R: std::io::Read>(reader: R) -> Result<FeatureTable, TableError> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(reader);
    let header = rdr.headers()?.clone();
    let names: Vec<String> = header.iter().map(|h| h.trim().to_string()).collect();
    if names.len() < 2 || names.last().map(String::as_str) != Some("label") {
        return Err(TableError::Parse { line: 1, message: "header must list feature columns followed by `label`".into() });
    }
    let p = names.len() - 1;
    let mut table = FeatureTable { names: names[..p].to_vec(), ..Default::default() };
    for record in rdr.records() {
        let record = record?;
        let line = record.position().map_or(0, |pos| pos.line());
        let mut row = Vec::with_capacity(p);
        for (j, field) in record.iter().take(p).enumerate() {
            let v = field.trim().parse::<f64>().ok().filter(|v| v.is_finite()).ok_or_else(|| TableError::Parse {
                line,
                message: format!("column `{}`: `{field}` is not a finite number", table.names[j]),
            })?;
            row.push(v);
        }
        let label = match record[p].trim() {
            "-1" => None,
            "0" => Some(Digit::Zero),
            "1" => Some(Digit::One),
            other => return Err(TableError::Parse { line, message: format!("label must be -1, 0 or 1, got `{other}`") }),
        };
        table.rows.push(row);
        table.labels.push(label);
    }
    Ok(table)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::trace::ImuSample;

    #[test]
    fn names_follow_channel_stat_pattern() {
        let names = feature_names();
        assert_eq!(names.len(), 31);
        assert_eq!(names[0], "ax_min");
        assert_eq!(names[30], "d_total");
        for (c, ch) in CHANNELS.iter().enumerate() {
            for (s, stat) in ["min", "mean", "max"].iter().enumerate() {
                assert_eq!(names[3 * c + s], format!("{ch}_{stat}"));
            }
        }
        let mut sorted = names.to_vec();
        sorted.sort_unstable();
        sorted.dedup();
        assert_eq!(sorted.len(), 31);
    }

    #[test]
    fn trapezoid_fixtures() {
        let t = [0.0, 1.0, 2.0];
        assert_eq!(integrate_trapezoid(&t, &[0.0, 0.0, 0.0]).unwrap(), vec![0.0, 0.0, 0.0]);
        assert_eq!(integrate_trapezoid(&t, &[2.0, 2.0, 2.0]).unwrap(), vec![0.0, 2.0, 4.0]);
        assert_eq!(integrate_trapezoid(&t, &[0.0, 1.0, 2.0]).unwrap(), vec![0.0, 0.5, 2.0]);
    }

    #[test]
    fn trapezoid_rejects_bad_input() {
        assert_eq!(integrate_trapezoid(&[0.0, 1.0], &[1.0]), Err(FeatureError::LengthMismatch { times: 2, values: 1 }));
        assert_eq!(integrate_trapezoid(&[0.0], &[1.0]), Err(FeatureError::TooFewPoints(1)));
        assert_eq!(integrate_trapezoid(&[0.0, 1.0, 1.0], &[1.0; 3]), Err(FeatureError::NonMonotone(2)));
    }

    #[test]
    fn zero_channels_give_zero_features() {
        let samples = (0..10)
            .map(|i| ImuSample { t: 0.3 + i as f64 * 0.013, ax: 0.0, ay: 0.0, az: 0.0, gx: 0.0, gy: 0.0, gz: 0.0, switch: true })
            .collect();
        let f = extract_features(&Segment::new(samples, None)).unwrap();
        assert!(f.0.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn invalid_segment_is_rejected() {
        let samples =
            (0..3).map(|i| ImuSample { t: i as f64, ax: 0.0, ay: 0.0, az: 0.0, gx: 0.0, gy: 0.0, gz: 0.0, switch: true }).collect();
        assert!(matches!(extract_features(&Segment::new(samples, None)), Err(FeatureError::InvalidSegment(_))));
    }

    #[test]
    fn feature_csv_round_trip() {
        let table = FeatureTable {
            names: vec!["a".into(), "b".into()],
            rows: vec![vec![0.1, -3e-300], vec![1.0 / 3.0, 7.0]],
            labels: vec![Some(Digit::One), None],
        };
        let mut buf = Vec::new();
        write_feature_csv(&table, &mut buf).unwrap();
        assert!(buf.starts_with(b"a,b,label\n"));
        assert_eq!(read_feature_csv(buf.as_slice()).unwrap(), table);
        assert!(read_feature_csv("a,b\n1,2\n".as_bytes()).is_err());
        let err = read_feature_csv("a,label\nx,1\n".as_bytes()).unwrap_err();
        assert!(matches!(err, TableError::Parse { line: 2, .. }), "{err}");
    }
}
