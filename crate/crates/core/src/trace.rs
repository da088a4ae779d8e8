//! IMU samples, switch-gated segments and the flat trace CSV format.

use std::cmp::Ordering::Greater;
use std::fmt;
use std::io::{Read, Write};

use thiserror::Error;

use crate::numfmt::sig17;

/// Smallest segment that still yields a nondegenerate double integral.
pub const MIN_SEGMENT_LEN: usize = 4;

/// Column header of the trace CSV.
pub const TRACE_HEADER: [&str; 9] = ["t", "ax", "ay", "az", "gx", "gy", "gz", "switch", "label"];

/// Class label of a writing sample.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Digit {
    Zero,
    One,
}

impl Digit {
    pub const ALL: [Digit; 2] = [Digit::Zero, Digit::One];

    pub fn index(self) -> usize {
        match self {
            Digit::Zero => 0,
            Digit::One => 1,
        }
    }

    /// Binary target used by the classifier: 1.0 for digit one.
    pub fn target(self) -> f64 {
        self.index() as f64
    }

    pub fn from_index(i: usize) -> Option<Digit> {
        match i {
            0 => Some(Digit::Zero),
            1 => Some(Digit::One),
            _ => None,
        }
    }
}

impl fmt::Display for Digit {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.index())
    }
}

/// One IMU reading. Accelerations in m/s², angles in degrees.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ImuSample {
    pub t: f64,
    pub ax: f64,
    pub ay: f64,
    pub az: f64,
    pub gx: f64,
    pub gy: f64,
    pub gz: f64,
    pub switch: bool,
}

impl ImuSample {
    /// The six sensor channels in canonical order `ax, ay, az, gx, gy, gz`.
    pub fn channels(&self) -> [f64; 6] {
        [self.ax, self.ay, self.az, self.gx, self.gy, self.gz]
    }

    pub fn is_finite(&self) -> bool {
        self.t.is_finite() && self.channels().iter().all(|v| v.is_finite())
    }
}

/// One engaged-switch interval.
#[derive(Debug, Clone, PartialEq)]
pub struct Segment {
    pub samples: Vec<ImuSample>,
    pub label: Option<Digit>,
}

impl Segment {
    pub fn new(samples: Vec<ImuSample>, label: Option<Digit>) -> Self {
        Segment { samples, label }
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn t_start(&self) -> f64 {
        self.samples.first().map_or(f64::NAN, |s| s.t)
    }

    pub fn t_end(&self) -> f64 {
        self.samples.last().map_or(f64::NAN, |s| s.t)
    }

    pub fn duration(&self) -> f64 {
        self.t_end() - self.t_start()
    }
}

/// A segment invariant that does not hold.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Violation {
    TooShort { len: usize },
    NonMonotoneTime { index: usize },
    NonFinite { index: usize },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::TooShort { len } => {
                write!(f, "too short: {len} samples, need at least {MIN_SEGMENT_LEN}")
            }
            Violation::NonMonotoneTime { index } => {
                write!(f, "non-monotone time at sample {index}")
            }
            Violation::NonFinite { index } => write!(f, "non-finite value at sample {index}"),
        }
    }
}

/// Checks the segment invariants. An empty list means the segment is valid.
///
/// Reports at most one violation of each kind, at its first occurrence.
pub fn validate_segment(segment: &Segment) -> Vec<Violation> {
    let mut out = Vec::new();
    if segment.len() < MIN_SEGMENT_LEN {
        out.push(Violation::TooShort { len: segment.len() });
    }
    if let Some(i) = (1..segment.len()).find(|&i| segment.samples[i].t.partial_cmp(&segment.samples[i - 1].t) != Some(Greater)) {
        out.push(Violation::NonMonotoneTime { index: i });
    }
    if let Some(i) = segment.samples.iter().position(|s| !s.is_finite()) {
        out.push(Violation::NonFinite { index: i });
    }
    out
}

/// A labeled corpus.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Dataset {
    segments: Vec<Segment>,
}

impl Dataset {
    /// Wraps segments, rejecting any without a label.
    pub fn new(segments: Vec<Segment>) -> Result<Self, TraceError> {
        if let Some(index) = segments.iter().position(|s| s.label.is_none()) {
            return Err(TraceError::Unlabeled { segment: index });
        }
        Ok(Dataset { segments })
    }

    pub fn segments(&self) -> &[Segment] {
        &self.segments
    }

    pub fn into_segments(self) -> Vec<Segment> {
        self.segments
    }

    pub fn len(&self) -> usize {
        self.segments.len()
    }

    pub fn is_empty(&self) -> bool {
        self.segments.is_empty()
    }

    /// Per-class counts indexed by [`Digit::index`].
    pub fn class_counts(&self) -> [usize; 2] {
        let mut counts = [0; 2];
        for s in &self.segments {
            if let Some(d) = s.label {
                counts[d.index()] += 1;
            }
        }
        counts
    }

    pub fn labels(&self) -> Vec<Digit> {
        self.segments.iter().filter_map(|s| s.label).collect()
    }

    /// Subset in the given index order.
    pub fn select(&self, indices: &[usize]) -> Dataset {
        Dataset { segments: indices.iter().map(|&i| self.segments[i].clone()).collect() }
    }
}

#[derive(Debug, Error)]
pub enum TraceError {
    #[error("line {line}: {message}")]
    Parse { line: u64, message: String },
    #[error("line {line}: time {t} does not advance past {previous} within an engaged run")]
    Sequencing { line: u64, previous: f64, t: f64 },
    #[error("line {line}: label {found} differs from label {expected} earlier in the run")]
    Label { line: u64, expected: i8, found: i8 },
    #[error("segment {segment} has no label but labels were requested")]
    Unlabeled { segment: usize },
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}

impl TraceError {
    /// 1-based line number of a row-level error.
    pub fn line(&self) -> Option<u64> {
        match self {
            TraceError::Parse { line, .. } | TraceError::Sequencing { line, .. } | TraceError::Label { line, .. } => Some(*line),
            _ => None,
        }
    }
}

/// A decoded trace row: the sample plus its raw label code (-1, 0 or 1).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TraceRow {
    pub line: u64,
    pub sample: ImuSample,
    pub label: i8,
}

impl TraceRow {
    pub fn digit(&self) -> Option<Digit> {
        usize::try_from(self.label).ok().and_then(Digit::from_index)
    }
}

/// Row-by-row reader over trace CSV text. Validates the header eagerly.
pub struct TraceReader<R: Read> {
    records: csv::StringRecordsIntoIter<R>,
}

impl<R: Read> TraceReader<R> {
    pub fn new(reader: R) -> Result<Self, TraceError> {
        let mut rdr = csv::ReaderBuilder::new().has_headers(true).flexible(true).from_reader(reader);
        let header = rdr.headers().map_err(|e| csv_to_parse(e, 1))?.clone();
        // A zero-byte input is an empty trace, not a malformed one.
        if !header.is_empty() && header.iter().map(str::trim).ne(TRACE_HEADER.iter().copied()) {
            return Err(TraceError::Parse { line: 1, message: format!("expected header `{}`", TRACE_HEADER.join(",")) });
        }
        Ok(TraceReader { records: rdr.into_records() })
    }
}

impl<R: Read> Iterator for TraceReader<R> {
    type Item = Result<TraceRow, TraceError>;

    fn next(&mut self) -> Option<Self::Item> {
        let record = match self.records.next()? {
            Ok(r) => r,
            Err(e) => return Some(Err(csv_to_parse(e, 0))),
        };
        let line = record.position().map_or(0, |p| p.line());
        Some(decode_row(&record, line))
    }
}

fn csv_to_parse(e: csv::Error, fallback_line: u64) -> TraceError {
    let line = e.position().map_or(fallback_line, |p| p.line());
    TraceError::Parse { line, message: e.to_string() }
}

fn decode_row(record: &csv::StringRecord, line: u64) -> Result<TraceRow, TraceError> {
    if record.len() != TRACE_HEADER.len() {
        return Err(TraceError::Parse { line, message: format!("expected {} fields, found {}", TRACE_HEADER.len(), record.len()) });
    }
    let mut v = [0.0f64; 7];
    for (i, slot) in v.iter_mut().enumerate() {
        let field = record[i].trim();
        *slot = field
            .parse::<f64>()
            .ok()
            .filter(|x| x.is_finite())
            .ok_or_else(|| TraceError::Parse { line, message: format!("field `{}`: `{field}` is not a finite number", TRACE_HEADER[i]) })?;
    }
    let switch = match record[7].trim() {
        "0" => false,
        "1" => true,
        other => return Err(TraceError::Parse { line, message: format!("switch must be 0 or 1, got `{other}`") }),
    };
    let label = match record[8].trim() {
        "-1" => -1,
        "0" => 0,
        "1" => 1,
        other => return Err(TraceError::Parse { line, message: format!("label must be -1, 0 or 1, got `{other}`") }),
    };
    let sample = ImuSample { t: v[0], ax: v[1], ay: v[2], az: v[3], gx: v[4], gy: v[5], gz: v[6], switch };
    Ok(TraceRow { line, sample, label })
}

/// Accumulates rows into maximal switch-engaged runs.
#[derive(Debug, Default)]
pub(crate) struct RunBuilder {
    samples: Vec<ImuSample>,
    label: Option<i8>,
}

impl RunBuilder {
    /// Adds an engaged row, enforcing strictly increasing time and a constant label.
    pub(crate) fn push(&mut self, row: &TraceRow) -> Result<(), TraceError> {
        if let Some(prev) = self.samples.last() {
            if row.sample.t.partial_cmp(&prev.t) != Some(Greater) {
                return Err(TraceError::Sequencing { line: row.line, previous: prev.t, t: row.sample.t });
            }
        }
        match self.label {
            Some(l) if l != row.label => return Err(TraceError::Label { line: row.line, expected: l, found: row.label }),
            _ => self.label = Some(row.label),
        }
        self.samples.push(row.sample);
        Ok(())
    }

    pub(crate) fn take(&mut self) -> Option<Segment> {
        if self.samples.is_empty() {
            return None;
        }
        let label = self.label.take().and_then(|l| usize::try_from(l).ok()).and_then(Digit::from_index);
        Some(Segment::new(std::mem::take(&mut self.samples), label))
    }
}

/// Parses trace CSV into segments, one per maximal run of `switch=1` rows.
///
/// Segments are returned as found; length limits are checked by [`validate_segment`].
pub fn parse_trace_csv<R: Read>(reader: R) -> Result<Vec<Segment>, TraceError> {
    let mut out = Vec::new();
    let mut run = RunBuilder::default();
    for row in TraceReader::new(reader)? {
        let row = row?;
        if row.sample.switch {
            run.push(&row)?;
        } else if let Some(seg) = run.take() {
            out.push(seg);
        }
    }
    out.extend(run.take());
    Ok(out)
}

/// Convenience wrapper over [`parse_trace_csv`] for in-memory text.
pub fn parse_trace_str(text: &str) -> Result<Vec<Segment>, TraceError> {
    parse_trace_csv(text.as_bytes())
}

/// Whether [`write_trace_csv`] may emit `-1` for unlabeled segments.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LabelPolicy {
    /// Every segment must carry a label.
    Required,
    /// Unlabeled segments are written with label `-1`.
    AllowUnlabeled,
}

/// Writes segments as trace CSV with 17 significant digits per value.
///
/// Consecutive segments are separated by a single `switch=0` row so that they
/// parse back as distinct runs; its time is the later of the two boundary times.
pub fn write_trace_csv<W: Write>(segments: &[Segment], writer: W, policy: LabelPolicy) -> Result<(), TraceError> {
    if policy == LabelPolicy::Required {
        if let Some(index) = segments.iter().position(|s| s.label.is_none()) {
            return Err(TraceError::Unlabeled { segment: index });
        }
    }
    let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(writer);
    w.write_record(TRACE_HEADER)?;
    let mut prev_end: Option<f64> = None;
    for seg in segments {
        if let (Some(end), Some(first)) = (prev_end, seg.samples.first()) {
            let gap = ImuSample { t: end.max(first.t), ax: 0.0, ay: 0.0, az: 0.0, gx: 0.0, gy: 0.0, gz: 0.0, switch: false };
            write_row(&mut w, &gap, -1)?;
        }
        let label = seg.label.map_or(-1, |d| d.index() as i8);
        for s in &seg.samples {
            write_row(&mut w, &ImuSample { switch: true, ..*s }, label)?;
        }
        if let Some(last) = seg.samples.last() {
            prev_end = Some(last.t);
        }
    }
    w.flush()?;
    Ok(())
}

/// [`write_trace_csv`] into a `String`.
pub fn write_trace_string(segments: &[Segment], policy: LabelPolicy) -> Result<String, TraceError> {
    let mut buf = Vec::new();
    write_trace_csv(segments, &mut buf, policy)?;
    Ok(String::from_utf8(buf).expect("trace writer emits ASCII"))
}

fn write_row<W: Write>(w: &mut csv::Writer<W>, s: &ImuSample, label: i8) -> Result<(), TraceError> {
    let mut rec: Vec<String> = Vec::with_capacity(9);
    rec.push(sig17(s.t));
    rec.extend(s.channels().iter().map(|&v| sig17(v)));
    rec.push(if s.switch { "1" } else { "0" }.to_string());
    rec.push(label.to_string());
    w.write_record(&rec)?;
    Ok(())
}
