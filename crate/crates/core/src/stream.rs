//! Switch-gated segmentation of a live sample stream and per-segment prediction.

use std::io::Read;
use std::time::Duration;

use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::eval::{predict_digit, DEFAULT_THRESHOLD};
use crate::features::{extract_features, FeatureError};
use crate::gbdt::{save_model, GbdtError, GbdtModel};
use crate::trace::{Digit, ImuSample, Segment, TraceError, TraceReader, MIN_SEGMENT_LEN};

pub const DEFAULT_MAX_SAMPLES: usize = 100_000;

/// Longest pause honored between consecutive rows in real-time replay.
const MAX_PACING_SLEEP: Duration = Duration::from_secs(1);

#[derive(Debug, Error)]
pub enum StreamError {
    #[error("time {t} does not advance past {previous}")]
    Sequencing { previous: f64, t: f64 },
    #[error("segment exceeded {max} samples and was discarded")]
    Overflow { max: usize },
    #[error("model is incompatible: {0}")]
    Incompatible(String),
    #[error(transparent)]
    Feature(#[from] FeatureError),
    #[error(transparent)]
    Gbdt(#[from] GbdtError),
    #[error(transparent)]
    Trace(#[from] TraceError),
    #[error("line {line}: {source}")]
    AtLine { line: u64, source: Box<StreamError> },
}

/// Single-owner switch-edge state machine.
#[derive(Debug)]
pub struct Segmenter {
    max_samples: usize,
    buffer: Vec<ImuSample>,
    last: Option<ImuSample>,
    /// Engaged samples are ignored until the switch next reads 0.
    resync: bool,
    warnings: Vec<String>,
}

impl Default for Segmenter {
    fn default() -> Self {
        Segmenter::new(DEFAULT_MAX_SAMPLES)
    }
}

impl Segmenter {
    pub fn new(max_samples: usize) -> Self {
        Segmenter { max_samples, buffer: Vec::new(), last: None, resync: false, warnings: Vec::new() }
    }

    pub fn is_engaged(&self) -> bool {
        !self.buffer.is_empty()
    }

    /// Warnings accumulated since the last call.
    pub fn take_warnings(&mut self) -> Vec<String> {
        std::mem::take(&mut self.warnings)
    }

    /// Drops the open buffer and waits for the next disengaged sample.
    pub fn reset(&mut self) {
        self.buffer.clear();
        self.resync = true;
    }

    /// Feeds one sample; returns a segment on a falling edge.
    ///
    /// Time may repeat across a gate change but must strictly increase while engaged.
    pub fn push_event(&mut self, event: ImuSample) -> Result<Option<Segment>, StreamError> {
        if let Some(prev) = self.last {
            let regressed = event.t < prev.t || (event.t == prev.t && prev.switch && event.switch);
            if regressed || event.t.is_nan() {
                self.last = Some(event);
                self.reset();
                return Err(StreamError::Sequencing { previous: prev.t, t: event.t });
            }
        }
        self.last = Some(event);
        if !event.switch {
            self.resync = false;
            return Ok(self.close());
        }
        if self.resync {
            return Ok(None);
        }
        if self.buffer.len() == self.max_samples {
            self.reset();
            return Err(StreamError::Overflow { max: self.max_samples });
        }
        self.buffer.push(event);
        Ok(None)
    }

    /// Closes any open buffer as if the switch had been released. Idempotent.
    pub fn flush(&mut self) -> Option<Segment> {
        self.close()
    }

    fn close(&mut self) -> Option<Segment> {
        if self.buffer.is_empty() {
            return None;
        }
        let samples = std::mem::take(&mut self.buffer);
        if samples.len() < MIN_SEGMENT_LEN {
            let msg = format!("discarded {}-sample segment at t={} (minimum {MIN_SEGMENT_LEN})", samples.len(), samples[0].t);
            log::warn!("{msg}");
            self.warnings.push(msg);
            return None;
        }
        Some(Segment::new(samples, None))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Prediction {
    pub t_start: f64,
    pub t_end: f64,
    pub digit: Digit,
    /// Probability of digit one.
    pub probability: f64,
    pub model_id: String,
}

impl Prediction {
    /// `t_start,t_end,digit,probability` with six probability decimals.
    pub fn csv_line(&self) -> String {
        format!("{},{},{},{:.6}", self.t_start, self.t_end, self.digit, self.probability)
    }
}

/// Short content hash of a model's serialized form.
pub fn model_id(model: &GbdtModel) -> String {
    let digest = Sha256::digest(save_model(model));
    digest[..6].iter().map(|b| format!("{b:02x}")).collect()
}

/// A model checked for the canonical feature layout, with its identifier cached.
#[derive(Debug, Clone)]
pub struct Predictor {
    model: GbdtModel,
    id: String,
}

impl Predictor {
    pub fn new(model: GbdtModel) -> Result<Self, StreamError> {
        if !model.has_canonical_features() {
            return Err(StreamError::Incompatible(format!(
                "expected the 31 canonical feature names, model has {} features starting with {:?}",
                model.n_features(),
                model.feature_names.first()
            )));
        }
        let id = model_id(&model);
        Ok(Predictor { model, id })
    }

    pub fn model(&self) -> &GbdtModel {
        &self.model
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    /// Same feature and probability path as batch evaluation.
    pub fn predict(&self, segment: &Segment) -> Result<Prediction, StreamError> {
        let f = extract_features(segment)?;
        let probability = self.model.predict_proba(f.as_slice())?;
        Ok(Prediction {
            t_start: segment.t_start(),
            t_end: segment.t_end(),
            digit: predict_digit(probability, DEFAULT_THRESHOLD),
            probability,
            model_id: self.id.clone(),
        })
    }
}

/// One-off prediction; prefer [`Predictor`] when scoring many segments.
pub fn predict_segment(model: &GbdtModel, segment: &Segment) -> Result<Prediction, StreamError> {
    Predictor::new(model.clone())?.predict(segment)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct ReplayOptions {
    /// Sleep between rows to match their time deltas. Never changes outputs.
    pub real_time: bool,
    /// Record row errors and resume at the next disengaged row instead of aborting.
    pub lenient: bool,
    pub max_samples: Option<usize>,
}

#[derive(Debug, Default)]
pub struct ReplayReport {
    /// In segment completion order.
    pub predictions: Vec<Prediction>,
    /// Errors skipped under lenient mode.
    pub errors: Vec<StreamError>,
    pub warnings: Vec<String>,
}

/// Streams trace CSV rows through a [`Segmenter`] and predicts each completed
/// segment. `on_prediction` sees each prediction as soon as it is made.
pub fn replay<R: Read>(
    input: R,
    predictor: &Predictor,
    options: ReplayOptions,
    mut on_prediction: impl FnMut(&Prediction),
) -> Result<ReplayReport, StreamError> {
    let mut seg = Segmenter::new(options.max_samples.unwrap_or(DEFAULT_MAX_SAMPLES));
    let mut report = ReplayReport::default();
    let mut prev_t: Option<f64> = None;
    let mut emit = |segment: Segment, report: &mut ReplayReport| -> Result<(), StreamError> {
        let p = predictor.predict(&segment)?;
        on_prediction(&p);
        report.predictions.push(p);
        Ok(())
    };
    for row in TraceReader::new(input)? {
        let step = row.map_err(StreamError::from).and_then(|row| {
            if options.real_time {
                if let Some(dt) = prev_t.map(|p| row.sample.t - p).filter(|d| *d > 0.0) {
                    std::thread::sleep(Duration::from_secs_f64(dt).min(MAX_PACING_SLEEP));
                }
                prev_t = Some(row.sample.t);
            }
            seg.push_event(row.sample).map_err(|e| StreamError::AtLine { line: row.line, source: Box::new(e) })
        });
        report.warnings.extend(seg.take_warnings());
        let outcome = match step {
            Ok(Some(segment)) => emit(segment, &mut report),
            Ok(None) => Ok(()),
            Err(e) => Err(e),
        };
        if let Err(e) = outcome {
            if !options.lenient {
                return Err(e);
            }
            log::warn!("skipping to the next disengaged row: {e}");
            seg.reset();
            report.errors.push(e);
        }
    }
    if let Some(segment) = seg.flush() {
        if let Err(e) = emit(segment, &mut report) {
            if !options.lenient {
                return Err(e);
            }
            report.errors.push(e);
        }
    }
    report.warnings.extend(seg.take_warnings());
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gbdt::{default_feature_names, TrainConfig};

    fn ev(t: f64, switch: bool) -> ImuSample {
        ImuSample { t, ax: t, ay: 0.0, az: 0.0, gx: 0.0, gy: 0.0, gz: 0.0, switch }
    }

    fn feed(s: &mut Segmenter, gates: &[u8]) -> Vec<Segment> {
        gates.iter().enumerate().filter_map(|(i, &g)| s.push_event(ev(i as f64, g == 1)).unwrap()).collect()
    }

    #[test]
    fn short_runs_are_dropped_with_a_warning() {
        let mut s = Segmenter::default();
        assert!(feed(&mut s, &[0, 1, 1, 1, 0]).is_empty());
        assert_eq!(s.take_warnings().len(), 1);
    }

    #[test]
    fn falling_edge_emits() {
        let mut s = Segmenter::default();
        let out = feed(&mut s, &[0, 1, 1, 1, 1, 0]);
        assert_eq!(out.len(), 1);
        assert_eq!(out[0].len(), 4);
        assert_eq!(out[0].label, None);
    }

    #[test]
    fn open_run_needs_flush() {
        let mut s = Segmenter::default();
        assert!(feed(&mut s, &[0, 1, 1, 1, 1]).is_empty());
        assert_eq!(s.flush().map(|seg| seg.len()), Some(4));
        assert_eq!(s.flush(), None);
        assert_eq!(Segmenter::default().flush(), None);
    }

    #[test]
    fn time_regression_is_an_error() {
        let mut s = Segmenter::default();
        s.push_event(ev(1.0, true)).unwrap();
        assert!(matches!(s.push_event(ev(0.5, true)), Err(StreamError::Sequencing { .. })));
        // Repeated time is allowed across a gate change only.
        let mut s = Segmenter::default();
        s.push_event(ev(1.0, false)).unwrap();
        s.push_event(ev(1.0, true)).unwrap();
        assert!(s.push_event(ev(1.0, true)).is_err());
    }

    #[test]
    fn overflow_discards_the_run() {
        let mut s = Segmenter::new(5);
        let mut errors = 0;
        for i in 0..8 {
            if s.push_event(ev(i as f64, true)).is_err() {
                errors += 1;
            }
        }
        assert_eq!(errors, 1);
        assert_eq!(s.push_event(ev(9.0, false)).unwrap(), None);
        assert_eq!(feed_from(&mut s, 10.0, &[1, 1, 1, 1, 0]).len(), 1);
    }

    fn feed_from(s: &mut Segmenter, t0: f64, gates: &[u8]) -> Vec<Segment> {
        gates.iter().enumerate().filter_map(|(i, &g)| s.push_event(ev(t0 + i as f64, g == 1)).unwrap()).collect()
    }

    #[test]
    fn zero_tree_model_predicts_one_at_half() {
        let model = GbdtModel::empty(default_feature_names(31), TrainConfig::default());
        let seg = Segment::new((0..5).map(|i| ev(i as f64 * 0.01, true)).collect(), None);
        let p = predict_segment(&model, &seg).unwrap();
        assert_eq!(p.probability, 0.5);
        assert_eq!(p.digit, Digit::One);
        assert_eq!(p.csv_line(), "0,0.04,1,0.500000");
    }

    #[test]
    fn non_canonical_models_are_rejected() {
        let model = GbdtModel::empty(default_feature_names(3), TrainConfig::default());
        assert!(matches!(Predictor::new(model), Err(StreamError::Incompatible(_))));
    }

    #[test]
    fn empty_and_lenient_replays() {
        let p = Predictor::new(GbdtModel::empty(default_feature_names(31), TrainConfig::default())).unwrap();
        let header = "t,ax,ay,az,gx,gy,gz,switch,label\n";
        let r = replay(header.as_bytes(), &p, ReplayOptions::default(), |_| {}).unwrap();
        assert!(r.predictions.is_empty());

        let mut text = header.to_string();
        for i in 0..5 {
            text += &format!("{},0,0,0,0,0,0,1,-1\n", i as f64 * 0.01);
        }
        text += "0.02,0,0,0,0,0,0,1,-1\n0.1,0,0,0,0,0,0,0,-1\n";
        for i in 0..5 {
            text += &format!("{},0,0,0,0,0,0,1,-1\n", 0.2 + i as f64 * 0.01);
        }
        let err = replay(text.as_bytes(), &p, ReplayOptions::default(), |_| {}).unwrap_err();
        assert!(matches!(err, StreamError::AtLine { line: 7, .. }), "{err}");
        let r = replay(text.as_bytes(), &p, ReplayOptions { lenient: true, ..Default::default() }, |_| {}).unwrap();
        assert_eq!(r.errors.len(), 1);
        assert_eq!(r.predictions.len(), 1);
        assert_eq!(r.predictions[0].t_start, 0.2);
    }
}
