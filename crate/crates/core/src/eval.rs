//! ROC curves, AUROC, confusion matrices and per-class metrics.

use std::fmt;

use thiserror::Error;

use crate::trace::Digit;

pub const DEFAULT_THRESHOLD: f64 = 0.5;

#[derive(Debug, Error, PartialEq)]
pub enum EvalError {
    #[error("{scores} scores but {labels} labels")]
    LengthMismatch { scores: usize, labels: usize },
    #[error("both classes must be present")]
    SingleClass,
    #[error("non-finite score at index {0}")]
    NonFinite(usize),
    #[error("confusion matrix is empty")]
    Empty,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RocPoint {
    pub fpr: f64,
    pub tpr: f64,
    /// Score at or above which samples are called positive; infinite at (0,0).
    pub threshold: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RocCurve {
    pub points: Vec<RocPoint>,
}

impl RocCurve {
    /// Trapezoidal area under the curve.
    pub fn area(&self) -> f64 {
        self.points.windows(2).map(|w| (w[1].fpr - w[0].fpr) * (w[1].tpr + w[0].tpr) / 2.0).sum()
    }
}

fn check(scores: &[f64], labels: &[Digit]) -> Result<(usize, usize), EvalError> {
    if scores.len() != labels.len() {
        return Err(EvalError::LengthMismatch { scores: scores.len(), labels: labels.len() });
    }
    if let Some(i) = scores.iter().position(|s| !s.is_finite()) {
        return Err(EvalError::NonFinite(i));
    }
    let pos = labels.iter().filter(|&&d| d == Digit::One).count();
    let neg = labels.len() - pos;
    if pos == 0 || neg == 0 {
        return Err(EvalError::SingleClass);
    }
    Ok((pos, neg))
}

/// ROC curve with digit one as the positive class; one vertex per distinct score.
pub fn roc_curve(scores: &[f64], labels: &[Digit]) -> Result<RocCurve, EvalError> {
    let (pos, neg) = check(scores, labels)?;
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]));
    let mut points = vec![RocPoint { fpr: 0.0, tpr: 0.0, threshold: f64::INFINITY }];
    let (mut tp, mut fp) = (0usize, 0usize);
    let mut i = 0;
    while i < order.len() {
        let s = scores[order[i]];
        while i < order.len() && scores[order[i]] == s {
            match labels[order[i]] {
                Digit::One => tp += 1,
                Digit::Zero => fp += 1,
            }
            i += 1;
        }
        points.push(RocPoint { fpr: fp as f64 / neg as f64, tpr: tp as f64 / pos as f64, threshold: s });
    }
    // The last group always lands on (1, 1); keep exactly one endpoint there.
    if points.last().is_some_and(|p| p.fpr != 1.0 || p.tpr != 1.0) {
        points.push(RocPoint { fpr: 1.0, tpr: 1.0, threshold: f64::NEG_INFINITY });
    }
    Ok(RocCurve { points })
}

/// Area under the ROC curve.
pub fn auroc(scores: &[f64], labels: &[Digit]) -> Result<f64, EvalError> {
    roc_curve(scores, labels).map(|c| c.area())
}

/// 2×2 counts; rows are the actual digit, columns the predicted digit.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct ConfusionMatrix {
    /// `counts[actual][predicted]`.
    pub counts: [[u64; 2]; 2],
}

impl ConfusionMatrix {
    /// From the layout `actual 0: (predicted 0, predicted 1)`, `actual 1: (...)`.
    pub fn from_counts(zero_zero: u64, zero_one: u64, one_zero: u64, one_one: u64) -> Self {
        ConfusionMatrix { counts: [[zero_zero, zero_one], [one_zero, one_one]] }
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().flatten().sum()
    }
}

impl fmt::Display for ConfusionMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "            pred 0  pred 1")?;
        for (d, row) in self.counts.iter().enumerate() {
            writeln!(f, "actual {d}  {:>7} {:>7}", row[0], row[1])?;
        }
        Ok(())
    }
}

/// Predicted digit for a class-one probability: one when `p >= threshold`.
pub fn predict_digit(p: f64, threshold: f64) -> Digit {
    if p >= threshold {
        Digit::One
    } else {
        Digit::Zero
    }
}

pub fn confusion(probabilities: &[f64], labels: &[Digit], threshold: f64) -> Result<ConfusionMatrix, EvalError> {
    if probabilities.len() != labels.len() {
        return Err(EvalError::LengthMismatch { scores: probabilities.len(), labels: labels.len() });
    }
    let mut cm = ConfusionMatrix::default();
    for (&p, &y) in probabilities.iter().zip(labels) {
        cm.counts[y.index()][predict_digit(p, threshold).index()] += 1;
    }
    Ok(cm)
}

/// Precision, recall and F1 of one class.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClassMetrics {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    /// Set when some ratio had a zero denominator and was reported as 0.
    pub undefined: bool,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MetricsReport {
    pub accuracy: f64,
    /// Indexed by [`Digit::index`].
    pub per_class: [ClassMetrics; 2],
}

impl MetricsReport {
    /// The seven values as percentages: accuracy, then precision/recall/F1 per digit.
    pub fn percent_row(&self) -> [f64; 7] {
        let [z, o] = self.per_class;
        [self.accuracy, z.precision, z.recall, z.f1, o.precision, o.recall, o.f1].map(|v| v * 100.0)
    }
}

impl fmt::Display for MetricsReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let r = self.percent_row();
        writeln!(f, "accuracy  p0      r0      f1_0    p1      r1      f1_1")?;
        writeln!(f, "{}", r.iter().map(|v| format!("{v:<7.2}")).collect::<Vec<_>>().join(" "))
    }
}

fn ratio(num: u64, den: u64) -> (f64, bool) {
    if den == 0 {
        (0.0, true)
    } else {
        (num as f64 / den as f64, false)
    }
}

pub fn classification_metrics(cm: &ConfusionMatrix) -> Result<MetricsReport, EvalError> {
    let total = cm.total();
    if total == 0 {
        return Err(EvalError::Empty);
    }
    let c = &cm.counts;
    let accuracy = (c[0][0] + c[1][1]) as f64 / total as f64;
    let per = |k: usize| {
        let correct = c[k][k];
        let (precision, u1) = ratio(correct, c[0][k] + c[1][k]);
        let (recall, u2) = ratio(correct, c[k][0] + c[k][1]);
        let denom = precision + recall;
        let (f1, u3) = if denom > 0.0 { (2.0 * precision * recall / denom, false) } else { (0.0, true) };
        ClassMetrics { precision, recall, f1, undefined: u1 || u2 || u3 }
    };
    Ok(MetricsReport { accuracy, per_class: [per(0), per(1)] })
}

#[cfg(test)]
mod tests {
    use super::*;
    use Digit::{One, Zero};

    #[test]
    fn hand_swept_curve() {
        let c = roc_curve(&[0.9, 0.8, 0.3, 0.1], &[One, Zero, One, Zero]).unwrap();
        let pts: Vec<(f64, f64)> = c.points.iter().map(|p| (p.fpr, p.tpr)).collect();
        assert_eq!(pts, vec![(0.0, 0.0), (0.0, 0.5), (0.5, 0.5), (0.5, 1.0), (1.0, 1.0)]);
        assert_eq!(c.area(), 0.75);
    }

    #[test]
    fn all_tied_scores() {
        let c = roc_curve(&[0.3; 6], &[One, Zero, One, Zero, Zero, One]).unwrap();
        assert_eq!(c.points.len(), 2);
        assert_eq!(c.area(), 0.5);
    }

    #[test]
    fn perfect_separation_passes_through_corner() {
        let c = roc_curve(&[0.9, 0.8, 0.2, 0.1], &[One, One, Zero, Zero]).unwrap();
        assert!(c.points.iter().any(|p| p.fpr == 0.0 && p.tpr == 1.0));
        assert_eq!(c.area(), 1.0);
    }

    #[test]
    fn single_class_is_an_error() {
        assert_eq!(auroc(&[0.1, 0.2], &[One, One]), Err(EvalError::SingleClass));
    }

    #[test]
    fn threshold_ties_predict_one() {
        let cm = confusion(&[0.5, 0.5, 0.5], &[Zero, One, Zero], DEFAULT_THRESHOLD).unwrap();
        assert_eq!(cm, ConfusionMatrix::from_counts(0, 2, 0, 1));
    }

    #[test]
    fn zero_denominators_are_flagged() {
        let r = classification_metrics(&ConfusionMatrix::from_counts(0, 3, 0, 2)).unwrap();
        assert_eq!(r.per_class[0].precision, 0.0);
        assert!(r.per_class[0].undefined);
        assert!(!r.per_class[1].undefined);
        assert_eq!(classification_metrics(&ConfusionMatrix::default()), Err(EvalError::Empty));
    }
}
