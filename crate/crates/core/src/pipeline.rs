//! End-to-end experiment: generate, split, search, retrain, evaluate, replay.

use std::fmt::{self, Write as _};
use std::str::FromStr;

use thiserror::Error;

use crate::eval::{
    auroc, classification_metrics, confusion, roc_curve, ConfusionMatrix, EvalError, MetricsReport, RocCurve, DEFAULT_THRESHOLD,
};
use crate::features::{extract_matrix, feature_names, FeatureError, FeatureMatrix};
use crate::gbdt::{fit_named, GbdtError, GbdtModel, TrainConfig};
use crate::pca::{fit_pca, loading_report, LoadingEntry, PcaError, PcaModel};
use crate::select::{
    baseline_config, default_grid, grid_search, holdout_auroc, retrain_final, split_indices, GridResult, LabeledRows, SelectError,
    SplitIndices, SplitSpec,
};
use crate::stream::{replay, Prediction, Predictor, ReplayOptions, StreamError};
use crate::synth::{corpus_slot, generate_corpus, generate_segment, segment_seed, GeneratorConfig, SynthError};
use crate::trace::{write_trace_string, Dataset, Digit, LabelPolicy, Segment, TraceError};

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("synth: {0}")]
    Synth(#[from] SynthError),
    #[error("features: {0}")]
    Features(#[from] FeatureError),
    #[error("pca: {0}")]
    Pca(#[from] PcaError),
    #[error("select: {0}")]
    Select(#[from] SelectError),
    #[error("gbdt: {0}")]
    Gbdt(#[from] GbdtError),
    #[error("eval: {0}")]
    Eval(#[from] EvalError),
    #[error("stream: {0}")]
    Stream(#[from] StreamError),
    #[error("trace: {0}")]
    Trace(#[from] TraceError),
}

/// How the reduced model sees the data.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum PcaMode {
    /// Scores on the leading principal components, fit on the training split.
    #[default]
    Projection,
    /// The original features that dominate the leading components.
    Loadings,
}

impl fmt::Display for PcaMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            PcaMode::Projection => "projection",
            PcaMode::Loadings => "loadings",
        })
    }
}

impl FromStr for PcaMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "projection" => Ok(PcaMode::Projection),
            "loadings" => Ok(PcaMode::Loadings),
            other => Err(format!("unknown PCA mode `{other}` (expected projection or loadings)")),
        }
    }
}

#[derive(Debug, Clone)]
pub struct PipelineOptions {
    pub generator: GeneratorConfig,
    pub n_per_class: usize,
    /// Seeds the corpus, the split permutation and the fold assignment.
    pub seed: u64,
    pub split: SplitSpec,
    pub grid: Vec<TrainConfig>,
    pub folds: usize,
    pub pca_components: usize,
    pub pca_mode: PcaMode,
    /// Fresh samples per class for the real-time replay.
    pub demo_per_class: usize,
}

impl Default for PipelineOptions {
    fn default() -> Self {
        PipelineOptions {
            generator: GeneratorConfig::default(),
            n_per_class: 200,
            seed: 42,
            split: SplitSpec { seed: 42, ..Default::default() },
            grid: default_grid(),
            folds: 5,
            pca_components: 3,
            pca_mode: PcaMode::Projection,
            demo_per_class: 5,
        }
    }
}

impl PipelineOptions {
    /// Defaults with every seed set to `seed`.
    pub fn with_seed(seed: u64) -> Self {
        PipelineOptions { seed, split: SplitSpec { seed, ..Default::default() }, ..Default::default() }
    }
}

/// Search, fit and test scores for one feature view.
#[derive(Debug, Clone)]
pub struct ModelOutcome {
    pub feature_names: Vec<String>,
    pub grid: GridResult,
    /// Fit on the training split with the selected config.
    pub model: GbdtModel,
    pub test_probabilities: Vec<f64>,
    pub test_auroc: f64,
    pub roc: RocCurve,
    pub confusion: ConfusionMatrix,
    pub metrics: MetricsReport,
}

#[derive(Debug, Clone)]
pub struct PipelineReport {
    pub options: PipelineOptions,
    pub corpus: Dataset,
    pub features: FeatureMatrix,
    pub split: SplitIndices,
    /// PCA over the whole corpus, for the loading table.
    pub corpus_pca: PcaModel,
    pub loadings: Vec<LoadingEntry>,
    pub baseline_val_auroc: f64,
    pub full: ModelOutcome,
    pub reduced: ModelOutcome,
    /// Best full-feature config refit on every sample.
    pub final_model: GbdtModel,
    /// Streaming predictions on the corpus that match batch probabilities bit for bit.
    pub stream_agreement: usize,
    pub demo_segments: Vec<Segment>,
    pub demo_predictions: Vec<Prediction>,
}

impl PipelineReport {
    pub fn demo_correct(&self) -> usize {
        self.demo_segments.iter().zip(&self.demo_predictions).filter(|(s, p)| s.label == Some(p.digit)).count()
    }

    pub fn demo_confusion(&self) -> ConfusionMatrix {
        let mut cm = ConfusionMatrix::default();
        for (s, p) in self.demo_segments.iter().zip(&self.demo_predictions) {
            if let Some(d) = s.label {
                cm.counts[d.index()][p.digit.index()] += 1;
            }
        }
        cm
    }

    /// Top-k loading features, in component order.
    pub fn top_features(&self) -> Vec<&str> {
        self.loadings.iter().map(|l| l.feature.as_str()).collect()
    }

    pub fn summary(&self) -> String {
        let mut s = String::new();
        let o = &self.options;
        let [zeros, ones] = self.corpus.class_counts();
        let _ = writeln!(s, "corpus: {} segments ({zeros} zero, {ones} one), seed {}", self.corpus.len(), o.seed);
        let _ = writeln!(s, "split: train {} / val {} / test {}", self.split.train.len(), self.split.val.len(), self.split.test.len());
        let _ = writeln!(s, "\nPCA loadings (corpus-wide, top {}):", self.loadings.len());
        let _ = writeln!(s, "component  feature     loading   explained");
        for l in &self.loadings {
            let _ = writeln!(
                s,
                "PC{:<8} {:<11} {:>8.4}  {:>8.4}",
                l.component + 1,
                l.feature,
                l.loading,
                self.corpus_pca.explained_variance_ratio[l.component]
            );
        }
        let _ = writeln!(s, "\ngrid: {} configurations, {}-fold CV", self.full.grid.entries.len(), o.folds);
        let _ = writeln!(s, "baseline ({}) validation AUROC: {:.4}", baseline_config(), self.baseline_val_auroc);
        for (label, m) in [("full (31 features)", &self.full), (&*format!("PCA-{} ({})", o.pca_components, o.pca_mode), &self.reduced)] {
            let best = m.grid.best_entry();
            let _ = writeln!(s, "\n{label}");
            let _ = writeln!(s, "  best config: {}", best.config);
            let _ = writeln!(s, "  validation AUROC {:.4}, mean CV AUROC {:.4}", best.val_auroc, best.mean_cv_auroc);
            let _ = writeln!(s, "  test AUROC {:.4}", m.test_auroc);
            let _ = write!(s, "{}", indent(&m.confusion.to_string()));
            let _ = write!(s, "{}", indent(&m.metrics.to_string()));
        }
        let _ = writeln!(s, "\ntest AUROC: full {:.4} vs PCA-{} {:.4}", self.full.test_auroc, o.pca_components, self.reduced.test_auroc);
        let _ = writeln!(s, "streaming = batch on corpus: {}/{}", self.stream_agreement, self.corpus.len());
        let _ = writeln!(s, "\nreal-time replay: {}/{} correct", self.demo_correct(), self.demo_segments.len());
        let _ = write!(s, "{}", indent(&self.demo_confusion().to_string()));
        s
    }
}

fn indent(text: &str) -> String {
    text.lines().map(|l| format!("  {l}\n")).collect()
}

/// Fresh labeled segments from indices past the corpus, laid out like a corpus.
pub fn demo_segments(config: &GeneratorConfig, seed: u64, first_index: usize, per_class: usize) -> Result<Vec<Segment>, SynthError> {
    let slot = corpus_slot(config);
    let mut out = Vec::with_capacity(2 * per_class);
    for digit in Digit::ALL {
        for i in 0..per_class {
            let mut seg = generate_segment(digit, config, segment_seed(seed, digit, (first_index + i) as u64))?;
            let offset = out.len() as f64 * slot;
            seg.samples.iter_mut().for_each(|s| s.t += offset);
            out.push(seg);
        }
    }
    Ok(out)
}

fn outcome(
    names: Vec<String>,
    train: &LabeledRows,
    val: &LabeledRows,
    test: &LabeledRows,
    opts: &PipelineOptions,
) -> Result<ModelOutcome, PipelineError> {
    let grid = grid_search(train, val, &opts.grid, opts.folds, opts.seed)?;
    let model = fit_named(&train.rows, &train.targets(), names.clone(), grid.best_config())?;
    let probs = model.predict_proba_batch(&test.rows)?;
    let roc = roc_curve(&probs, &test.labels)?;
    let cm = confusion(&probs, &test.labels, DEFAULT_THRESHOLD)?;
    Ok(ModelOutcome {
        feature_names: names,
        test_auroc: auroc(&probs, &test.labels)?,
        metrics: classification_metrics(&cm)?,
        confusion: cm,
        roc,
        test_probabilities: probs,
        model,
        grid,
    })
}

fn columns(rows: &LabeledRows, cols: &[usize]) -> LabeledRows {
    LabeledRows::new(rows.rows.iter().map(|r| cols.iter().map(|&j| r[j]).collect()).collect(), rows.labels.clone())
}

pub fn run_pipeline(opts: &PipelineOptions) -> Result<PipelineReport, PipelineError> {
    let corpus = generate_corpus(opts.n_per_class, &opts.generator, opts.seed)?;
    let features = extract_matrix(&corpus)?;
    let all = LabeledRows::from(&features);

    let corpus_pca = fit_pca(&features.rows)?;
    let loadings = loading_report(&corpus_pca, opts.pca_components, feature_names())?;
    for w in corpus_pca.warnings(feature_names()) {
        log::warn!("{w}");
    }

    let split = split_indices(all.len(), &opts.split)?;
    let (train, val, test) = (all.select(&split.train), all.select(&split.val), all.select(&split.test));
    let baseline_val_auroc = holdout_auroc(&train, &val, &baseline_config())?;
    log::info!("searching {} configurations on the full feature set", opts.grid.len());
    let full_names = feature_names().iter().map(|s| s.to_string()).collect();
    let full = outcome(full_names, &train, &val, &test, opts)?;

    let k = opts.pca_components;
    let reduced = match opts.pca_mode {
        PcaMode::Projection => {
            let pca = fit_pca(&train.rows)?.truncated(k)?;
            let project =
                |r: &LabeledRows| -> Result<LabeledRows, PcaError> { Ok(LabeledRows::new(pca.transform(&r.rows)?, r.labels.clone())) };
            let names = (1..=k).map(|i| format!("pc{i}")).collect();
            outcome(names, &project(&train)?, &project(&val)?, &project(&test)?, opts)?
        }
        PcaMode::Loadings => {
            let cols: Vec<usize> = loadings.iter().map(|l| l.feature_index).collect();
            let names = loadings.iter().map(|l| l.feature.clone()).collect();
            outcome(names, &columns(&train, &cols), &columns(&val, &cols), &columns(&test, &cols), opts)?
        }
    };

    let final_model = retrain_final(&all, full.grid.best_config())?;
    let predictor = Predictor::new(final_model.clone())?;

    let corpus_text = write_trace_string(corpus.segments(), LabelPolicy::Required)?;
    let streamed = replay(corpus_text.as_bytes(), &predictor, ReplayOptions::default(), |_| {})?;
    let batch = final_model.predict_proba_batch(&features.rows)?;
    let stream_agreement = streamed.predictions.iter().zip(&batch).filter(|(p, b)| p.probability.to_bits() == b.to_bits()).count();

    let demo = demo_segments(&opts.generator, opts.seed, opts.n_per_class, opts.demo_per_class)?;
    let demo_text = write_trace_string(&demo, LabelPolicy::Required)?;
    let demo_predictions = replay(demo_text.as_bytes(), &predictor, ReplayOptions::default(), |_| {})?.predictions;

    Ok(PipelineReport {
        options: opts.clone(),
        corpus,
        features,
        split,
        corpus_pca,
        loadings,
        baseline_val_auroc,
        full,
        reduced,
        final_model,
        stream_agreement,
        demo_segments: demo,
        demo_predictions,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gbdt::TreeAlgorithm;
    use crate::select::GridAxes;

    #[test]
    fn small_run_is_consistent() {
        let axes =
            GridAxes { n_estimators: vec![20], tree_algorithm: vec![TreeAlgorithm::Hist], max_depth: vec![2], learning_rate: vec![0.3] };
        let opts = PipelineOptions {
            n_per_class: 30,
            grid: axes.product(&TrainConfig::default()),
            demo_per_class: 2,
            ..PipelineOptions::with_seed(5)
        };
        let r = run_pipeline(&opts).unwrap();
        assert_eq!(r.corpus.len(), 60);
        assert_eq!(r.split.train.len(), 36);
        assert_eq!(r.stream_agreement, 60);
        assert_eq!(r.demo_predictions.len(), 4);
        assert_eq!(r.reduced.model.n_features(), 3);
        assert!(r.summary().contains("real-time replay"));
        let again = run_pipeline(&opts).unwrap();
        assert_eq!(again.final_model, r.final_model);
    }

    #[test]
    fn pca_mode_parses() {
        assert_eq!("loadings".parse::<PcaMode>(), Ok(PcaMode::Loadings));
        assert!("other".parse::<PcaMode>().is_err());
    }
}
