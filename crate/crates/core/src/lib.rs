//! Digit recognition from wrist-worn IMU traces.
//!
//! Traces are split into switch-gated segments ([`trace`]), reduced to 31
//! time-independent statistics ([`features`]) and classified by Newton-boosted
//! trees ([`gbdt`]). [`select`] tunes the trees, [`eval`] scores them and
//! [`stream`] runs the same path on a live sample stream. [`synth`] generates
//! labeled corpora and [`pipeline`] chains everything into one experiment.

pub mod eval;
pub mod features;
pub mod gbdt;
pub mod numfmt;
pub mod pca;
pub mod pipeline;
pub mod select;
pub mod stream;
pub mod synth;
pub mod trace;

pub use eval::{auroc, classification_metrics, confusion, roc_curve, ConfusionMatrix, EvalError, MetricsReport, RocCurve};
pub use features::{extract_features, extract_matrix, feature_names, EngineeredFeatures, FeatureError, FeatureMatrix, N_FEATURES};
pub use gbdt::{fit, load_model, save_model, GbdtError, GbdtModel, TrainConfig, TreeAlgorithm};
pub use pca::{fit_pca, loading_report, PcaError, PcaModel};
pub use pipeline::{run_pipeline, PcaMode, PipelineError, PipelineOptions, PipelineReport};
pub use select::{default_grid, grid_search, kfold, retrain_final, split_dataset, GridResult, SelectError, SplitSpec};
pub use stream::{predict_segment, replay, Prediction, Predictor, Segmenter, StreamError};
pub use synth::{generate_corpus, generate_segment, GeneratorConfig, SynthError};
pub use trace::{parse_trace_csv, write_trace_csv, Dataset, Digit, ImuSample, Segment, TraceError};
