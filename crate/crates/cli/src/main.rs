use std::fs::{self, File};
use std::io::{self, BufReader, BufWriter, Read, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use wristdigit::features::{read_feature_csv, write_feature_csv, FeatureTable};
use wristdigit::gbdt::fit_named;
use wristdigit::pipeline::PcaMode;
use wristdigit::select::{grid_search, split_indices, GridAxes, LabeledRows, SplitSpec};
use wristdigit::stream::{replay, Predictor, ReplayOptions};
use wristdigit::synth::{generate_corpus, GeneratorConfig};
use wristdigit::trace::{parse_trace_csv, validate_segment, write_trace_csv, LabelPolicy};
use wristdigit::{
    auroc, classification_metrics, confusion, extract_features, feature_names, fit_pca, load_model, loading_report, roc_curve,
    run_pipeline, save_model, Digit, PipelineOptions, TrainConfig, TreeAlgorithm,
};

/// Flag combinations that parse but make no sense; reported with exit code 2.
#[derive(Debug)]
struct UsageError(String);

impl std::fmt::Display for UsageError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

fn usage(msg: impl Into<String>) -> anyhow::Error {
    UsageError(msg.into()).into()
}

#[derive(Parser)]
#[command(name = "wristdigit", version, about = "Digit recognition from wrist-worn IMU traces")]
struct Cli {
    /// Seed for every random choice.
    #[arg(long, global = true, default_value_t = 42)]
    seed: u64,
    /// Only print errors to standard error.
    #[arg(long, global = true)]
    quiet: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write a synthetic labeled corpus as trace CSV.
    Generate(GenerateArgs),
    /// Turn a trace CSV into a feature CSV, one row per segment.
    Extract(ExtractArgs),
    /// Explained variance and dominant loadings of a feature CSV.
    PcaReport(PcaReportArgs),
    /// Fit a boosted-tree model on a labeled feature CSV.
    Train(TrainArgs),
    /// Exhaustive hyperparameter search with k-fold CV and a validation split.
    GridSearch(GridSearchArgs),
    /// Score a model on a labeled feature or trace CSV.
    Evaluate(EvaluateArgs),
    /// Stream a trace CSV through the segmenter and print one prediction per segment.
    Replay(ReplayArgs),
    /// Generate, split, search, retrain, evaluate and replay in one run.
    Pipeline(PipelineArgs),
}

#[derive(Args)]
struct GeneratorArgs {
    /// Samples per second.
    #[arg(long, default_value_t = 100.0)]
    sample_rate: f64,
    /// Duration range of a zero, in seconds.
    #[arg(long, value_delimiter = ',', num_args = 2, default_values_t = [0.8, 1.6])]
    duration_zero: Vec<f64>,
    /// Duration range of a one, in seconds.
    #[arg(long, value_delimiter = ',', num_args = 2, default_values_t = [0.4, 0.9])]
    duration_one: Vec<f64>,
    /// Writing box edge in metres.
    #[arg(long, default_value_t = 0.10)]
    extent: f64,
    /// Accelerometer noise standard deviation (m/s²).
    #[arg(long, default_value_t = 0.05)]
    accel_noise: f64,
    /// Angle noise standard deviation (degrees).
    #[arg(long, default_value_t = 0.5)]
    angle_noise: f64,
    /// Z-tilt amplitude of a zero (degrees).
    #[arg(long, default_value_t = 12.0)]
    tilt_zero: f64,
    /// Z-tilt ramp of a one (degrees).
    #[arg(long, default_value_t = 4.0)]
    tilt_one: f64,
}

impl GeneratorArgs {
    fn config(&self) -> GeneratorConfig {
        GeneratorConfig {
            sample_rate: self.sample_rate,
            duration_range_zero: [self.duration_zero[0], self.duration_zero[1]],
            duration_range_one: [self.duration_one[0], self.duration_one[1]],
            stroke_extent: self.extent,
            accel_noise_sd: self.accel_noise,
            angle_noise_sd: self.angle_noise,
            tilt_gain_zero: self.tilt_zero,
            tilt_gain_one: self.tilt_one,
            ..Default::default()
        }
    }
}

#[derive(Args)]
struct GenerateArgs {
    #[arg(long, default_value_t = 200)]
    n_per_class: usize,
    /// Output trace CSV; standard output when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
    #[command(flatten)]
    generator: GeneratorArgs,
}

#[derive(Args)]
struct ExtractArgs {
    /// Input trace CSV.
    #[arg(long = "in")]
    input: PathBuf,
    /// Output feature CSV; standard output when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct PcaReportArgs {
    /// Input feature CSV.
    #[arg(long = "in")]
    input: PathBuf,
    /// Number of leading components to report.
    #[arg(long, default_value_t = 3)]
    components: usize,
    /// Also write the loading table as CSV.
    #[arg(long)]
    csv: Option<PathBuf>,
}

#[derive(Args)]
struct TrainFlags {
    #[arg(long)]
    n_estimators: Option<usize>,
    #[arg(long)]
    tree_algorithm: Option<TreeAlgorithm>,
    #[arg(long)]
    max_depth: Option<usize>,
    #[arg(long)]
    learning_rate: Option<f64>,
    /// L2 penalty on leaf weights.
    #[arg(long)]
    lambda: Option<f64>,
    /// Histogram bins per feature for the hist algorithm.
    #[arg(long)]
    n_bins: Option<usize>,
    #[arg(long)]
    min_child_weight: Option<f64>,
}

impl TrainFlags {
    fn apply(&self, mut c: TrainConfig) -> TrainConfig {
        macro_rules! set {
            ($($f:ident),*) => { $(if let Some(v) = self.$f { c.$f = v; })* };
        }
        set!(n_estimators, tree_algorithm, max_depth, learning_rate, lambda, n_bins, min_child_weight);
        c
    }
}

#[derive(Args)]
struct TrainArgs {
    /// Labeled feature CSV.
    #[arg(long = "in")]
    input: PathBuf,
    /// Model file to write.
    #[arg(long)]
    out: PathBuf,
    /// JSON config written by grid-search; individual flags override it.
    /// Defaults: 100 trees, exact, depth 6, rate 0.1, lambda 1, 256 bins, min child weight 1.
    #[arg(long)]
    config: Option<PathBuf>,
    #[command(flatten)]
    flags: TrainFlags,
}

#[derive(Args)]
struct AxisArgs {
    /// Tree counts to search.
    #[arg(long, value_delimiter = ',', default_values_t = [1000, 2000, 3000, 4000, 5000])]
    n_estimators: Vec<usize>,
    /// Split algorithms to search.
    #[arg(long, value_delimiter = ',', default_values_t = [TreeAlgorithm::Hist, TreeAlgorithm::Exact])]
    tree_algorithm: Vec<TreeAlgorithm>,
    /// Depths to search.
    #[arg(long, value_delimiter = ',', default_values_t = [1, 2, 3, 4, 5, 6, 7, 8])]
    max_depth: Vec<usize>,
    /// Learning rates to search.
    #[arg(long, value_delimiter = ',', default_values_t = [0.1, 0.3, 0.5])]
    learning_rate: Vec<f64>,
    /// Cross-validation folds.
    #[arg(long, default_value_t = 5)]
    folds: usize,
}

impl AxisArgs {
    fn grid(&self) -> Vec<TrainConfig> {
        GridAxes {
            n_estimators: self.n_estimators.clone(),
            tree_algorithm: self.tree_algorithm.clone(),
            max_depth: self.max_depth.clone(),
            learning_rate: self.learning_rate.clone(),
        }
        .product(&TrainConfig::default())
    }
}

#[derive(Args)]
struct GridSearchArgs {
    /// Labeled feature CSV; split 60/20/20 by seed unless --val is given.
    #[arg(long = "in")]
    input: PathBuf,
    /// Separate validation feature CSV; --in is then used whole for training.
    #[arg(long)]
    val: Option<PathBuf>,
    /// Per-config CSV report; standard output when omitted.
    #[arg(long)]
    report: Option<PathBuf>,
    /// Where to write the selected config as JSON.
    #[arg(long, default_value = "best_config.json")]
    best: PathBuf,
    #[command(flatten)]
    axes: AxisArgs,
}

#[derive(Args)]
struct EvaluateArgs {
    #[arg(long)]
    model: PathBuf,
    /// Labeled feature CSV or trace CSV.
    #[arg(long = "in")]
    input: PathBuf,
    /// Write ROC points as CSV.
    #[arg(long)]
    roc: Option<PathBuf>,
    /// Probability at or above which digit one is predicted.
    #[arg(long, default_value_t = 0.5)]
    threshold: f64,
}

#[derive(Args)]
struct ReplayArgs {
    #[arg(long)]
    model: PathBuf,
    /// Trace CSV to stream.
    #[arg(long)]
    input: PathBuf,
    /// Pace rows by their time stamps.
    #[arg(long)]
    real_time: bool,
    /// Skip bad rows and resume at the next disengaged row.
    #[arg(long)]
    lenient: bool,
}

#[derive(Args)]
struct PipelineArgs {
    #[arg(long, default_value_t = 200)]
    n_per_class: usize,
    /// Directory for corpus, features, grid report, models and summary.
    #[arg(long)]
    out_dir: Option<PathBuf>,
    /// Reduced model input: principal component scores or the dominant original features.
    #[arg(long, default_value_t = PcaMode::Projection)]
    pca_mode: PcaMode,
    /// Components in the loading table and the reduced model.
    #[arg(long, default_value_t = 3)]
    components: usize,
    /// Fresh samples per class for the real-time replay.
    #[arg(long, default_value_t = 5)]
    demo_per_class: usize,
    #[command(flatten)]
    axes: AxisArgs,
    #[command(flatten)]
    generator: GeneratorArgs,
}

fn open(path: &Path) -> Result<BufReader<File>> {
    Ok(BufReader::new(File::open(path).with_context(|| format!("cannot open {}", path.display()))?))
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    Ok(BufWriter::new(File::create(path).with_context(|| format!("cannot create {}", path.display()))?))
}

fn output(path: Option<&Path>) -> Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(create(p)?),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

fn read_table(path: &Path) -> Result<FeatureTable> {
    read_feature_csv(open(path)?).with_context(|| format!("features: {}", path.display()))
}

fn labeled(table: &FeatureTable, path: &Path) -> Result<LabeledRows> {
    let labels = table.digits().with_context(|| format!("features: {} needs labels", path.display()))?;
    Ok(LabeledRows::new(table.rows.clone(), labels))
}

/// Features and labels from either file format, told apart by the header.
fn read_labeled_any(path: &Path) -> Result<(Vec<String>, LabeledRows)> {
    let mut text = String::new();
    open(path)?.read_to_string(&mut text).with_context(|| format!("cannot read {}", path.display()))?;
    if text.starts_with("t,") {
        let segments = parse_trace_csv(text.as_bytes()).with_context(|| format!("trace: {}", path.display()))?;
        let mut rows = LabeledRows::default();
        for (i, seg) in segments.iter().enumerate() {
            if !validate_segment(seg).is_empty() {
                log::warn!("skipping invalid segment {i} starting at t={}", seg.t_start());
                continue;
            }
            let f = extract_features(seg).with_context(|| format!("features: segment {i}"))?;
            rows.rows.push(f.0.to_vec());
            rows.labels.push(seg.label.with_context(|| format!("trace: segment {i} has no label"))?);
        }
        Ok((feature_names().iter().map(|s| s.to_string()).collect(), rows))
    } else {
        let table = read_feature_csv(text.as_bytes()).with_context(|| format!("features: {}", path.display()))?;
        let rows = labeled(&table, path)?;
        Ok((table.names, rows))
    }
}

fn generate(seed: u64, args: &GenerateArgs) -> Result<()> {
    let config = args.generator.config();
    config.validate().map_err(|e| usage(e.to_string()))?;
    let corpus = generate_corpus(args.n_per_class, &config, seed).context("synth")?;
    write_trace_csv(corpus.segments(), output(args.out.as_deref())?, LabelPolicy::Required).context("trace")?;
    Ok(())
}

fn extract(args: &ExtractArgs) -> Result<()> {
    let segments = parse_trace_csv(open(&args.input)?).with_context(|| format!("trace: {}", args.input.display()))?;
    let mut table = FeatureTable { names: feature_names().iter().map(|s| s.to_string()).collect(), ..Default::default() };
    for (i, seg) in segments.iter().enumerate() {
        let violations = validate_segment(seg);
        if !violations.is_empty() {
            log::warn!("skipping segment {i} at t={}: {}", seg.t_start(), violations[0]);
            continue;
        }
        table.rows.push(extract_features(seg).with_context(|| format!("features: segment {i}"))?.0.to_vec());
        table.labels.push(seg.label);
    }
    write_feature_csv(&table, output(args.out.as_deref())?).context("features")?;
    Ok(())
}

fn pca_report(args: &PcaReportArgs) -> Result<()> {
    let table = read_table(&args.input)?;
    if args.components == 0 || args.components > table.names.len() {
        return Err(usage(format!("--components must be between 1 and {}", table.names.len())));
    }
    let model = fit_pca(&table.rows).context("pca")?;
    let names: Vec<&str> = table.names.iter().map(String::as_str).collect();
    for w in model.warnings(&names) {
        log::warn!("{w}");
    }
    let loadings = loading_report(&model, args.components, &names).context("pca")?;
    let mut out = BufWriter::new(io::stdout().lock());
    writeln!(out, "explained variance ratio")?;
    let mut cum = 0.0;
    for (i, r) in model.explained_variance_ratio.iter().enumerate() {
        cum += r;
        writeln!(out, "PC{:<3} {r:.6}  cumulative {cum:.6}", i + 1)?;
    }
    writeln!(out, "\ncomponent  feature     loading")?;
    for l in &loadings {
        writeln!(out, "PC{:<8} {:<11} {:>8.4}", l.component + 1, l.feature, l.loading)?;
    }
    if let Some(path) = &args.csv {
        let mut w = create(path)?;
        writeln!(w, "component,feature,loading,explained_variance_ratio")?;
        for l in &loadings {
            writeln!(w, "{},{},{},{}", l.component + 1, l.feature, l.loading, model.explained_variance_ratio[l.component])?;
        }
    }
    Ok(())
}

fn train(seed: u64, args: &TrainArgs) -> Result<()> {
    let base = match &args.config {
        Some(p) => serde_json::from_reader(open(p)?).with_context(|| format!("config: {}", p.display()))?,
        None => TrainConfig { seed, ..Default::default() },
    };
    let config = args.flags.apply(base);
    config.validate().map_err(|e| usage(e.to_string()))?;
    let table = read_table(&args.input)?;
    let rows = labeled(&table, &args.input)?;
    let model = fit_named(&rows.rows, &rows.targets(), table.names.clone(), &config).context("gbdt")?;
    fs::write(&args.out, save_model(&model)).with_context(|| format!("cannot write {}", args.out.display()))?;
    log::info!("trained {} trees on {} rows", model.trees.len(), rows.len());
    Ok(())
}

fn grid_search_cmd(seed: u64, args: &GridSearchArgs) -> Result<()> {
    let grid = args.axes.grid();
    if grid.is_empty() {
        return Err(usage("every grid axis needs at least one value"));
    }
    for c in &grid {
        c.validate().map_err(|e| usage(e.to_string()))?;
    }
    let table = read_table(&args.input)?;
    let all = labeled(&table, &args.input)?;
    let (train, val) = match &args.val {
        Some(p) => (all, labeled(&read_table(p)?, p)?),
        None => {
            let s = split_indices(all.len(), &SplitSpec { seed, ..Default::default() }).context("select")?;
            (all.select(&s.train), all.select(&s.val))
        }
    };
    if args.axes.folds < 2 || args.axes.folds > train.len() {
        return Err(usage(format!("--folds must be between 2 and {}", train.len())));
    }
    let result = grid_search(&train, &val, &grid, args.axes.folds, seed).context("select")?;
    result.write_csv(output(args.report.as_deref())?).context("select")?;
    let mut w = create(&args.best)?;
    serde_json::to_writer_pretty(&mut w, result.best_config())?;
    writeln!(w)?;
    let best = result.best_entry();
    log::info!("best config #{}: {} (validation AUROC {:.4})", best.index, best.config, best.val_auroc);
    Ok(())
}

fn evaluate(args: &EvaluateArgs) -> Result<()> {
    if !(0.0..=1.0).contains(&args.threshold) {
        return Err(usage("--threshold must lie in [0, 1]"));
    }
    let model = load_model(&fs::read(&args.model).with_context(|| format!("cannot read {}", args.model.display()))?)
        .with_context(|| format!("model: {}", args.model.display()))?;
    let (names, data) = read_labeled_any(&args.input)?;
    if names != model.feature_names {
        bail!("model: feature columns of {} do not match the model", args.input.display());
    }
    let probs = model.predict_proba_batch(&data.rows).context("gbdt")?;
    let roc = roc_curve(&probs, &data.labels).context("eval")?;
    let cm = confusion(&probs, &data.labels, args.threshold).context("eval")?;
    let metrics = classification_metrics(&cm).context("eval")?;
    let mut out = BufWriter::new(io::stdout().lock());
    writeln!(out, "samples: {}", data.len())?;
    writeln!(out, "AUROC: {:.6}", auroc(&probs, &data.labels).context("eval")?)?;
    writeln!(out, "\nconfusion matrix (threshold {}):\n{cm}", args.threshold)?;
    write!(out, "{metrics}")?;
    if let Some(path) = &args.roc {
        let mut w = create(path)?;
        writeln!(w, "fpr,tpr,threshold")?;
        for p in &roc.points {
            writeln!(w, "{},{},{}", p.fpr, p.tpr, p.threshold)?;
        }
    }
    Ok(())
}

fn replay_cmd(args: &ReplayArgs) -> Result<bool> {
    let model = load_model(&fs::read(&args.model).with_context(|| format!("cannot read {}", args.model.display()))?)
        .with_context(|| format!("model: {}", args.model.display()))?;
    let predictor = Predictor::new(model).context("stream")?;
    log::info!("model {}", predictor.id());
    let options = ReplayOptions { real_time: args.real_time, lenient: args.lenient, max_samples: None };
    let stdout = io::stdout();
    let report = replay(open(&args.input)?, &predictor, options, |p| {
        let mut out = stdout.lock();
        let _ = writeln!(out, "{}", p.csv_line());
        let _ = out.flush();
    })
    .context("stream")?;
    for e in &report.errors {
        eprintln!("error: stream: {e}");
    }
    Ok(report.errors.is_empty())
}

fn pipeline(seed: u64, args: &PipelineArgs) -> Result<()> {
    let generator = args.generator.config();
    generator.validate().map_err(|e| usage(e.to_string()))?;
    let grid = args.axes.grid();
    if grid.is_empty() {
        return Err(usage("every grid axis needs at least one value"));
    }
    if args.components == 0 || args.components > feature_names().len() {
        return Err(usage("--components must be between 1 and 31"));
    }
    let opts = PipelineOptions {
        generator,
        n_per_class: args.n_per_class,
        grid,
        folds: args.axes.folds,
        pca_components: args.components,
        pca_mode: args.pca_mode,
        demo_per_class: args.demo_per_class,
        ..PipelineOptions::with_seed(seed)
    };
    let report = run_pipeline(&opts)?;
    let summary = report.summary();
    print!("{summary}");
    if let Some(dir) = &args.out_dir {
        fs::create_dir_all(dir).with_context(|| format!("cannot create {}", dir.display()))?;
        fs::write(dir.join("summary.txt"), &summary)?;
        write_trace_csv(report.corpus.segments(), create(&dir.join("corpus.csv"))?, LabelPolicy::Required)?;
        write_trace_csv(&report.demo_segments, create(&dir.join("realtime_demo.csv"))?, LabelPolicy::Required)?;
        write_feature_csv(&FeatureTable::from(&report.features), create(&dir.join("features.csv"))?)?;
        report.full.grid.write_csv(create(&dir.join("grid_full.csv"))?)?;
        report.reduced.grid.write_csv(create(&dir.join("grid_pca.csv"))?)?;
        let mut w = create(&dir.join("best_config.json"))?;
        serde_json::to_writer_pretty(&mut w, report.full.grid.best_config())?;
        writeln!(w)?;
        fs::write(dir.join("model_final.json"), save_model(&report.final_model))?;
        fs::write(dir.join("model_full_train.json"), save_model(&report.full.model))?;
        fs::write(dir.join("model_pca_train.json"), save_model(&report.reduced.model))?;
        for (name, roc) in [("roc_full.csv", &report.full.roc), ("roc_pca.csv", &report.reduced.roc)] {
            let mut w = create(&dir.join(name))?;
            writeln!(w, "fpr,tpr,threshold")?;
            for p in &roc.points {
                writeln!(w, "{},{},{}", p.fpr, p.tpr, p.threshold)?;
            }
        }
        let mut w = create(&dir.join("realtime_predictions.csv"))?;
        writeln!(w, "t_start,t_end,digit,probability,actual")?;
        for (p, s) in report.demo_predictions.iter().zip(&report.demo_segments) {
            writeln!(w, "{},{}", p.csv_line(), s.label.map_or(-1, |d: Digit| d.index() as i64))?;
        }
    }
    Ok(())
}

fn run(cli: &Cli) -> Result<bool> {
    match &cli.command {
        Command::Generate(a) => generate(cli.seed, a)?,
        Command::Extract(a) => extract(a)?,
        Command::PcaReport(a) => pca_report(a)?,
        Command::Train(a) => train(cli.seed, a)?,
        Command::GridSearch(a) => grid_search_cmd(cli.seed, a)?,
        Command::Evaluate(a) => evaluate(a)?,
        Command::Replay(a) => return replay_cmd(a),
        Command::Pipeline(a) => pipeline(cli.seed, a)?,
    }
    Ok(true)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    let level = if cli.quiet { "error" } else { "warn" };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).format_timestamp(None).init();
    match run(&cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(if e.is::<UsageError>() { 2 } else { 1 })
        }
    }
}
