use criterion::{criterion_group, criterion_main, BatchSize, Criterion};
use std::hint::black_box;
use wristdigit::stream::ReplayOptions;
use wristdigit::trace::{write_trace_string, LabelPolicy};
use wristdigit::{
    extract_features, extract_matrix, fit, fit_pca, generate_corpus, replay, GeneratorConfig, Predictor, TrainConfig, TreeAlgorithm,
};

fn benches(c: &mut Criterion) {
    let corpus = generate_corpus(200, &GeneratorConfig::default(), 42).unwrap();
    let m = extract_matrix(&corpus).unwrap();
    let targets = m.targets();

    c.bench_function("extract_features/400 segments", |b| {
        b.iter(|| corpus.segments().iter().map(|s| extract_features(black_box(s)).unwrap().0[0]).sum::<f64>())
    });
    c.bench_function("fit_pca/400x31", |b| b.iter(|| fit_pca(black_box(&m.rows)).unwrap()));

    let mut g = c.benchmark_group("fit/100 trees depth 6");
    g.sample_size(10);
    for algo in [TreeAlgorithm::Exact, TreeAlgorithm::Hist] {
        let config = TrainConfig { n_estimators: 100, tree_algorithm: algo, ..TrainConfig::default() };
        g.bench_function(format!("{algo}"), |b| b.iter(|| fit(black_box(&m.rows), &targets, &config).unwrap()));
    }
    g.finish();

    let model = fit(&m.rows, &targets, &TrainConfig { n_estimators: 1000, max_depth: 6, ..TrainConfig::default() }).unwrap();
    c.bench_function("predict_proba/400 rows, 1000 trees", |b| b.iter(|| model.predict_proba_batch(black_box(&m.rows)).unwrap()));

    let text = write_trace_string(corpus.segments(), LabelPolicy::Required).unwrap();
    let predictor = Predictor::new(model).unwrap();
    c.bench_function("replay/400-segment trace", |b| {
        b.iter_batched(
            || text.as_bytes(),
            |input| replay(input, &predictor, ReplayOptions::default(), |_| {}).unwrap(),
            BatchSize::SmallInput,
        )
    });
}

criterion_group!(pipeline, benches);
criterion_main!(pipeline);
