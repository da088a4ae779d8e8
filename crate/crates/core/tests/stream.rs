use proptest::prelude::*;
use wristdigit::gbdt::default_feature_names;
use wristdigit::stream::ReplayOptions;
use wristdigit::synth::{generate_corpus, GeneratorConfig};
use wristdigit::trace::{write_trace_string, LabelPolicy};
use wristdigit::{
    extract_features, extract_matrix, fit, predict_segment, replay, Digit, GbdtModel, ImuSample, Predictor, Segmenter, TrainConfig,
};

fn event(t: f64, switch: bool) -> ImuSample {
    ImuSample { t, ax: t.sin(), ay: 0.5, az: -t, gx: 1.0, gy: t * t, gz: 3.0, switch }
}

#[test]
fn corpus_replay_matches_batch_prediction() {
    let corpus = generate_corpus(200, &GeneratorConfig::default(), 42).unwrap();
    let m = extract_matrix(&corpus).unwrap();
    let config = TrainConfig { n_estimators: 60, max_depth: 3, ..TrainConfig::default() };
    let model = fit(&m.rows, &m.targets(), &config).unwrap();
    let text = write_trace_string(corpus.segments(), LabelPolicy::Required).unwrap();

    let predictor = Predictor::new(model.clone()).unwrap();
    let mut live = Vec::new();
    let report = replay(text.as_bytes(), &predictor, ReplayOptions::default(), |p| live.push(p.clone())).unwrap();
    assert!(report.errors.is_empty());
    assert_eq!(report.predictions.len(), 400);
    assert_eq!(live, report.predictions);

    let mut agree = 0;
    for ((p, seg), row) in report.predictions.iter().zip(corpus.segments()).zip(&m.rows) {
        let batch = model.predict_proba(row).unwrap();
        assert_eq!(p.probability.to_bits(), batch.to_bits());
        assert_eq!((p.t_start, p.t_end), (seg.t_start(), seg.t_end()));
        let direct = predict_segment(&model, seg).unwrap();
        assert_eq!(direct.probability.to_bits(), extract_features(seg).map(|f| model.predict_proba(&f.0).unwrap()).unwrap().to_bits());
        agree += usize::from(p.digit == direct.digit && p.probability.to_bits() == direct.probability.to_bits());
    }
    assert_eq!(agree, 400);
}

#[test]
fn empty_input_yields_nothing() {
    let model = GbdtModel::empty(default_feature_names(31), TrainConfig::default());
    let predictor = Predictor::new(model).unwrap();
    for input in ["", "t,ax,ay,az,gx,gy,gz,switch,label\n"] {
        let report = replay(input.as_bytes(), &predictor, ReplayOptions::default(), |_| {}).unwrap();
        assert!(report.predictions.is_empty());
    }
}

#[test]
fn untrained_model_predicts_one_at_half() {
    let model = GbdtModel::empty(default_feature_names(31), TrainConfig::default());
    let seg = wristdigit::Segment::new((0..5).map(|i| event(f64::from(i) * 0.01, true)).collect(), None);
    let p = predict_segment(&model, &seg).unwrap();
    assert_eq!((p.probability, p.digit), (0.5, Digit::One));
}

#[test]
fn flush_is_idempotent() {
    let mut s = Segmenter::new(1000);
    assert!(s.flush().is_none());
    for (i, sw) in [false, true, true, true, true].into_iter().enumerate() {
        assert!(s.push_event(event(i as f64 * 0.01, sw)).unwrap().is_none());
    }
    assert_eq!(s.flush().map(|seg| seg.len()), Some(4));
    assert!(s.flush().is_none());
}

proptest! {
    #[test]
    fn segments_are_disjoint_and_ordered(steps in prop::collection::vec((1u32..5, any::<bool>()), 0..300)) {
        let mut seg = Segmenter::new(10_000);
        let mut out = Vec::new();
        let mut t = 0.0;
        let mut engaged = 0usize;
        let mut expected = 0usize;
        for (dt, sw) in steps {
            t += f64::from(dt) * 0.01;
            out.extend(seg.push_event(event(t, sw)).unwrap());
            if sw {
                engaged += 1;
            } else {
                expected += usize::from(engaged >= 4);
                engaged = 0;
            }
        }
        out.extend(seg.flush());
        expected += usize::from(engaged >= 4);
        prop_assert_eq!(out.len(), expected);
        for s in &out {
            prop_assert!(s.len() >= 4);
            prop_assert!(s.samples.windows(2).all(|w| w[0].t < w[1].t));
        }
        for w in out.windows(2) {
            prop_assert!(w[0].t_end() < w[1].t_start());
        }
    }
}
