use std::f64::consts::PI;

use proptest::prelude::*;
use wristdigit::features::{feature_index, integrate_trapezoid};
use wristdigit::{extract_features, extract_matrix, feature_names, Dataset, Digit, ImuSample, Segment, N_FEATURES};

fn segment_from(times: &[f64], channel: impl Fn(usize, f64) -> [f64; 6]) -> Segment {
    let samples = times
        .iter()
        .enumerate()
        .map(|(i, &t)| {
            let [ax, ay, az, gx, gy, gz] = channel(i, t);
            ImuSample { t, ax, ay, az, gx, gy, gz, switch: true }
        })
        .collect();
    Segment::new(samples, Some(Digit::Zero))
}

fn feature(seg: &Segment, name: &str) -> f64 {
    extract_features(seg).unwrap().get(name).unwrap()
}

#[test]
fn trapezoid_hand_evaluation() {
    assert_eq!(integrate_trapezoid(&[0.0, 1.0, 2.0], &[0.0; 3]).unwrap(), vec![0.0; 3]);
    assert_eq!(integrate_trapezoid(&[0.0, 1.0, 2.0], &[2.0; 3]).unwrap(), vec![0.0, 2.0, 4.0]);
    assert_eq!(integrate_trapezoid(&[0.0, 1.0, 2.0], &[0.0, 1.0, 2.0]).unwrap(), vec![0.0, 0.5, 2.0]);
}

#[test]
fn constant_acceleration_closed_form() {
    // a = 1 for T = 2 s: v(T) = aT = 2, d(T) = aT²/2 = 2. Trapezoid is exact for linear v.
    let times: Vec<f64> = (0..=200).map(|i| i as f64 / 100.0).collect();
    let seg = segment_from(&times, |_, _| [1.0, 0.0, 0.0, 0.0, 0.0, 0.0]);
    let rel = |got: f64, want: f64| ((got - want) / want).abs();
    assert!(rel(feature(&seg, "vx_max"), 2.0) < 1e-6);
    assert!(rel(feature(&seg, "dx"), 2.0) < 1e-6);
    assert!(rel(feature(&seg, "d_total"), 2.0) < 1e-6);
}

#[test]
fn sine_acceleration_closed_form() {
    // v(t) = (1 − cos 2πt)/2π, so d(1) = ∫₀¹ v = 1/2π.
    let times: Vec<f64> = (0..=1000).map(|i| i as f64 / 1000.0).collect();
    let seg = segment_from(&times, |_, t| [(2.0 * PI * t).sin(), 0.0, 0.0, 0.0, 0.0, 0.0]);
    assert!((feature(&seg, "dx") - 1.0 / (2.0 * PI)).abs() < 1e-3);
    assert!((feature(&seg, "vx_max") - 1.0 / PI).abs() < 1e-3);
}

#[test]
fn names_are_canonical_and_unique() {
    let names = feature_names();
    assert_eq!(names.len(), 31);
    assert_eq!(names[0], "ax_min");
    assert_eq!(names[30], "d_total");
    let mut sorted = names.to_vec();
    sorted.sort_unstable();
    sorted.dedup();
    assert_eq!(sorted.len(), 31);
    assert_eq!(feature_index("gz_max"), Some(17));
    assert_eq!(feature_index("dx"), Some(27));
}

#[test]
fn matrix_shape_and_row_permutation() {
    let segs: Vec<Segment> = (0..6)
        .map(|k| {
            let times: Vec<f64> = (0..10 + k).map(|i| i as f64 * 0.01).collect();
            let mut s = segment_from(&times, |i, t| [t * k as f64, (i as f64).sin(), 1.0, k as f64, 0.5, -t]);
            s.label = Some(if k % 2 == 0 { Digit::Zero } else { Digit::One });
            s
        })
        .collect();
    let m = extract_matrix(&Dataset::new(segs.clone()).unwrap()).unwrap();
    assert_eq!((m.len(), m.rows[0].len()), (6, N_FEATURES));
    let perm = [3, 0, 5, 1, 4, 2];
    let permuted = extract_matrix(&Dataset::new(perm.iter().map(|&i| segs[i].clone()).collect()).unwrap()).unwrap();
    for (row, &i) in permuted.rows.iter().zip(&perm) {
        assert_eq!(row, &m.rows[i]);
    }
    assert_eq!(permuted.labels, perm.iter().map(|&i| m.labels[i]).collect::<Vec<_>>());

    let empty = extract_matrix(&Dataset::default()).unwrap();
    assert!(empty.is_empty() && empty.labels.is_empty());
}

fn random_segment() -> impl Strategy<Value = (Vec<f64>, Vec<[f64; 6]>)> {
    prop::collection::vec((1u32..16, prop::array::uniform6(-50.0f64..50.0)), 4..40).prop_map(|rows| {
        let mut t = 0.0;
        let mut times = Vec::new();
        let mut chans = Vec::new();
        for (ticks, c) in rows {
            // Dyadic steps keep every time difference exact under shifts.
            t += f64::from(ticks) / 128.0;
            times.push(t);
            chans.push(c);
        }
        (times, chans)
    })
}

proptest! {
    #[test]
    fn power_of_two_scaling_is_exact((times, chans) in random_segment(), e in -3i32..4) {
        let k = 2f64.powi(e);
        let base = extract_features(&segment_from(&times, |i, _| chans[i])).unwrap();
        let scaled = extract_features(&segment_from(&times, |i, _| chans[i].map(|x| x * k))).unwrap();
        for j in 0..N_FEATURES {
            prop_assert_eq!(scaled.0[j], base.0[j] * k, "feature {}", feature_names()[j]);
        }
    }

    #[test]
    fn general_scaling_is_linear((times, chans) in random_segment(), k in 0.1f64..10.0) {
        let base = extract_features(&segment_from(&times, |i, _| chans[i])).unwrap();
        let scaled = extract_features(&segment_from(&times, |i, _| chans[i].map(|x| x * k))).unwrap();
        for j in 18..N_FEATURES {
            let want = base.0[j] * k;
            prop_assert!((scaled.0[j] - want).abs() <= 1e-9 * (1.0 + want.abs()), "feature {}", feature_names()[j]);
        }
    }

    #[test]
    fn time_shift_changes_nothing((times, chans) in random_segment(), shift in 0u32..10_000) {
        let shifted: Vec<f64> = times.iter().map(|t| t + f64::from(shift)).collect();
        let a = extract_features(&segment_from(&times, |i, _| chans[i])).unwrap();
        let b = extract_features(&segment_from(&shifted, |i, _| chans[i])).unwrap();
        prop_assert_eq!(a, b);
    }

    #[test]
    fn stats_are_ordered_and_total_is_norm((times, chans) in random_segment()) {
        let f = extract_features(&segment_from(&times, |i, _| chans[i])).unwrap();
        prop_assert!(f.0.iter().all(|x| x.is_finite()));
        for c in 0..9 {
            let [lo, mean, hi] = [f.0[3 * c], f.0[3 * c + 1], f.0[3 * c + 2]];
            prop_assert!(lo <= mean && mean <= hi);
        }
        let norm = (f.0[27].powi(2) + f.0[28].powi(2) + f.0[29].powi(2)).sqrt();
        prop_assert_eq!(f.0[30], norm);
    }
}
