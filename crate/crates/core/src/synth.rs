//! Seedable generator of synthetic wrist-motion segments.
//!
//! Digit 0 is a closed ellipse in the pen plane with one full z-tilt
//! oscillation; digit 1 is a straight downstroke with a z-tilt ramp.
//! Accelerations are evaluated analytically from the parametric trajectory.
//! All transcendental functions go through `libm` and normal variates are
//! drawn by Box-Muller from a ChaCha stream, so output is bit-identical
//! across platforms.

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::trace::{Dataset, Digit, ImuSample, Segment};

const RAD_TO_DEG: f64 = 180.0 / PI;

#[derive(Debug, Error, PartialEq)]
pub enum SynthError {
    #[error("invalid generator config: {0}")]
    InvalidConfig(String),
    #[error("n_per_class must be at least 1")]
    EmptyCorpus,
}

/// Writer-to-writer variation layered over the nominal trajectories.
///
/// Gains written `g` with spread `g_sd` are drawn per segment as
/// `g * (1 + g_sd * N(0,1))`; `*_sd` on a scale factor is a log-normal spread.
#[derive(Debug, Clone, PartialEq)]
pub struct Style {
    /// Central spread of the shape morph between the two digit templates.
    pub morph_core_sd: f64,
    /// Probability that the morph is drawn from the wide tail instead.
    pub morph_tail_prob: f64,
    pub morph_tail_sd: f64,
    /// Largest morph deviation from the own-class template.
    pub morph_max: f64,
    /// Stroke size scales with `(T / T_max)^size_time_exp`.
    pub size_time_exp: f64,
    pub size_sd: f64,
    pub width_sd: f64,
    pub height_sd: f64,
    /// Ellipse width relative to its height.
    pub aspect: f64,
    /// Lateral drift across the stroke (m), scaled by `T^drift_time_exp`.
    pub drift_sd: f64,
    pub drift_time_exp: f64,
    /// Wrist roll offset added to the z angle (deg).
    pub roll_sd: f64,
    /// Pen lift per degree of roll (m/deg), scaled by `T^roll_lift_time_exp`.
    pub roll_lift: f64,
    pub roll_lift_sd: f64,
    pub roll_lift_time_exp: f64,
    /// Correlation between the roll offset and the log stroke height.
    pub height_roll_corr: f64,
    /// Coupling of z tilt into the x angle.
    pub cross_tilt: f64,
    pub cross_tilt_sd: f64,
    /// Coupling of roll offset into the x and y angles.
    pub cross_roll: f64,
    pub cross_roll_sd: f64,
    pub yaw_roll: f64,
    pub yaw_roll_sd: f64,
    /// Coupling of lateral pen position into the y angle (deg/rad).
    pub yaw_gain: f64,
    pub yaw_gain_sd: f64,
    /// Random-sign y-angle pulse on loops (deg); zero disables it.
    pub loop_wobble: f64,
    pub loop_wobble_sd: f64,
    /// Pulse shape `sin(pi tau)^(2q)`, mean removed.
    pub wobble_sharpness: u32,
    /// Second-harmonic skew of the loop tilt.
    pub tilt_skew: f64,
    pub tilt_skew_sd: f64,
    /// Exponent of the downstroke tilt ramp.
    pub ramp_shape: f64,
    /// Closed pen-lift bump amplitude (m), scaled by `T^lift_time_exp`.
    pub lift: f64,
    pub lift_sd: f64,
    pub lift_time_exp: f64,
}

impl Style {
    /// Nominal templates only: every segment of a class has the same shape.
    pub fn none() -> Style {
        Style {
            morph_core_sd: 0.0,
            morph_tail_prob: 0.0,
            morph_tail_sd: 0.0,
            morph_max: 0.5,
            size_time_exp: 0.0,
            size_sd: 0.0,
            width_sd: 0.0,
            height_sd: 0.0,
            aspect: 0.6,
            drift_sd: 0.0,
            drift_time_exp: 0.0,
            roll_sd: 0.0,
            roll_lift: 0.0,
            roll_lift_sd: 0.0,
            roll_lift_time_exp: 0.0,
            height_roll_corr: 0.0,
            cross_tilt: 0.0,
            cross_tilt_sd: 0.0,
            cross_roll: 0.0,
            cross_roll_sd: 0.0,
            yaw_roll: 0.0,
            yaw_roll_sd: 0.0,
            yaw_gain: 0.0,
            yaw_gain_sd: 0.0,
            loop_wobble: 0.0,
            loop_wobble_sd: 0.0,
            wobble_sharpness: 3,
            tilt_skew: 0.45,
            tilt_skew_sd: 0.0,
            ramp_shape: 1.475,
            lift: 0.0,
            lift_sd: 0.0,
            lift_time_exp: 0.0,
        }
    }
}

impl Default for Style {
    fn default() -> Style {
        Style {
            morph_core_sd: 0.01,
            morph_tail_prob: 0.1,
            morph_tail_sd: 0.3,
            morph_max: 0.5,
            size_time_exp: 0.3,
            size_sd: 0.0,
            width_sd: 0.7,
            height_sd: 0.4,
            aspect: 0.6,
            drift_sd: 0.02,
            drift_time_exp: 0.5,
            roll_sd: 0.36,
            roll_lift: 0.01,
            roll_lift_sd: 0.6,
            roll_lift_time_exp: 0.6,
            height_roll_corr: 0.75,
            cross_tilt: 0.4,
            cross_tilt_sd: 0.33,
            cross_roll: 0.3,
            cross_roll_sd: 0.55,
            yaw_roll: 0.0,
            yaw_roll_sd: 0.5,
            yaw_gain: 1.2,
            yaw_gain_sd: 0.4,
            loop_wobble: 5.5,
            loop_wobble_sd: 0.4,
            wobble_sharpness: 3,
            tilt_skew: 0.45,
            tilt_skew_sd: 0.45,
            ramp_shape: 1.475,
            lift: 0.03,
            lift_sd: 0.0,
            lift_time_exp: 1.8,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GeneratorConfig {
    /// Hz.
    pub sample_rate: f64,
    /// Seconds, `[lo, hi]`.
    pub duration_range_zero: [f64; 2],
    pub duration_range_one: [f64; 2],
    /// Writing box edge (m).
    pub stroke_extent: f64,
    /// m/s².
    pub accel_noise_sd: f64,
    /// Degrees.
    pub angle_noise_sd: f64,
    /// Degrees.
    pub tilt_gain_zero: f64,
    pub tilt_gain_one: f64,
    pub style: Style,
}

impl Default for GeneratorConfig {
    fn default() -> Self {
        GeneratorConfig {
            sample_rate: 100.0,
            duration_range_zero: [0.8, 1.6],
            duration_range_one: [0.4, 0.9],
            stroke_extent: 0.10,
            accel_noise_sd: 0.05,
            angle_noise_sd: 0.5,
            tilt_gain_zero: 12.0,
            tilt_gain_one: 4.0,
            style: Style::default(),
        }
    }
}

impl GeneratorConfig {
    /// Defaults with zero sensor noise and no style variation.
    pub fn noiseless() -> Self {
        GeneratorConfig { accel_noise_sd: 0.0, angle_noise_sd: 0.0, style: Style::none(), ..Default::default() }
    }

    pub fn duration_range(&self, digit: Digit) -> [f64; 2] {
        match digit {
            Digit::Zero => self.duration_range_zero,
            Digit::One => self.duration_range_one,
        }
    }

    pub fn validate(&self) -> Result<(), SynthError> {
        let bad = |m: &str| Err(SynthError::InvalidConfig(m.to_string()));
        if !(self.sample_rate > 0.0 && self.sample_rate.is_finite()) {
            return bad("sample_rate must be positive");
        }
        for (name, [lo, hi]) in [("duration_range_zero", self.duration_range_zero), ("duration_range_one", self.duration_range_one)] {
            if !(lo > 0.0 && lo <= hi && hi.is_finite()) {
                return Err(SynthError::InvalidConfig(format!("{name} must satisfy 0 < lo <= hi")));
            }
            // Enough samples for a valid segment at the shortest duration.
            if ((lo * self.sample_rate).floor() as usize) + 1 < crate::trace::MIN_SEGMENT_LEN {
                return Err(SynthError::InvalidConfig(format!("{name} is too short for the sample rate")));
            }
        }
        if !(self.stroke_extent > 0.0 && self.stroke_extent.is_finite()) {
            return bad("stroke_extent must be positive");
        }
        if !(self.accel_noise_sd >= 0.0 && self.angle_noise_sd >= 0.0) {
            return bad("noise standard deviations must be non-negative");
        }
        if !(self.tilt_gain_zero.is_finite() && self.tilt_gain_one.is_finite()) {
            return bad("tilt gains must be finite");
        }
        if !(-1.0..=1.0).contains(&self.style.height_roll_corr) {
            return bad("height_roll_corr must lie in [-1, 1]");
        }
        if !(self.style.ramp_shape > 0.0 && self.style.tilt_skew > -1.0) {
            return bad("ramp_shape must be positive and tilt_skew above -1");
        }
        Ok(())
    }
}

/// Standard normal variate via Box-Muller on `libm`.
fn normal<R: Rng>(rng: &mut R) -> f64 {
    let u1 = 1.0 - rng.random::<f64>();
    let u2 = rng.random::<f64>();
    libm::sqrt(-2.0 * libm::log(u1)) * libm::cos(2.0 * PI * u2)
}

fn gain<R: Rng>(rng: &mut R, mean: f64, sd: f64) -> f64 {
    mean * (1.0 + sd * normal(rng))
}

fn lognormal<R: Rng>(rng: &mut R, sd: f64) -> f64 {
    libm::exp(sd * normal(rng))
}

/// Mean of `sin(pi tau)^(2q)` over `tau` in `[0, 1]`: `C(2q, q) / 4^q`.
fn pulse_mean(q: u32) -> f64 {
    (1..=q).fold(1.0, |acc, i| acc * (q + i) as f64 / (4.0 * i as f64))
}

/// Per-segment draw of every latent; a pure function of time once built.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub digit: Digit,
    /// Duration (s), equal to the last sample time.
    pub duration: f64,
    /// Blend between the loop (1) and downstroke (0) templates.
    pub morph: f64,
    rx: f64,
    ry: f64,
    stroke: f64,
    drift: f64,
    roll: f64,
    roll_lift: f64,
    lift: f64,
    tilt_zero: f64,
    tilt_one: f64,
    skew: f64,
    ramp_shape: f64,
    cross_tilt: f64,
    cross_roll: f64,
    yaw_roll: f64,
    yaw_gain: f64,
    wobble: f64,
    sharpness: u32,
}

/// Time warp: `s(tau)` with zero speed at both ends, and its first two derivatives in `tau`.
fn warp(tau: f64) -> (f64, f64, f64) {
    let w = 2.0 * PI * tau;
    (tau - libm::sin(w) / (2.0 * PI), 1.0 - libm::cos(w), 2.0 * PI * libm::sin(w))
}

impl Trajectory {
    fn draw<R: Rng>(digit: Digit, config: &GeneratorConfig, n_samples: usize, rng: &mut R) -> Trajectory {
        let st = &config.style;
        let [_, hi] = config.duration_range(digit);
        let duration = (n_samples - 1) as f64 / config.sample_rate;

        let spread = if rng.random::<f64>() < st.morph_tail_prob { st.morph_tail_sd } else { st.morph_core_sd };
        let e = (normal(rng).abs() * spread).min(st.morph_max);
        let morph = match digit {
            Digit::Zero => (1.0 - e).max(0.0),
            Digit::One => e.min(1.0),
        };
        let size = libm::pow(duration / hi, st.size_time_exp) * lognormal(rng, st.size_sd);
        let width = lognormal(rng, st.width_sd);
        let posture = normal(rng);
        let c = st.height_roll_corr;
        let height = libm::exp(st.height_sd * (c * posture + libm::sqrt(1.0 - c * c) * normal(rng)));
        let drift = st.drift_sd * normal(rng) * libm::pow(duration, st.drift_time_exp);
        let roll = st.roll_sd * posture;
        let roll_lift = gain(rng, st.roll_lift, st.roll_lift_sd) * libm::pow(duration, st.roll_lift_time_exp);
        let cross_tilt = gain(rng, st.cross_tilt, st.cross_tilt_sd);
        let cross_roll = gain(rng, st.cross_roll, st.cross_roll_sd);
        let yaw_roll = gain(rng, st.yaw_roll, st.yaw_roll_sd);
        let yaw_gain = gain(rng, st.yaw_gain, st.yaw_gain_sd);
        let skew = st.tilt_skew * lognormal(rng, st.tilt_skew_sd);
        let lift = st.lift * lognormal(rng, st.lift_sd) * libm::pow(duration, st.lift_time_exp);
        let magnitude = st.loop_wobble * lognormal(rng, st.loop_wobble_sd);
        let sign = if rng.random::<bool>() { 1.0 } else { -1.0 };
        let wobble = if digit == Digit::Zero { sign * magnitude } else { 0.0 };

        let e_ext = config.stroke_extent;
        Trajectory {
            digit,
            duration,
            morph,
            rx: 0.5 * st.aspect * e_ext * size * width,
            ry: 0.5 * e_ext * size * height,
            stroke: e_ext * size * height,
            drift,
            roll,
            roll_lift,
            lift,
            tilt_zero: config.tilt_gain_zero,
            tilt_one: config.tilt_gain_one,
            skew,
            ramp_shape: st.ramp_shape,
            cross_tilt,
            cross_roll,
            yaw_roll,
            yaw_gain,
            wobble,
            sharpness: st.wobble_sharpness,
        }
    }

    fn tau(&self, t: f64) -> f64 {
        t / self.duration
    }

    /// Pen position (m) at time `t` since segment start.
    pub fn position(&self, t: f64) -> [f64; 3] {
        let (s, _, _) = warp(self.tau(t));
        let th = 2.0 * PI * s;
        let m = self.morph;
        let x = -m * self.rx * libm::sin(th) + self.drift * s;
        let y = m * self.ry * (libm::cos(th) - 1.0) - (1.0 - m) * self.stroke * s;
        let z = self.roll_lift * self.roll * s + 0.5 * self.lift * (1.0 - libm::cos(th));
        [x, y, z]
    }

    /// Second time derivative of [`Trajectory::position`].
    pub fn acceleration(&self, t: f64) -> [f64; 3] {
        let big_t = self.duration;
        let (s, s1, s2) = warp(self.tau(t));
        let th = 2.0 * PI * s;
        let th1 = 2.0 * PI * s1 / big_t;
        let th2 = 2.0 * PI * s2 / (big_t * big_t);
        let s_tt = s2 / (big_t * big_t);
        let (sin, cos) = (libm::sin(th), libm::cos(th));
        let m = self.morph;
        let ax = m * self.rx * (sin * th1 * th1 - cos * th2) + self.drift * s_tt;
        let ay = m * self.ry * (-cos * th1 * th1 - sin * th2) - (1.0 - m) * self.stroke * s_tt;
        let az = self.roll_lift * self.roll * s_tt + 0.5 * self.lift * (cos * th1 * th1 + sin * th2);
        [ax, ay, az]
    }

    /// Tilt of the z axis before the roll offset (deg).
    pub fn tilt(&self, t: f64) -> f64 {
        let tau = self.tau(t);
        let w = 2.0 * PI * tau;
        let a = self.skew;
        let loop_tilt = self.tilt_zero / (1.0 + a) * (libm::sin(w) - a * libm::cos(2.0 * w));
        let r = self.ramp_shape;
        let ramp = self.tilt_one * (-r + (1.0 + r) * libm::pow(tau, 1.0 / r));
        self.morph * loop_tilt + (1.0 - self.morph) * ramp
    }

    /// Angles `[gx, gy, gz]` (deg) at time `t`.
    pub fn angles(&self, t: f64) -> [f64; 3] {
        let tilt = self.tilt(t);
        let x = self.position(t)[0];
        let q = self.sharpness as i32;
        let pulse = libm::pow(libm::sin(PI * self.tau(t)), f64::from(2 * q)) - pulse_mean(self.sharpness);
        let gx = self.cross_tilt * tilt + self.cross_roll * self.roll;
        let gy = self.yaw_gain * x * RAD_TO_DEG + self.wobble * pulse + self.yaw_roll * self.roll;
        let gz = tilt + self.roll;
        [gx, gy, gz]
    }
}

fn sample_count(duration: f64, rate: f64) -> usize {
    (duration * rate).floor() as usize + 1
}

/// Draws the latent trajectory and sample count for one segment.
pub fn draw_trajectory(digit: Digit, config: &GeneratorConfig, seed: u64) -> Result<(Trajectory, ChaCha20Rng, usize), SynthError> {
    config.validate()?;
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let [lo, hi] = config.duration_range(digit);
    let duration = if hi > lo { rng.random_range(lo..hi) } else { lo };
    let n = sample_count(duration, config.sample_rate);
    let traj = Trajectory::draw(digit, config, n, &mut rng);
    Ok((traj, rng, n))
}

/// One labeled segment starting at `t = 0`.
pub fn generate_segment(digit: Digit, config: &GeneratorConfig, seed: u64) -> Result<Segment, SynthError> {
    let (traj, mut rng, n) = draw_trajectory(digit, config, seed)?;
    let samples = (0..n)
        .map(|i| {
            let t = i as f64 / config.sample_rate;
            let [ax, ay, az] = traj.acceleration(t);
            let [gx, gy, gz] = traj.angles(t);
            let an = config.accel_noise_sd;
            let gn = config.angle_noise_sd;
            ImuSample {
                t,
                ax: ax + an * normal(&mut rng),
                ay: ay + an * normal(&mut rng),
                az: az + an * normal(&mut rng),
                gx: gx + gn * normal(&mut rng),
                gy: gy + gn * normal(&mut rng),
                gz: gz + gn * normal(&mut rng),
                switch: true,
            }
        })
        .collect();
    Ok(Segment::new(samples, Some(digit)))
}

/// Seed of segment `index` of class `digit` within a corpus seeded by `seed`.
pub fn segment_seed(seed: u64, digit: Digit, index: u64) -> u64 {
    let mut h = Sha256::new();
    h.update(seed.to_le_bytes());
    h.update((digit.index() as u64).to_le_bytes());
    h.update(index.to_le_bytes());
    let bytes = h.finalize();
    u64::from_le_bytes(bytes[..8].try_into().expect("digest is 32 bytes"))
}

/// Spacing between consecutive corpus segments on the shared timeline.
pub fn corpus_slot(config: &GeneratorConfig) -> f64 {
    config.duration_range_zero[1].max(config.duration_range_one[1]) + 0.5
}

/// Class-major corpus: all zeros, then all ones. Segment `j` starts at
/// `j * corpus_slot(config)` so the whole corpus lies on one increasing timeline.
pub fn generate_corpus(n_per_class: usize, config: &GeneratorConfig, seed: u64) -> Result<Dataset, SynthError> {
    if n_per_class == 0 {
        return Err(SynthError::EmptyCorpus);
    }
    let slot = corpus_slot(config);
    let mut segments = Vec::with_capacity(2 * n_per_class);
    for digit in Digit::ALL {
        for i in 0..n_per_class {
            let mut seg = generate_segment(digit, config, segment_seed(seed, digit, i as u64))?;
            let offset = segments.len() as f64 * slot;
            seg.samples.iter_mut().for_each(|s| s.t += offset);
            segments.push(seg);
        }
    }
    Ok(Dataset::new(segments).expect("generated segments are labeled"))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::features::{extract_features, feature_index};
    use crate::trace::validate_segment;

    #[test]
    fn deterministic() {
        let c = GeneratorConfig::default();
        assert_eq!(generate_segment(Digit::Zero, &c, 1).unwrap(), generate_segment(Digit::Zero, &c, 1).unwrap());
        assert_ne!(generate_segment(Digit::Zero, &c, 1).unwrap(), generate_segment(Digit::Zero, &c, 2).unwrap());
    }

    #[test]
    fn pulse_mean_matches_quadrature() {
        for q in 1..6 {
            let n = 100_000;
            let num: f64 = (0..n).map(|i| libm::pow(libm::sin(PI * (i as f64 + 0.5) / n as f64), 2.0 * q as f64)).sum::<f64>() / n as f64;
            assert!((num - pulse_mean(q)).abs() < 1e-9, "{q}");
        }
    }

    #[test]
    fn downstroke_displacement_without_noise() {
        let c = GeneratorConfig::noiseless();
        for seed in 0..20 {
            let f = extract_features(&generate_segment(Digit::One, &c, seed).unwrap()).unwrap();
            let dx = f.0[feature_index("dx").unwrap()];
            let dy = f.0[feature_index("dy").unwrap()];
            assert!(dx.abs() < 0.02 * c.stroke_extent, "dx {dx}");
            assert!((dy + c.stroke_extent).abs() < 0.02 * c.stroke_extent, "dy {dy}");
        }
    }

    #[test]
    fn loop_tilt_amplitude_without_noise() {
        let c = GeneratorConfig::noiseless();
        for seed in 0..20 {
            let seg = generate_segment(Digit::Zero, &c, seed).unwrap();
            let peak = seg.samples.iter().map(|s| s.gz.abs()).fold(0.0, f64::max);
            assert!((peak - c.tilt_gain_zero).abs() <= 0.05 * c.tilt_gain_zero, "{peak}");
        }
    }

    #[test]
    fn noiseless_channels_equal_the_analytic_trajectory() {
        let mut c = GeneratorConfig { accel_noise_sd: 0.0, angle_noise_sd: 0.0, ..Default::default() };
        for digit in Digit::ALL {
            for seed in 0..10 {
                let seg = generate_segment(digit, &c, seed).unwrap();
                let (traj, _, n) = draw_trajectory(digit, &c, seed).unwrap();
                assert_eq!(seg.len(), n);
                for s in &seg.samples {
                    let a = traj.acceleration(s.t);
                    let g = traj.angles(s.t);
                    for (u, v) in [s.ax, s.ay, s.az, s.gx, s.gy, s.gz].iter().zip(a.iter().chain(&g)) {
                        assert!((u - v).abs() <= 1e-9);
                    }
                }
            }
        }
        c.style = Style::none();
        assert!(generate_segment(Digit::One, &c, 3).unwrap().samples.iter().all(|s| s.gx == 0.0 && s.gy == 0.0));
    }

    #[test]
    fn acceleration_is_second_derivative_of_position() {
        let c = GeneratorConfig::default();
        for digit in Digit::ALL {
            let (traj, _, _) = draw_trajectory(digit, &c, 11).unwrap();
            let h = 1e-4;
            for i in 1..20 {
                let t = traj.duration * i as f64 / 20.0;
                let (p0, p1, p2) = (traj.position(t - h), traj.position(t), traj.position(t + h));
                let a = traj.acceleration(t);
                for k in 0..3 {
                    let fd = (p2[k] - 2.0 * p1[k] + p0[k]) / (h * h);
                    assert!((fd - a[k]).abs() < 1e-3 * (1.0 + a[k].abs()), "{digit} axis {k}: {fd} vs {}", a[k]);
                }
            }
        }
    }

    #[test]
    fn segments_are_valid_and_in_range() {
        let c = GeneratorConfig::default();
        for digit in Digit::ALL {
            let [lo, hi] = c.duration_range(digit);
            for seed in 0..50 {
                let seg = generate_segment(digit, &c, seed).unwrap();
                assert!(validate_segment(&seg).is_empty());
                assert!(seg.duration() >= lo - 0.01 && seg.duration() <= hi);
                assert_eq!(seg.label, Some(digit));
            }
        }
    }

    #[test]
    fn corpus_layout() {
        let c = GeneratorConfig::default();
        let d = generate_corpus(1, &c, 7).unwrap();
        assert_eq!(d.class_counts(), [1, 1]);
        let segs = d.segments();
        assert!(segs[0].t_end() < segs[1].t_start());
        // Subsets are reproducible on their own.
        let alone = generate_segment(Digit::One, &c, segment_seed(7, Digit::One, 0)).unwrap();
        assert_eq!(alone.samples[3].ay, segs[1].samples[3].ay);
        assert_eq!(generate_corpus(0, &c, 7), Err(SynthError::EmptyCorpus));
    }

    #[test]
    fn invalid_configs() {
        let c = GeneratorConfig { sample_rate: 0.0, ..Default::default() };
        assert!(matches!(generate_segment(Digit::Zero, &c, 0), Err(SynthError::InvalidConfig(_))));
        let c = GeneratorConfig { duration_range_one: [0.9, 0.4], ..Default::default() };
        assert!(c.validate().is_err());
        let c = GeneratorConfig { accel_noise_sd: -1.0, ..Default::default() };
        assert!(c.validate().is_err());
    }
}
