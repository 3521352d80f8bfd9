//! Synthetic multi-channel records with planted flaws.
//!
//! Every signal component is defined in rope meters, not samples, so the
//! axial compression of flaws and the steepening of strand noise at low
//! spatial resolution fall out of the sampling alone.
//!
//! Components:
//! - flaws: derivative-of-Gaussian along the axis (valley then peak), Gaussian
//!   over circular channel distance
//! - strand noise: `sin(2 pi (s / pitch + n / N))`, a helix seen by the ring
//! - stripe noise: narrow full-height bright bands at Poisson positions
//! - drift: smoothed random walk with knots far apart compared to the detrend window
//! - white noise

use std::collections::BTreeMap;
use std::f64::consts::PI;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{MflError, Result};
use crate::ingest::MflRecord;
use crate::matrix::Matrix;

/// Records shorter than two default segments are rejected.
pub const MIN_SAMPLES: usize = 400;

/// Axial spacing of drift random-walk knots, in samples (ten detrend windows).
const DRIFT_KNOT_SPACING: usize = 2000;
/// Share of per-channel drift relative to the common-mode drift.
const DRIFT_CHANNEL_SHARE: f64 = 0.3;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroundTruthFlaw {
    #[serde(rename = "axial_m")]
    pub axial_position_m: f64,
    #[serde(rename = "extent_m", default = "default_extent")]
    pub axial_extent_m: f64,
    /// 1-based channel coordinate of the flaw center on the ring.
    #[serde(rename = "channel")]
    pub radial_center_channel: f64,
    #[serde(rename = "spread_channels", default = "default_spread")]
    pub radial_spread_channels: f64,
    pub amplitude: f64,
}

fn default_extent() -> f64 {
    0.02
}

fn default_spread() -> f64 {
    1.0
}

impl GroundTruthFlaw {
    /// Axial interval `[center - extent / 2, center + extent / 2]` in meters.
    pub fn interval_m(&self) -> (f64, f64) {
        let half = 0.5 * self.axial_extent_m;
        (self.axial_position_m - half, self.axial_position_m + half)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SynthSpec {
    pub rope_length_m: f64,
    pub inspection_speed_mps: f64,
    pub sampling_rate_hz: f64,
    #[serde(default = "default_channels")]
    pub channel_count: usize,
    #[serde(default)]
    pub flaws: Vec<GroundTruthFlaw>,
    #[serde(default = "default_strand_pitch")]
    pub strand_pitch_m: f64,
    #[serde(default = "default_strand_amplitude")]
    pub strand_amplitude: f64,
    #[serde(default)]
    pub stripe_noise_rate_per_m: f64,
    #[serde(default = "default_stripe_amplitude")]
    pub stripe_amplitude: f64,
    /// Axial Gaussian width of a stripe, in samples.
    #[serde(default = "default_stripe_width")]
    pub stripe_width_samples: f64,
    #[serde(default = "default_drift")]
    pub drift_amplitude: f64,
    #[serde(default = "default_white_noise")]
    pub white_noise_sigma: f64,
    #[serde(default)]
    pub rng_seed: u64,
}

fn default_channels() -> usize {
    16
}
fn default_strand_pitch() -> f64 {
    0.05
}
fn default_strand_amplitude() -> f64 {
    0.15
}
fn default_stripe_amplitude() -> f64 {
    0.3
}
fn default_stripe_width() -> f64 {
    1.0
}
fn default_drift() -> f64 {
    0.5
}
fn default_white_noise() -> f64 {
    0.02
}

impl SynthSpec {
    /// A spec with default noise settings and no flaws.
    pub fn new(rope_length_m: f64, inspection_speed_mps: f64, sampling_rate_hz: f64) -> Self {
        Self {
            rope_length_m,
            inspection_speed_mps,
            sampling_rate_hz,
            channel_count: default_channels(),
            flaws: Vec::new(),
            strand_pitch_m: default_strand_pitch(),
            strand_amplitude: default_strand_amplitude(),
            stripe_noise_rate_per_m: 0.0,
            stripe_amplitude: default_stripe_amplitude(),
            stripe_width_samples: default_stripe_width(),
            drift_amplitude: default_drift(),
            white_noise_sigma: default_white_noise(),
            rng_seed: 0,
        }
    }

    /// Same geometry with every noise source switched off.
    pub fn noiseless(mut self) -> Self {
        self.strand_amplitude = 0.0;
        self.stripe_noise_rate_per_m = 0.0;
        self.stripe_amplitude = 0.0;
        self.drift_amplitude = 0.0;
        self.white_noise_sigma = 0.0;
        self
    }

    pub fn f_spatial(&self) -> f64 {
        self.sampling_rate_hz / self.inspection_speed_mps
    }

    pub fn sample_count(&self) -> usize {
        (self.rope_length_m / self.inspection_speed_mps * self.sampling_rate_hz).floor() as usize
    }

    pub fn validate(&self) -> Result<()> {
        let invalid = |field: &str, reason: String| {
            Err(MflError::SpecInvalid {
                field: field.to_string(),
                reason,
            })
        };
        for (field, v) in [
            ("rope_length_m", self.rope_length_m),
            ("inspection_speed_mps", self.inspection_speed_mps),
            ("sampling_rate_hz", self.sampling_rate_hz),
            ("strand_pitch_m", self.strand_pitch_m),
            ("stripe_width_samples", self.stripe_width_samples),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return invalid(field, format!("must be positive, got {v}"));
            }
        }
        for (field, v) in [
            ("strand_amplitude", self.strand_amplitude),
            ("stripe_noise_rate_per_m", self.stripe_noise_rate_per_m),
            ("stripe_amplitude", self.stripe_amplitude),
            ("drift_amplitude", self.drift_amplitude),
            ("white_noise_sigma", self.white_noise_sigma),
        ] {
            if !(v >= 0.0 && v.is_finite()) {
                return invalid(field, format!("must be non-negative, got {v}"));
            }
        }
        if self.channel_count < 2 {
            return invalid("channel_count", format!("need at least 2, got {}", self.channel_count));
        }
        let samples = self.sample_count();
        if samples < MIN_SAMPLES {
            return invalid(
                "rope_length_m",
                format!("yields {samples} samples, need at least {MIN_SAMPLES}"),
            );
        }
        let n = self.channel_count as f64;
        for (i, f) in self.flaws.iter().enumerate() {
            let field = |name: &str| format!("flaws[{i}].{name}");
            if !(0.0..=self.rope_length_m).contains(&f.axial_position_m) {
                return invalid(&field("axial_m"), format!("{} is outside the rope", f.axial_position_m));
            }
            if !(f.axial_extent_m > 0.0) {
                return invalid(&field("extent_m"), "must be positive".into());
            }
            if !(1.0..=n).contains(&f.radial_center_channel) {
                return invalid(&field("channel"), format!("must lie in [1, {n}]"));
            }
            if !(f.radial_spread_channels > 0.0) {
                return invalid(&field("spread_channels"), "must be positive".into());
            }
            if !(f.amplitude > self.white_noise_sigma) {
                return invalid(
                    &field("amplitude"),
                    format!("must exceed the white noise sigma {}", self.white_noise_sigma),
                );
            }
        }
        Ok(())
    }
}

/// Circular distance between a 1-based channel coordinate and channel index `n`.
fn ring_distance(center: f64, n: usize, channels: usize) -> f64 {
    let d = (center - (n + 1) as f64).rem_euclid(channels as f64);
    d.min(channels as f64 - d)
}

/// Axial profile of a flaw: valley then peak, zero mean.
pub fn flaw_profile(s: f64, flaw: &GroundTruthFlaw) -> f64 {
    let sigma = flaw.axial_extent_m / 4.0;
    let x = (s - flaw.axial_position_m) / sigma;
    flaw.amplitude * x * (-0.5 * x * x).exp()
}

/// Generates a record and returns it with its ground truth.
pub fn generate(spec: &SynthSpec) -> Result<(MflRecord<f64>, Vec<GroundTruthFlaw>)> {
    spec.validate()?;
    let m_len = spec.sample_count();
    let n_ch = spec.channel_count;
    let meters_per_sample = spec.inspection_speed_mps / spec.sampling_rate_hz;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.rng_seed);
    let mut x = Matrix::<f64>::zeros(m_len, n_ch);

    if spec.drift_amplitude > 0.0 {
        let common = smooth_walk(&mut rng, m_len);
        for n in 0..n_ch {
            let own = smooth_walk(&mut rng, m_len);
            for m in 0..m_len {
                x[(m, n)] += spec.drift_amplitude * (common[m] + DRIFT_CHANNEL_SHARE * own[m]);
            }
        }
    }

    if spec.strand_amplitude > 0.0 {
        for m in 0..m_len {
            let s = m as f64 * meters_per_sample;
            for n in 0..n_ch {
                let phase = 2.0 * PI * (s / spec.strand_pitch_m + n as f64 / n_ch as f64);
                x[(m, n)] += spec.strand_amplitude * phase.sin();
            }
        }
    }

    for flaw in &spec.flaws {
        let sigma = flaw.axial_extent_m / 4.0;
        let reach = 6.0 * sigma;
        let lo = ((flaw.axial_position_m - reach) / meters_per_sample).floor().max(0.0) as usize;
        let hi = (((flaw.axial_position_m + reach) / meters_per_sample).ceil() as usize).min(m_len - 1);
        let radial: Vec<f64> = (0..n_ch)
            .map(|n| {
                let d = ring_distance(flaw.radial_center_channel, n, n_ch);
                (-0.5 * (d / flaw.radial_spread_channels).powi(2)).exp()
            })
            .collect();
        for m in lo..=hi {
            let p = flaw_profile(m as f64 * meters_per_sample, flaw);
            for (n, w) in radial.iter().enumerate() {
                x[(m, n)] += p * w;
            }
        }
    }

    if spec.stripe_noise_rate_per_m > 0.0 && spec.stripe_amplitude > 0.0 {
        let gap = Exp::new(spec.stripe_noise_rate_per_m).expect("positive rate");
        let mut s = gap.sample(&mut rng);
        while s < spec.rope_length_m {
            let center = s / meters_per_sample;
            let width = spec.stripe_width_samples;
            let amp = spec.stripe_amplitude * rng.random_range(0.7..1.3);
            let lo = (center - 5.0 * width).floor().max(0.0) as usize;
            let hi = ((center + 5.0 * width).ceil() as usize).min(m_len - 1);
            for m in lo..=hi {
                let z = (m as f64 - center) / width;
                let v = amp * (-0.5 * z * z).exp();
                for n in 0..n_ch {
                    x[(m, n)] += v;
                }
            }
            s += gap.sample(&mut rng);
        }
    }

    if spec.white_noise_sigma > 0.0 {
        let noise = Normal::new(0.0, spec.white_noise_sigma).expect("finite sigma");
        for v in x.as_mut_slice() {
            *v += noise.sample(&mut rng);
        }
    }

    let record = MflRecord::new(
        x,
        spec.sampling_rate_hz,
        spec.inspection_speed_mps,
        format!("synthetic-seed{}", spec.rng_seed),
    )?;
    Ok((record, spec.flaws.clone()))
}

/// Unit-variance random walk on sparse knots, cosine-interpolated to every sample.
fn smooth_walk(rng: &mut ChaCha8Rng, len: usize) -> Vec<f64> {
    let step = Normal::new(0.0, 1.0).expect("unit normal");
    let knots = len / DRIFT_KNOT_SPACING + 2;
    let mut values = Vec::with_capacity(knots);
    let mut level = step.sample(rng);
    for _ in 0..knots {
        values.push(level);
        level += step.sample(rng);
    }
    (0..len)
        .map(|m| {
            let k = m / DRIFT_KNOT_SPACING;
            let t = (m % DRIFT_KNOT_SPACING) as f64 / DRIFT_KNOT_SPACING as f64;
            let w = 0.5 - 0.5 * (PI * t).cos();
            values[k] * (1.0 - w) + values[k + 1] * w
        })
        .collect()
}

/// Scenario names recognized by [`scenario_spec`].
pub const SCENARIOS: [&str; 3] = ["low_ssr", "optimal_ssr", "high_ssr"];

/// Relative amplitudes of the four planted flaws, weakest first.
pub const PRESET_FLAW_AMPLITUDES: [f64; 4] = [0.8, 0.9, 1.0, 1.1];

/// Segments per preset record, one flaw in each.
const PRESET_SEGMENTS: usize = PRESET_FLAW_AMPLITUDES.len();
const PRESET_SEGMENT_SAMPLES: usize = 200;
/// Frozen calibration of the preset noise levels; every other knob keeps its default.
const PRESET_STRAND_AMPLITUDE: f64 = 0.085;
const PRESET_STRIPE_AMPLITUDE: f64 = 0.8;

struct ScenarioParams {
    speed: f64,
    stripe_rate_per_m: f64,
}

fn scenario_params(name: &str) -> Option<ScenarioParams> {
    match name {
        "low_ssr" => Some(ScenarioParams {
            speed: 1.2,
            stripe_rate_per_m: 0.0,
        }),
        "optimal_ssr" => Some(ScenarioParams {
            speed: 0.5,
            stripe_rate_per_m: 0.0,
        }),
        "high_ssr" => Some(ScenarioParams {
            speed: 0.15,
            stripe_rate_per_m: 12.0,
        }),
        _ => None,
    }
}

/// Preset spec for one seed: geometry and noise are fixed per scenario; flaw
/// positions, channels and amplitude order are drawn from the seed.
///
/// The record holds exactly one segment per flaw and each flaw sits in the
/// middle half of its segment.
pub fn scenario_spec(name: &str, seed: u64) -> Option<SynthSpec> {
    let params = scenario_params(name)?;
    let f_s = 250.0;
    let f_spatial = f_s / params.speed;
    let segment_m = PRESET_SEGMENT_SAMPLES as f64 / f_spatial;
    // half a sample of slack so floor() keeps the last segment whole
    let rope_length_m = (PRESET_SEGMENTS as f64 * PRESET_SEGMENT_SAMPLES as f64 + 0.5) / f_spatial;
    let mut spec = SynthSpec::new(rope_length_m, params.speed, f_s);
    spec.strand_amplitude = PRESET_STRAND_AMPLITUDE;
    spec.stripe_noise_rate_per_m = params.stripe_rate_per_m;
    spec.stripe_amplitude = PRESET_STRIPE_AMPLITUDE;
    spec.rng_seed = seed;

    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed_f1a5);
    let mut amplitudes = PRESET_FLAW_AMPLITUDES;
    amplitudes.shuffle(&mut rng);
    let mut flaws: Vec<GroundTruthFlaw> = amplitudes
        .into_iter()
        .enumerate()
        .map(|(seg, amplitude)| GroundTruthFlaw {
            axial_position_m: (seg as f64 + rng.random_range(0.25..0.75)) * segment_m,
            axial_extent_m: default_extent(),
            radial_center_channel: rng.random_range(1.0..=16.0),
            radial_spread_channels: default_spread(),
            amplitude,
        })
        .collect();
    flaws.sort_by(|a, b| a.axial_position_m.total_cmp(&b.axial_position_m));
    spec.flaws = flaws;
    Some(spec)
}

/// The three scenario presets at seed 0.
pub fn scenario_presets() -> BTreeMap<String, SynthSpec> {
    SCENARIOS
        .iter()
        .map(|name| (name.to_string(), scenario_spec(name, 0).expect("known scenario")))
        .collect()
}
