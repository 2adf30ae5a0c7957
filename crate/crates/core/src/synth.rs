//! Seeded synthetic rhythms and waveforms.
//!
//! Sinus rhythm is a mean interval modulated by a respiratory sinusoid plus
//! small Gaussian jitter, so successive intervals are positively
//! correlated. AFib intervals are drawn independently from a shifted gamma
//! distribution with a 250 ms floor, giving irregular, serially
//! uncorrelated beats. All randomness comes from `ChaCha8Rng` seeded by the
//! caller.

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Gamma, Normal};
use thiserror::Error;

use crate::classifier::Label;
use crate::preprocess::{IbiSequence, IntervalBounds, PreprocessError, RawRecording, SignalKind};

/// Respiratory modulation period of sinus rhythm, in beats.
pub const RESPIRATORY_PERIOD_BEATS: f64 = 6.0;

/// Mixed into the seed when drawing cohort parameters, so they do not
/// share a stream with the interval draws.
const SPEC_STREAM: u64 = 0x5eed_c0de_0000_0001;

/// Lowest sampling rate accepted for each signal kind, Hz.
pub fn min_rate(kind: SignalKind) -> f64 {
    match kind {
        SignalKind::Ppg => 20.0,
        SignalKind::Ecg => 100.0,
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SynthError {
    #[error("invalid rhythm spec: {0}")]
    InvalidSpec(String),
    #[error("{kind} sampling rate {rate} Hz below minimum {min} Hz")]
    InvalidRate { kind: SignalKind, rate: f64, min: f64 },
    #[error(transparent)]
    Preprocess(#[from] PreprocessError),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RhythmSpec {
    pub kind: Label,
    /// Seconds.
    pub duration: f64,
    /// Mean interval, ms.
    pub mean_ibi: f64,
    /// Sinus: respiratory amplitude (jitter SD is a quarter of it).
    /// AFib: SD of the interval distribution.
    pub variability: f64,
    pub seed: u64,
}

impl RhythmSpec {
    pub fn new(kind: Label, mean_ibi: f64, variability: f64, seed: u64) -> Self {
        Self {
            kind,
            duration: 30.0,
            mean_ibi,
            variability,
            seed,
        }
    }

    pub fn validate(&self) -> Result<(), SynthError> {
        let bounds = IntervalBounds::default();
        if !(self.duration.is_finite() && self.duration > 0.0) {
            return Err(SynthError::InvalidSpec(format!("duration {} s", self.duration)));
        }
        if !(bounds.min_ms..=bounds.max_ms).contains(&self.mean_ibi) {
            return Err(SynthError::InvalidSpec(format!(
                "mean_ibi {} ms outside [{}, {}]",
                self.mean_ibi, bounds.min_ms, bounds.max_ms
            )));
        }
        if !(self.variability.is_finite() && self.variability >= 0.0) {
            return Err(SynthError::InvalidSpec(format!("variability {} ms", self.variability)));
        }
        Ok(())
    }
}

/// Cohort parameters for one recording: the seed fixes both the rhythm
/// parameters and the interval draws. AFib variability always exceeds four
/// times the largest sinus variability.
pub fn cohort_spec(kind: Label, seed: u64) -> RhythmSpec {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ SPEC_STREAM);
    let (mean_ibi, variability) = match kind {
        Label::Sinus => (rng.gen_range(650.0..1100.0), rng.gen_range(10.0..40.0)),
        Label::AFib => (rng.gen_range(500.0..900.0), rng.gen_range(160.0..280.0)),
    };
    RhythmSpec::new(kind, mean_ibi, variability, seed)
}

/// Per-beat interval model.
enum IntervalModel {
    Sinus { mean: f64, amplitude: f64, phase: f64, jitter: Normal<f64> },
    ShiftedGamma { floor: f64, gamma: Gamma<f64> },
    Constant(f64),
}

impl IntervalModel {
    fn new(spec: &RhythmSpec, floor: f64, rng: &mut ChaCha8Rng) -> Self {
        match spec.kind {
            Label::Sinus => IntervalModel::Sinus {
                mean: spec.mean_ibi,
                amplitude: spec.variability,
                phase: rng.gen_range(0.0..2.0 * PI),
                jitter: Normal::new(0.0, spec.variability / 4.0).expect("finite sd"),
            },
            Label::AFib => {
                let excess = spec.mean_ibi - floor;
                if spec.variability == 0.0 || excess <= 0.0 {
                    return IntervalModel::Constant(spec.mean_ibi);
                }
                let shape = (excess / spec.variability).powi(2);
                let scale = spec.variability.powi(2) / excess;
                IntervalModel::ShiftedGamma {
                    floor,
                    gamma: Gamma::new(shape, scale).expect("positive gamma parameters"),
                }
            }
        }
    }

    fn sample(&self, beat: usize, rng: &mut ChaCha8Rng) -> f64 {
        match self {
            IntervalModel::Sinus {
                mean,
                amplitude,
                phase,
                jitter,
            } => {
                let angle = 2.0 * PI * beat as f64 / RESPIRATORY_PERIOD_BEATS + phase;
                mean + amplitude * angle.sin() + jitter.sample(rng)
            }
            IntervalModel::ShiftedGamma { floor, gamma } => floor + gamma.sample(rng),
            IntervalModel::Constant(v) => *v,
        }
    }
}

pub fn gen_ibis(spec: &RhythmSpec) -> Result<IbiSequence, SynthError> {
    spec.validate()?;
    let bounds = IntervalBounds::default();
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let budget_ms = spec.duration * 1000.0;
    let model = IntervalModel::new(spec, bounds.min_ms, &mut rng);

    let mut intervals = Vec::new();
    let mut elapsed = 0.0;
    for j in 0.. {
        let ibi = model.sample(j, &mut rng).clamp(bounds.min_ms, bounds.max_ms);
        if elapsed + ibi > budget_ms {
            break;
        }
        elapsed += ibi;
        intervals.push(ibi);
    }
    if intervals.is_empty() {
        return Err(SynthError::InvalidSpec(format!(
            "duration {} s holds no complete interval",
            spec.duration
        )));
    }
    Ok(IbiSequence::from_intervals(intervals)?)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WaveformOptions {
    /// Signal-to-noise ratio of additive white Gaussian noise, relative to
    /// the variance of the clean waveform. `None` adds no noise.
    pub snr_db: Option<f64>,
    /// Amplitude of a slow sinusoidal baseline wander (pulse height = 1).
    pub drift_amplitude: f64,
    /// Uniform jitter of the sample timestamps, as a fraction of the sample
    /// period (must be < 0.5 to keep times increasing).
    pub timing_jitter: f64,
    pub seed: u64,
}

impl Default for WaveformOptions {
    fn default() -> Self {
        Self {
            snr_db: None,
            drift_amplitude: 0.0,
            timing_jitter: 0.0,
            seed: 0,
        }
    }
}

/// A generated recording with the beat times it was built from.
#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticRecording {
    pub recording: RawRecording,
    pub beat_times: Vec<f64>,
}

/// PPG: raised-cosine pulse centred on each beat, width 40% of the shorter
/// neighbouring interval capped at 300 ms. ECG: 40 ms triangular spike.
pub fn gen_waveform(
    ibi: &IbiSequence,
    kind: SignalKind,
    rate: f64,
    options: &WaveformOptions,
) -> Result<SyntheticRecording, SynthError> {
    let min = min_rate(kind);
    if !(rate.is_finite() && rate >= min) {
        return Err(SynthError::InvalidRate { kind, rate, min });
    }
    if !(0.0..0.5).contains(&options.timing_jitter) {
        return Err(SynthError::InvalidSpec(format!(
            "timing jitter {} outside [0, 0.5)",
            options.timing_jitter
        )));
    }
    let beats = ibi.beat_times().to_vec();
    let t0 = beats[0];
    let span = beats[beats.len() - 1] - t0;
    let n = (span * rate - 1e-9).ceil().max(1.0) as usize + 1;

    let mut rng = ChaCha8Rng::seed_from_u64(options.seed);
    let times: Vec<f64> = (0..n)
        .map(|k| {
            let jitter = if options.timing_jitter > 0.0 && k > 0 {
                rng.gen_range(-options.timing_jitter..options.timing_jitter)
            } else {
                0.0
            };
            t0 + (k as f64 + jitter) / rate
        })
        .collect();

    let widths: Vec<f64> = match kind {
        SignalKind::Ppg => (0..beats.len())
            .map(|b| {
                let prev = if b > 0 { beats[b] - beats[b - 1] } else { f64::INFINITY };
                let next = if b + 1 < beats.len() { beats[b + 1] - beats[b] } else { f64::INFINITY };
                (0.4 * prev.min(next)).min(0.3)
            })
            .collect(),
        SignalKind::Ecg => vec![0.04; beats.len()],
    };

    let mut values: Vec<f64> = times.iter().map(|&t| pulse_sum(t, &beats, &widths, kind)).collect();

    if let Some(snr_db) = options.snr_db {
        let mean = values.iter().sum::<f64>() / n as f64;
        let power = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n as f64;
        let sd = (power / 10f64.powf(snr_db / 10.0)).sqrt();
        let noise = Normal::new(0.0, sd).map_err(|e| SynthError::InvalidSpec(e.to_string()))?;
        for v in values.iter_mut() {
            *v += noise.sample(&mut rng);
        }
    }
    if options.drift_amplitude != 0.0 {
        let phase = rng.gen_range(0.0..2.0 * PI);
        for (v, t) in values.iter_mut().zip(&times) {
            *v += options.drift_amplitude * (2.0 * PI * 0.15 * (t - t0) + phase).sin();
        }
    }

    Ok(SyntheticRecording {
        recording: RawRecording::new(times, values, kind, rate)?,
        beat_times: beats,
    })
}

fn pulse_sum(t: f64, beats: &[f64], widths: &[f64], kind: SignalKind) -> f64 {
    // Beats are sorted and pulses are narrower than 0.3 s, so only nearby
    // beats can contribute.
    let start = beats.partition_point(|&b| b < t - 0.3);
    beats[start..]
        .iter()
        .zip(&widths[start..])
        .take_while(|(&b, _)| b <= t + 0.3)
        .map(|(&b, &w)| {
            let d = (t - b).abs();
            let half = w / 2.0;
            if d >= half {
                return 0.0;
            }
            match kind {
                SignalKind::Ppg => 0.5 * (1.0 + (PI * d / half).cos()),
                SignalKind::Ecg => 1.0 - d / half,
            }
        })
        .sum()
}

/// One labelled member of a synthetic cohort.
#[derive(Debug, Clone, PartialEq)]
pub struct CohortMember {
    pub label: Label,
    pub spec: RhythmSpec,
    pub ibis: IbiSequence,
}

/// `per_class` sinus recordings with seeds `first_seed..`, followed by
/// `per_class` AFib recordings with the next seeds.
pub fn cohort(per_class: usize, first_seed: u64) -> Result<Vec<CohortMember>, SynthError> {
    let sinus = (0..per_class).map(|i| (Label::Sinus, first_seed + i as u64));
    let afib = (0..per_class).map(|i| (Label::AFib, first_seed + (per_class + i) as u64));
    sinus
        .chain(afib)
        .map(|(label, seed)| {
            let spec = cohort_spec(label, seed);
            Ok(CohortMember {
                label,
                spec,
                ibis: gen_ibis(&spec)?,
            })
        })
        .collect()
}

/// Lag-1 autocorrelation (population normalisation).
pub fn lag1_autocorrelation(values: &[f64]) -> f64 {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var: f64 = values.iter().map(|v| (v - mean).powi(2)).sum();
    if var == 0.0 {
        return 0.0;
    }
    let cov: f64 = values.windows(2).map(|w| (w[0] - mean) * (w[1] - mean)).sum();
    cov / var
}
