//! Waveform preprocessing: raw recording to inter-beat intervals.
//!
//! The stages are pure functions and are meant to be chained:
//! [`resample_uniform`] → [`detrend_and_filter`] → [`standardize`] →
//! [`detect_beats`] → [`intervals_from_beats`].

mod detect;
mod filter;
pub mod io;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use detect::{detect_beats, detect_beats_with, DetectorConfig};
pub use filter::{detrend, detrend_and_filter, Biquad};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PreprocessError {
    #[error("recording needs at least 2 samples, got {0}")]
    EmptyRecording(usize),
    #[error("sample times must be strictly increasing (index {0})")]
    NonMonotonicTime(usize),
    #[error("non-finite sample at index {0}")]
    NonFiniteSample(usize),
    #[error("invalid sample rate {0} Hz")]
    InvalidRate(f64),
    #[error("recording of {duration} s is too short for {rate} Hz resampling")]
    RecordingTooShort { duration: f64, rate: f64 },
    #[error("invalid pass band [{low}, {high}] Hz at sample rate {rate} Hz")]
    InvalidBand { low: f64, high: f64, rate: f64 },
    #[error("signal has zero variance")]
    ZeroVariance,
    #[error("too few beats: found {found}, need at least {needed}")]
    TooFewBeats { found: usize, needed: usize },
    #[error("beat times must be finite and strictly increasing (index {0})")]
    InvalidBeatTimes(usize),
    #[error("interval {index} is not a positive finite duration ({value} ms)")]
    NonPositiveInterval { index: usize, value: f64 },
}

/// Origin of a waveform; selects the filter band and beat detector.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SignalKind {
    Ecg,
    Ppg,
}

impl SignalKind {
    /// Default pass band in Hz: ECG keeps QRS energy, PPG keeps the pulse
    /// fundamental and a few harmonics below the 15 Hz Nyquist of 30 Hz video.
    pub fn default_band(self) -> (f64, f64) {
        match self {
            SignalKind::Ecg => (0.5, 40.0),
            SignalKind::Ppg => (0.5, 8.0),
        }
    }
}

impl std::str::FromStr for SignalKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "ecg" => Ok(SignalKind::Ecg),
            "ppg" => Ok(SignalKind::Ppg),
            other => Err(format!("unknown signal kind `{other}` (expected ecg or ppg)")),
        }
    }
}

impl std::fmt::Display for SignalKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            SignalKind::Ecg => "ecg",
            SignalKind::Ppg => "ppg",
        })
    }
}

/// A possibly irregularly sampled waveform as it comes off a device.
#[derive(Debug, Clone, PartialEq)]
pub struct RawRecording {
    times: Vec<f64>,
    values: Vec<f64>,
    kind: SignalKind,
    nominal_rate: f64,
}

impl RawRecording {
    pub fn new(
        times: Vec<f64>,
        values: Vec<f64>,
        kind: SignalKind,
        nominal_rate: f64,
    ) -> Result<Self, PreprocessError> {
        assert_eq!(times.len(), values.len(), "times and values differ in length");
        if times.len() < 2 {
            return Err(PreprocessError::EmptyRecording(times.len()));
        }
        if !(nominal_rate.is_finite() && nominal_rate > 0.0) {
            return Err(PreprocessError::InvalidRate(nominal_rate));
        }
        for (i, (t, v)) in times.iter().zip(&values).enumerate() {
            if !t.is_finite() || !v.is_finite() {
                return Err(PreprocessError::NonFiniteSample(i));
            }
        }
        if let Some(i) = times.windows(2).position(|w| w[1] <= w[0]) {
            return Err(PreprocessError::NonMonotonicTime(i + 1));
        }
        Ok(Self {
            times,
            values,
            kind,
            nominal_rate,
        })
    }

    pub fn from_samples(
        samples: &[(f64, f64)],
        kind: SignalKind,
        nominal_rate: f64,
    ) -> Result<Self, PreprocessError> {
        let (times, values) = samples.iter().copied().unzip();
        Self::new(times, values, kind, nominal_rate)
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn kind(&self) -> SignalKind {
        self.kind
    }

    pub fn nominal_rate(&self) -> f64 {
        self.nominal_rate
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn duration(&self) -> f64 {
        self.times[self.times.len() - 1] - self.times[0]
    }

    pub fn start_time(&self) -> f64 {
        self.times[0]
    }
}

/// Uniformly sampled waveform. `start` is the time of the first sample.
#[derive(Debug, Clone, PartialEq)]
pub struct SampledSignal {
    values: Vec<f64>,
    rate: f64,
    start: f64,
}

impl SampledSignal {
    pub fn new(values: Vec<f64>, rate: f64) -> Result<Self, PreprocessError> {
        Self::with_start(values, rate, 0.0)
    }

    pub fn with_start(values: Vec<f64>, rate: f64, start: f64) -> Result<Self, PreprocessError> {
        if !(rate.is_finite() && rate > 0.0) {
            return Err(PreprocessError::InvalidRate(rate));
        }
        if values.len() < 2 {
            return Err(PreprocessError::EmptyRecording(values.len()));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(PreprocessError::NonFiniteSample(i));
        }
        Ok(Self {
            values,
            rate,
            start,
        })
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn rate(&self) -> f64 {
        self.rate
    }

    pub fn start(&self) -> f64 {
        self.start
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn duration(&self) -> f64 {
        (self.values.len() - 1) as f64 / self.rate
    }

    /// Time of sample `index` (fractional indices allowed).
    pub fn time_at(&self, index: f64) -> f64 {
        self.start + index / self.rate
    }

    pub(crate) fn map_values(&self, values: Vec<f64>) -> Self {
        debug_assert_eq!(values.len(), self.values.len());
        Self {
            values,
            rate: self.rate,
            start: self.start,
        }
    }
}

/// Inter-beat intervals in milliseconds together with the beat times (s)
/// that delimit them. `beat_times.len() == intervals.len() + 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct IbiSequence {
    intervals: Vec<f64>,
    beat_times: Vec<f64>,
}

impl IbiSequence {
    /// Intervals are differenced directly from the beat times; no plausibility
    /// screening is applied (see [`intervals_from_beats`] for that).
    pub fn from_beat_times(beat_times: Vec<f64>) -> Result<Self, PreprocessError> {
        if beat_times.len() < 2 {
            return Err(PreprocessError::TooFewBeats {
                found: beat_times.len(),
                needed: 2,
            });
        }
        if let Some(i) = beat_times.iter().position(|t| !t.is_finite()) {
            return Err(PreprocessError::InvalidBeatTimes(i));
        }
        if let Some(i) = beat_times.windows(2).position(|w| w[1] <= w[0]) {
            return Err(PreprocessError::InvalidBeatTimes(i + 1));
        }
        let intervals = beat_times.windows(2).map(|w| (w[1] - w[0]) * 1000.0).collect();
        Ok(Self {
            intervals,
            beat_times,
        })
    }

    /// Intervals as given; beat times are reconstructed as the running sum
    /// starting at 0 s.
    pub fn from_intervals(intervals: Vec<f64>) -> Result<Self, PreprocessError> {
        Self::from_intervals_at(intervals, 0.0)
    }

    pub fn from_intervals_at(intervals: Vec<f64>, first_beat: f64) -> Result<Self, PreprocessError> {
        if intervals.is_empty() {
            return Err(PreprocessError::TooFewBeats { found: 1, needed: 2 });
        }
        if let Some((index, &value)) = intervals
            .iter()
            .enumerate()
            .find(|(_, v)| !(v.is_finite() && **v > 0.0))
        {
            return Err(PreprocessError::NonPositiveInterval { index, value });
        }
        let mut beat_times = Vec::with_capacity(intervals.len() + 1);
        let mut elapsed_ms = 0.0;
        beat_times.push(first_beat);
        for &ms in &intervals {
            elapsed_ms += ms;
            beat_times.push(first_beat + elapsed_ms / 1000.0);
        }
        Ok(Self {
            intervals,
            beat_times,
        })
    }

    pub fn intervals(&self) -> &[f64] {
        &self.intervals
    }

    pub fn beat_times(&self) -> &[f64] {
        &self.beat_times
    }

    /// Number of intervals.
    pub fn len(&self) -> usize {
        self.intervals.len()
    }

    pub fn is_empty(&self) -> bool {
        self.intervals.is_empty()
    }

    pub fn total_ms(&self) -> f64 {
        self.intervals.iter().sum()
    }
}

/// Linear interpolation of `rec` onto a uniform grid starting at its first
/// sample time. Output length is `floor(duration * target_rate) + 1`.
pub fn resample_uniform(rec: &RawRecording, target_rate: f64) -> Result<SampledSignal, PreprocessError> {
    if !(target_rate.is_finite() && target_rate > 0.0) {
        return Err(PreprocessError::InvalidRate(target_rate));
    }
    let duration = rec.duration();
    if duration * target_rate < 2.0 - 1e-9 {
        return Err(PreprocessError::RecordingTooShort {
            duration,
            rate: target_rate,
        });
    }
    // A grid point within a millionth of a sample of the last timestamp is
    // kept, so exact multiples survive rounding of the timestamps.
    let len = (duration * target_rate + 1e-6).floor() as usize + 1;
    let times = rec.times();
    let values = rec.values();
    let t0 = times[0];

    let mut out = Vec::with_capacity(len);
    let mut seg = 0;
    for k in 0..len {
        let t = (t0 + k as f64 / target_rate).min(times[times.len() - 1]);
        while seg + 2 < times.len() && times[seg + 1] < t {
            seg += 1;
        }
        let (ta, tb) = (times[seg], times[seg + 1]);
        let (va, vb) = (values[seg], values[seg + 1]);
        let frac = (t - ta) / (tb - ta);
        out.push(va + (vb - va) * frac);
    }
    SampledSignal::with_start(out, target_rate, t0)
}

/// Mean and population variance.
pub(crate) fn mean_and_variance(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    (mean, var)
}

/// Rescale to zero mean and unit population variance.
pub fn standardize(sig: &SampledSignal) -> Result<SampledSignal, PreprocessError> {
    let (mean, var) = mean_and_variance(sig.values());
    if !(var > 0.0 && var.is_finite()) {
        return Err(PreprocessError::ZeroVariance);
    }
    let centered: Vec<f64> = sig.values().iter().map(|v| v - mean).collect();
    // Second pass on the centred data keeps the result exact to ~1 ulp even
    // when the mean dominates the spread.
    let (residual_mean, var) = mean_and_variance(&centered);
    let sd = var.sqrt();
    Ok(sig.map_values(centered.iter().map(|v| (v - residual_mean) / sd).collect()))
}

/// Physiological plausibility bounds for a single interval.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IntervalBounds {
    pub min_ms: f64,
    pub max_ms: f64,
}

impl Default for IntervalBounds {
    /// 250–3000 ms, i.e. 20–240 bpm.
    fn default() -> Self {
        Self {
            min_ms: 250.0,
            max_ms: 3000.0,
        }
    }
}

/// [`intervals_from_beats_with`] using the default 250–3000 ms bounds.
pub fn intervals_from_beats(beat_times: &[f64]) -> Result<IbiSequence, PreprocessError> {
    intervals_from_beats_with(beat_times, IntervalBounds::default())
}

/// Difference beat times into intervals, discarding implausible ones.
///
/// A beat arriving less than `min_ms` after the last accepted beat is
/// dropped, so the interval is measured to the following beat instead.
/// A gap longer than `max_ms` cannot be repaired by dropping a beat; the
/// sequence is split there and the longest plausible run is kept.
pub fn intervals_from_beats_with(
    beat_times: &[f64],
    bounds: IntervalBounds,
) -> Result<IbiSequence, PreprocessError> {
    if beat_times.len() < 3 {
        return Err(PreprocessError::TooFewBeats {
            found: beat_times.len(),
            needed: 3,
        });
    }
    if let Some(i) = beat_times.iter().position(|t| !t.is_finite()) {
        return Err(PreprocessError::InvalidBeatTimes(i));
    }
    if let Some(i) = beat_times.windows(2).position(|w| w[1] <= w[0]) {
        return Err(PreprocessError::InvalidBeatTimes(i + 1));
    }

    let mut runs: Vec<Vec<f64>> = vec![vec![beat_times[0]]];
    for &t in &beat_times[1..] {
        let run = runs.last_mut().expect("at least one run");
        let last = *run.last().expect("runs are never empty");
        let gap_ms = (t - last) * 1000.0;
        if gap_ms < bounds.min_ms {
            continue;
        }
        if gap_ms > bounds.max_ms {
            runs.push(vec![t]);
        } else {
            run.push(t);
        }
    }

    // Longest run; earliest wins ties.
    let best = runs
        .into_iter()
        .reduce(|best, run| if run.len() > best.len() { run } else { best })
        .expect("at least one run");
    if best.len() < 3 {
        return Err(PreprocessError::TooFewBeats {
            found: best.len(),
            needed: 3,
        });
    }
    IbiSequence::from_beat_times(best)
}
