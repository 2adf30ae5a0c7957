//! Beat detection on preprocessed (filtered, standardised) signals.
//!
//! PPG: local maxima above a rolling `median + k·MAD` threshold.
//! ECG: derivative → squaring → moving-window integration with adaptive
//! signal/noise peak levels and search-back, then the R peak is located on
//! the filtered signal inside the integration window.
//!
//! Both detectors only compare ratios of signal values, so they return the
//! same beats for any positive rescaling of the input.

use super::{PreprocessError, SampledSignal, SignalKind};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DetectorConfig {
    /// Minimum spacing between reported beats, seconds.
    pub refractory: f64,
    /// Rolling window for the PPG threshold, seconds.
    pub ppg_window: f64,
    /// MAD multiplier of the PPG threshold.
    pub ppg_mad_k: f64,
    /// Moving-window integration length for ECG, seconds.
    pub ecg_integration: f64,
}

impl Default for DetectorConfig {
    fn default() -> Self {
        Self {
            refractory: 0.25,
            ppg_window: 2.0,
            ppg_mad_k: 2.0,
            ecg_integration: 0.15,
        }
    }
}

/// Beat times in seconds, using [`DetectorConfig::default`].
pub fn detect_beats(sig: &SampledSignal, kind: SignalKind) -> Result<Vec<f64>, PreprocessError> {
    detect_beats_with(sig, kind, &DetectorConfig::default())
}

pub fn detect_beats_with(
    sig: &SampledSignal,
    kind: SignalKind,
    config: &DetectorConfig,
) -> Result<Vec<f64>, PreprocessError> {
    let x = sig.values();
    let candidates = match kind {
        SignalKind::Ppg => ppg_candidates(x, sig.rate(), config),
        SignalKind::Ecg => ecg_candidates(x, sig.rate(), config),
    };
    let peaks = enforce_refractory(x, candidates, config.refractory * sig.rate());
    if peaks.len() < 2 {
        return Err(PreprocessError::TooFewBeats {
            found: peaks.len(),
            needed: 2,
        });
    }
    Ok(peaks.into_iter().map(|p| sig.time_at(p)).collect())
}

fn is_local_max(x: &[f64], i: usize) -> bool {
    let n = x.len();
    let left = i == 0 || x[i] > x[i - 1];
    let right = i + 1 == n || x[i] >= x[i + 1];
    // An edge sample only counts when it beats its single neighbour.
    let edge_ok = n > 1 && !(i == 0 && x[0] <= x[1]) && !(i + 1 == n && x[n - 1] <= x[n - 2]);
    left && right && edge_ok
}

/// Sub-sample peak position from a parabola through the three samples
/// around `i`; edges stay on the sample.
fn refine(x: &[f64], i: usize) -> f64 {
    if i == 0 || i + 1 >= x.len() {
        return i as f64;
    }
    let denom = x[i - 1] - 2.0 * x[i] + x[i + 1];
    if denom >= 0.0 {
        return i as f64;
    }
    let offset = (0.5 * (x[i - 1] - x[i + 1]) / denom).clamp(-0.5, 0.5);
    i as f64 + offset
}

fn median(values: &mut [f64]) -> f64 {
    values.sort_by(f64::total_cmp);
    let n = values.len();
    if n % 2 == 1 {
        values[n / 2]
    } else {
        0.5 * (values[n / 2 - 1] + values[n / 2])
    }
}

fn ppg_candidates(x: &[f64], rate: f64, config: &DetectorConfig) -> Vec<usize> {
    let n = x.len();
    let half = ((config.ppg_window * rate) / 2.0).round().max(1.0) as usize;
    let mut scratch = Vec::with_capacity(2 * half + 1);
    (0..n)
        .filter(|&i| is_local_max(x, i))
        .filter(|&i| {
            let window = &x[i.saturating_sub(half)..(i + half + 1).min(n)];
            scratch.clear();
            scratch.extend_from_slice(window);
            let med = median(&mut scratch);
            for v in scratch.iter_mut() {
                *v = (*v - med).abs();
            }
            let mad = median(&mut scratch);
            x[i] > med + config.ppg_mad_k * mad
        })
        .collect()
}

/// Five-point derivative, zero at the two samples nearest each edge.
fn derivative(x: &[f64], rate: f64) -> Vec<f64> {
    let n = x.len();
    let mut d = vec![0.0; n];
    for i in 2..n.saturating_sub(2) {
        d[i] = (2.0 * x[i + 2] + x[i + 1] - x[i - 1] - 2.0 * x[i - 2]) * rate / 8.0;
    }
    d
}

/// Centred moving average of `values` over `width` samples.
fn moving_window(values: &[f64], width: usize) -> Vec<f64> {
    let n = values.len();
    let half = width / 2;
    let mut prefix = Vec::with_capacity(n + 1);
    prefix.push(0.0);
    let mut acc = 0.0;
    for v in values {
        acc += v;
        prefix.push(acc);
    }
    (0..n)
        .map(|i| {
            let lo = i.saturating_sub(half);
            let hi = (i + half + 1).min(n);
            (prefix[hi] - prefix[lo]) / width as f64
        })
        .collect()
}

#[derive(Debug, Clone, Copy)]
struct Peak {
    index: usize,
    height: f64,
}

fn ecg_candidates(x: &[f64], rate: f64, config: &DetectorConfig) -> Vec<usize> {
    let n = x.len();
    let width = (config.ecg_integration * rate).round().max(1.0) as usize;
    let squared: Vec<f64> = derivative(x, rate).into_iter().map(|d| d * d).collect();
    let mwi = moving_window(&squared, width);
    let refractory = config.refractory * rate;

    let peaks: Vec<Peak> = (0..n)
        .filter(|&i| is_local_max(&mwi, i))
        .map(|i| Peak {
            index: i,
            height: mwi[i],
        })
        .collect();
    if peaks.is_empty() {
        return Vec::new();
    }

    // Learning phase over the first two seconds.
    let learn = &mwi[..((2.0 * rate) as usize).clamp(1, n)];
    let mut spki = 0.25 * learn.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut npki = 0.5 * learn.iter().sum::<f64>() / learn.len() as f64;

    let mut qrs: Vec<Peak> = Vec::new();
    let mut noise: Vec<Peak> = Vec::new();
    let mut rr: Vec<f64> = Vec::new();

    for peak in peaks {
        let threshold = npki + 0.25 * (spki - npki);
        if peak.height <= threshold {
            npki = 0.125 * peak.height + 0.875 * npki;
            noise.push(peak);
            continue;
        }
        if let Some(last) = qrs.last_mut() {
            if ((peak.index - last.index) as f64) < refractory {
                if peak.height > last.height {
                    *last = peak;
                }
                continue;
            }
        }

        // Search back for a missed beat when the gap is unusually long.
        if let (Some(last), false) = (qrs.last().copied(), rr.is_empty()) {
            let recent = &rr[rr.len().saturating_sub(8)..];
            let rr_avg = recent.iter().sum::<f64>() / recent.len() as f64;
            let gap = (peak.index - last.index) as f64;
            if gap > 1.66 * rr_avg {
                let missed = noise
                    .iter()
                    .filter(|p| {
                        p.index > last.index
                            && (p.index - last.index) as f64 >= refractory
                            && ((peak.index - p.index) as f64) >= refractory
                            && p.height > 0.5 * threshold
                    })
                    .copied()
                    .max_by(|a, b| a.height.total_cmp(&b.height));
                if let Some(m) = missed {
                    spki = 0.25 * m.height + 0.75 * spki;
                    rr.push((m.index - last.index) as f64);
                    qrs.push(m);
                }
            }
        }

        spki = 0.125 * peak.height + 0.875 * spki;
        if let Some(last) = qrs.last() {
            rr.push((peak.index - last.index) as f64);
        }
        qrs.push(peak);
    }

    // Locate the R peak on the filtered signal around each integrator peak.
    let reach = width / 2 + 2;
    let mut located: Vec<usize> = qrs
        .iter()
        .map(|p| {
            let lo = p.index.saturating_sub(reach);
            let hi = (p.index + reach + 1).min(n);
            (lo..hi)
                .max_by(|&a, &b| x[a].total_cmp(&x[b]).then(b.cmp(&a)))
                .expect("non-empty window")
        })
        .collect();
    located.dedup();
    located
}

/// Greedy refractory screening: stronger peaks claim their neighbourhood
/// first. Returns refined fractional sample positions in increasing order.
fn enforce_refractory(x: &[f64], mut candidates: Vec<usize>, refractory: f64) -> Vec<f64> {
    candidates.sort_by(|&a, &b| x[b].total_cmp(&x[a]).then(a.cmp(&b)));
    let mut accepted: Vec<f64> = Vec::with_capacity(candidates.len());
    for i in candidates {
        let pos = refine(x, i);
        let slot = accepted.partition_point(|&p| p < pos);
        let clear_left = slot == 0 || pos - accepted[slot - 1] >= refractory;
        let clear_right = slot == accepted.len() || accepted[slot] - pos >= refractory;
        if clear_left && clear_right {
            accepted.insert(slot, pos);
        }
    }
    accepted
}
