use std::f64::consts::{FRAC_1_SQRT_2, PI};

use super::{PreprocessError, SampledSignal};

/// Second-order IIR section, normalised so that `a0 == 1`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Biquad {
    pub b: [f64; 3],
    pub a: [f64; 2],
}

impl Biquad {
    /// Butterworth (Q = 1/√2) low-pass via the bilinear transform.
    pub fn lowpass(cutoff: f64, rate: f64) -> Self {
        let (cos_w, alpha) = Self::prewarp(cutoff, rate);
        let b1 = 1.0 - cos_w;
        Self::normalised([b1 / 2.0, b1, b1 / 2.0], cos_w, alpha)
    }

    /// Butterworth (Q = 1/√2) high-pass via the bilinear transform.
    pub fn highpass(cutoff: f64, rate: f64) -> Self {
        let (cos_w, alpha) = Self::prewarp(cutoff, rate);
        let b1 = 1.0 + cos_w;
        Self::normalised([b1 / 2.0, -b1, b1 / 2.0], cos_w, alpha)
    }

    fn prewarp(cutoff: f64, rate: f64) -> (f64, f64) {
        let w0 = 2.0 * PI * cutoff / rate;
        (w0.cos(), w0.sin() / (2.0 * FRAC_1_SQRT_2))
    }

    fn normalised(b: [f64; 3], cos_w: f64, alpha: f64) -> Self {
        let a0 = 1.0 + alpha;
        Self {
            b: [b[0] / a0, b[1] / a0, b[2] / a0],
            a: [-2.0 * cos_w / a0, (1.0 - alpha) / a0],
        }
    }

    /// Transposed direct form II, zero initial state.
    pub fn apply(&self, x: &mut [f64]) {
        let (mut z1, mut z2) = (0.0, 0.0);
        for v in x.iter_mut() {
            let input = *v;
            let out = self.b[0] * input + z1;
            z1 = self.b[1] * input - self.a[0] * out + z2;
            z2 = self.b[2] * input - self.a[1] * out;
            *v = out;
        }
    }

    /// Magnitude response at `freq` Hz.
    pub fn gain(&self, freq: f64, rate: f64) -> f64 {
        let w = 2.0 * PI * freq / rate;
        let (c1, s1, c2, s2) = (w.cos(), w.sin(), (2.0 * w).cos(), (2.0 * w).sin());
        let num = (self.b[0] + self.b[1] * c1 + self.b[2] * c2, -self.b[1] * s1 - self.b[2] * s2);
        let den = (1.0 + self.a[0] * c1 + self.a[1] * c2, -self.a[0] * s1 - self.a[1] * s2);
        (num.0.hypot(num.1)) / (den.0.hypot(den.1))
    }
}

/// Remove the least-squares line through `(index, value)`.
pub fn detrend(values: &[f64]) -> Vec<f64> {
    let n = values.len() as f64;
    let mean_x = (n - 1.0) / 2.0;
    let mean_y = values.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx) = (0.0, 0.0);
    for (i, y) in values.iter().enumerate() {
        let dx = i as f64 - mean_x;
        sxy += dx * (y - mean_y);
        sxx += dx * dx;
    }
    let slope = if sxx > 0.0 { sxy / sxx } else { 0.0 };
    values
        .iter()
        .enumerate()
        .map(|(i, y)| (y - mean_y) - slope * (i as f64 - mean_x))
        .collect()
}

/// Zero-phase filtering: the cascade runs forward then backward over a
/// mirror-padded copy so edge transients fall in the padding.
fn filtfilt(sections: &[Biquad], values: &[f64], pad: usize) -> Vec<f64> {
    let n = values.len();
    let pad = pad.min(n - 1);
    let mut ext = Vec::with_capacity(n + 2 * pad);
    ext.extend((1..=pad).rev().map(|k| values[k]));
    ext.extend_from_slice(values);
    ext.extend((1..=pad).map(|k| values[n - 1 - k]));

    for s in sections {
        s.apply(&mut ext);
    }
    ext.reverse();
    for s in sections {
        s.apply(&mut ext);
    }
    ext.reverse();
    ext[pad..pad + n].to_vec()
}

/// Remove the linear trend, then band-limit to `[low, high]` Hz with a
/// zero-phase Butterworth high-pass/low-pass cascade.
pub fn detrend_and_filter(sig: &SampledSignal, low: f64, high: f64) -> Result<SampledSignal, PreprocessError> {
    let rate = sig.rate();
    if !(low > 0.0 && low < high && high < rate / 2.0) {
        return Err(PreprocessError::InvalidBand { low, high, rate });
    }
    let detrended = detrend(sig.values());
    let sections = [Biquad::highpass(low, rate), Biquad::lowpass(high, rate)];
    // Three time constants of the high-pass corner.
    let pad = (3.0 * rate / low).ceil() as usize;
    Ok(sig.map_values(filtfilt(&sections, &detrended, pad)))
}
