//! The five interval-irregularity features.
//!
//! | feature | meaning                                                    |
//! |---------|------------------------------------------------------------|
//! | f1      | population SD of the n-th successive difference (ms)       |
//! | f2      | two-bin histogram entropy, density-normalised (nats)       |
//! | f3      | distance between the KDE of the intervals and their        |
//! |         | maximum-likelihood Rayleigh fit                            |
//! | f4      | radius of the horizontal visibility graph (hops)           |
//! | f5      | `Σ e ln e` over the HVG degree mixing matrix (nats, ≤ 0)   |
//!
//! Logarithms are natural; standard deviations divide by the count.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::hvg::{self, HvGraph, HvgError};
use crate::preprocess::{mean_and_variance, IbiSequence};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FeatureError {
    #[error("series too short: {got} intervals, need at least {needed}")]
    SeriesTooShort { got: usize, needed: usize },
    #[error("interval {index} is not positive ({value} ms)")]
    NonPositiveInterval { index: usize, value: f64 },
    #[error("histogram needs at least one bin")]
    NoBins,
    #[error(transparent)]
    Graph(#[from] HvgError),
}

/// Resolution of the Rayleigh/KDE comparison grid, ms.
pub const GRID_STEP_MS: f64 = 1.0;

/// Lower bound on the KDE bandwidth, ms.
pub const MIN_BANDWIDTH_MS: f64 = 1.0;

/// Shortest sequence [`extract_features`] accepts.
pub const MIN_INTERVALS: usize = 10;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FeatureVector {
    pub f1: f64,
    pub f2: f64,
    pub f3: f64,
    pub f4: usize,
    pub f5: f64,
}

impl FeatureVector {
    pub const NAMES: [&'static str; 5] = ["f1", "f2", "f3", "f4", "f5"];

    pub fn to_array(&self) -> [f64; 5] {
        [self.f1, self.f2, self.f3, self.f4 as f64, self.f5]
    }

    /// Inverse of [`to_array`](Self::to_array); `f4` must be a whole number.
    pub fn from_array(values: [f64; 5]) -> Option<Self> {
        let f4 = values[3];
        if !(f4 >= 0.0 && f4.fract() == 0.0) {
            return None;
        }
        Some(Self {
            f1: values[0],
            f2: values[1],
            f3: values[2],
            f4: f4 as usize,
            f5: values[4],
        })
    }
}

/// Knobs exposed on the command line.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct FeatureConfig {
    pub deriv_order: usize,
    pub bins: usize,
}

impl Default for FeatureConfig {
    fn default() -> Self {
        Self {
            deriv_order: 5,
            bins: 2,
        }
    }
}

/// n-th order forward difference (length `len - n`, empty if too short).
pub fn nth_difference(values: &[f64], n: usize) -> Vec<f64> {
    let mut diff = values.to_vec();
    for _ in 0..n {
        if diff.is_empty() {
            break;
        }
        diff = diff.windows(2).map(|w| w[1] - w[0]).collect();
    }
    diff
}

/// Population SD of the n-th difference; needs `len >= n + 2`.
pub fn sd_of_nth_difference(values: &[f64], n: usize) -> Result<f64, FeatureError> {
    if values.len() < n + 2 {
        return Err(FeatureError::SeriesTooShort {
            got: values.len(),
            needed: n + 2,
        });
    }
    Ok(mean_and_variance(&nth_difference(values, n)).1.sqrt())
}

pub fn f1_sd_derivative(ibi: &IbiSequence, n: usize) -> Result<f64, FeatureError> {
    sd_of_nth_difference(ibi.intervals(), n)
}

/// `-Σ h_j ln(h_j / w_j)` over `bins` equal-width bins spanning the data;
/// the last bin is closed. A zero-width range gives 0.
pub fn histogram_entropy(values: &[f64], bins: usize) -> Result<f64, FeatureError> {
    if bins == 0 {
        return Err(FeatureError::NoBins);
    }
    if values.len() < 2 {
        return Err(FeatureError::SeriesTooShort {
            got: values.len(),
            needed: 2,
        });
    }
    let (lo, hi) = min_max(values);
    let range = hi - lo;
    if range <= 0.0 {
        return Ok(0.0);
    }
    let mut counts = vec![0usize; bins];
    for &v in values {
        let idx = (((v - lo) / range) * bins as f64).floor() as usize;
        counts[idx.min(bins - 1)] += 1;
    }
    let width = range / bins as f64;
    let n = values.len() as f64;
    Ok(-counts
        .into_iter()
        .filter(|&c| c > 0)
        .map(|c| {
            let h = c as f64 / n;
            h * (h / width).ln()
        })
        .sum::<f64>())
}

pub fn f2_histogram_entropy(ibi: &IbiSequence, bins: usize) -> Result<f64, FeatureError> {
    histogram_entropy(ibi.intervals(), bins)
}

fn min_max(values: &[f64]) -> (f64, f64) {
    values
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)))
}

/// Gaussian kernel standard deviation, ms.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KdeBandwidth {
    pub sigma_s: f64,
}

impl KdeBandwidth {
    /// Silverman's rule `(4 σ⁵ / 3N)^(1/5)`, floored at [`MIN_BANDWIDTH_MS`].
    pub fn silverman(values: &[f64]) -> Self {
        let n = values.len() as f64;
        let sd = mean_and_variance(values).1.sqrt();
        let raw = (4.0 * sd.powi(5) / (3.0 * n)).powf(0.2);
        Self {
            sigma_s: raw.max(MIN_BANDWIDTH_MS),
        }
    }
}

/// Gaussian kernel density estimate over a set of intervals.
#[derive(Debug, Clone)]
pub struct Kde {
    sorted: Vec<f64>,
    bandwidth: KdeBandwidth,
}

impl Kde {
    /// Kernels further than this many bandwidths away contribute < 1e-31
    /// of their peak and are skipped.
    const REACH: f64 = 12.0;

    pub fn new(values: &[f64]) -> Self {
        Self::with_bandwidth(values, KdeBandwidth::silverman(values))
    }

    pub fn with_bandwidth(values: &[f64], bandwidth: KdeBandwidth) -> Self {
        let mut sorted = values.to_vec();
        sorted.sort_by(f64::total_cmp);
        Self { sorted, bandwidth }
    }

    pub fn bandwidth(&self) -> KdeBandwidth {
        self.bandwidth
    }

    pub fn density(&self, x: f64) -> f64 {
        let h = self.bandwidth.sigma_s;
        let lo = self.sorted.partition_point(|&v| v < x - Self::REACH * h);
        let hi = self.sorted.partition_point(|&v| v <= x + Self::REACH * h);
        let norm = 1.0 / (h * (2.0 * PI).sqrt() * self.sorted.len() as f64);
        self.sorted[lo..hi]
            .iter()
            .map(|&v| {
                let z = (x - v) / h;
                (-0.5 * z * z).exp()
            })
            .sum::<f64>()
            * norm
    }
}

/// KDE of the intervals evaluated at `x` ms; density in 1/ms.
pub fn kde_density(ibi: &IbiSequence, x: f64) -> f64 {
    Kde::new(ibi.intervals()).density(x)
}

/// Rayleigh density `x/σ² · exp(-x²/2σ²)` for `x ≥ 0`.
pub fn rayleigh_pdf(x: f64, sigma: f64) -> f64 {
    if x < 0.0 {
        return 0.0;
    }
    let s2 = sigma * sigma;
    x / s2 * (-x * x / (2.0 * s2)).exp()
}

/// Maximum-likelihood Rayleigh scale plus the comparison grid it implies.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RayleighFit {
    pub sigma_ml: f64,
    pub grid_step: f64,
    pub grid_len: usize,
}

fn check_positive(values: &[f64]) -> Result<(), FeatureError> {
    if values.len() < 2 {
        return Err(FeatureError::SeriesTooShort {
            got: values.len(),
            needed: 2,
        });
    }
    match values.iter().enumerate().find(|(_, v)| !(v.is_finite() && **v > 0.0)) {
        Some((index, &value)) => Err(FeatureError::NonPositiveInterval { index, value }),
        None => Ok(()),
    }
}

/// `σ_ML = sqrt(Σ i² / 2N)`. The grid runs from `ε` to `M·ε` where `M` is
/// the first point past the mode with the Rayleigh density below 1% of its
/// peak, extended if needed to reach `max(I) + 3·bandwidth`.
pub fn rayleigh_fit(values: &[f64]) -> Result<RayleighFit, FeatureError> {
    check_positive(values)?;
    let n = values.len() as f64;
    let sigma = (values.iter().map(|v| v * v).sum::<f64>() / (2.0 * n)).sqrt();
    let step = GRID_STEP_MS;

    let cutoff = 0.01 * rayleigh_pdf(sigma, sigma);
    let mut m = (sigma / step).ceil().max(1.0) as usize;
    while rayleigh_pdf(m as f64 * step, sigma) >= cutoff {
        m += 1;
    }
    let (_, max) = min_max(values);
    let kde_reach = max + 3.0 * KdeBandwidth::silverman(values).sigma_s;
    let m = m.max((kde_reach / step).ceil() as usize);

    Ok(RayleighFit {
        sigma_ml: sigma,
        grid_step: step,
        grid_len: m,
    })
}

pub fn rayleigh_sigma_ml(ibi: &IbiSequence) -> Result<RayleighFit, FeatureError> {
    rayleigh_fit(ibi.intervals())
}

/// `Σ_{j=1..M} |r(jε; σ_ML) − f̂(jε)| / ε`.
pub fn rayleigh_resemblance(values: &[f64]) -> Result<f64, FeatureError> {
    let fit = rayleigh_fit(values)?;
    let kde = Kde::new(values);
    Ok((1..=fit.grid_len)
        .map(|j| {
            let x = j as f64 * fit.grid_step;
            (rayleigh_pdf(x, fit.sigma_ml) - kde.density(x)).abs() / fit.grid_step
        })
        .sum())
}

pub fn f3_rayleigh_resemblance(ibi: &IbiSequence) -> Result<f64, FeatureError> {
    rayleigh_resemblance(ibi.intervals())
}

/// All five features with the default derivative order and bin count.
pub fn extract_features(ibi: &IbiSequence) -> Result<FeatureVector, FeatureError> {
    extract_features_with(ibi, &FeatureConfig::default())
}

pub fn extract_features_with(ibi: &IbiSequence, config: &FeatureConfig) -> Result<FeatureVector, FeatureError> {
    let needed = MIN_INTERVALS.max(config.deriv_order + 2);
    if ibi.len() < needed {
        return Err(FeatureError::SeriesTooShort { got: ibi.len(), needed });
    }
    let values = ibi.intervals();
    let graph = HvGraph::build(values);
    Ok(FeatureVector {
        f1: sd_of_nth_difference(values, config.deriv_order)?,
        f2: histogram_entropy(values, config.bins)?,
        f3: rayleigh_resemblance(values)?,
        f4: graph.radius(),
        f5: hvg::mixing_matrix(&graph)?.log_sum(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ibi(values: &[f64]) -> IbiSequence {
        IbiSequence::from_intervals(values.to_vec()).unwrap()
    }

    #[test]
    fn f1_examples() {
        assert_eq!(f1_sd_derivative(&ibi(&[800.0; 10]), 5).unwrap(), 0.0);
        let ramp: Vec<f64> = (0..10).map(|k| 700.0 + 10.0 * k as f64).collect();
        assert!(f1_sd_derivative(&ibi(&ramp), 5).unwrap().abs() < 1e-9);
        let alt = [800.0, 810.0, 800.0, 810.0, 800.0, 810.0, 800.0];
        assert_eq!(nth_difference(&alt, 5), vec![160.0, -160.0]);
        assert!((f1_sd_derivative(&ibi(&alt), 5).unwrap() - 160.0).abs() < 1e-9);
    }

    #[test]
    fn f1_too_short() {
        assert_eq!(
            f1_sd_derivative(&ibi(&[800.0; 6]), 5),
            Err(FeatureError::SeriesTooShort { got: 6, needed: 7 })
        );
    }

    #[test]
    fn f2_examples() {
        assert_eq!(f2_histogram_entropy(&ibi(&[700.0; 5]), 2).unwrap(), 0.0);
        let expected = -(0.75 * (0.75f64 / 200.0).ln() + 0.25 * (0.25f64 / 200.0).ln());
        let got = f2_histogram_entropy(&ibi(&[600.0, 600.0, 600.0, 1000.0]), 2).unwrap();
        assert!((got - expected).abs() < 1e-9);
        assert!((got - 5.8607).abs() < 1e-4);
        let got = f2_histogram_entropy(&ibi(&[600.0, 600.0, 1000.0, 1000.0]), 2).unwrap();
        assert!((got + (0.5f64 / 200.0).ln()).abs() < 1e-9);
        assert!((got - 5.9915).abs() < 1e-4);
        assert_eq!(histogram_entropy(&[1.0, 2.0], 0), Err(FeatureError::NoBins));
    }

    #[test]
    fn sigma_ml_examples() {
        let fit = rayleigh_sigma_ml(&ibi(&[1.0; 4])).unwrap();
        assert!((fit.sigma_ml - 0.5f64.sqrt()).abs() < 1e-12);
        let fit = rayleigh_sigma_ml(&ibi(&[830.0; 7])).unwrap();
        assert!((fit.sigma_ml - 830.0 / 2f64.sqrt()).abs() < 1e-9);
        assert_eq!(fit.grid_step, 1.0);
    }

    #[test]
    fn rayleigh_grid_tail_condition() {
        let values = [640.0, 910.0, 720.0, 1180.0, 580.0, 850.0];
        let fit = rayleigh_fit(&values).unwrap();
        let peak = rayleigh_pdf(fit.sigma_ml, fit.sigma_ml);
        assert!(rayleigh_pdf(fit.grid_len as f64, fit.sigma_ml) < 0.01 * peak);
        let bw = KdeBandwidth::silverman(&values).sigma_s;
        assert!(fit.grid_len as f64 >= 1180.0 + 3.0 * bw);
    }

    #[test]
    fn rayleigh_rejects_nonpositive() {
        assert_eq!(
            rayleigh_fit(&[800.0, 0.0, 700.0]),
            Err(FeatureError::NonPositiveInterval { index: 1, value: 0.0 })
        );
    }

    #[test]
    fn kde_single_point_peak() {
        let seq = IbiSequence::from_intervals(vec![812.0]).unwrap();
        let peak = kde_density(&seq, 812.0);
        assert!((peak - 1.0 / (2.0 * PI).sqrt()).abs() < 1e-15);
    }

    #[test]
    fn kde_symmetric_pair() {
        let kde = Kde::new(&[700.0, 940.0]);
        for delta in [-300.0, -17.5, 0.0, 3.25, 120.0, 500.0] {
            let a = kde.density(700.0 + delta);
            let b = kde.density(940.0 - delta);
            assert!((a - b).abs() <= 1e-15 * a.max(1e-300));
        }
    }

    #[test]
    fn extract_constant_series() {
        let fv = extract_features(&ibi(&[800.0; 40])).unwrap();
        assert_eq!(fv.f1, 0.0);
        assert_eq!(fv.f2, 0.0);
        assert_eq!(fv.f4, 20);
        // Path on 40 vertices: 2 end edges (deg 1–2) and 37 interior (2–2).
        let expected_f5 = 2.0 * (1.0f64 / 39.0) * (1.0f64 / 39.0).ln() + (37.0f64 / 39.0) * (37.0f64 / 39.0).ln();
        assert!((fv.f5 - expected_f5).abs() < 1e-12);
        assert!(fv.f3 >= 0.0);
    }

    #[test]
    fn extract_too_short() {
        assert_eq!(
            extract_features(&ibi(&[800.0; 9])),
            Err(FeatureError::SeriesTooShort { got: 9, needed: 10 })
        );
    }

    #[test]
    fn feature_array_roundtrip() {
        let fv = FeatureVector {
            f1: 1.5,
            f2: 5.9,
            f3: 0.7,
            f4: 3,
            f5: -1.2,
        };
        assert_eq!(FeatureVector::from_array(fv.to_array()), Some(fv));
        assert_eq!(FeatureVector::from_array([0.0, 0.0, 0.0, 2.5, 0.0]), None);
    }
}
