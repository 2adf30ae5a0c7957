//! Recording to features in one call.

use thiserror::Error;

use crate::features::{extract_features_with, FeatureConfig, FeatureError, FeatureVector};
use crate::preprocess::{
    detect_beats_with, detrend_and_filter, intervals_from_beats_with, resample_uniform, standardize, DetectorConfig,
    IbiSequence, IntervalBounds, PreprocessError, RawRecording,
};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PipelineError {
    #[error(transparent)]
    Preprocess(#[from] PreprocessError),
    #[error(transparent)]
    Feature(#[from] FeatureError),
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct PipelineConfig {
    /// Resampling rate, Hz; the recording's nominal rate when `None`.
    pub rate: Option<f64>,
    /// Pass band, Hz; the signal kind's default when `None`.
    pub band: Option<(f64, f64)>,
    pub detector: DetectorConfig,
    pub bounds: IntervalBounds,
    pub features: FeatureConfig,
}

/// Beat times in seconds after resampling, filtering and standardising.
pub fn detect_recording_beats(rec: &RawRecording, config: &PipelineConfig) -> Result<Vec<f64>, PreprocessError> {
    let rate = config.rate.unwrap_or(rec.nominal_rate());
    let (low, high) = config.band.unwrap_or(rec.kind().default_band());
    let sig = resample_uniform(rec, rate)?;
    let sig = standardize(&detrend_and_filter(&sig, low, high)?)?;
    detect_beats_with(&sig, rec.kind(), &config.detector)
}

pub fn recording_intervals(rec: &RawRecording, config: &PipelineConfig) -> Result<IbiSequence, PreprocessError> {
    intervals_from_beats_with(&detect_recording_beats(rec, config)?, config.bounds)
}

pub fn recording_features(rec: &RawRecording, config: &PipelineConfig) -> Result<FeatureVector, PipelineError> {
    Ok(extract_features_with(&recording_intervals(rec, config)?, &config.features)?)
}
