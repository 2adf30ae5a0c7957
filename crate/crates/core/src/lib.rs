//! Atrial fibrillation screening from short heart-beat interval sequences.
//!
//! The crate is organised as a pipeline:
//!
//! * [`preprocess`] turns raw ECG/PPG waveforms into inter-beat interval
//!   sequences (resampling, detrending, band-pass filtering, beat detection).
//! * [`features`] computes the five irregularity features of an interval
//!   sequence; the two graph-based ones live in [`hvg`].
//! * [`classifier`] is an L2-regularised logistic regression over those
//!   features, and [`eval`] provides the metrics, stratified k-fold
//!   cross-validation and greedy wrapper feature selection around it.
//! * [`synth`] generates seeded sinus-rhythm and AFib-like recordings used
//!   as test cohorts.
//! * [`pipeline`] wires the stages together for a single recording.

pub mod classifier;
pub mod eval;
pub mod features;
pub mod hvg;
pub mod pipeline;
pub mod preprocess;
pub mod synth;






pub use classifier::{Label, LabeledSet, LogisticModel};
pub use features::{extract_features, FeatureVector};
pub use hvg::HvGraph;
pub use pipeline::{recording_features, PipelineConfig};
pub use preprocess::{IbiSequence, RawRecording, SampledSignal, SignalKind};
