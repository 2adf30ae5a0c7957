//! Text formats for signals and interval sequences.
//!
//! * Signal CSV: header `t,v`, then one `time_seconds,value` row per sample.
//! * Interval file: one interval in milliseconds per line.

use std::fmt::Write as _;

use thiserror::Error;

use super::{IbiSequence, PreprocessError, RawRecording, SignalKind};

#[derive(Debug, Error)]
pub enum FormatError {
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("missing `t,v` header")]
    MissingHeader,
    #[error(transparent)]
    Invalid(#[from] PreprocessError),
}

fn parse_number(field: &str, line: usize) -> Result<f64, FormatError> {
    field.trim().parse::<f64>().map_err(|e| FormatError::Parse {
        line,
        message: format!("`{}`: {e}", field.trim()),
    })
}

/// True when the first non-blank line is the signal CSV header.
pub fn looks_like_signal_csv(text: &str) -> bool {
    text.lines()
        .find(|l| !l.trim().is_empty())
        .is_some_and(is_signal_header)
}

fn is_signal_header(line: &str) -> bool {
    let fields: Vec<&str> = line.split(',').map(str::trim).collect();
    fields == ["t", "v"]
}

/// Parse `(time, value)` samples from signal CSV text.
pub fn parse_signal_samples(text: &str) -> Result<Vec<(f64, f64)>, FormatError> {
    let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
    match lines.next() {
        Some((_, header)) if is_signal_header(header) => {}
        _ => return Err(FormatError::MissingHeader),
    }
    lines
        .map(|(i, l)| {
            let mut fields = l.split(',');
            let (Some(t), Some(v), None) = (fields.next(), fields.next(), fields.next()) else {
                return Err(FormatError::Parse {
                    line: i + 1,
                    message: "expected two comma-separated fields".into(),
                });
            };
            Ok((parse_number(t, i + 1)?, parse_number(v, i + 1)?))
        })
        .collect()
}

/// Estimate the sampling rate from the median sample spacing.
pub fn estimate_rate(samples: &[(f64, f64)]) -> Option<f64> {
    let mut dts: Vec<f64> = samples.windows(2).map(|w| w[1].0 - w[0].0).collect();
    if dts.is_empty() {
        return None;
    }
    dts.sort_by(f64::total_cmp);
    let dt = dts[dts.len() / 2];
    (dt > 0.0).then(|| 1.0 / dt)
}

/// Parse a signal CSV into a recording. Without `nominal_rate` the rate is
/// estimated from the median sample spacing.
pub fn parse_signal_csv(
    text: &str,
    kind: SignalKind,
    nominal_rate: Option<f64>,
) -> Result<RawRecording, FormatError> {
    let samples = parse_signal_samples(text)?;
    let rate = match nominal_rate.or_else(|| estimate_rate(&samples)) {
        Some(r) => r,
        None => return Err(PreprocessError::EmptyRecording(samples.len()).into()),
    };
    Ok(RawRecording::from_samples(&samples, kind, rate)?)
}

pub fn write_signal_csv(rec: &RawRecording) -> String {
    let mut out = String::with_capacity(rec.len() * 32);
    out.push_str("t,v\n");
    for (t, v) in rec.times().iter().zip(rec.values()) {
        let _ = writeln!(out, "{t:.9},{v:.14e}");
    }
    out
}

pub fn parse_intervals(text: &str) -> Result<IbiSequence, FormatError> {
    let intervals = text
        .lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| parse_number(l, i + 1))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(IbiSequence::from_intervals(intervals)?)
}

pub fn write_intervals(ibi: &IbiSequence) -> String {
    let mut out = String::with_capacity(ibi.len() * 24);
    for v in ibi.intervals() {
        let _ = writeln!(out, "{v:.14e}");
    }
    out
}
