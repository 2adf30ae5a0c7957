use std::fs;
use std::path::{Path, PathBuf};

use afib_core::classifier::{fit_with, FitOptions, Label, LabeledSet, LogisticModel};
use afib_core::eval::{fmt_num, forward_feature_selection, kfold_cv_with, CvOptions, FeatureColumn};
use afib_core::features::{extract_features_with, FeatureConfig, FeatureVector};
use afib_core::pipeline::{recording_intervals, PipelineConfig};
use afib_core::preprocess::io::{
    looks_like_signal_csv, parse_intervals, parse_signal_csv, write_intervals, write_signal_csv,
};
use afib_core::synth::{cohort_spec, gen_ibis, gen_waveform, WaveformOptions};
use log::{info, warn};
use rayon::prelude::*;

use crate::error::CliError;
use crate::files::{emit, file_name, list_inputs, read_text, write_atomic};
use crate::table::{parse_manifest, write_features, write_manifest, FeatureTable};
use crate::{
    ClassifyArgs, Command, EvalArgs, ExtractArgs, FeatureArgs, SelectArgs, SignalArgs, SynthArgs, SynthFormat,
    TrainArgs,
};

pub fn run(command: Command) -> Result<(), CliError> {
    match command {
        Command::Synth(a) => synth(a),
        Command::Extract(a) => extract(a),
        Command::Train(a) => train(a),
        Command::Classify(a) => classify(a),
        Command::Eval(a) => eval(a),
        Command::Select(a) => select(a),
    }
}

fn usage(message: impl Into<String>) -> CliError {
    CliError::Usage(message.into())
}

fn check_l2(l2: f64) -> Result<(), CliError> {
    if l2.is_finite() && l2 >= 0.0 {
        Ok(())
    } else {
        Err(usage(format!("--l2 must be a finite value >= 0, got {l2}")))
    }
}

fn check_threshold(t: f64) -> Result<(), CliError> {
    if (0.0..=1.0).contains(&t) {
        Ok(())
    } else {
        Err(usage(format!("--threshold must lie in [0, 1], got {t}")))
    }
}

fn check_k(k: usize) -> Result<(), CliError> {
    if k >= 2 {
        Ok(())
    } else {
        Err(usage(format!("--k must be at least 2, got {k}")))
    }
}

fn feature_config(args: &FeatureArgs) -> Result<FeatureConfig, CliError> {
    if args.bins == 0 {
        return Err(usage("--bins must be at least 1"));
    }
    if args.deriv_order == 0 {
        return Err(usage("--deriv-order must be at least 1"));
    }
    Ok(FeatureConfig {
        deriv_order: args.deriv_order,
        bins: args.bins,
    })
}

fn check_rate(rate: Option<f64>) -> Result<(), CliError> {
    match rate {
        Some(r) if !(r.is_finite() && r > 0.0) => Err(usage(format!("--rate must be positive, got {r}"))),
        _ => Ok(()),
    }
}

fn synth(args: SynthArgs) -> Result<(), CliError> {
    if args.count == 0 {
        return Err(usage("--count must be at least 1"));
    }
    check_rate(args.rate)?;
    if args.drift.is_nan() || args.snr_db.is_nan() {
        return Err(usage("--drift and --snr-db must be numbers"));
    }
    let rate = args.rate.unwrap_or(match args.kind {
        afib_core::SignalKind::Ppg => 30.0,
        afib_core::SignalKind::Ecg => 250.0,
    });
    let recordings = args.output.join("recordings");
    fs::create_dir_all(&recordings).map_err(|e| CliError::io(&recordings, e))?;

    let count = args.count as u64;
    let plan: Vec<(Label, u64)> = (0..count)
        .map(|i| (Label::Sinus, args.seed + i))
        .chain((0..count).map(|i| (Label::AFib, args.seed + count + i)))
        .collect();
    let extension = match args.format {
        SynthFormat::Signal => "csv",
        SynthFormat::Intervals => "txt",
    };
    let entries = plan
        .par_iter()
        .map(|&(label, seed)| {
            let mut spec = cohort_spec(label, seed);
            spec.duration = args.duration;
            let ibis = gen_ibis(&spec)?;
            let text = match args.format {
                SynthFormat::Intervals => write_intervals(&ibis),
                SynthFormat::Signal => {
                    let options = WaveformOptions {
                        snr_db: args.snr_db.is_finite().then_some(args.snr_db),
                        drift_amplitude: args.drift,
                        timing_jitter: 0.0,
                        seed,
                    };
                    write_signal_csv(&gen_waveform(&ibis, args.kind, rate, &options)?.recording)
                }
            };
            let name = format!("rec_{seed:05}.{extension}");
            write_atomic(&recordings.join(&name), &text)?;
            Ok((name, label))
        })
        .collect::<Result<Vec<_>, CliError>>()?;
    write_atomic(&args.output.join("labels.csv"), &write_manifest(&entries))?;
    info!("wrote {} recordings to {}", entries.len(), recordings.display());
    Ok(())
}

/// Features of one recording: waveform CSVs go through the full pipeline,
/// anything else is read as an interval file.
fn recording_features(
    path: &Path,
    signal: &SignalArgs,
    config: &FeatureConfig,
) -> Result<FeatureVector, CliError> {
    let text = read_text(path)?;
    let ibis = if looks_like_signal_csv(&text) {
        let rec = parse_signal_csv(&text, signal.kind, signal.rate)?;
        let pipeline = PipelineConfig {
            rate: signal.rate,
            ..PipelineConfig::default()
        };
        recording_intervals(&rec, &pipeline)?
    } else {
        parse_intervals(&text)?
    };
    Ok(extract_features_with(&ibis, config)?)
}

fn batch_features(
    input: &Path,
    signal: &SignalArgs,
    features: &FeatureArgs,
) -> Result<(bool, Vec<(PathBuf, FeatureVector)>), CliError> {
    check_rate(signal.rate)?;
    let config = feature_config(features)?;
    let (is_dir, paths) = list_inputs(input)?;
    let rows = paths
        .into_par_iter()
        .map(|p| {
            let f = recording_features(&p, signal, &config).map_err(|e| e.in_file(&p))?;
            Ok((p, f))
        })
        .collect::<Result<Vec<_>, CliError>>()?;
    Ok((is_dir, rows))
}

fn extract(args: ExtractArgs) -> Result<(), CliError> {
    let (is_dir, rows) = batch_features(&args.input, &args.signal, &args.features)?;
    let rows: Vec<(Option<String>, FeatureVector)> = rows
        .into_iter()
        .map(|(p, f)| (is_dir.then(|| file_name(&p)), f))
        .collect();
    emit(args.output.as_deref(), &write_features(&rows))
}

fn labeled_table(input: &Path, labels: Option<&Path>) -> Result<FeatureTable, CliError> {
    let mut table = FeatureTable::parse(&read_text(input)?).map_err(|e| e.in_file(input))?;
    match labels {
        Some(path) => {
            let manifest = parse_manifest(&read_text(path)?).map_err(|e| e.in_file(path))?;
            table.attach_labels(&manifest)?;
        }
        None if table.labels.is_none() => {
            return Err(usage("feature table has no `label` column; pass --labels"));
        }
        None => {}
    }
    Ok(table)
}

fn labeled_set(table: &FeatureTable) -> Result<LabeledSet, CliError> {
    let labels = table.labels.clone().expect("labels attached");
    Ok(LabeledSet::new(table.rows.clone(), labels)?)
}

fn train(args: TrainArgs) -> Result<(), CliError> {
    check_l2(args.l2)?;
    check_threshold(args.threshold)?;
    let table = labeled_table(&args.input, args.labels.as_deref())?;
    let options = FitOptions {
        l2: args.l2,
        threshold: args.threshold,
        ..FitOptions::default()
    };
    let report = fit_with(&labeled_set(&table)?, &options)?;
    if !report.converged {
        warn!(
            "optimiser stopped after {} iterations with gradient norm {:e}",
            report.iterations, report.gradient_norm
        );
    }
    for c in &report.degenerate_features {
        warn!("feature `{}` is constant in the training data", table.names[*c]);
    }
    emit(args.output.as_deref(), &format!("{}\n", report.model.to_json()))
}

fn classify(args: ClassifyArgs) -> Result<(), CliError> {
    let text = read_text(&args.model)?;
    let mut model = LogisticModel::from_json(&text).map_err(|e| CliError::from(e).in_file(&args.model))?;
    if let Some(t) = args.threshold {
        check_threshold(t)?;
        model = model.with_threshold(t)?;
    }
    if model.dim() != FeatureVector::NAMES.len() {
        return Err(CliError::Data(format!(
            "{}: model has {} weights; recordings yield {} features",
            args.model.display(),
            model.dim(),
            FeatureVector::NAMES.len()
        )));
    }
    let (is_dir, rows) = batch_features(&args.input, &args.signal, &args.features)?;
    let mut out = String::from(if is_dir { "file,label,probability\n" } else { "label,probability\n" });
    for (path, features) in rows {
        let p = model.predict_features(&features)?;
        let label = model.classify_features(&features)?;
        if is_dir {
            out.push_str(&file_name(&path));
            out.push(',');
        }
        out.push_str(&format!("{label},{}\n", fmt_num(p)));
    }
    emit(args.output.as_deref(), &out)
}

fn eval(args: EvalArgs) -> Result<(), CliError> {
    check_l2(args.l2)?;
    check_k(args.k)?;
    check_threshold(args.threshold)?;
    let table = labeled_table(&args.input, args.labels.as_deref())?;
    let mut options = CvOptions::new(args.k, args.l2, args.seed);
    options.fit.threshold = args.threshold;
    let report = kfold_cv_with(&labeled_set(&table)?, &options)?;
    info!("pooled AUC {}", report.auc());
    if let Some(roc) = &args.roc {
        write_atomic(roc, &report.roc.to_csv())?;
    }
    emit(args.output.as_deref(), &report.metrics_csv())
}

fn select(args: SelectArgs) -> Result<(), CliError> {
    check_l2(args.l2)?;
    check_k(args.k)?;
    let table = labeled_table(&args.input, args.labels.as_deref())?;
    let pool: Vec<FeatureColumn> = table
        .names
        .iter()
        .enumerate()
        .map(|(c, name)| FeatureColumn::new(name.clone(), table.rows.iter().map(|r| r[c]).collect()))
        .collect();
    let labels = table.labels.clone().expect("labels attached");
    let report = forward_feature_selection(&pool, &labels, args.k, args.l2, args.seed)?;
    emit(args.output.as_deref(), &report.to_csv())
}
