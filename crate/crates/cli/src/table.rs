//! Feature tables and label manifests.
//!
//! A feature table is a CSV with a header. An optional `file` column names
//! the recording, an optional `label` column holds `afib`/`sinus` (or 1/0),
//! and every other column is a numeric feature.

use std::collections::HashMap;
use std::fmt::Write as _;

use afib_core::classifier::Label;
use afib_core::eval::fmt_num;
use afib_core::features::FeatureVector;

use crate::error::CliError;

#[derive(Debug, Clone, PartialEq)]
pub struct FeatureTable {
    pub names: Vec<String>,
    pub files: Option<Vec<String>>,
    pub labels: Option<Vec<Label>>,
    pub rows: Vec<Vec<f64>>,
}

fn data_err(line: usize, message: impl std::fmt::Display) -> CliError {
    CliError::Data(format!("line {line}: {message}"))
}

impl FeatureTable {
    pub fn parse(text: &str) -> Result<Self, CliError> {
        let mut lines = text
            .lines()
            .enumerate()
            .map(|(i, l)| (i + 1, l.trim()))
            .filter(|(_, l)| !l.is_empty());
        let (_, header) = lines
            .next()
            .ok_or_else(|| CliError::Data("feature table is empty".into()))?;
        let columns: Vec<&str> = header.split(',').map(str::trim).collect();
        let file_col = columns.iter().position(|&c| c == "file");
        let label_col = columns.iter().position(|&c| c == "label");
        let feature_cols: Vec<usize> = (0..columns.len())
            .filter(|&i| Some(i) != file_col && Some(i) != label_col)
            .collect();
        if feature_cols.is_empty() {
            return Err(CliError::Data("feature table has no feature columns".into()));
        }

        let mut table = FeatureTable {
            names: feature_cols.iter().map(|&i| columns[i].to_string()).collect(),
            files: file_col.map(|_| Vec::new()),
            labels: label_col.map(|_| Vec::new()),
            rows: Vec::new(),
        };
        for (line, text) in lines {
            let fields: Vec<&str> = text.split(',').map(str::trim).collect();
            if fields.len() != columns.len() {
                return Err(data_err(
                    line,
                    format!("expected {} fields, got {}", columns.len(), fields.len()),
                ));
            }
            if let (Some(files), Some(i)) = (table.files.as_mut(), file_col) {
                files.push(fields[i].to_string());
            }
            if let (Some(labels), Some(i)) = (table.labels.as_mut(), label_col) {
                labels.push(fields[i].parse().map_err(|e| data_err(line, e))?);
            }
            let row = feature_cols
                .iter()
                .map(|&i| {
                    fields[i]
                        .parse::<f64>()
                        .map_err(|e| data_err(line, format!("`{}`: {e}", fields[i])))
                })
                .collect::<Result<Vec<_>, _>>()?;
            table.rows.push(row);
        }
        if table.rows.is_empty() {
            return Err(CliError::Data("feature table has no rows".into()));
        }
        Ok(table)
    }

    /// Attach labels from a `file,label` manifest, matching on the `file`
    /// column.
    pub fn attach_labels(&mut self, manifest: &HashMap<String, Label>) -> Result<(), CliError> {
        let files = self
            .files
            .as_ref()
            .ok_or_else(|| CliError::Data("feature table has no `file` column to match labels against".into()))?;
        let labels = files
            .iter()
            .map(|f| {
                manifest
                    .get(f)
                    .copied()
                    .ok_or_else(|| CliError::Data(format!("no label for `{f}`")))
            })
            .collect::<Result<Vec<_>, _>>()?;
        self.labels = Some(labels);
        Ok(())
    }
}

pub fn parse_manifest(text: &str) -> Result<HashMap<String, Label>, CliError> {
    let mut lines = text
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim()))
        .filter(|(_, l)| !l.is_empty());
    match lines.next() {
        Some((_, "file,label")) => {}
        _ => return Err(CliError::Data("label manifest must start with a `file,label` header".into())),
    }
    let mut out = HashMap::new();
    for (line, text) in lines {
        let (file, label) = text
            .split_once(',')
            .ok_or_else(|| data_err(line, "expected `file,label`"))?;
        let label: Label = label.parse().map_err(|e| data_err(line, e))?;
        if out.insert(file.trim().to_string(), label).is_some() {
            return Err(data_err(line, format!("duplicate entry for `{}`", file.trim())));
        }
    }
    Ok(out)
}

pub fn write_manifest(entries: &[(String, Label)]) -> String {
    let mut out = String::from("file,label\n");
    for (file, label) in entries {
        let _ = writeln!(out, "{file},{label}");
    }
    out
}

fn feature_fields(f: &FeatureVector) -> String {
    format!(
        "{},{},{},{},{}",
        fmt_num(f.f1),
        fmt_num(f.f2),
        fmt_num(f.f3),
        f.f4,
        fmt_num(f.f5)
    )
}

/// `f1,…,f5` rows, preceded by a `file` column when names are given.
pub fn write_features(rows: &[(Option<String>, FeatureVector)]) -> String {
    let with_file = rows.iter().any(|(f, _)| f.is_some());
    let mut out = String::new();
    if with_file {
        out.push_str("file,");
    }
    out.push_str(&FeatureVector::NAMES.join(","));
    out.push('\n');
    for (file, f) in rows {
        if let Some(file) = file {
            out.push_str(file);
            out.push(',');
        }
        out.push_str(&feature_fields(f));
        out.push('\n');
    }
    out
}
