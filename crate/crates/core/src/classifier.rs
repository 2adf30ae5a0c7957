//! L2-regularised logistic regression.
//!
//! Features are standardised with the training means and population
//! standard deviations, which are stored in the model so a serialised model
//! is self-contained. The objective is
//!
//! ```text
//! mean_i [ softplus(z_i) - y_i z_i ] + l2 · ‖w‖² / 2,   z_i = w·x̃_i + b
//! ```
//!
//! with the intercept unpenalised, minimised by full-batch gradient descent
//! with Armijo backtracking. Near the optimum, where loss differences drop
//! below rounding, steps are accepted on the gradient-integrated loss change
//! instead, so the gradient tolerance stays reachable.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::features::FeatureVector;

pub const FORMAT_VERSION: u32 = 1;

/// Standard deviations below this are treated as a constant feature.
pub const STD_FLOOR: f64 = 1e-12;

#[derive(Debug, Error)]
pub enum ClassifierError {
    #[error("training data contains only one class")]
    SingleClass,
    #[error("class {label} has {count} samples, need at least {needed}")]
    InsufficientSamples { label: Label, count: usize, needed: usize },
    #[error("non-finite feature value at row {row}, column {column}")]
    NonFiniteFeature { row: usize, column: usize },
    #[error("expected {expected} features, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("{features} feature rows but {labels} labels")]
    LengthMismatch { features: usize, labels: usize },
    #[error("threshold {0} outside [0, 1]")]
    InvalidThreshold(f64),
    #[error("invalid model: {0}")]
    InvalidModel(String),
    #[error("malformed model file: {0}")]
    Json(#[from] serde_json::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Label {
    Sinus = 0,
    AFib = 1,
}

impl Label {
    pub fn from_bool(is_afib: bool) -> Self {
        if is_afib {
            Label::AFib
        } else {
            Label::Sinus
        }
    }

    pub fn is_afib(self) -> bool {
        self == Label::AFib
    }

    pub fn as_f64(self) -> f64 {
        match self {
            Label::Sinus => 0.0,
            Label::AFib => 1.0,
        }
    }

    pub fn flipped(self) -> Self {
        Self::from_bool(!self.is_afib())
    }
}

impl std::fmt::Display for Label {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Label::Sinus => "sinus",
            Label::AFib => "afib",
        })
    }
}

impl std::str::FromStr for Label {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "afib" | "af" | "1" => Ok(Label::AFib),
            "sinus" | "sr" | "0" => Ok(Label::Sinus),
            other => Err(format!("unknown label `{other}` (expected afib/sinus or 1/0)")),
        }
    }
}

/// Feature rows with one label each. Rows share a dimension, which is 5
/// for the standard feature vector but may differ during feature selection.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledSet {
    rows: Vec<Vec<f64>>,
    labels: Vec<Label>,
    dim: usize,
}

impl LabeledSet {
    pub fn new(rows: Vec<Vec<f64>>, labels: Vec<Label>) -> Result<Self, ClassifierError> {
        if rows.len() != labels.len() {
            return Err(ClassifierError::LengthMismatch {
                features: rows.len(),
                labels: labels.len(),
            });
        }
        let dim = rows.first().map_or(0, Vec::len);
        if let Some(bad) = rows.iter().find(|r| r.len() != dim) {
            return Err(ClassifierError::DimensionMismatch {
                expected: dim,
                got: bad.len(),
            });
        }
        Ok(Self { rows, labels, dim })
    }

    pub fn from_features(features: &[FeatureVector], labels: Vec<Label>) -> Result<Self, ClassifierError> {
        Self::new(features.iter().map(|f| f.to_array().to_vec()).collect(), labels)
    }

    pub fn rows(&self) -> &[Vec<f64>] {
        &self.rows
    }

    pub fn labels(&self) -> &[Label] {
        &self.labels
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn count(&self, label: Label) -> usize {
        self.labels.iter().filter(|&&l| l == label).count()
    }

    pub fn subset(&self, indices: &[usize]) -> Self {
        Self {
            rows: indices.iter().map(|&i| self.rows[i].clone()).collect(),
            labels: indices.iter().map(|&i| self.labels[i]).collect(),
            dim: self.dim,
        }
    }

    /// Keep only `columns`, in the given order.
    pub fn select_columns(&self, columns: &[usize]) -> Self {
        Self {
            rows: self
                .rows
                .iter()
                .map(|r| columns.iter().map(|&c| r[c]).collect())
                .collect(),
            labels: self.labels.clone(),
            dim: columns.len(),
        }
    }

    pub fn with_flipped_labels(&self) -> Self {
        Self {
            rows: self.rows.clone(),
            labels: self.labels.iter().map(|l| l.flipped()).collect(),
            dim: self.dim,
        }
    }

    fn check_finite(&self) -> Result<(), ClassifierError> {
        for (row, r) in self.rows.iter().enumerate() {
            if let Some(column) = r.iter().position(|v| !v.is_finite()) {
                return Err(ClassifierError::NonFiniteFeature { row, column });
            }
        }
        Ok(())
    }
}

fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// `ln(1 + e^z)` without overflow.
fn softplus(z: f64) -> f64 {
    z.max(0.0) + (-z.abs()).exp().ln_1p()
}

/// Regularised cross-entropy on a standardised design. Parameters are laid
/// out as `[w_0, …, w_{d-1}, b]`.
#[derive(Debug, Clone)]
pub struct Objective {
    design: Vec<Vec<f64>>,
    targets: Vec<f64>,
    l2: f64,
}

impl Objective {
    pub fn new(data: &LabeledSet, means: &[f64], stds: &[f64], l2: f64) -> Self {
        Self {
            design: data
                .rows()
                .iter()
                .map(|r| standardize_row(r, means, stds))
                .collect(),
            targets: data.labels().iter().map(|l| l.as_f64()).collect(),
            l2,
        }
    }

    pub fn dim(&self) -> usize {
        self.design.first().map_or(0, Vec::len)
    }

    pub fn value(&self, params: &[f64]) -> f64 {
        self.evaluate(params, false).0
    }

    pub fn value_and_gradient(&self, params: &[f64]) -> (f64, Vec<f64>) {
        self.evaluate(params, true)
    }

    fn evaluate(&self, params: &[f64], want_grad: bool) -> (f64, Vec<f64>) {
        let d = self.dim();
        let (w, b) = (&params[..d], params[d]);
        let n = self.design.len() as f64;
        let mut loss = 0.0;
        let mut grad = vec![0.0; if want_grad { d + 1 } else { 0 }];
        for (x, &y) in self.design.iter().zip(&self.targets) {
            let z = dot(w, x) + b;
            loss += softplus(z) - y * z;
            if want_grad {
                let r = sigmoid(z) - y;
                for (g, xi) in grad[..d].iter_mut().zip(x) {
                    *g += r * xi;
                }
                grad[d] += r;
            }
        }
        loss /= n;
        loss += 0.5 * self.l2 * w.iter().map(|v| v * v).sum::<f64>();
        if want_grad {
            for g in grad.iter_mut() {
                *g /= n;
            }
            for (g, wi) in grad[..d].iter_mut().zip(w) {
                *g += self.l2 * wi;
            }
        }
        (loss, grad)
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn standardize_row(row: &[f64], means: &[f64], stds: &[f64]) -> Vec<f64> {
    row.iter()
        .zip(means.iter().zip(stds))
        .map(|(x, (m, s))| (x - m) / s)
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FitOptions {
    pub l2: f64,
    pub threshold: f64,
    pub max_iterations: usize,
    /// Stop once the gradient ∞-norm falls below this.
    pub tolerance: f64,
}

impl Default for FitOptions {
    fn default() -> Self {
        Self {
            l2: 1.0,
            threshold: 0.5,
            max_iterations: 10_000,
            tolerance: 1e-8,
        }
    }
}

impl FitOptions {
    pub fn with_l2(l2: f64) -> Self {
        Self {
            l2,
            ..Self::default()
        }
    }
}

/// A fitted model together with optimiser diagnostics.
#[derive(Debug, Clone)]
pub struct FitReport {
    pub model: LogisticModel,
    pub iterations: usize,
    pub converged: bool,
    pub gradient_norm: f64,
    /// Objective value before each accepted step, then the final value.
    /// Once steps fall below the loss's rounding resolution the values are
    /// tracked by integrating the gradient rather than re-evaluated.
    pub loss_trace: Vec<f64>,
    /// Columns whose standard deviation was floored.
    pub degenerate_features: Vec<usize>,
}

pub fn fit(data: &LabeledSet, l2: f64) -> Result<FitReport, ClassifierError> {
    fit_with(data, &FitOptions::with_l2(l2))
}

pub fn fit_with(data: &LabeledSet, options: &FitOptions) -> Result<FitReport, ClassifierError> {
    data.check_finite()?;
    let (pos, neg) = (data.count(Label::AFib), data.count(Label::Sinus));
    if pos == 0 || neg == 0 {
        return Err(ClassifierError::SingleClass);
    }
    for (label, count) in [(Label::AFib, pos), (Label::Sinus, neg)] {
        if count < 2 {
            return Err(ClassifierError::InsufficientSamples { label, count, needed: 2 });
        }
    }
    if !(0.0..=1.0).contains(&options.threshold) {
        return Err(ClassifierError::InvalidThreshold(options.threshold));
    }

    let d = data.dim();
    let n = data.len() as f64;
    let mut means = vec![0.0; d];
    let mut stds = vec![0.0; d];
    let mut degenerate = Vec::new();
    for c in 0..d {
        let mean = data.rows().iter().map(|r| r[c]).sum::<f64>() / n;
        let var = data.rows().iter().map(|r| (r[c] - mean).powi(2)).sum::<f64>() / n;
        means[c] = mean;
        stds[c] = var.sqrt();
        if stds[c] < STD_FLOOR {
            log::warn!("feature column {c} has zero variance; std floored at {STD_FLOOR:e}");
            stds[c] = STD_FLOOR;
            degenerate.push(c);
        }
    }

    let objective = Objective::new(data, &means, &stds, options.l2);
    let mut params = vec![0.0; d + 1];
    let (mut loss, mut grad) = objective.value_and_gradient(&params);
    let mut loss_trace = vec![loss];
    let mut step = 1.0;
    let mut iterations = 0;
    let mut converged = false;

    while iterations < options.max_iterations {
        let norm = inf_norm(&grad);
        if norm < options.tolerance {
            converged = true;
            break;
        }
        let sq_norm: f64 = grad.iter().map(|g| g * g).sum();
        let mut accepted = None;
        while step > 1e-20 {
            let candidate: Vec<f64> = params.iter().zip(&grad).map(|(p, g)| p - step * g).collect();
            let sufficient = 1e-4 * step * sq_norm;
            if sufficient > loss.abs() * f64::EPSILON {
                let (value, next_grad) = objective.value_and_gradient(&candidate);
                if value <= loss - sufficient {
                    accepted = Some((candidate, (value, next_grad)));
                    break;
                }
            } else {
                // The loss can no longer resolve the expected decrease, so
                // the change is integrated from the gradient along the step
                // (Simpson's rule) and the step is taken if it lowers the
                // loss and shrinks the gradient.
                let (_, next_grad) = objective.value_and_gradient(&candidate);
                let midpoint: Vec<f64> = params.iter().zip(&grad).map(|(p, g)| p - 0.5 * step * g).collect();
                let (_, mid_grad) = objective.value_and_gradient(&midpoint);
                let slope = |g: &[f64]| -step * dot(g, &grad);
                let change = (slope(&grad) + 4.0 * slope(&mid_grad) + slope(&next_grad)) / 6.0;
                if change <= 0.0 && next_grad.iter().map(|g| g * g).sum::<f64>() < sq_norm {
                    accepted = Some((candidate, (loss + change, next_grad)));
                    break;
                }
            }
            step *= 0.5;
        }
        let Some((next, evaluated)) = accepted else {
            // No descent possible at machine precision.
            break;
        };
        params = next;
        (loss, grad) = evaluated;
        loss_trace.push(loss);
        iterations += 1;
        step *= 2.0;
    }
    let gradient_norm = inf_norm(&grad);
    converged |= gradient_norm < options.tolerance;

    let intercept = params.pop().expect("intercept");
    Ok(FitReport {
        model: LogisticModel {
            weights: params,
            intercept,
            means,
            stds,
            threshold: options.threshold,
            l2: options.l2,
        },
        iterations,
        converged,
        gradient_norm,
        loss_trace,
        degenerate_features: degenerate,
    })
}

fn inf_norm(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogisticModel {
    pub weights: Vec<f64>,
    pub intercept: f64,
    pub means: Vec<f64>,
    pub stds: Vec<f64>,
    pub threshold: f64,
    pub l2: f64,
}

#[derive(Serialize, Deserialize)]
struct ModelFile {
    format_version: u32,
    #[serde(flatten)]
    model: LogisticModel,
}

impl LogisticModel {
    /// Intercept-only model with identity standardisation.
    pub fn zero(dim: usize) -> Self {
        Self {
            weights: vec![0.0; dim],
            intercept: 0.0,
            means: vec![0.0; dim],
            stds: vec![1.0; dim],
            threshold: 0.5,
            l2: 0.0,
        }
    }

    pub fn dim(&self) -> usize {
        self.weights.len()
    }

    pub fn with_threshold(mut self, threshold: f64) -> Result<Self, ClassifierError> {
        if !(0.0..=1.0).contains(&threshold) {
            return Err(ClassifierError::InvalidThreshold(threshold));
        }
        self.threshold = threshold;
        Ok(self)
    }

    pub fn validate(&self) -> Result<(), ClassifierError> {
        let d = self.weights.len();
        if self.means.len() != d || self.stds.len() != d {
            return Err(ClassifierError::InvalidModel(format!(
                "{} weights, {} means, {} stds",
                d,
                self.means.len(),
                self.stds.len()
            )));
        }
        if !self.weights.iter().chain(&self.means).all(|v| v.is_finite()) || !self.intercept.is_finite() {
            return Err(ClassifierError::InvalidModel("non-finite parameter".into()));
        }
        if !self.stds.iter().all(|s| s.is_finite() && *s > 0.0) {
            return Err(ClassifierError::InvalidModel("stds must be positive".into()));
        }
        if !(0.0..=1.0).contains(&self.threshold) {
            return Err(ClassifierError::InvalidThreshold(self.threshold));
        }
        if !(self.l2.is_finite() && self.l2 >= 0.0) {
            return Err(ClassifierError::InvalidModel("l2 must be non-negative".into()));
        }
        Ok(())
    }

    /// Linear score `w·x̃ + b` on the standardised features.
    pub fn decision_function(&self, x: &[f64]) -> Result<f64, ClassifierError> {
        if x.len() != self.dim() {
            return Err(ClassifierError::DimensionMismatch {
                expected: self.dim(),
                got: x.len(),
            });
        }
        if let Some(column) = x.iter().position(|v| !v.is_finite()) {
            return Err(ClassifierError::NonFiniteFeature { row: 0, column });
        }
        Ok(dot(&self.weights, &standardize_row(x, &self.means, &self.stds)) + self.intercept)
    }

    pub fn predict_proba(&self, x: &[f64]) -> Result<f64, ClassifierError> {
        self.decision_function(x).map(sigmoid)
    }

    /// AFib iff the probability reaches the threshold (inclusive).
    pub fn classify(&self, x: &[f64]) -> Result<Label, ClassifierError> {
        Ok(Label::from_bool(self.predict_proba(x)? >= self.threshold))
    }

    pub fn predict_features(&self, x: &FeatureVector) -> Result<f64, ClassifierError> {
        self.predict_proba(&x.to_array())
    }

    pub fn classify_features(&self, x: &FeatureVector) -> Result<Label, ClassifierError> {
        self.classify(&x.to_array())
    }

    /// JSON with `format_version`, `weights`, `intercept`, `means`, `stds`,
    /// `threshold` and `l2`. Floats use shortest round-trip formatting, so
    /// parsing the text back yields the identical model.
    pub fn to_json(&self) -> String {
        let file = ModelFile {
            format_version: FORMAT_VERSION,
            model: self.clone(),
        };
        serde_json::to_string_pretty(&file).expect("model serialises")
    }

    pub fn from_json(text: &str) -> Result<Self, ClassifierError> {
        let file: ModelFile = serde_json::from_str(text)?;
        if file.format_version != FORMAT_VERSION {
            return Err(ClassifierError::InvalidModel(format!(
                "unsupported format_version {}",
                file.format_version
            )));
        }
        file.model.validate()?;
        Ok(file.model)
    }
}

pub fn predict_proba(model: &LogisticModel, x: &FeatureVector) -> Result<f64, ClassifierError> {
    model.predict_features(x)
}

pub fn classify(model: &LogisticModel, x: &FeatureVector) -> Result<Label, ClassifierError> {
    model.classify_features(x)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn toy_set(seed: u64, n: usize) -> LabeledSet {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut rows = Vec::new();
        let mut labels = Vec::new();
        for i in 0..n {
            let label = Label::from_bool(i % 2 == 0);
            let shift = if label.is_afib() { 1.0 } else { -1.0 };
            rows.push(vec![
                shift + rng.gen_range(-1.5..1.5),
                rng.gen_range(-1.0..1.0) * 10.0,
                shift * 0.3 + rng.gen_range(-2.0..2.0),
            ]);
            labels.push(label);
        }
        LabeledSet::new(rows, labels).unwrap()
    }

    #[test]
    fn separable_data_is_fit_exactly() {
        let rows: Vec<Vec<f64>> = (0..20).map(|i| vec![i as f64, ((i * 7) % 5) as f64]).collect();
        let labels = (0..20).map(|i| Label::from_bool(i >= 10)).collect();
        let data = LabeledSet::new(rows, labels).unwrap();
        let report = fit(&data, 1.0).unwrap();
        assert!(report.converged);
        for (row, label) in data.rows().iter().zip(data.labels()) {
            assert_eq!(report.model.classify(row).unwrap(), *label);
        }
    }

    #[test]
    fn flipped_labels_negate_parameters() {
        let data = toy_set(3, 60);
        let a = fit(&data, 0.5).unwrap().model;
        let b = fit(&data.with_flipped_labels(), 0.5).unwrap().model;
        for (wa, wb) in a.weights.iter().zip(&b.weights) {
            assert!((wa + wb).abs() < 1e-6);
        }
        assert!((a.intercept + b.intercept).abs() < 1e-6);
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let data = toy_set(5, 40);
        let report = fit(&data, 0.7).unwrap();
        let obj = Objective::new(&data, &report.model.means, &report.model.stds, 0.7);
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        for _ in 0..20 {
            let p: Vec<f64> = (0..4).map(|_| rng.gen_range(-2.0..2.0)).collect();
            let (_, g) = obj.value_and_gradient(&p);
            for k in 0..4 {
                let h = 1e-5;
                let mut hi = p.clone();
                let mut lo = p.clone();
                hi[k] += h;
                lo[k] -= h;
                let fd = (obj.value(&hi) - obj.value(&lo)) / (2.0 * h);
                assert!((fd - g[k]).abs() <= 1e-6 * g[k].abs().max(1e-3), "{fd} vs {}", g[k]);
            }
        }
    }

    #[test]
    fn loss_is_monotone_and_converges() {
        let report = fit(&toy_set(8, 80), 1.0).unwrap();
        assert!(report.converged);
        assert!(report.gradient_norm < 1e-8);
        for w in report.loss_trace.windows(2) {
            assert!(w[1] <= w[0]);
        }
    }

    #[test]
    fn fit_errors() {
        let one_class = LabeledSet::new(vec![vec![1.0], vec![2.0]], vec![Label::AFib; 2]).unwrap();
        assert!(matches!(fit(&one_class, 1.0), Err(ClassifierError::SingleClass)));
        let tiny = LabeledSet::new(
            vec![vec![1.0], vec![2.0], vec![3.0]],
            vec![Label::AFib, Label::Sinus, Label::Sinus],
        )
        .unwrap();
        assert!(matches!(
            fit(&tiny, 1.0),
            Err(ClassifierError::InsufficientSamples { label: Label::AFib, count: 1, .. })
        ));
        let nan = LabeledSet::new(
            vec![vec![1.0], vec![f64::NAN], vec![0.0], vec![2.0]],
            vec![Label::AFib, Label::AFib, Label::Sinus, Label::Sinus],
        )
        .unwrap();
        assert!(matches!(
            fit(&nan, 1.0),
            Err(ClassifierError::NonFiniteFeature { row: 1, column: 0 })
        ));
    }

    #[test]
    fn constant_feature_is_flagged() {
        let rows = (0..10).map(|i| vec![i as f64, 3.0]).collect();
        let labels = (0..10).map(|i| Label::from_bool(i >= 5)).collect();
        let report = fit(&LabeledSet::new(rows, labels).unwrap(), 1.0).unwrap();
        assert_eq!(report.degenerate_features, vec![1]);
        assert_eq!(report.model.stds[1], STD_FLOOR);
        assert_eq!(report.model.weights[1], 0.0);
    }

    #[test]
    fn zero_model_is_half() {
        let m = LogisticModel::zero(5);
        assert_eq!(m.predict_proba(&[1.0, -4.0, 9.0, 2.0, 0.0]).unwrap(), 0.5);
        assert_eq!(m.classify(&[0.0; 5]).unwrap(), Label::AFib);
    }

    #[test]
    fn threshold_extremes() {
        let mut m = LogisticModel::zero(1);
        m.weights[0] = 1.0;
        let always = m.clone().with_threshold(0.0).unwrap();
        let never = m.clone().with_threshold(1.0).unwrap();
        for x in [-30.0, -1.0, 0.0, 4.0, 30.0] {
            assert_eq!(always.classify(&[x]).unwrap(), Label::AFib);
            assert_eq!(never.classify(&[x]).unwrap(), Label::Sinus);
        }
        assert!(m.with_threshold(1.5).is_err());
    }

    #[test]
    fn non_finite_input_rejected() {
        let m = LogisticModel::zero(2);
        assert!(matches!(
            m.predict_proba(&[1.0, f64::INFINITY]),
            Err(ClassifierError::NonFiniteFeature { column: 1, .. })
        ));
        assert!(matches!(m.predict_proba(&[1.0]), Err(ClassifierError::DimensionMismatch { .. })));
    }

    #[test]
    fn json_roundtrip_is_exact() {
        let model = fit(&toy_set(21, 50), 0.3).unwrap().model;
        let text = model.to_json();
        for key in ["weights", "intercept", "means", "stds", "threshold", "l2", "format_version"] {
            assert!(text.contains(&format!("\"{key}\"")), "missing {key}");
        }
        assert_eq!(LogisticModel::from_json(&text).unwrap(), model);
    }

    #[test]
    fn json_rejects_bad_models() {
        let mut model = LogisticModel::zero(2);
        model.stds[0] = 0.0;
        assert!(LogisticModel::from_json(&model.to_json()).is_err());
        let text = LogisticModel::zero(2).to_json().replace("\"format_version\": 1", "\"format_version\": 9");
        assert!(LogisticModel::from_json(&text).is_err());
        assert!(LogisticModel::from_json("{").is_err());
    }
}
