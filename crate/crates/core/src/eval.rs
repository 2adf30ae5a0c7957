//! Screening metrics, stratified k-fold cross-validation and greedy forward
//! (wrapper) feature selection.

use std::fmt::Write as _;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::classifier::{self, ClassifierError, FitOptions, Label, LabeledSet};

/// Minimum cross-validated AUC gain for the wrapper to add a feature.
pub const SELECTION_MIN_GAIN: f64 = 1e-4;

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("{a} labels but {b} predictions or scores")]
    LengthMismatch { a: usize, b: usize },
    #[error("{0} is undefined: no {1} cases")]
    UndefinedMetric(&'static str, Label),
    #[error("only one class present")]
    SingleClass,
    #[error("non-finite score at index {0}")]
    NonFiniteScore(usize),
    #[error("k = {k} is invalid for {n} samples")]
    InvalidK { k: usize, n: usize },
    #[error("class {label} has {count} samples; {k}-fold CV needs at least {needed}")]
    TooFewPerClass {
        label: Label,
        count: usize,
        k: usize,
        needed: usize,
    },
    #[error("feature pool is empty")]
    EmptyPool,
    #[error("feature column `{0}` has the wrong length")]
    ColumnLength(String),
    #[error(transparent)]
    Classifier(#[from] ClassifierError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct ConfusionCounts {
    pub tp: usize,
    pub fp: usize,
    pub tn: usize,
    pub fn_: usize,
}

impl ConfusionCounts {
    pub fn from_predictions(labels: &[Label], predictions: &[Label]) -> Result<Self, EvalError> {
        if labels.len() != predictions.len() {
            return Err(EvalError::LengthMismatch {
                a: labels.len(),
                b: predictions.len(),
            });
        }
        let mut c = Self::default();
        for (&truth, &pred) in labels.iter().zip(predictions) {
            match (truth, pred) {
                (Label::AFib, Label::AFib) => c.tp += 1,
                (Label::AFib, Label::Sinus) => c.fn_ += 1,
                (Label::Sinus, Label::AFib) => c.fp += 1,
                (Label::Sinus, Label::Sinus) => c.tn += 1,
            }
        }
        Ok(c)
    }

    pub fn total(&self) -> usize {
        self.tp + self.fp + self.tn + self.fn_
    }

    pub fn sensitivity(&self) -> Option<f64> {
        let pos = self.tp + self.fn_;
        (pos > 0).then(|| self.tp as f64 / pos as f64)
    }

    pub fn specificity(&self) -> Option<f64> {
        let neg = self.tn + self.fp;
        (neg > 0).then(|| self.tn as f64 / neg as f64)
    }

    pub fn accuracy(&self) -> Option<f64> {
        let n = self.total();
        (n > 0).then(|| (self.tp + self.tn) as f64 / n as f64)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClassificationMetrics {
    pub sensitivity: f64,
    pub specificity: f64,
    pub accuracy: f64,
}

/// Sensitivity, specificity and accuracy; both classes must be present.
pub fn confusion_metrics(labels: &[Label], predictions: &[Label]) -> Result<ClassificationMetrics, EvalError> {
    let c = ConfusionCounts::from_predictions(labels, predictions)?;
    Ok(ClassificationMetrics {
        sensitivity: c
            .sensitivity()
            .ok_or(EvalError::UndefinedMetric("sensitivity", Label::AFib))?,
        specificity: c
            .specificity()
            .ok_or(EvalError::UndefinedMetric("specificity", Label::Sinus))?,
        accuracy: c.accuracy().expect("non-empty when both classes exist"),
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RocPoint {
    /// Scores `>= threshold` are called positive; the first point uses +∞.
    pub threshold: f64,
    pub fpr: f64,
    pub tpr: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RocCurve {
    pub points: Vec<RocPoint>,
    pub auc: f64,
}

impl RocCurve {
    /// Trapezoidal area under the threshold-sweep curve.
    pub fn trapezoid_area(&self) -> f64 {
        self.points
            .windows(2)
            .map(|w| (w[1].fpr - w[0].fpr) * (w[1].tpr + w[0].tpr) / 2.0)
            .sum()
    }

    /// `threshold,fpr,tpr` CSV.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("threshold,fpr,tpr\n");
        for p in &self.points {
            let _ = writeln!(out, "{},{},{}", fmt_num(p.threshold), fmt_num(p.fpr), fmt_num(p.tpr));
        }
        out
    }
}

/// 15 significant digits; `inf`/`-inf`/`NaN` spelled out.
pub fn fmt_num(v: f64) -> String {
    if v.is_finite() {
        format!("{v:.14e}")
    } else {
        format!("{v}")
    }
}

fn check_scores(scores: &[f64], labels: &[Label]) -> Result<(usize, usize), EvalError> {
    if scores.len() != labels.len() {
        return Err(EvalError::LengthMismatch {
            a: labels.len(),
            b: scores.len(),
        });
    }
    if let Some(i) = scores.iter().position(|s| !s.is_finite()) {
        return Err(EvalError::NonFiniteScore(i));
    }
    let pos = labels.iter().filter(|l| l.is_afib()).count();
    let neg = labels.len() - pos;
    if pos == 0 || neg == 0 {
        return Err(EvalError::SingleClass);
    }
    Ok((pos, neg))
}

/// Mann–Whitney AUC: `P(s⁺ > s⁻) + ½ P(s⁺ = s⁻)` via midranks.
pub fn mann_whitney_auc(scores: &[f64], labels: &[Label]) -> Result<f64, EvalError> {
    let (pos, neg) = check_scores(scores, labels)?;
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]));

    // Twice the positive rank sum keeps midranks integral.
    let mut rank_sum_x2: u128 = 0;
    let mut start = 0;
    while start < order.len() {
        let mut end = start;
        while end + 1 < order.len() && scores[order[end + 1]] == scores[order[start]] {
            end += 1;
        }
        let midrank_x2 = (start + 1 + end + 1) as u128;
        let positives = order[start..=end].iter().filter(|&&i| labels[i].is_afib()).count() as u128;
        rank_sum_x2 += midrank_x2 * positives;
        start = end + 1;
    }
    let (p, q) = (pos as u128, neg as u128);
    // U = R - p(p+1)/2, all doubled.
    let u_x2 = rank_sum_x2 - p * (p + 1);
    Ok(u_x2 as f64 / (2 * p * q) as f64)
}

/// ROC curve from a sweep over the distinct scores (high to low), with the
/// Mann–Whitney AUC.
pub fn roc_auc(scores: &[f64], labels: &[Label]) -> Result<RocCurve, EvalError> {
    let (pos, neg) = check_scores(scores, labels)?;
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]));

    let mut points = vec![RocPoint {
        threshold: f64::INFINITY,
        fpr: 0.0,
        tpr: 0.0,
    }];
    let (mut tp, mut fp) = (0usize, 0usize);
    let mut i = 0;
    while i < order.len() {
        let threshold = scores[order[i]];
        while i < order.len() && scores[order[i]] == threshold {
            if labels[order[i]].is_afib() {
                tp += 1;
            } else {
                fp += 1;
            }
            i += 1;
        }
        points.push(RocPoint {
            threshold,
            fpr: fp as f64 / neg as f64,
            tpr: tp as f64 / pos as f64,
        });
    }
    Ok(RocCurve {
        points,
        auc: mann_whitney_auc(scores, labels)?,
    })
}

/// Stratified fold index for every sample.
///
/// Each class is shuffled with the seeded generator and dealt round-robin,
/// continuing the count across classes so fold sizes differ by at most one.
pub fn stratified_folds(labels: &[Label], k: usize, seed: u64) -> Result<Vec<usize>, EvalError> {
    let n = labels.len();
    if k < 2 || k > n {
        return Err(EvalError::InvalidK { k, n });
    }
    for label in [Label::Sinus, Label::AFib] {
        let count = labels.iter().filter(|&&l| l == label).count();
        // Every training split must keep two samples of each class.
        let largest_fold = count.div_ceil(k);
        if count < largest_fold + 2 {
            return Err(EvalError::TooFewPerClass {
                label,
                count,
                k,
                needed: largest_fold + 2,
            });
        }
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut folds = vec![0; n];
    let mut dealt = 0;
    for label in [Label::Sinus, Label::AFib] {
        let mut members: Vec<usize> = (0..n).filter(|&i| labels[i] == label).collect();
        members.shuffle(&mut rng);
        for i in members {
            folds[i] = dealt % k;
            dealt += 1;
        }
    }
    Ok(folds)
}

#[derive(Debug, Clone, PartialEq)]
pub struct FoldMetrics {
    pub fold: usize,
    pub size: usize,
    /// `None` when the held-out fold lacks the relevant class.
    pub sensitivity: Option<f64>,
    pub specificity: Option<f64>,
    pub accuracy: f64,
    pub auc: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CvReport {
    pub folds: Vec<FoldMetrics>,
    pub assignments: Vec<usize>,
    /// Out-of-fold probabilities, in sample order.
    pub scores: Vec<f64>,
    pub pooled: ClassificationMetrics,
    pub roc: RocCurve,
}

impl CvReport {
    pub fn auc(&self) -> f64 {
        self.roc.auc
    }

    /// `fold,sensitivity,specificity,accuracy,auc`, one row per fold and a
    /// final `pooled` row; undefined per-fold values are written as `NA`.
    pub fn metrics_csv(&self) -> String {
        let opt = |v: Option<f64>| v.map_or_else(|| "NA".to_string(), fmt_num);
        let mut out = String::from("fold,sensitivity,specificity,accuracy,auc\n");
        for f in &self.folds {
            let _ = writeln!(
                out,
                "{},{},{},{},{}",
                f.fold,
                opt(f.sensitivity),
                opt(f.specificity),
                fmt_num(f.accuracy),
                opt(f.auc)
            );
        }
        let _ = writeln!(
            out,
            "pooled,{},{},{},{}",
            fmt_num(self.pooled.sensitivity),
            fmt_num(self.pooled.specificity),
            fmt_num(self.pooled.accuracy),
            fmt_num(self.roc.auc)
        );
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CvOptions {
    pub k: usize,
    pub seed: u64,
    pub fit: FitOptions,
}

impl CvOptions {
    pub fn new(k: usize, l2: f64, seed: u64) -> Self {
        Self {
            k,
            seed,
            fit: FitOptions::with_l2(l2),
        }
    }
}

pub fn kfold_cv(data: &LabeledSet, k: usize, l2: f64, seed: u64) -> Result<CvReport, EvalError> {
    kfold_cv_with(data, &CvOptions::new(k, l2, seed))
}

/// Fit on k−1 folds, score the held-out fold; pooled out-of-fold scores
/// give the reported ROC and thresholded metrics.
pub fn kfold_cv_with(data: &LabeledSet, options: &CvOptions) -> Result<CvReport, EvalError> {
    let assignments = stratified_folds(data.labels(), options.k, options.seed)?;
    let labels = data.labels();
    let mut scores = vec![f64::NAN; data.len()];
    let mut folds = Vec::with_capacity(options.k);

    for fold in 0..options.k {
        let (test, train): (Vec<usize>, Vec<usize>) = (0..data.len()).partition(|&i| assignments[i] == fold);
        let model = classifier::fit_with(&data.subset(&train), &options.fit)?.model;
        let mut fold_scores = Vec::with_capacity(test.len());
        let mut fold_preds = Vec::with_capacity(test.len());
        for &i in &test {
            let p = model.predict_proba(&data.rows()[i])?;
            scores[i] = p;
            fold_scores.push(p);
            fold_preds.push(Label::from_bool(p >= options.fit.threshold));
        }
        let fold_labels: Vec<Label> = test.iter().map(|&i| labels[i]).collect();
        let counts = ConfusionCounts::from_predictions(&fold_labels, &fold_preds)?;
        folds.push(FoldMetrics {
            fold,
            size: test.len(),
            sensitivity: counts.sensitivity(),
            specificity: counts.specificity(),
            accuracy: counts.accuracy().unwrap_or(f64::NAN),
            auc: mann_whitney_auc(&fold_scores, &fold_labels).ok(),
        });
    }

    let predictions: Vec<Label> = scores
        .iter()
        .map(|&p| Label::from_bool(p >= options.fit.threshold))
        .collect();
    Ok(CvReport {
        folds,
        pooled: confusion_metrics(labels, &predictions)?,
        roc: roc_auc(&scores, labels)?,
        scores,
        assignments,
    })
}

/// One candidate feature, evaluated on every sample of the cohort.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureColumn {
    pub name: String,
    pub values: Vec<f64>,
}

impl FeatureColumn {
    pub fn new(name: impl Into<String>, values: Vec<f64>) -> Self {
        Self {
            name: name.into(),
            values,
        }
    }

    /// Apply an extractor to each item of a cohort.
    pub fn from_extractor<T>(name: impl Into<String>, items: &[T], extractor: impl Fn(&T) -> f64) -> Self {
        Self::new(name, items.iter().map(extractor).collect())
    }

    /// Split a labelled set into one column per dimension.
    pub fn from_set(data: &LabeledSet, names: &[&str]) -> Vec<Self> {
        (0..data.dim())
            .map(|c| {
                let name = names.get(c).map_or_else(|| format!("x{c}"), |s| s.to_string());
                Self::new(name, data.rows().iter().map(|r| r[c]).collect())
            })
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SelectionStep {
    /// Position in the candidate pool.
    pub index: usize,
    pub name: String,
    /// Cross-validated AUC after adding this feature.
    pub auc: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SelectionReport {
    /// AUC of the empty (intercept-only) model, i.e. chance.
    pub baseline_auc: f64,
    pub steps: Vec<SelectionStep>,
}

impl SelectionReport {
    pub fn selected(&self) -> Vec<usize> {
        self.steps.iter().map(|s| s.index).collect()
    }

    /// `step,feature,auc` CSV; step 0 is the empty model.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("step,feature,auc\n");
        let _ = writeln!(out, "0,(none),{}", fmt_num(self.baseline_auc));
        for (i, s) in self.steps.iter().enumerate() {
            let _ = writeln!(out, "{},{},{}", i + 1, s.name, fmt_num(s.auc));
        }
        out
    }
}

/// Greedy forward selection scored by pooled cross-validated AUC.
///
/// Starting from the intercept-only model (AUC 0.5), each round adds the
/// candidate whose inclusion gives the highest AUC (earliest in the pool on
/// ties), and stops once the best gain is at most [`SELECTION_MIN_GAIN`].
pub fn forward_feature_selection(
    pool: &[FeatureColumn],
    labels: &[Label],
    k: usize,
    l2: f64,
    seed: u64,
) -> Result<SelectionReport, EvalError> {
    if pool.is_empty() {
        return Err(EvalError::EmptyPool);
    }
    if let Some(bad) = pool.iter().find(|c| c.values.len() != labels.len()) {
        return Err(EvalError::ColumnLength(bad.name.clone()));
    }
    let rows = (0..labels.len())
        .map(|i| pool.iter().map(|c| c.values[i]).collect())
        .collect();
    let all = LabeledSet::new(rows, labels.to_vec())?;
    let options = CvOptions::new(k, l2, seed);

    let baseline_auc = 0.5;
    let mut current = baseline_auc;
    let mut selected: Vec<usize> = Vec::new();
    let mut steps = Vec::new();
    while selected.len() < pool.len() {
        let mut best: Option<(usize, f64)> = None;
        for candidate in (0..pool.len()).filter(|c| !selected.contains(c)) {
            let mut columns = selected.clone();
            columns.push(candidate);
            let auc = kfold_cv_with(&all.select_columns(&columns), &options)?.auc();
            if best.is_none_or(|(_, b)| auc > b) {
                best = Some((candidate, auc));
            }
        }
        let (index, auc) = best.expect("at least one candidate remains");
        if auc - current <= SELECTION_MIN_GAIN {
            break;
        }
        log::debug!("selected {} (auc {auc:.4})", pool[index].name);
        selected.push(index);
        steps.push(SelectionStep {
            index,
            name: pool[index].name.clone(),
            auc,
        });
        current = auc;
    }
    Ok(SelectionReport { baseline_auc, steps })
}
