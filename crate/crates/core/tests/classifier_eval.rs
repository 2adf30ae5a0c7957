mod common;

use afib_core::classifier::{fit, fit_with, FitOptions, Label, LabeledSet, LogisticModel};
use afib_core::eval::{
    confusion_metrics, forward_feature_selection, kfold_cv, mann_whitney_auc, roc_auc, stratified_folds,
    FeatureColumn,
};
use common::gaussian;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Two informative columns (different strengths) and one noise column.
fn dataset(seed: u64, n: usize) -> LabeledSet {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut rows = Vec::new();
    let mut labels = Vec::new();
    for i in 0..n {
        let label = Label::from_bool(i % 3 == 0);
        let y = label.as_f64();
        rows.push(vec![
            500.0 + 40.0 * (gaussian(&mut rng) + 1.5 * y),
            0.01 * (gaussian(&mut rng) + 0.7 * y),
            gaussian(&mut rng),
        ]);
        labels.push(label);
    }
    LabeledSet::new(rows, labels).unwrap()
}

fn norm(m: &LogisticModel) -> f64 {
    m.weights.iter().map(|w| w * w).sum::<f64>().sqrt()
}

#[test]
fn stronger_regularisation_never_grows_weights() {
    for seed in 0..5 {
        let data = dataset(seed, 90);
        let grid = [0.0, 0.01, 0.03, 0.1, 0.3, 1.0, 3.0, 10.0, 100.0];
        let norms: Vec<f64> = grid.iter().map(|&l2| norm(&fit(&data, l2).unwrap().model)).collect();
        for w in norms.windows(2) {
            assert!(w[1] <= w[0] * (1.0 + 1e-9), "{norms:?}");
        }
    }
}

#[test]
fn fits_converge_to_gradient_tolerance() {
    for seed in 0..30 {
        let data = dataset(100 + seed, 60);
        let report = fit(&data, [0.1, 1.0, 5.0][seed as usize % 3]).unwrap();
        assert!(report.converged, "seed {seed}");
        assert!(report.gradient_norm < 1e-8);
        assert!(report.loss_trace.windows(2).all(|w| w[1] <= w[0]));
    }
}

#[test]
fn fitting_is_bitwise_deterministic() {
    let data = dataset(7, 120);
    let a = fit(&data, 0.5).unwrap().model;
    let b = fit(&data, 0.5).unwrap().model;
    assert_eq!(a.to_json(), b.to_json());
    assert!(a.weights.iter().zip(&b.weights).all(|(x, y)| x.to_bits() == y.to_bits()));
}

#[test]
fn decisions_survive_consistent_restandardisation() {
    let data = dataset(8, 90);
    let model = fit(&data, 1.0).unwrap().model;
    let (scale, shift) = ([3.0, 250.0, 0.5], [-40.0, 7.0, 12.0]);
    let transform = |r: &[f64]| -> Vec<f64> { r.iter().enumerate().map(|(j, v)| scale[j] * v + shift[j]).collect() };
    let mut adjusted = model.clone();
    for j in 0..3 {
        adjusted.means[j] = scale[j] * model.means[j] + shift[j];
        adjusted.stds[j] = scale[j] * model.stds[j];
    }
    for row in data.rows() {
        let p = model.predict_proba(row).unwrap();
        let q = adjusted.predict_proba(&transform(row)).unwrap();
        assert!((p - q).abs() < 1e-12);
        if (p - 0.5).abs() > 1e-9 {
            assert_eq!(model.classify(row).unwrap(), adjusted.classify(&transform(row)).unwrap());
        }
    }

    // Refitting on transformed data gives the same standardised problem.
    let transformed = LabeledSet::new(data.rows().iter().map(|r| transform(r)).collect(), data.labels().to_vec()).unwrap();
    let refit = fit(&transformed, 1.0).unwrap().model;
    for (row, t) in data.rows().iter().zip(transformed.rows()) {
        let (p, q) = (model.predict_proba(row).unwrap(), refit.predict_proba(t).unwrap());
        assert!((p - q).abs() < 1e-6, "{p} vs {q}");
    }
}

#[test]
fn probability_increases_with_positively_weighted_feature() {
    let data = dataset(9, 90);
    let model = fit(&data, 1.0).unwrap().model;
    assert!(model.weights[0] > 0.0);
    let mut x = model.means.clone();
    let mut last = 0.0;
    for step in 0..20 {
        x[0] = 300.0 + 20.0 * step as f64;
        let p = model.predict_proba(&x).unwrap();
        assert!(p > last);
        last = p;
    }
}

#[test]
fn threshold_option_is_stored() {
    let data = dataset(10, 60);
    let options = FitOptions {
        threshold: 0.3,
        ..FitOptions::default()
    };
    let model = fit_with(&data, &options).unwrap().model;
    assert_eq!(model.threshold, 0.3);
    assert_eq!(LogisticModel::from_json(&model.to_json()).unwrap(), model);
}

#[test]
fn mann_whitney_equals_trapezoid_area() {
    let mut rng = ChaCha8Rng::seed_from_u64(20);
    for _ in 0..200 {
        let n = rng.gen_range(4..80);
        let mut labels: Vec<Label> = (0..n).map(|_| Label::from_bool(rng.gen_bool(0.4))).collect();
        labels[0] = Label::AFib;
        labels[1] = Label::Sinus;
        let levels = rng.gen_range(2..20);
        let scores: Vec<f64> = (0..n).map(|_| rng.gen_range(0..levels) as f64 / levels as f64).collect();
        let curve = roc_auc(&scores, &labels).unwrap();
        let mw = mann_whitney_auc(&scores, &labels).unwrap();
        assert!((curve.trapezoid_area() - mw).abs() <= 1e-12);
        assert_eq!(curve.auc, mw);
        let first = curve.points.first().unwrap();
        let last = curve.points.last().unwrap();
        assert_eq!((first.fpr, first.tpr), (0.0, 0.0));
        assert_eq!((last.fpr, last.tpr), (1.0, 1.0));
        assert!(curve.points.windows(2).all(|w| w[1].fpr >= w[0].fpr && w[1].tpr >= w[0].tpr));

        // Rank statistic: unchanged by a strictly increasing transform.
        let warped: Vec<f64> = scores.iter().map(|s| (3.0 * s).exp() - 7.0).collect();
        assert_eq!(mann_whitney_auc(&warped, &labels).unwrap(), mw);
    }
}

#[test]
fn accuracy_is_prevalence_weighted_mean() {
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    for _ in 0..200 {
        let n = rng.gen_range(2..60);
        let mut labels: Vec<Label> = (0..n).map(|_| Label::from_bool(rng.gen_bool(0.5))).collect();
        labels[0] = Label::AFib;
        labels[1] = Label::Sinus;
        let preds: Vec<Label> = (0..n).map(|_| Label::from_bool(rng.gen_bool(0.5))).collect();
        let m = confusion_metrics(&labels, &preds).unwrap();
        let pos = labels.iter().filter(|l| l.is_afib()).count() as f64;
        let neg = n as f64 - pos;
        let weighted = (m.sensitivity * pos + m.specificity * neg) / n as f64;
        assert!((m.accuracy - weighted).abs() <= 1e-15);
        assert!((0.0..=1.0).contains(&m.sensitivity) && (0.0..=1.0).contains(&m.specificity));
    }
}

#[test]
fn folds_are_stratified_and_reproducible() {
    let mut rng = ChaCha8Rng::seed_from_u64(22);
    for _ in 0..50 {
        let n = rng.gen_range(20..120);
        let labels: Vec<Label> = (0..n).map(|i| Label::from_bool(i % 3 == 0)).collect();
        let k = rng.gen_range(2..=5);
        let seed = rng.gen();
        let folds = stratified_folds(&labels, k, seed).unwrap();
        assert_eq!(folds, stratified_folds(&labels, k, seed).unwrap());
        let ratio = labels.iter().filter(|l| l.is_afib()).count() as f64 / n as f64;
        for f in 0..k {
            let members: Vec<usize> = (0..n).filter(|&i| folds[i] == f).collect();
            let pos = members.iter().filter(|&&i| labels[i].is_afib()).count() as f64;
            assert!((pos - ratio * members.len() as f64).abs() <= 1.0 + 1e-9);
        }
    }
}

#[test]
fn cross_validation_is_reproducible() {
    let data = dataset(23, 90);
    let a = kfold_cv(&data, 5, 1.0, 4).unwrap();
    let b = kfold_cv(&data, 5, 1.0, 4).unwrap();
    assert_eq!(a.metrics_csv(), b.metrics_csv());
    assert_eq!(a.roc.to_csv(), b.roc.to_csv());
    assert!(a.auc() > 0.8);
}

#[test]
fn selection_prefers_informative_feature() {
    let data = dataset(24, 150);
    let labels = data.labels().to_vec();
    let informative = FeatureColumn::new("signal", data.rows().iter().map(|r| r[0]).collect());
    let noise = FeatureColumn::new("noise", data.rows().iter().map(|r| r[2]).collect());

    for pool in [vec![noise.clone(), informative.clone()], vec![informative.clone(), noise.clone()]] {
        let report = forward_feature_selection(&pool, &labels, 5, 1.0, 3).unwrap();
        let first = &report.steps[0];
        assert_eq!(first.name, "signal");
        // Oracle: direct CV of each single feature.
        let auc_of = |c: &FeatureColumn| {
            let set = LabeledSet::new(c.values.iter().map(|&v| vec![v]).collect(), labels.clone()).unwrap();
            kfold_cv(&set, 5, 1.0, 3).unwrap().auc()
        };
        assert!(auc_of(&informative) > auc_of(&noise));
        assert_eq!(first.auc, auc_of(&informative));
    }
}

#[test]
fn duplicated_feature_is_not_selected_twice() {
    let data = dataset(25, 150);
    let labels = data.labels().to_vec();
    let column = FeatureColumn::new("signal", data.rows().iter().map(|r| r[0]).collect());
    let mut copy = column.clone();
    copy.name = "signal_copy".into();
    let report = forward_feature_selection(&[column, copy], &labels, 5, 1.0, 5).unwrap();
    assert_eq!(report.steps.len(), 1);

    // Oracle: the pair scores within the stopping margin of the single copy.
    let single = LabeledSet::new(data.rows().iter().map(|r| vec![r[0]]).collect(), labels.clone()).unwrap();
    let pair = LabeledSet::new(data.rows().iter().map(|r| vec![r[0], r[0]]).collect(), labels).unwrap();
    let gain = kfold_cv(&pair, 5, 1.0, 5).unwrap().auc() - kfold_cv(&single, 5, 1.0, 5).unwrap().auc();
    assert!(gain <= 1e-4, "gain {gain}");
}
