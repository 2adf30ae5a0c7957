//! Brute-force oracles and fixtures shared by the integration tests.
#![allow(dead_code)]

use std::collections::BTreeMap;
use std::f64::consts::PI;

use afib_core::classifier::Label;
use afib_core::features::{extract_features, FeatureVector};
use afib_core::pipeline::{recording_intervals, PipelineConfig};
use afib_core::preprocess::SignalKind;
use afib_core::synth::{cohort, gen_waveform, WaveformOptions};
use rand::Rng;
use rand_chacha::ChaCha8Rng;

/// Visibility straight from the definition: every value strictly between
/// `a` and `b` must be strictly below both endpoints. O(N³).
pub fn hvg_oracle_edges(values: &[f64]) -> Vec<(usize, usize)> {
    let n = values.len();
    let mut edges = Vec::new();
    for a in 0..n {
        for b in a + 1..n {
            let floor = values[a].min(values[b]);
            if (a + 1..b).all(|k| values[k] < floor) {
                edges.push((a, b));
            }
        }
    }
    edges
}

pub fn adjacency_matrix(n: usize, edges: &[(usize, usize)]) -> Vec<Vec<bool>> {
    let mut adj = vec![vec![false; n]; n];
    for &(a, b) in edges {
        adj[a][b] = true;
        adj[b][a] = true;
    }
    adj
}

/// All-pairs hop distances by Floyd–Warshall; `usize::MAX` when unreachable.
pub fn all_pairs_distances(adj: &[Vec<bool>]) -> Vec<Vec<usize>> {
    let n = adj.len();
    let mut d = vec![vec![usize::MAX; n]; n];
    for i in 0..n {
        d[i][i] = 0;
        for j in 0..n {
            if adj[i][j] {
                d[i][j] = 1;
            }
        }
    }
    for k in 0..n {
        for i in 0..n {
            if d[i][k] == usize::MAX {
                continue;
            }
            for j in 0..n {
                if d[k][j] != usize::MAX && d[i][k] + d[k][j] < d[i][j] {
                    d[i][j] = d[i][k] + d[k][j];
                }
            }
        }
    }
    d
}

/// (radius, diameter) from the oracle adjacency.
pub fn radius_diameter_oracle(values: &[f64]) -> (usize, usize) {
    let n = values.len();
    let d = all_pairs_distances(&adjacency_matrix(n, &hvg_oracle_edges(values)));
    let ecc: Vec<usize> = d.iter().map(|row| *row.iter().max().unwrap()).collect();
    (
        ecc.iter().copied().min().unwrap_or(0),
        ecc.iter().copied().max().unwrap_or(0),
    )
}

/// `Σ e ln e` from enumerating every ordered adjacent pair of the oracle
/// adjacency matrix (each undirected edge gives two half-edges).
pub fn mixing_entropy_oracle(values: &[f64]) -> f64 {
    let n = values.len();
    let adj = adjacency_matrix(n, &hvg_oracle_edges(values));
    let degree: Vec<usize> = adj.iter().map(|row| row.iter().filter(|&&x| x).count()).collect();
    let mut counts: BTreeMap<(usize, usize), usize> = BTreeMap::new();
    let mut half_edges = 0usize;
    for u in 0..n {
        for v in 0..n {
            if adj[u][v] {
                *counts.entry((degree[u], degree[v])).or_default() += 1;
                half_edges += 1;
            }
        }
    }
    counts
        .values()
        .map(|&c| {
            let e = c as f64 / half_edges as f64;
            e * e.ln()
        })
        .sum()
}

/// Population SD of the `n`-th difference, differencing one order at a time.
pub fn f1_oracle(values: &[f64], n: usize) -> f64 {
    let mut d = values.to_vec();
    for _ in 0..n {
        d = d.windows(2).map(|w| w[1] - w[0]).collect();
    }
    let m = d.len() as f64;
    let mean = d.iter().sum::<f64>() / m;
    (d.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / m).sqrt()
}

pub fn rayleigh_log_likelihood(values: &[f64], sigma: f64) -> f64 {
    let s2 = sigma * sigma;
    values.iter().map(|&x| (x / s2).ln() - x * x / (2.0 * s2)).sum()
}

/// Golden-section maximisation of the Rayleigh log-likelihood over σ.
pub fn sigma_ml_numeric(values: &[f64]) -> f64 {
    let max = values.iter().copied().fold(0.0, f64::max);
    let (mut lo, mut hi) = (1e-3 * max, 2.0 * max);
    let g = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = hi - g * (hi - lo);
    let mut d = lo + g * (hi - lo);
    let (mut fc, mut fd) = (rayleigh_log_likelihood(values, c), rayleigh_log_likelihood(values, d));
    for _ in 0..200 {
        if fc > fd {
            hi = d;
            d = c;
            fd = fc;
            c = hi - g * (hi - lo);
            fc = rayleigh_log_likelihood(values, c);
        } else {
            lo = c;
            c = d;
            fc = fd;
            d = lo + g * (hi - lo);
            fd = rayleigh_log_likelihood(values, d);
        }
    }
    (lo + hi) / 2.0
}

/// Trapezoidal integral of `f` over `[a, b]` with `n` panels.
pub fn trapezoid(f: impl Fn(f64) -> f64, a: f64, b: f64, n: usize) -> f64 {
    let h = (b - a) / n as f64;
    let inner: f64 = (1..n).map(|i| f(a + i as f64 * h)).sum();
    h * (0.5 * (f(a) + f(b)) + inner)
}

/// Random positive interval-like series: continuous, or quantised to a few
/// levels so that ties are common.
pub fn random_series(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    if rng.gen_bool(0.5) {
        (0..n).map(|_| rng.gen_range(300.0..1500.0)).collect()
    } else {
        let levels = rng.gen_range(2..8);
        (0..n).map(|_| 600.0 + 50.0 * rng.gen_range(0..levels) as f64).collect()
    }
}

pub fn rayleigh_sample(rng: &mut ChaCha8Rng, sigma: f64) -> f64 {
    let u: f64 = rng.gen_range(f64::EPSILON..1.0);
    sigma * (-2.0 * u.ln()).sqrt()
}

pub fn gaussian(rng: &mut ChaCha8Rng) -> f64 {
    let u1: f64 = rng.gen_range(f64::EPSILON..1.0);
    let u2: f64 = rng.gen();
    (-2.0 * u1.ln()).sqrt() * (2.0 * PI * u2).cos()
}

/// Count of true beats with a distinct detected beat within `tolerance`
/// seconds (greedy nearest match, both lists sorted).
pub fn matched_beats(truth: &[f64], detected: &[f64], tolerance: f64) -> usize {
    let mut used = vec![false; detected.len()];
    let mut hits = 0;
    for &t in truth {
        let start = detected.partition_point(|&d| d < t - tolerance);
        let best = (start..detected.len())
            .take_while(|&i| detected[i] <= t + tolerance)
            .filter(|&i| !used[i])
            .min_by(|&i, &j| (detected[i] - t).abs().total_cmp(&(detected[j] - t).abs()));
        if let Some(i) = best {
            used[i] = true;
            hits += 1;
        }
    }
    hits
}

/// Waveform options used for the synthetic PPG cohort.
pub fn cohort_waveform_options(seed: u64) -> WaveformOptions {
    WaveformOptions {
        snr_db: Some(20.0),
        drift_amplitude: 0.2,
        timing_jitter: 0.0,
        seed,
    }
}

/// 200 sinus (seeds 1–200) and 200 AFib (seeds 201–400) 30 s PPG
/// recordings at 30 Hz, run through the full pipeline.
pub fn synthetic_ppg_cohort() -> (Vec<FeatureVector>, Vec<Label>) {
    let members = cohort(200, 1).expect("cohort");
    let config = PipelineConfig::default();
    let mut features = Vec::with_capacity(members.len());
    let mut labels = Vec::with_capacity(members.len());
    for m in members {
        let rec = gen_waveform(&m.ibis, SignalKind::Ppg, 30.0, &cohort_waveform_options(m.spec.seed))
            .expect("waveform");
        let ibis = recording_intervals(&rec.recording, &config).expect("intervals");
        features.push(extract_features(&ibis).expect("features"));
        labels.push(m.label);
    }
    (features, labels)
}
