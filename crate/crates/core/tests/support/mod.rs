//! Brute-force oracles and random instance builders shared by the
//! integration tests and the acceptance runner.

#![allow(dead_code)]

pub mod invariants;

use aoa_core::{Matrix, PredictorMatrix, SampleTable};
use rand::Rng;
use rand_chacha::ChaCha8Rng;

pub fn names(p: usize) -> Vec<String> {
    (1..=p).map(|j| format!("x{j}")).collect()
}

pub fn table(rows: &[Vec<f64>]) -> SampleTable {
    let p = rows[0].len();
    let response = (0..rows.len()).map(|i| i as f64).collect();
    SampleTable::from_matrix(names(p), Matrix::from_rows(rows).unwrap(), response).unwrap()
}

pub fn points(rows: &[Vec<f64>]) -> PredictorMatrix {
    PredictorMatrix::new(names(rows[0].len()), Matrix::from_rows(rows).unwrap()).unwrap()
}

/// Column means and sample sds, two-pass.
pub fn naive_moments(rows: &[Vec<f64>]) -> (Vec<f64>, Vec<f64>) {
    let n = rows.len() as f64;
    let p = rows[0].len();
    let mut means = vec![0.0; p];
    let mut sds = vec![0.0; p];
    for j in 0..p {
        means[j] = rows.iter().map(|r| r[j]).sum::<f64>() / n;
        let ss: f64 = rows.iter().map(|r| (r[j] - means[j]).powi(2)).sum();
        sds[j] = (ss / (n - 1.0)).sqrt();
    }
    (means, sds)
}

fn project(row: &[f64], means: &[f64], sds: &[f64], w: &[f64]) -> Vec<f64> {
    (0..row.len()).map(|j| (row[j] - means[j]) / sds[j] * w[j]).collect()
}

fn dist(a: &[f64], b: &[f64]) -> f64 {
    let mut s = 0.0;
    for k in 0..a.len() {
        s += (a[k] - b[k]) * (a[k] - b[k]);
    }
    s.sqrt()
}

/// Mean distance over all ordered pairs i != j (equal to the unordered mean).
pub fn naive_mean_distance(train: &[Vec<f64>], w: &[f64]) -> f64 {
    let (m, s) = naive_moments(train);
    let pts: Vec<Vec<f64>> = train.iter().map(|r| project(r, &m, &s, w)).collect();
    let mut total = 0.0;
    let mut count = 0.0;
    for i in 0..pts.len() {
        for j in 0..pts.len() {
            if i != j {
                total += dist(&pts[i], &pts[j]);
                count += 1.0;
            }
        }
    }
    total / count
}

pub fn naive_di(train: &[Vec<f64>], w: &[f64], query: &[f64]) -> f64 {
    let (m, s) = naive_moments(train);
    let q = project(query, &m, &s, w);
    let nearest = train
        .iter()
        .map(|r| dist(&project(r, &m, &s, w), &q))
        .fold(f64::INFINITY, f64::min);
    nearest / naive_mean_distance(train, w)
}

/// Training DI: nearest neighbour restricted to other folds.
pub fn naive_training_di(train: &[Vec<f64>], w: &[f64], folds: &[usize]) -> Vec<f64> {
    let (m, s) = naive_moments(train);
    let pts: Vec<Vec<f64>> = train.iter().map(|r| project(r, &m, &s, w)).collect();
    let dbar = naive_mean_distance(train, w);
    (0..pts.len())
        .map(|i| {
            let mut best = f64::INFINITY;
            for j in 0..pts.len() {
                if folds[j] != folds[i] {
                    best = best.min(dist(&pts[i], &pts[j]));
                }
            }
            best / dbar
        })
        .collect()
}

/// Random instance with every column non-constant.
pub struct Instance {
    pub train: Vec<Vec<f64>>,
    pub queries: Vec<Vec<f64>>,
    pub weights: Vec<f64>,
    pub folds: Vec<usize>,
}

pub fn random_instance(rng: &mut ChaCha8Rng, max_n: usize, max_p: usize) -> Instance {
    let n = rng.random_range(3..=max_n);
    let p = rng.random_range(1..=max_p);
    let k = rng.random_range(2..=n.min(10));
    let scales: Vec<f64> = (0..p).map(|_| 10f64.powf(rng.random_range(-2.0..3.0))).collect();
    let mut train: Vec<Vec<f64>> = (0..n)
        .map(|_| scales.iter().map(|s| rng.random_range(-1.0..1.0) * s).collect())
        .collect();
    // guarantee variance in every column
    for (j, s) in scales.iter().enumerate() {
        train[0][j] = -2.0 * s;
        train[1][j] = 2.0 * s;
    }
    let queries = (0..rng.random_range(1..=20))
        .map(|_| scales.iter().map(|s| rng.random_range(-3.0..3.0) * s).collect())
        .collect();
    let mut weights: Vec<f64> = (0..p)
        .map(|_| if rng.random_bool(0.2) { 0.0 } else { rng.random_range(0.0..5.0) })
        .collect();
    weights[rng.random_range(0..p)] = rng.random_range(0.5..5.0);
    let mut folds: Vec<usize> = (0..n).map(|i| i % k).collect();
    for i in (1..n).rev() {
        folds.swap(i, rng.random_range(0..=i));
    }
    Instance {
        train,
        queries,
        weights,
        folds,
    }
}

/// Largest relative error between two slices.
pub fn max_rel_err(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y).abs() / y.abs().max(1.0))
        .fold(0.0, f64::max)
}
