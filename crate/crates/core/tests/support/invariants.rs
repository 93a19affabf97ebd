//! Property checks, each run for a fixed number of cases. Returning the
//! failure message lets both the test suite and the acceptance runner use
//! them.

use aoa_core::aoa::{aoa_mask, threshold_from_values, MaskCell};
use aoa_core::forest::{train_forest, ForestConfig};
use aoa_core::io::{model_from_json, model_to_json, parse_grid, parse_samples, render_grid, render_samples, GridWriteOptions};
use aoa_core::predictor_space::{DissimilarityModel, ImportanceWeights};
use aoa_core::validation::{assign_cluster_folds, assign_random_folds};
use aoa_core::{Grid, GridGeometry, Matrix, SampleTable};
use proptest::prelude::*;
use proptest::test_runner::{Config, TestRunner};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{names, points, random_instance, table};

pub const CASES: u32 = 128;

fn run<S: Strategy>(cases: u32, strategy: S, test: impl Fn(S::Value) -> Result<(), TestCaseError>) -> Result<(), String> {
    let mut runner = TestRunner::new(Config {
        cases,
        failure_persistence: None,
        ..Config::default()
    });
    runner.run(&strategy, test).map_err(|e| e.to_string())
}

fn di_for(train: &[Vec<f64>], weights: &[f64], queries: &[Vec<f64>]) -> Vec<f64> {
    let p = weights.len();
    let w = ImportanceWeights::new(names(p), weights.to_vec()).unwrap();
    let model = DissimilarityModel::fit(&table(train), &names(p), &w).unwrap();
    model.di(&points(queries), None).unwrap()
}

fn close(a: &[f64], b: &[f64], tol: f64) -> bool {
    a.iter().zip(b).all(|(x, y)| (x - y).abs() <= tol * y.abs().max(1.0))
}

pub fn weight_scale_invariance() -> Result<(), String> {
    run(CASES, (any::<u64>(), -3.0f64..3.0), |(seed, log_c)| {
        let inst = random_instance(&mut ChaCha8Rng::seed_from_u64(seed), 30, 6);
        let c = 10f64.powf(log_c);
        let scaled: Vec<f64> = inst.weights.iter().map(|w| w * c).collect();
        let a = di_for(&inst.train, &inst.weights, &inst.queries);
        let b = di_for(&inst.train, &scaled, &inst.queries);
        prop_assert!(close(&a, &b, 1e-9), "{a:?} vs {b:?}");
        Ok(())
    })
}

pub fn affine_invariance() -> Result<(), String> {
    let coef = prop::collection::vec((0.01f64..100.0, any::<bool>(), -1e3f64..1e3), 6);
    run(CASES, (any::<u64>(), coef), |(seed, coef)| {
        let inst = random_instance(&mut ChaCha8Rng::seed_from_u64(seed), 30, 6);
        let map = |rows: &[Vec<f64>]| -> Vec<Vec<f64>> {
            rows.iter()
                .map(|r| {
                    r.iter()
                        .enumerate()
                        .map(|(j, v)| {
                            let (a, neg, b) = coef[j];
                            v * if neg { -a } else { a } + b
                        })
                        .collect()
                })
                .collect()
        };
        let a = di_for(&inst.train, &inst.weights, &inst.queries);
        let b = di_for(&map(&inst.train), &inst.weights, &map(&inst.queries));
        prop_assert!(close(&a, &b, 1e-9), "{a:?} vs {b:?}");
        Ok(())
    })
}

fn di_grid_strategy() -> impl Strategy<Value = (Vec<f64>, Vec<f64>)> {
    (
        prop::collection::vec(prop_oneof![9 => 0.0f64..3.0, 1 => Just(f64::NAN)], 1..60),
        prop::collection::vec(0.0f64..2.0, 2..40),
    )
}

pub fn aoa_nesting() -> Result<(), String> {
    run(CASES, (di_grid_strategy(), 0.01f64..1.0, 0.01f64..1.0), |((cells, train), q1, q2)| {
        let (lo, hi) = if q1 <= q2 { (q1, q2) } else { (q2, q1) };
        let grid = Grid::new(GridGeometry::new(1, cells.len(), 1.0).unwrap(), cells).unwrap();
        let small = aoa_mask(&grid, threshold_from_values(&train, lo).unwrap()).unwrap();
        let large = aoa_mask(&grid, threshold_from_values(&train, hi).unwrap()).unwrap();
        for (a, b) in small.cells.iter().zip(&large.cells) {
            prop_assert!(*a != MaskCell::Inside || *b == MaskCell::Inside);
            prop_assert_eq!(*a == MaskCell::Missing, *b == MaskCell::Missing);
        }
        Ok(())
    })
}

pub fn threshold_monotonicity() -> Result<(), String> {
    run(CASES, (prop::collection::vec(0.0f64..5.0, 1..50), prop::collection::vec(0.001f64..=1.0, 2..10)), |(train, mut qs)| {
        qs.sort_by(f64::total_cmp);
        let t: Vec<f64> = qs.iter().map(|&q| threshold_from_values(&train, q).unwrap()).collect();
        prop_assert!(t.windows(2).all(|w| w[0] <= w[1]), "{qs:?} -> {t:?}");
        let max = train.iter().copied().fold(f64::MIN, f64::max);
        prop_assert_eq!(threshold_from_values(&train, 1.0).unwrap(), max);
        Ok(())
    })
}

fn small_regression(seed: u64, n: usize, p: usize) -> SampleTable {
    use rand::Rng;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let rows: Vec<Vec<f64>> = (0..n).map(|_| (0..p).map(|_| rng.random_range(-1.0..1.0)).collect()).collect();
    let y = rows.iter().map(|r| r[0].sin() + r.iter().sum::<f64>() * 0.1 + rng.random_range(-0.1..0.1)).collect();
    SampleTable::from_matrix(names(p), Matrix::from_rows(&rows).unwrap(), y).unwrap()
}

pub fn forest_thread_determinism() -> Result<(), String> {
    run(CASES, (any::<u64>(), 10usize..40, 1usize..5), |(seed, n, p)| {
        let samples = small_regression(seed, n, p);
        let cfg = ForestConfig::default().with_trees(8).with_seed(seed);
        let train_with = |threads| {
            rayon::ThreadPoolBuilder::new()
                .num_threads(threads)
                .build()
                .unwrap()
                .install(|| train_forest(&samples, &cfg).unwrap())
        };
        let one = train_with(1);
        let four = train_with(4);
        prop_assert!(one == four, "forests differ between 1 and 4 threads");
        Ok(())
    })
}

pub fn fold_partitions() -> Result<(), String> {
    run(CASES, (2usize..200, 2usize..20, any::<u64>(), prop::collection::vec(0i64..15, 2..80)), |(n, k, seed, labels)| {
        let k = k.min(n);
        prop_assert!(assign_random_folds(n, 1, seed).is_err());
        prop_assert!(assign_random_folds(n, n + 1, seed).is_err());
        let f = assign_random_folds(n, k, seed).unwrap();
        prop_assert_eq!(f.len(), n);
        prop_assert_eq!(f.n_folds(), k);
        let members = f.members();
        let mut seen = vec![0; n];
        for m in &members {
            for &i in m {
                seen[i] += 1;
            }
        }
        prop_assert!(seen.iter().all(|&c| c == 1));
        let sizes = f.fold_sizes();
        prop_assert!(sizes.iter().max().unwrap() - sizes.iter().min().unwrap() <= 1);
        prop_assert!(f == assign_random_folds(n, k, seed).unwrap());

        let mut distinct = labels.clone();
        distinct.sort();
        distinct.dedup();
        match assign_cluster_folds(&labels) {
            Ok(c) => {
                prop_assert_eq!(c.n_folds(), distinct.len());
                for i in 0..labels.len() {
                    for j in 0..labels.len() {
                        prop_assert_eq!(labels[i] == labels[j], c.folds()[i] == c.folds()[j]);
                    }
                }
            }
            Err(_) => prop_assert!(distinct.len() < 2),
        }
        Ok(())
    })
}

pub fn grid_round_trip() -> Result<(), String> {
    let cell = prop_oneof![8 => -1e6f64..1e6, 1 => Just(f64::NAN), 1 => -1e-6f64..1e-6];
    run(CASES, (1usize..12, 1usize..12, prop::collection::vec(cell, 144), -1e5f64..1e5, 0.001f64..1e3), |(r, c, vals, x0, cs)| {
        let mut geom = GridGeometry::new(r, c, cs).unwrap();
        geom.xllcorner = x0;
        geom.yllcorner = -x0;
        let grid = Grid::new(geom, vals[..r * c].to_vec()).unwrap();
        let exact = parse_grid(&render_grid(&grid, GridWriteOptions { significant_digits: None })).unwrap();
        prop_assert_eq!(exact.geometry, grid.geometry);
        for (a, b) in exact.values.iter().zip(&grid.values) {
            prop_assert!(a.to_bits() == b.to_bits() || (a.is_nan() && b.is_nan()));
        }
        let rounded = parse_grid(&render_grid(&grid, GridWriteOptions::default())).unwrap();
        for (a, b) in rounded.values.iter().zip(&grid.values) {
            prop_assert!((a.is_nan() && b.is_nan()) || (a - b).abs() <= 5e-6 * b.abs());
        }
        Ok(())
    })
}

pub fn samples_round_trip() -> Result<(), String> {
    run(CASES, (any::<u64>(), 1usize..30, 1usize..6, any::<bool>()), |(seed, n, p, with_folds)| {
        use rand::Rng;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut v = || rng.random_range(-1e4..1e4) * 10f64.powi(rng.random_range(-8..3));
        let rows: Vec<Vec<f64>> = (0..n).map(|_| (0..p).map(|_| v()).collect()).collect();
        let resp: Vec<f64> = (0..n).map(|_| v()).collect();
        let mut t = SampleTable::from_matrix(names(p), Matrix::from_rows(&rows).unwrap(), resp).unwrap();
        t.x = (0..n).map(|_| v()).collect();
        t.y = (0..n).map(|_| v()).collect();
        if with_folds {
            t = t.with_folds((0..n as i64).map(|i| i % 3 - 1).collect()).unwrap();
        }
        let back = parse_samples(&render_samples(&t).unwrap()).unwrap();
        prop_assert!(back == t);
        Ok(())
    })
}

pub fn model_round_trip() -> Result<(), String> {
    run(CASES, (any::<u64>(), 8usize..30, 1usize..4), |(seed, n, p)| {
        let samples = small_regression(seed, n, p);
        let forest = train_forest(&samples, &ForestConfig::default().with_trees(5).with_seed(seed)).unwrap();
        let back = model_from_json(&model_to_json(&forest).unwrap()).unwrap();
        prop_assert!(back == forest);
        prop_assert_eq!(back.predict(&samples.predictors).unwrap(), forest.predict(&samples.predictors).unwrap());
        Ok(())
    })
}

/// All checks by name.
pub fn all() -> Vec<(&'static str, fn() -> Result<(), String>)> {
    vec![
        ("weight-scale invariance", weight_scale_invariance),
        ("raw-predictor affine invariance", affine_invariance),
        ("AOA nesting", aoa_nesting),
        ("threshold monotonicity", threshold_monotonicity),
        ("forest determinism across thread counts", forest_thread_determinism),
        ("fold partition properties", fold_partitions),
        ("grid round-trip", grid_round_trip),
        ("sample CSV round-trip", samples_round_trip),
        ("model JSON round-trip", model_round_trip),
    ]
}
