//! Fold assignment, cross-validation and error metrics.

use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{AoaError, Result};
use crate::forest::{train_forest, ForestConfig};
use crate::rng::{derive_seed, derived_rng, stream};
use crate::samples::SampleTable;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "strategy", rename_all = "snake_case")]
pub enum FoldStrategy {
    RandomK { k: usize, seed: u64 },
    /// One fold per spatial cluster (leave-cluster-out).
    Cluster {
        n_clusters: usize,
        #[serde(default)]
        column: Option<String>,
    },
    LeaveOneOut,
    /// Folds taken verbatim from a labelled column.
    Explicit {
        #[serde(default)]
        column: Option<String>,
    },
}

impl std::fmt::Display for FoldStrategy {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            FoldStrategy::RandomK { k, seed } => write!(f, "random:k={k},seed={seed}"),
            FoldStrategy::Cluster { n_clusters, column: Some(c) } => write!(f, "cluster:col={c},n={n_clusters}"),
            FoldStrategy::Cluster { n_clusters, column: None } => write!(f, "cluster:n={n_clusters}"),
            FoldStrategy::LeaveOneOut => write!(f, "loo"),
            FoldStrategy::Explicit { column: Some(c) } => write!(f, "file:col={c}"),
            FoldStrategy::Explicit { column: None } => write!(f, "explicit"),
        }
    }
}

/// Dense fold ids `0..n_folds`, one per row, every fold nonempty.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FoldAssignment {
    folds: Vec<usize>,
    n_folds: usize,
    strategy: FoldStrategy,
}

impl FoldAssignment {
    pub fn folds(&self) -> &[usize] {
        &self.folds
    }

    pub fn n_folds(&self) -> usize {
        self.n_folds
    }

    pub fn strategy(&self) -> &FoldStrategy {
        &self.strategy
    }

    pub fn len(&self) -> usize {
        self.folds.len()
    }

    /// Records the sample column the folds came from.
    pub fn with_column(mut self, name: &str) -> Self {
        match &mut self.strategy {
            FoldStrategy::Cluster { column, .. } | FoldStrategy::Explicit { column } => *column = Some(name.to_string()),
            _ => {}
        }
        self
    }

    pub fn is_empty(&self) -> bool {
        self.folds.is_empty()
    }

    /// Row indices of each fold, in row order.
    pub fn members(&self) -> Vec<Vec<usize>> {
        let mut out = vec![Vec::new(); self.n_folds];
        for (i, &f) in self.folds.iter().enumerate() {
            out[f].push(i);
        }
        out
    }

    pub fn fold_sizes(&self) -> Vec<usize> {
        self.members().iter().map(Vec::len).collect()
    }

    /// Dense folds from arbitrary labels; fold ids follow sorted label order.
    pub fn from_labels(labels: &[i64]) -> Result<Self> {
        let (folds, n_folds) = densify(labels);
        if n_folds < 2 {
            return Err(AoaError::Fold(format!("need at least 2 folds, got {n_folds}")));
        }
        Ok(FoldAssignment {
            folds,
            n_folds,
            strategy: FoldStrategy::Explicit { column: None },
        })
    }

    pub fn leave_one_out(n: usize) -> Result<Self> {
        if n < 2 {
            return Err(AoaError::Fold("leave-one-out needs at least 2 rows".into()));
        }
        Ok(FoldAssignment {
            folds: (0..n).collect(),
            n_folds: n,
            strategy: FoldStrategy::LeaveOneOut,
        })
    }
}

fn densify(labels: &[i64]) -> (Vec<usize>, usize) {
    let mut ids = BTreeMap::new();
    for &l in labels {
        ids.entry(l).or_insert(0usize);
    }
    for (i, v) in ids.values_mut().enumerate() {
        *v = i;
    }
    (labels.iter().map(|l| ids[l]).collect(), ids.len())
}

/// Random partition of `n` rows into `k` folds whose sizes differ by at
/// most one.
pub fn assign_random_folds(n: usize, k: usize, seed: u64) -> Result<FoldAssignment> {
    if k < 2 || k > n {
        return Err(AoaError::Fold(format!("random folds need 2 <= k <= n, got k = {k}, n = {n}")));
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut derived_rng(seed, &[stream::FOLDS]));
    let mut folds = vec![0; n];
    for (pos, &row) in order.iter().enumerate() {
        folds[row] = pos % k;
    }
    Ok(FoldAssignment {
        folds,
        n_folds: k,
        strategy: FoldStrategy::RandomK { k, seed },
    })
}

/// One fold per distinct cluster label (leave-cluster-out).
pub fn assign_cluster_folds(cluster_ids: &[i64]) -> Result<FoldAssignment> {
    let (folds, n_folds) = densify(cluster_ids);
    if n_folds < 2 {
        return Err(AoaError::Fold(format!(
            "leave-cluster-out needs at least 2 clusters, got {n_folds}"
        )));
    }
    Ok(FoldAssignment {
        folds,
        n_folds,
        strategy: FoldStrategy::Cluster {
            n_clusters: n_folds,
            column: None,
        },
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FoldStat {
    pub fold: usize,
    pub n: usize,
    pub rmse: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvReport {
    pub per_fold: Vec<FoldStat>,
    /// Out-of-fold prediction for every row.
    pub predictions: Vec<f64>,
    /// RMSE over all pooled out-of-fold predictions.
    pub rmse: f64,
    /// Mean of the per-fold RMSEs.
    pub fold_mean_rmse: f64,
    /// Squared Pearson correlation; `NaN` when undefined.
    pub r_squared: f64,
    /// `NaN` when undefined (constant predictions or response).
    pub pearson_r: f64,
    pub folds: FoldAssignment,
}

/// Trains on the complement of each fold and predicts the fold.
pub fn cross_validate(samples: &SampleTable, folds: &FoldAssignment, config: &ForestConfig) -> Result<CvReport> {
    if folds.len() != samples.len() {
        return Err(AoaError::Fold(format!(
            "{} fold ids for {} samples",
            folds.len(),
            samples.len()
        )));
    }
    let members = folds.members();
    let n = samples.len();
    let per_fold: Vec<(Vec<usize>, Vec<f64>)> = members
        .par_iter()
        .enumerate()
        .map(|(f, test)| {
            let train: Vec<usize> = (0..n).filter(|&i| folds.folds[i] != f).collect();
            if train.len() < config.min_node_size.max(2) {
                return Err(AoaError::Fold(format!(
                    "fold {f}: only {} training rows remain",
                    train.len()
                )));
            }
            let cfg = ForestConfig {
                seed: derive_seed(config.seed, &[stream::FOLDS, f as u64]),
                ..config.clone()
            };
            let forest = train_forest(&samples.select_rows(&train), &cfg)?;
            let test_x = samples.predictors.select_rows(test);
            Ok((test.clone(), forest.predict(&test_x)?))
        })
        .collect::<Result<_>>()?;

    let mut predictions = vec![f64::NAN; n];
    let mut stats = Vec::with_capacity(per_fold.len());
    for (f, (rows, preds)) in per_fold.iter().enumerate() {
        for (&r, &p) in rows.iter().zip(preds) {
            predictions[r] = p;
        }
        let truth: Vec<f64> = rows.iter().map(|&r| samples.response[r]).collect();
        stats.push(FoldStat {
            fold: f,
            n: rows.len(),
            rmse: rmse(preds, &truth, None)?,
        });
    }
    let pooled = rmse(&predictions, &samples.response, None)?;
    let r = pearson_r(&predictions, &samples.response).unwrap_or(f64::NAN);
    Ok(CvReport {
        fold_mean_rmse: stats.iter().map(|s| s.rmse).sum::<f64>() / stats.len() as f64,
        per_fold: stats,
        predictions,
        rmse: pooled,
        r_squared: r * r,
        pearson_r: r,
        folds: folds.clone(),
    })
}

fn paired<'a>(pred: &'a [f64], truth: &'a [f64], mask: Option<&'a [bool]>) -> Result<impl Iterator<Item = (f64, f64)> + 'a> {
    if pred.len() != truth.len() {
        return Err(AoaError::invalid(format!(
            "prediction has {} values, truth has {}",
            pred.len(),
            truth.len()
        )));
    }
    if let Some(m) = mask {
        if m.len() != pred.len() {
            return Err(AoaError::invalid("mask length differs from data length"));
        }
    }
    Ok(pred
        .iter()
        .zip(truth)
        .enumerate()
        .filter(move |(i, _)| mask.is_none_or(|m| m[*i]))
        .map(|(_, (&p, &t))| (p, t))
        .filter(|(p, t)| !p.is_nan() && !t.is_nan()))
}

/// Root mean squared difference over pairs selected by `mask`. Pairs with
/// a missing (`NaN`) member are skipped.
pub fn rmse(pred: &[f64], truth: &[f64], mask: Option<&[bool]>) -> Result<f64> {
    let (mut ss, mut n) = (0.0, 0usize);
    for (p, t) in paired(pred, truth, mask)? {
        ss += (p - t) * (p - t);
        n += 1;
    }
    if n == 0 {
        return Err(AoaError::invalid("RMSE over an empty selection"));
    }
    Ok((ss / n as f64).sqrt())
}

/// Pearson correlation over non-missing pairs.
pub fn pearson_r(pred: &[f64], truth: &[f64]) -> Result<f64> {
    let (a, b): (Vec<f64>, Vec<f64>) = paired(pred, truth, None)?.unzip();
    if a.len() < 2 {
        return Err(AoaError::invalid("correlation needs at least 2 pairs"));
    }
    crate::stats::pearson(&a, &b).ok_or_else(|| AoaError::degenerate("correlation undefined: zero variance"))
}

/// Squared Pearson correlation.
pub fn r_squared(pred: &[f64], truth: &[f64]) -> Result<f64> {
    pearson_r(pred, truth).map(|r| r * r)
}
