//! Out-of-bag permutation importance.

use log::warn;
use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::TrainedForest;
use crate::error::{AoaError, Result};
use crate::predictor_space::ImportanceWeights;
use crate::rng::{derived_rng, stream};
use crate::samples::SampleTable;

/// Raw mean increase in out-of-bag MSE per predictor. Values can be
/// negative for irrelevant predictors.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PermutationImportance {
    pub names: Vec<String>,
    pub values: Vec<f64>,
    /// Trees that contributed (those with a nonempty out-of-bag set).
    pub n_trees_used: usize,
}

impl PermutationImportance {
    /// Distance weights; negative importances are clamped to zero.
    pub fn to_weights(&self) -> Result<ImportanceWeights> {
        ImportanceWeights::from_raw_importance(self.names.clone(), &self.values)
    }
}

/// For each predictor, the mean over trees of the out-of-bag MSE after
/// permuting that predictor among the tree's out-of-bag rows, minus the
/// unpermuted out-of-bag MSE. `samples` must be the training table.
pub fn permutation_importance(
    forest: &TrainedForest,
    samples: &SampleTable,
    seed: u64,
) -> Result<PermutationImportance> {
    if samples.len() != forest.n_train() {
        return Err(AoaError::invalid(format!(
            "importance needs the {} training rows, got {}",
            forest.n_train(),
            samples.len()
        )));
    }
    let x = samples.predictors.select(forest.predictors())?;
    let y = &samples.response;
    let p = forest.predictors().len();

    let skipped = forest.trees().iter().filter(|t| t.oob.is_empty()).count();
    if skipped == forest.trees().len() {
        return Err(AoaError::degenerate(
            "no tree has out-of-bag rows; permutation importance is undefined",
        ));
    }
    if skipped > 0 {
        warn!("{skipped} tree(s) have no out-of-bag rows and are skipped for importance");
    }

    let per_tree: Vec<Option<Vec<f64>>> = forest
        .trees()
        .par_iter()
        .enumerate()
        .map(|(t, bt)| {
            if bt.oob.is_empty() {
                return None;
            }
            let oob = &bt.oob;
            let mse = |rows: &mut dyn Iterator<Item = (f64, f64)>| {
                let (mut ss, mut k) = (0.0, 0usize);
                for (pred, truth) in rows {
                    ss += (pred - truth) * (pred - truth);
                    k += 1;
                }
                ss / k as f64
            };
            let base = mse(&mut oob.iter().map(|&r| (bt.tree.predict_row(x.row(r)), y[r])));
            let mut row = vec![0.0; p];
            let increases = (0..p)
                .map(|j| {
                    let mut rng = derived_rng(seed, &[stream::IMPORTANCE, t as u64, j as u64]);
                    let mut shuffled: Vec<f64> = oob.iter().map(|&r| x.get(r, j)).collect();
                    shuffled.shuffle(&mut rng);
                    let permuted = mse(&mut oob.iter().zip(&shuffled).map(|(&r, &v)| {
                        row.copy_from_slice(x.row(r));
                        row[j] = v;
                        (bt.tree.predict_row(&row), y[r])
                    }));
                    permuted - base
                })
                .collect();
            Some(increases)
        })
        .collect();

    let used: Vec<&Vec<f64>> = per_tree.iter().flatten().collect();
    let values = (0..p)
        .map(|j| used.iter().map(|v| v[j]).sum::<f64>() / used.len() as f64)
        .collect();
    Ok(PermutationImportance {
        names: forest.predictors().to_vec(),
        values,
        n_trees_used: used.len(),
    })
}
