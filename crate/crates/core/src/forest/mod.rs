//! Random forest regression: bootstrap-bagged CART trees with a random
//! subset of `mtry` candidate predictors per split.

mod importance;
mod tree;
mod tuning;

pub use importance::{permutation_importance, PermutationImportance};
pub use tree::{Node, RegressionTree};
pub use tuning::{tune_mtry, MtryRecord, MtryTuning};

use log::warn;
use rand::Rng as _;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{AoaError, Result};
use crate::grid::{Grid, PredictorStack};
use crate::matrix::Matrix;
use crate::rng::{derived_rng, stream};
use crate::samples::{PredictorMatrix, SampleTable};
use tree::{TrainingData, TreeParams};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForestConfig {
    pub n_trees: usize,
    /// Candidate predictors per split. `None` means `max(1, p / 3)`.
    pub mtry: Option<usize>,
    pub min_node_size: usize,
    pub seed: u64,
    /// Draw a bootstrap sample per tree. Disabling it grows every tree on
    /// all rows and leaves the out-of-bag sets empty.
    pub bootstrap: bool,
}

impl Default for ForestConfig {
    fn default() -> Self {
        ForestConfig {
            n_trees: 500,
            mtry: None,
            min_node_size: 5,
            seed: 0,
            bootstrap: true,
        }
    }
}

impl ForestConfig {
    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn with_mtry(mut self, mtry: usize) -> Self {
        self.mtry = Some(mtry);
        self
    }

    pub fn with_trees(mut self, n_trees: usize) -> Self {
        self.n_trees = n_trees;
        self
    }

    pub fn resolved_mtry(&self, p: usize) -> usize {
        self.mtry.unwrap_or((p / 3).max(1))
    }

    pub fn validate(&self, p: usize) -> Result<()> {
        if self.n_trees == 0 {
            return Err(AoaError::invalid("forest needs at least one tree"));
        }
        if self.min_node_size == 0 {
            return Err(AoaError::invalid("min_node_size must be at least 1"));
        }
        let mtry = self.resolved_mtry(p);
        if mtry == 0 || mtry > p {
            return Err(AoaError::invalid(format!("mtry must lie in [1, {p}], got {mtry}")));
        }
        Ok(())
    }
}

/// One tree with the rows it was grown on.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BaggedTree {
    pub tree: RegressionTree,
    /// Bootstrap draws, sorted (a multiset of training row indices).
    pub in_bag: Vec<usize>,
    /// Training rows never drawn for this tree.
    pub oob: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainedForest {
    predictors: Vec<String>,
    config: ForestConfig,
    mtry: usize,
    n_train: usize,
    trees: Vec<BaggedTree>,
    #[serde(default)]
    tuning: Option<MtryTuning>,
}

/// Trains a forest on every predictor column of `samples`.
pub fn train_forest(samples: &SampleTable, config: &ForestConfig) -> Result<TrainedForest> {
    let n = samples.len();
    let p = samples.predictors.names().len();
    if p == 0 {
        return Err(AoaError::invalid("forest needs at least one predictor"));
    }
    config.validate(p)?;
    if n == 0 || n < config.min_node_size {
        return Err(AoaError::invalid(format!(
            "forest needs at least min_node_size = {} rows, got {n}",
            config.min_node_size
        )));
    }
    samples.ensure_complete()?;
    let first = samples.response[0];
    if samples.response.iter().all(|&v| v == first) {
        warn!("response is constant ({first}); every tree is a single leaf");
    }

    let columns: Vec<Vec<f64>> = (0..p).map(|j| samples.predictors.matrix().column(j)).collect();
    let data = TrainingData::new(&columns, &samples.response);
    let mtry = config.resolved_mtry(p);
    let params = TreeParams {
        mtry,
        min_node_size: config.min_node_size,
    };

    let trees: Vec<BaggedTree> = (0..config.n_trees)
        .into_par_iter()
        .map(|t| {
            let mut rng = derived_rng(config.seed, &[stream::TREE, t as u64]);
            let rows: Vec<usize> = if config.bootstrap {
                (0..n).map(|_| rng.random_range(0..n)).collect()
            } else {
                (0..n).collect()
            };
            let mut in_bag = rows.clone();
            in_bag.sort_unstable();
            let mut drawn = vec![false; n];
            for &r in &in_bag {
                drawn[r] = true;
            }
            let oob = (0..n).filter(|&r| !drawn[r]).collect();
            let tree = tree::grow(&data, rows, &params, &mut rng);
            BaggedTree { tree, in_bag, oob }
        })
        .collect();

    Ok(TrainedForest {
        predictors: samples.predictors.names().to_vec(),
        config: config.clone(),
        mtry,
        n_train: n,
        trees,
        tuning: None,
    })
}

impl TrainedForest {
    pub fn predictors(&self) -> &[String] {
        &self.predictors
    }

    pub fn config(&self) -> &ForestConfig {
        &self.config
    }

    pub fn mtry(&self) -> usize {
        self.mtry
    }

    pub fn n_train(&self) -> usize {
        self.n_train
    }

    pub fn trees(&self) -> &[BaggedTree] {
        &self.trees
    }

    pub fn tuning(&self) -> Option<&MtryTuning> {
        self.tuning.as_ref()
    }

    pub fn set_tuning(&mut self, tuning: MtryTuning) {
        self.tuning = Some(tuning);
    }

    /// Checks the structural invariants a deserialized forest must satisfy.
    pub fn validate(&self) -> Result<()> {
        let p = self.predictors.len();
        if self.trees.is_empty() {
            return Err(AoaError::invalid("forest has no trees"));
        }
        for (t, bt) in self.trees.iter().enumerate() {
            let nodes = bt.tree.nodes();
            if nodes.is_empty() {
                return Err(AoaError::invalid(format!("tree {t} has no nodes")));
            }
            for node in nodes {
                if let Node::Split {
                    feature, left, right, ..
                } = *node
                {
                    if feature >= p || left >= nodes.len() || right >= nodes.len() {
                        return Err(AoaError::invalid(format!("tree {t} has an out-of-range split")));
                    }
                }
            }
            if bt.in_bag.iter().chain(&bt.oob).any(|&r| r >= self.n_train) {
                return Err(AoaError::invalid(format!("tree {t} references rows beyond n_train")));
            }
        }
        Ok(())
    }

    fn aligned(&self, points: &PredictorMatrix) -> Result<Matrix> {
        if points.names() == self.predictors.as_slice() {
            Ok(points.matrix().clone())
        } else {
            points.select(&self.predictors)
        }
    }

    /// Per-tree predictions for rows already in training column order,
    /// as a `rows x n_trees` matrix.
    pub fn tree_predictions_aligned(&self, points: &Matrix) -> Result<Matrix> {
        if points.ncols() != self.predictors.len() {
            return Err(AoaError::invalid(format!(
                "points have {} columns, forest expects {}",
                points.ncols(),
                self.predictors.len()
            )));
        }
        let t = self.trees.len();
        let rows: Vec<Vec<f64>> = (0..points.nrows())
            .into_par_iter()
            .map(|i| {
                let row = points.row(i);
                self.trees.iter().map(|bt| bt.tree.predict_row(row)).collect()
            })
            .collect();
        let mut out = Matrix::zeros(points.nrows(), t);
        for (i, r) in rows.iter().enumerate() {
            out.row_mut(i).copy_from_slice(r);
        }
        Ok(out)
    }

    /// Per-tree predictions (`rows x n_trees`), with columns matched by name.
    pub fn tree_predictions(&self, points: &PredictorMatrix) -> Result<Matrix> {
        self.tree_predictions_aligned(&self.aligned(points)?)
    }

    pub fn predict_aligned(&self, points: &Matrix) -> Result<Vec<f64>> {
        if points.ncols() != self.predictors.len() {
            return Err(AoaError::invalid(format!(
                "points have {} columns, forest expects {}",
                points.ncols(),
                self.predictors.len()
            )));
        }
        let t = self.trees.len() as f64;
        Ok((0..points.nrows())
            .into_par_iter()
            .map(|i| {
                let row = points.row(i);
                self.trees.iter().map(|bt| bt.tree.predict_row(row)).sum::<f64>() / t
            })
            .collect())
    }

    /// Ensemble mean prediction per row.
    pub fn predict(&self, points: &PredictorMatrix) -> Result<Vec<f64>> {
        self.predict_aligned(&self.aligned(points)?)
    }

    /// Sample standard deviation (n - 1) of the per-tree predictions.
    pub fn ensemble_sd(&self, points: &PredictorMatrix) -> Result<Vec<f64>> {
        if self.trees.len() < 2 {
            return Err(AoaError::invalid("ensemble sd needs at least 2 trees"));
        }
        let aligned = self.aligned(points)?;
        Ok((0..aligned.nrows())
            .into_par_iter()
            .map(|i| {
                let row = aligned.row(i);
                let preds: Vec<f64> = self.trees.iter().map(|bt| bt.tree.predict_row(row)).collect();
                crate::stats::sample_sd(&preds).expect("at least two trees")
            })
            .collect())
    }

    /// Predictions for every cell of a stack; missing cells stay missing.
    pub fn predict_stack(&self, stack: &PredictorStack) -> Result<Grid> {
        let m = stack.to_matrix();
        let aligned = self.aligned(&m)?;
        let mut values = self.predict_aligned(&aligned)?;
        for (i, v) in values.iter_mut().enumerate() {
            if aligned.row(i).iter().any(|x| x.is_nan()) {
                *v = f64::NAN;
            }
        }
        Grid::new(*stack.geometry(), values)
    }

    /// Ensemble standard deviation for every cell of a stack.
    pub fn ensemble_sd_stack(&self, stack: &PredictorStack) -> Result<Grid> {
        let m = stack.to_matrix();
        let mut values = self.ensemble_sd(&m)?;
        for (i, v) in values.iter_mut().enumerate() {
            if stack.is_missing(i) {
                *v = f64::NAN;
            }
        }
        Grid::new(*stack.geometry(), values)
    }
}

/// Convenience wrapper for [`TrainedForest::predict`].
pub fn predict(forest: &TrainedForest, points: &PredictorMatrix) -> Result<Vec<f64>> {
    forest.predict(points)
}

/// Convenience wrapper for [`TrainedForest::ensemble_sd`].
pub fn ensemble_sd(forest: &TrainedForest, points: &PredictorMatrix) -> Result<Vec<f64>> {
    forest.ensemble_sd(points)
}
