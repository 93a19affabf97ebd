//! One truth-known prediction task, end to end.

use serde::{Deserialize, Serialize};

use super::fields::{generate_predictor_stack, FieldSpec};
use super::pca::pca_first_two;
use super::response::{gaussian_response, Combination, ResponseSpec};
use super::sampling::{sample_clustered, sample_random};
use crate::aoa::{aoa_mask, calibrate_quantiles, training_di_with_model, AoaMask, CalibrationInput, CalibrationRow, TrainingDi};
use crate::error::{AoaError, Result};
use crate::forest::{permutation_importance, train_forest, tune_mtry, ForestConfig, MtryTuning, PermutationImportance, TrainedForest};
use crate::grid::{Grid, PredictorStack};
use crate::predictor_space::{DissimilarityModel, ImportanceWeights};
use crate::rng::{derive_seed, stream};
use crate::samples::SampleTable;
use crate::stats;
use crate::validation::{assign_cluster_folds, assign_random_folds, CvReport, FoldAssignment};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "design", rename_all = "snake_case")]
pub enum SamplingDesign {
    Random {
        n: usize,
    },
    Clustered {
        n_clusters: usize,
        per_cluster: usize,
        radius: f64,
    },
}

impl SamplingDesign {
    pub fn n_samples(&self) -> usize {
        match *self {
            SamplingDesign::Random { n } => n,
            SamplingDesign::Clustered {
                n_clusters,
                per_cluster,
                ..
            } => n_clusters * per_cluster,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "cv", rename_all = "snake_case")]
pub enum CvStrategy {
    RandomK { k: usize },
    LeaveClusterOut,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioSpec {
    pub id: String,
    pub field: FieldSpec,
    pub response: ResponseSpec,
    pub combination: Combination,
    pub design: SamplingDesign,
    pub cv: CvStrategy,
    /// Tree count and node size; the seed is derived from `seed`.
    pub forest: ForestConfig,
    pub mtry_grid: Vec<usize>,
    pub quantiles: Vec<f64>,
    /// Replicate seed driving sampling, folds, forest and importance.
    pub seed: u64,
    /// Adds the true response as an extra predictor (leakage check).
    #[serde(default)]
    pub leak_response: bool,
}

/// Seeds used by each random step, echoed for auditability.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScenarioSeeds {
    pub field: u64,
    pub sample: u64,
    pub folds: u64,
    pub forest: u64,
    pub importance: u64,
}

impl ScenarioSpec {
    pub fn seeds(&self) -> ScenarioSeeds {
        ScenarioSeeds {
            field: self.field.seed,
            sample: derive_seed(self.seed, &[stream::SAMPLE]),
            folds: derive_seed(self.seed, &[stream::FOLDS]),
            forest: derive_seed(self.seed, &[stream::FOREST]),
            importance: derive_seed(self.seed, &[stream::IMPORTANCE]),
        }
    }
}

#[derive(Debug, Clone)]
pub struct ScenarioResult {
    pub id: String,
    pub seeds: ScenarioSeeds,
    pub stack: PredictorStack,
    pub truth: Grid,
    pub prediction: Grid,
    /// DI with importance weights.
    pub di: Grid,
    /// DI with uniform weights, for comparison.
    pub di_uniform: Grid,
    pub samples: SampleTable,
    pub folds: FoldAssignment,
    pub training_di: TrainingDi,
    pub cv: CvReport,
    pub tuning: MtryTuning,
    pub importance: PermutationImportance,
    pub weights: ImportanceWeights,
    pub forest: TrainedForest,
    /// AOA statistics per requested quantile.
    pub aoa: Vec<CalibrationRow>,
}

impl ScenarioResult {
    /// Prediction minus truth per cell.
    pub fn errors(&self) -> Vec<f64> {
        self.prediction
            .values
            .iter()
            .zip(&self.truth.values)
            .map(|(p, t)| p - t)
            .collect()
    }

    pub fn calibration_input(&self) -> CalibrationInput {
        CalibrationInput {
            scenario_id: self.id.clone(),
            cv_rmse: self.cv.rmse,
            errors: self.errors(),
            di: self.di.values.clone(),
            training_di: self.training_di.di.clone(),
        }
    }

    pub fn aoa_stats(&self, quantile: f64) -> Option<&CalibrationRow> {
        self.aoa.iter().find(|r| r.quantile == quantile)
    }

    pub fn aoa_mask(&self, quantile: f64) -> Result<AoaMask> {
        let t = self.training_di.threshold(quantile)?;
        Ok(aoa_mask(&self.di, t)?.with_quantile(quantile))
    }

    /// Pearson correlation between DI and the absolute prediction error.
    pub fn di_error_correlation(&self, uniform: bool) -> Option<f64> {
        let di = if uniform { &self.di_uniform } else { &self.di };
        let (a, b): (Vec<f64>, Vec<f64>) = di
            .values
            .iter()
            .zip(self.errors())
            .filter(|(d, e)| !d.is_nan() && !e.is_nan())
            .map(|(&d, e)| (d, e.abs()))
            .unzip();
        stats::pearson(&a, &b)
    }
}

pub fn run_scenario(spec: &ScenarioSpec) -> Result<ScenarioResult> {
    run_inner(spec).map_err(|e| AoaError::Scenario {
        id: spec.id.clone(),
        source: Box::new(e),
    })
}

fn run_inner(spec: &ScenarioSpec) -> Result<ScenarioResult> {
    let seeds = spec.seeds();
    let mut stack = generate_predictor_stack(&spec.field)?;
    spec.response.validate(stack.len())?;
    let pca = pca_first_two(&stack, &spec.response.subset)?;
    let truth = gaussian_response(&pca.pc1, &pca.pc2, &spec.response, spec.combination)?;
    if spec.leak_response {
        stack.push("response".to_string(), truth.clone())?;
    }

    let samples = match spec.design {
        SamplingDesign::Random { n } => sample_random(&stack, &truth, n, spec.seed)?,
        SamplingDesign::Clustered {
            n_clusters,
            per_cluster,
            radius,
        } => sample_clustered(&stack, &truth, n_clusters, per_cluster, radius, spec.seed)?,
    };

    let folds = match spec.cv {
        CvStrategy::RandomK { k } => assign_random_folds(samples.len(), k.min(samples.len()), seeds.folds)?,
        CvStrategy::LeaveClusterOut => {
            let clusters = samples
                .cluster
                .as_ref()
                .ok_or_else(|| AoaError::invalid("leave-cluster-out CV needs a clustered design"))?;
            assign_cluster_folds(clusters)?
        }
    };

    let p = stack.len();
    let grid: Vec<usize> = spec.mtry_grid.iter().copied().filter(|&m| m >= 1 && m <= p).collect();
    let config = spec.forest.clone().with_seed(seeds.forest);
    let (tuning, cv) = tune_mtry(&samples, &grid, &folds, &config)?;
    let mut forest = train_forest(&samples, &config.with_mtry(tuning.best_mtry))?;
    forest.set_tuning(tuning.clone());

    let importance = permutation_importance(&forest, &samples, seeds.importance)?;
    let weights = importance.to_weights()?;
    let prediction = forest.predict_stack(&stack)?;

    let names = stack.names().to_vec();
    let model = DissimilarityModel::fit(&samples, &names, &weights)?;
    let di = model.di_grid(&stack)?;
    let training_di = training_di_with_model(&model, &folds, &spec.quantiles)?;
    let uniform = DissimilarityModel::with_params(&samples, model.params().clone(), &ImportanceWeights::uniform(&names))?;
    let di_uniform = uniform.di_grid(&stack)?;

    let errors: Vec<f64> = prediction.values.iter().zip(&truth.values).map(|(p, t)| p - t).collect();
    let aoa = calibrate_quantiles(
        &[CalibrationInput {
            scenario_id: spec.id.clone(),
            cv_rmse: cv.rmse,
            errors,
            di: di.values.clone(),
            training_di: training_di.di.clone(),
        }],
        &spec.quantiles,
    )?
    .rows;

    Ok(ScenarioResult {
        id: spec.id.clone(),
        seeds,
        stack,
        truth,
        prediction,
        di,
        di_uniform,
        samples,
        folds,
        training_di,
        cv,
        tuning,
        importance,
        weights,
        forest,
        aoa,
    })
}
