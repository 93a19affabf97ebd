//! Standardization, importance weighting and distances in predictor space,
//! and the dissimilarity index (DI) built on them.
//!
//! A point's DI is its Euclidean distance to the nearest training point in
//! the standardized, weighted predictor space, divided by the mean distance
//! over all unordered pairs of training points.

use log::warn;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{AoaError, Result};
use crate::grid::{Grid, PredictorStack};
use crate::matrix::Matrix;
use crate::samples::{PredictorMatrix, SampleTable};

/// Per-predictor training mean and sample standard deviation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StandardizationParams {
    names: Vec<String>,
    means: Vec<f64>,
    sds: Vec<f64>,
    dropped: Vec<String>,
}

impl StandardizationParams {
    /// Explicit parameters, e.g. restored from a saved model.
    pub fn new(names: Vec<String>, means: Vec<f64>, sds: Vec<f64>) -> Result<Self> {
        if names.is_empty() || names.len() != means.len() || names.len() != sds.len() {
            return Err(AoaError::invalid("standardization needs one mean and one sd per predictor"));
        }
        if let Some(j) = (0..names.len()).find(|&j| !means[j].is_finite() || !(sds[j] > 0.0 && sds[j].is_finite())) {
            return Err(AoaError::invalid(format!("bad mean/sd for predictor `{}`", names[j])));
        }
        Ok(StandardizationParams {
            names,
            means,
            sds,
            dropped: Vec::new(),
        })
    }

    /// Retained predictor names, in column order of standardized output.
    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn means(&self) -> &[f64] {
        &self.means
    }

    pub fn sds(&self) -> &[f64] {
        &self.sds
    }

    /// Zero-variance predictors excluded from distance computation.
    pub fn dropped(&self) -> &[String] {
        &self.dropped
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }

    /// Standardizes one raw row given in retained-name order. `NaN` stays
    /// `NaN`.
    #[inline]
    fn scale_into(&self, raw: &[f64], out: &mut [f64]) {
        for j in 0..self.names.len() {
            out[j] = (raw[j] - self.means[j]) / self.sds[j];
        }
    }
}

/// Fits means and sample standard deviations over the training rows.
/// Constant predictors are moved to the dropped list.
pub fn fit_standardizer<S: AsRef<str>>(
    training: &SampleTable,
    predictor_names: &[S],
) -> Result<StandardizationParams> {
    let n = training.len();
    if n < 2 {
        return Err(AoaError::invalid(format!(
            "standardization needs at least 2 training rows, got {n}"
        )));
    }
    let mut seen: Vec<&str> = Vec::new();
    for name in predictor_names {
        if seen.contains(&name.as_ref()) {
            return Err(AoaError::invalid(format!("duplicate predictor name `{}`", name.as_ref())));
        }
        seen.push(name.as_ref());
    }
    let idx = training.predictors.column_indices(predictor_names)?;
    let m = training.predictors.matrix();

    let mut params = StandardizationParams {
        names: Vec::new(),
        means: Vec::new(),
        sds: Vec::new(),
        dropped: Vec::new(),
    };
    for (name, &j) in predictor_names.iter().zip(&idx) {
        let col = m.column(j);
        if let Some(i) = col.iter().position(|v| !v.is_finite()) {
            return Err(AoaError::invalid(format!(
                "training row {i}: predictor `{}` is missing or non-finite",
                name.as_ref()
            )));
        }
        let mean = crate::stats::mean(&col);
        let sd = crate::stats::sample_sd(&col).unwrap_or(0.0);
        if sd > 0.0 {
            params.names.push(name.as_ref().to_string());
            params.means.push(mean);
            params.sds.push(sd);
        } else {
            warn!("predictor `{}` has zero variance in the training data; dropped", name.as_ref());
            params.dropped.push(name.as_ref().to_string());
        }
    }
    if params.names.is_empty() {
        return Err(AoaError::degenerate("all predictors have zero variance"));
    }
    Ok(params)
}

/// Applies training means and sds to new points. Output columns follow
/// `params.names()`; dropped predictors are excluded. `NaN` marks a missing
/// value and propagates; infinities are rejected.
pub fn standardize(points: &PredictorMatrix, params: &StandardizationParams) -> Result<PredictorMatrix> {
    let idx = points.column_indices(params.names())?;
    let raw = points.matrix();
    let p = params.len();
    let mut out = Matrix::zeros(raw.nrows(), p);
    let mut buf = vec![0.0; p];
    for i in 0..raw.nrows() {
        let row = raw.row(i);
        for (k, &j) in idx.iter().enumerate() {
            let v = row[j];
            if v.is_infinite() {
                return Err(AoaError::invalid(format!(
                    "row {i}: predictor `{}` is infinite",
                    params.names[k]
                )));
            }
            buf[k] = v;
        }
        params.scale_into(&buf, out.row_mut(i));
    }
    PredictorMatrix::new(params.names.clone(), out)
}

/// Nonnegative per-predictor weights, keyed by predictor name.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImportanceWeights {
    names: Vec<String>,
    values: Vec<f64>,
}

impl ImportanceWeights {
    pub fn new(names: Vec<String>, values: Vec<f64>) -> Result<Self> {
        if names.len() != values.len() {
            return Err(AoaError::invalid(format!(
                "{} weight names for {} values",
                names.len(),
                values.len()
            )));
        }
        for (i, n) in names.iter().enumerate() {
            if names[..i].contains(n) {
                return Err(AoaError::invalid(format!("duplicate weight for `{n}`")));
            }
        }
        if let Some((n, v)) = names.iter().zip(&values).find(|(_, v)| !v.is_finite() || **v < 0.0) {
            return Err(AoaError::invalid(format!(
                "weight for `{n}` is {v}; weights must be finite and nonnegative"
            )));
        }
        if !values.iter().any(|&v| v > 0.0) {
            return Err(AoaError::degenerate("all importance weights are zero"));
        }
        Ok(ImportanceWeights { names, values })
    }

    /// Weight 1 for every predictor.
    pub fn uniform(names: &[String]) -> Self {
        ImportanceWeights {
            names: names.to_vec(),
            values: vec![1.0; names.len()],
        }
    }

    /// Builds weights from raw importance estimates, clamping negative
    /// values to zero with a warning.
    pub fn from_raw_importance(names: Vec<String>, raw: &[f64]) -> Result<Self> {
        let values = names
            .iter()
            .zip(raw)
            .map(|(n, &v)| {
                if v < 0.0 {
                    warn!("negative importance {v:.4} for `{n}` clamped to 0");
                    0.0
                } else {
                    v
                }
            })
            .collect();
        ImportanceWeights::new(names, values)
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn get(&self, name: &str) -> Option<f64> {
        self.names.iter().position(|n| n == name).map(|i| self.values[i])
    }

    /// Every weight multiplied by `factor` (> 0).
    pub fn scaled(&self, factor: f64) -> Result<Self> {
        ImportanceWeights::new(self.names.clone(), self.values.iter().map(|v| v * factor).collect())
    }

    /// Weights in the order of `names`.
    pub fn aligned<S: AsRef<str>>(&self, names: &[S]) -> Result<Vec<f64>> {
        names
            .iter()
            .map(|n| {
                self.get(n.as_ref()).ok_or_else(|| {
                    AoaError::invalid(format!("no importance weight for predictor `{}`", n.as_ref()))
                })
            })
            .collect()
    }
}

/// Standardized, weighted training points with optional dense fold ids.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightedPointSet {
    names: Vec<String>,
    points: Matrix,
    folds: Option<Vec<usize>>,
}

impl WeightedPointSet {
    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn points(&self) -> &Matrix {
        &self.points
    }

    pub fn folds(&self) -> Option<&[usize]> {
        self.folds.as_deref()
    }

    pub fn len(&self) -> usize {
        self.points.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.points.nrows() == 0
    }

    pub fn with_folds(mut self, folds: Vec<usize>) -> Result<Self> {
        if folds.len() != self.len() {
            return Err(AoaError::Fold(format!(
                "{} fold ids for {} training points",
                folds.len(),
                self.len()
            )));
        }
        self.folds = Some(folds);
        Ok(self)
    }
}

/// Multiplies each standardized column by its weight. Columns are matched
/// by name; zero-weight columns are kept.
pub fn apply_weights(scaled: &PredictorMatrix, weights: &ImportanceWeights) -> Result<WeightedPointSet> {
    let w = weights.aligned(scaled.names())?;
    let mut points = scaled.matrix().clone();
    for i in 0..points.nrows() {
        let row = points.row_mut(i);
        if row.iter().any(|v| !v.is_finite()) {
            return Err(AoaError::invalid(format!("weighted point {i} has a missing value")));
        }
        for (v, wj) in row.iter_mut().zip(&w) {
            *v *= wj;
        }
    }
    Ok(WeightedPointSet {
        names: scaled.names().to_vec(),
        points,
        folds: None,
    })
}

#[inline]
pub(crate) fn squared_distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Euclidean distance between two weighted points.
#[inline]
pub fn euclidean(a: &[f64], b: &[f64]) -> f64 {
    squared_distance(a, b).sqrt()
}

/// Mean Euclidean distance over all unordered pairs of training points.
pub fn pairwise_mean_distance(training: &WeightedPointSet) -> Result<f64> {
    let n = training.len();
    if n < 2 {
        return Err(AoaError::invalid(format!(
            "mean pairwise distance needs at least 2 points, got {n}"
        )));
    }
    let pts = &training.points;
    let row_sums: Vec<f64> = (0..n - 1)
        .into_par_iter()
        .map(|i| {
            let a = pts.row(i);
            ((i + 1)..n).map(|j| euclidean(a, pts.row(j))).sum::<f64>()
        })
        .collect();
    let total: f64 = row_sums.iter().sum();
    let mean = total / (n * (n - 1) / 2) as f64;
    if mean == 0.0 {
        return Err(AoaError::degenerate(
            "all training points coincide in weighted predictor space; DI is undefined",
        ));
    }
    Ok(mean)
}

/// Distance from `query` to the nearest training point, skipping points in
/// `excluded_fold` when given.
pub fn nearest_training_distance(
    query: &[f64],
    training: &WeightedPointSet,
    excluded_fold: Option<usize>,
) -> Result<f64> {
    if query.len() != training.points.ncols() {
        return Err(AoaError::invalid(format!(
            "query has {} values, training space has {} dimensions",
            query.len(),
            training.points.ncols()
        )));
    }
    let best = match (excluded_fold, training.folds.as_deref()) {
        (Some(fold), Some(folds)) => nearest_squared(query, &training.points, |i| folds[i] != fold),
        (Some(_), None) => {
            return Err(AoaError::Fold(
                "fold exclusion requested but training points carry no folds".into(),
            ))
        }
        (None, _) => nearest_squared(query, &training.points, |_| true),
    };
    best.map(f64::sqrt).ok_or_else(|| {
        AoaError::Fold(format!(
            "no training point left after excluding fold {}",
            excluded_fold.unwrap_or_default()
        ))
    })
}

#[inline]
fn nearest_squared(query: &[f64], points: &Matrix, eligible: impl Fn(usize) -> bool) -> Option<f64> {
    let mut best: Option<f64> = None;
    for i in 0..points.nrows() {
        if !eligible(i) {
            continue;
        }
        let d = squared_distance(query, points.row(i));
        if best.is_none_or(|b| d < b) {
            best = Some(d);
        }
    }
    best
}

/// Everything needed to compute DI for new points: training standardization,
/// aligned weights, the weighted training set and the mean pairwise distance.
#[derive(Debug, Clone)]
pub struct DissimilarityModel {
    params: StandardizationParams,
    weights: Vec<f64>,
    training: WeightedPointSet,
    mean_distance: f64,
}

impl DissimilarityModel {
    /// Fits the standardizer on `training` for the given predictors and
    /// weights the scaled training points.
    pub fn fit<S: AsRef<str>>(
        training: &SampleTable,
        predictor_names: &[S],
        weights: &ImportanceWeights,
    ) -> Result<Self> {
        let params = fit_standardizer(training, predictor_names)?;
        DissimilarityModel::with_params(training, params, weights)
    }

    pub fn with_params(
        training: &SampleTable,
        params: StandardizationParams,
        weights: &ImportanceWeights,
    ) -> Result<Self> {
        training.ensure_complete()?;
        let scaled = standardize(&training.predictors, &params)?;
        let set = apply_weights(&scaled, weights)?;
        let mean_distance = pairwise_mean_distance(&set)?;
        let w = weights.aligned(params.names())?;
        Ok(DissimilarityModel {
            params,
            weights: w,
            training: set,
            mean_distance,
        })
    }

    pub fn params(&self) -> &StandardizationParams {
        &self.params
    }

    /// Weights aligned with `params().names()`.
    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn training(&self) -> &WeightedPointSet {
        &self.training
    }

    pub fn mean_distance(&self) -> f64 {
        self.mean_distance
    }

    /// Attaches dense fold ids to the training points for fold exclusion.
    pub fn with_folds(mut self, folds: Vec<usize>) -> Result<Self> {
        self.training = self.training.with_folds(folds)?;
        Ok(self)
    }

    /// Standardizes and weights one raw row given in `params().names()`
    /// order.
    pub fn project(&self, raw: &[f64], out: &mut [f64]) {
        self.params.scale_into(raw, out);
        for (v, w) in out.iter_mut().zip(&self.weights) {
            *v *= w;
        }
    }

    /// DI for a raw row (retained-name order). Missing input gives `NaN`.
    pub fn di_raw(&self, raw: &[f64], excluded_fold: Option<usize>) -> Result<f64> {
        if raw.iter().any(|v| v.is_nan()) {
            return Ok(f64::NAN);
        }
        let mut q = vec![0.0; raw.len()];
        self.project(raw, &mut q);
        Ok(nearest_training_distance(&q, &self.training, excluded_fold)? / self.mean_distance)
    }

    /// DI for each row of `queries`; `excluded_fold_per_query` optionally
    /// names a training fold to skip per query.
    pub fn di(&self, queries: &PredictorMatrix, excluded_fold_per_query: Option<&[Option<usize>]>) -> Result<Vec<f64>> {
        let idx = queries.column_indices(self.params.names())?;
        let raw = queries.matrix();
        if let Some(ex) = excluded_fold_per_query {
            if ex.len() != raw.nrows() {
                return Err(AoaError::invalid(format!(
                    "{} fold exclusions for {} queries",
                    ex.len(),
                    raw.nrows()
                )));
            }
        }
        (0..raw.nrows())
            .into_par_iter()
            .map(|i| {
                let row = raw.row(i);
                let vals: Vec<f64> = idx.iter().map(|&j| row[j]).collect();
                if let Some(v) = vals.iter().find(|v| v.is_infinite()) {
                    return Err(AoaError::invalid(format!("query {i} has non-finite value {v}")));
                }
                self.di_raw(&vals, excluded_fold_per_query.and_then(|e| e[i]))
            })
            .collect()
    }

    /// DI for every cell of a predictor stack. Missing cells stay missing.
    pub fn di_grid(&self, stack: &PredictorStack) -> Result<Grid> {
        let layers: Vec<&Grid> = self
            .params
            .names()
            .iter()
            .map(|n| stack.layer(n))
            .collect::<Result<_>>()?;
        let geometry = *stack.geometry();
        let values = (0..geometry.len())
            .into_par_iter()
            .map(|c| {
                if stack.is_missing(c) {
                    return Ok(f64::NAN);
                }
                let vals: Vec<f64> = layers.iter().map(|l| l.values[c]).collect();
                self.di_raw(&vals, None)
            })
            .collect::<Result<Vec<f64>>>()?;
        Grid::new(geometry, values)
    }
}

/// DI of each query row against `training`.
pub fn dissimilarity_index(
    queries: &PredictorMatrix,
    training: &SampleTable,
    params: &StandardizationParams,
    weights: &ImportanceWeights,
    excluded_fold_per_query: Option<(&[usize], &[Option<usize>])>,
) -> Result<Vec<f64>> {
    let mut model = DissimilarityModel::with_params(training, params.clone(), weights)?;
    let excl = match excluded_fold_per_query {
        Some((training_folds, per_query)) => {
            model = model.with_folds(training_folds.to_vec())?;
            Some(per_query)
        }
        None => None,
    };
    model.di(queries, excl)
}

/// DI for every cell of a predictor stack.
pub fn di_grid(
    stack: &PredictorStack,
    training: &SampleTable,
    params: &StandardizationParams,
    weights: &ImportanceWeights,
) -> Result<Grid> {
    DissimilarityModel::with_params(training, params.clone(), weights)?.di_grid(stack)
}
