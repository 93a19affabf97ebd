//! Area of applicability: fold-aware training DI, quantile thresholds,
//! masks and the threshold-calibration sweep.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{AoaError, Result};
use crate::grid::{Grid, GridGeometry};
use crate::predictor_space::{
    nearest_training_distance, DissimilarityModel, ImportanceWeights, StandardizationParams,
};
use crate::samples::SampleTable;
use crate::stats;
use crate::validation::FoldAssignment;

pub const DEFAULT_QUANTILE: f64 = 0.95;

/// Candidate thresholds evaluated by the calibration sweep.
pub const CALIBRATION_QUANTILES: [f64; 6] = [0.25, 0.50, 0.90, 0.95, 0.99, 1.0];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainingDi {
    /// DI of each training point against points of other folds.
    pub di: Vec<f64>,
    pub folds: FoldAssignment,
    pub mean_distance: f64,
    /// (quantile, threshold) pairs, sorted by quantile.
    pub thresholds: Vec<(f64, f64)>,
}

impl TrainingDi {
    pub fn threshold(&self, quantile: f64) -> Result<f64> {
        di_threshold(self, quantile)
    }
}

/// DI of each training point, measured to the nearest training point in a
/// different fold. The normalizer is the all-pairs mean distance.
pub fn training_di_with_model(model: &DissimilarityModel, folds: &FoldAssignment, quantiles: &[f64]) -> Result<TrainingDi> {
    let n = model.training().len();
    if folds.len() != n {
        return Err(AoaError::Fold(format!("{} fold ids for {n} training points", folds.len())));
    }
    if folds.n_folds() < 2 {
        return Err(AoaError::Fold("fold-aware DI needs at least 2 folds".into()));
    }
    let set = model.training().clone().with_folds(folds.folds().to_vec())?;
    let d_mean = model.mean_distance();
    let di = (0..n)
        .into_par_iter()
        .map(|i| {
            let fold = folds.folds()[i];
            Ok(nearest_training_distance(set.points().row(i), &set, Some(fold))? / d_mean)
        })
        .collect::<Result<Vec<f64>>>()?;

    let mut result = TrainingDi {
        di,
        folds: folds.clone(),
        mean_distance: d_mean,
        thresholds: Vec::new(),
    };
    let mut qs = quantiles.to_vec();
    qs.sort_by(f64::total_cmp);
    qs.dedup();
    for q in qs {
        let t = di_threshold(&result, q)?;
        result.thresholds.push((q, t));
    }
    Ok(result)
}

pub fn training_di(
    training: &SampleTable,
    folds: &FoldAssignment,
    params: &StandardizationParams,
    weights: &ImportanceWeights,
    quantiles: &[f64],
) -> Result<TrainingDi> {
    let model = DissimilarityModel::with_params(training, params.clone(), weights)?;
    training_di_with_model(&model, folds, quantiles)
}

/// Threshold as the `quantile` of the training DI (linear interpolation
/// between order statistics; `1.0` gives the maximum).
pub fn di_threshold(result: &TrainingDi, quantile: f64) -> Result<f64> {
    threshold_from_values(&result.di, quantile)
}

pub fn threshold_from_values(training_di: &[f64], quantile: f64) -> Result<f64> {
    if !(quantile > 0.0 && quantile <= 1.0) {
        return Err(AoaError::invalid(format!("quantile must lie in (0, 1], got {quantile}")));
    }
    stats::quantile(training_di, quantile)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum MaskCell {
    Inside,
    Outside,
    Missing,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct MaskCounts {
    pub inside: usize,
    pub outside: usize,
    pub missing: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AoaMask {
    pub geometry: GridGeometry,
    pub cells: Vec<MaskCell>,
    pub threshold: f64,
    pub quantile: Option<f64>,
}

impl AoaMask {
    pub fn counts(&self) -> MaskCounts {
        let mut c = MaskCounts::default();
        for cell in &self.cells {
            match cell {
                MaskCell::Inside => c.inside += 1,
                MaskCell::Outside => c.outside += 1,
                MaskCell::Missing => c.missing += 1,
            }
        }
        c
    }

    pub fn inside(&self) -> Vec<bool> {
        self.cells.iter().map(|c| *c == MaskCell::Inside).collect()
    }

    pub fn outside(&self) -> Vec<bool> {
        self.cells.iter().map(|c| *c == MaskCell::Outside).collect()
    }

    /// 1 inside, 0 outside, `NaN` missing.
    pub fn to_grid(&self) -> Grid {
        Grid {
            geometry: self.geometry,
            values: self
                .cells
                .iter()
                .map(|c| match c {
                    MaskCell::Inside => 1.0,
                    MaskCell::Outside => 0.0,
                    MaskCell::Missing => f64::NAN,
                })
                .collect(),
        }
    }

    /// Reads a mask grid written by [`AoaMask::to_grid`]: nonzero is inside.
    pub fn from_grid(grid: &Grid) -> AoaMask {
        AoaMask {
            geometry: grid.geometry,
            cells: grid
                .values
                .iter()
                .map(|&v| {
                    if v.is_nan() {
                        MaskCell::Missing
                    } else if v != 0.0 {
                        MaskCell::Inside
                    } else {
                        MaskCell::Outside
                    }
                })
                .collect(),
            threshold: f64::NAN,
            quantile: None,
        }
    }

    pub fn with_quantile(mut self, q: f64) -> Self {
        self.quantile = Some(q);
        self
    }
}

/// A cell is inside when its DI does not exceed the threshold.
pub fn aoa_mask(di: &Grid, threshold: f64) -> Result<AoaMask> {
    if !(threshold >= 0.0) {
        return Err(AoaError::invalid(format!("AOA threshold must be nonnegative, got {threshold}")));
    }
    Ok(AoaMask {
        geometry: di.geometry,
        cells: di
            .values
            .iter()
            .map(|&v| {
                if v.is_nan() {
                    MaskCell::Missing
                } else if v <= threshold {
                    MaskCell::Inside
                } else {
                    MaskCell::Outside
                }
            })
            .collect(),
        threshold,
        quantile: None,
    })
}

/// What the calibration sweep needs from one truth-known scenario.
#[derive(Debug, Clone)]
pub struct CalibrationInput {
    pub scenario_id: String,
    pub cv_rmse: f64,
    /// Prediction minus truth per cell; `NaN` where missing.
    pub errors: Vec<f64>,
    /// DI per cell, aligned with `errors`.
    pub di: Vec<f64>,
    pub training_di: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalibrationRow {
    pub quantile: f64,
    pub scenario_id: String,
    pub cv_rmse: f64,
    pub threshold: f64,
    /// `None` when the AOA is empty.
    pub rmspe_in: Option<f64>,
    /// `None` when no cell lies outside the AOA.
    pub rmspe_out: Option<f64>,
    /// `cv_rmse - rmspe_in`.
    pub diff: Option<f64>,
    pub n_inside: usize,
    pub n_outside: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuantileSummary {
    pub quantile: f64,
    pub mean_diff: f64,
    pub median_diff: f64,
    pub q25_diff: f64,
    pub q75_diff: f64,
    pub n_scenarios: usize,
    /// Scenarios whose AOA was empty at this quantile.
    pub n_missing: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalibrationTable {
    /// Grouped by quantile (ascending), scenarios in input order.
    pub rows: Vec<CalibrationRow>,
    pub summary: Vec<QuantileSummary>,
}

impl CalibrationTable {
    pub fn rows_for(&self, quantile: f64) -> impl Iterator<Item = &CalibrationRow> {
        self.rows.iter().filter(move |r| r.quantile == quantile)
    }

    pub fn summary_for(&self, quantile: f64) -> Option<&QuantileSummary> {
        self.summary.iter().find(|s| s.quantile == quantile)
    }
}

/// Per-quantile comparison of CV RMSE with the true prediction error inside
/// and outside each scenario's AOA.
pub fn calibrate_quantiles(scenarios: &[CalibrationInput], quantiles: &[f64]) -> Result<CalibrationTable> {
    if scenarios.is_empty() {
        return Err(AoaError::invalid("calibration needs at least one scenario"));
    }
    if quantiles.is_empty() {
        return Err(AoaError::invalid("calibration needs at least one quantile"));
    }
    let mut qs = quantiles.to_vec();
    qs.sort_by(f64::total_cmp);
    qs.dedup();

    let per_scenario: Vec<Vec<CalibrationRow>> = scenarios
        .par_iter()
        .map(|s| {
            if s.errors.len() != s.di.len() {
                return Err(AoaError::invalid(format!(
                    "scenario `{}`: {} errors for {} DI values",
                    s.scenario_id,
                    s.errors.len(),
                    s.di.len()
                )));
            }
            qs.iter()
                .map(|&q| {
                    let threshold = threshold_from_values(&s.training_di, q)?;
                    let (mut ss_in, mut n_in, mut ss_out, mut n_out) = (0.0, 0usize, 0.0, 0usize);
                    for (&e, &d) in s.errors.iter().zip(&s.di) {
                        if e.is_nan() || d.is_nan() {
                            continue;
                        }
                        if d <= threshold {
                            ss_in += e * e;
                            n_in += 1;
                        } else {
                            ss_out += e * e;
                            n_out += 1;
                        }
                    }
                    let rmspe_in = (n_in > 0).then(|| (ss_in / n_in as f64).sqrt());
                    let rmspe_out = (n_out > 0).then(|| (ss_out / n_out as f64).sqrt());
                    Ok(CalibrationRow {
                        quantile: q,
                        scenario_id: s.scenario_id.clone(),
                        cv_rmse: s.cv_rmse,
                        threshold,
                        rmspe_in,
                        rmspe_out,
                        diff: rmspe_in.map(|r| s.cv_rmse - r),
                        n_inside: n_in,
                        n_outside: n_out,
                    })
                })
                .collect()
        })
        .collect::<Result<_>>()?;

    let mut rows = Vec::with_capacity(qs.len() * scenarios.len());
    let mut summary = Vec::with_capacity(qs.len());
    for (k, &q) in qs.iter().enumerate() {
        let group: Vec<CalibrationRow> = per_scenario.iter().map(|r| r[k].clone()).collect();
        let mut diffs: Vec<f64> = group.iter().filter_map(|r| r.diff).collect();
        diffs.sort_by(f64::total_cmp);
        let at = |p: f64| if diffs.is_empty() { f64::NAN } else { stats::quantile_sorted(&diffs, p) };
        summary.push(QuantileSummary {
            quantile: q,
            mean_diff: if diffs.is_empty() { f64::NAN } else { stats::mean(&diffs) },
            median_diff: at(0.5),
            q25_diff: at(0.25),
            q75_diff: at(0.75),
            n_scenarios: diffs.len(),
            n_missing: group.len() - diffs.len(),
        });
        rows.extend(group);
    }
    Ok(CalibrationTable { rows, summary })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn td(values: &[f64]) -> TrainingDi {
        TrainingDi {
            di: values.to_vec(),
            folds: FoldAssignment::leave_one_out(values.len().max(2)).unwrap(),
            mean_distance: 1.0,
            thresholds: vec![],
        }
    }

    #[test]
    fn threshold_examples() {
        assert_eq!(di_threshold(&td(&[0.2, 0.5, 0.9]), 1.0).unwrap(), 0.9);
        assert_eq!(di_threshold(&td(&[1.0, 3.0]), 0.5).unwrap(), 2.0);
        assert!(di_threshold(&td(&[1.0, 3.0]), 0.0).is_err());
        assert!(di_threshold(&td(&[1.0, 3.0]), 1.01).is_err());
    }

    #[test]
    fn mask_boundary_is_inclusive() {
        let geom = GridGeometry::new(1, 4, 1.0).unwrap();
        let di = Grid::new(geom, vec![0.0, 0.5, f64::NAN, 2.0]).unwrap();
        let m = aoa_mask(&di, 0.0).unwrap();
        assert_eq!(m.cells, vec![MaskCell::Inside, MaskCell::Outside, MaskCell::Missing, MaskCell::Outside]);
        let all = aoa_mask(&di, 2.0).unwrap();
        assert_eq!(
            all.counts(),
            MaskCounts {
                inside: 3,
                outside: 0,
                missing: 1
            }
        );
        assert!(aoa_mask(&di, -0.1).is_err());
        assert_eq!(AoaMask::from_grid(&all.to_grid()).cells, all.cells);
    }

    #[test]
    fn perfect_predictions_give_diff_equal_to_cv_rmse() {
        let input = CalibrationInput {
            scenario_id: "s".into(),
            cv_rmse: 0.1,
            errors: vec![0.0; 5],
            di: vec![0.1, 0.2, 0.3, 0.4, f64::NAN],
            training_di: vec![0.1, 0.2, 0.3],
        };
        let t = calibrate_quantiles(&[input], &CALIBRATION_QUANTILES).unwrap();
        assert_eq!(t.rows.len(), 6);
        for r in &t.rows {
            assert_eq!(r.diff, Some(0.1));
        }
        assert_eq!(t.summary.len(), 6);
    }

    #[test]
    fn empty_aoa_reported_as_missing() {
        let input = CalibrationInput {
            scenario_id: "s".into(),
            cv_rmse: 0.1,
            errors: vec![0.3, 0.2],
            di: vec![5.0, 6.0],
            training_di: vec![0.1, 0.2, 0.3],
        };
        let t = calibrate_quantiles(&[input], &[0.5, 1.0]).unwrap();
        assert!(t.rows.iter().all(|r| r.diff.is_none() && r.rmspe_in.is_none()));
        assert_eq!(t.summary_for(0.5).unwrap().n_missing, 1);
        assert!(t.summary_for(1.0).unwrap().mean_diff.is_nan());
    }
}
