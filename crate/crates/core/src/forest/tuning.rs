use serde::{Deserialize, Serialize};

use super::ForestConfig;
use crate::error::{AoaError, Result};
use crate::samples::SampleTable;
use crate::validation::{cross_validate, CvReport, FoldAssignment};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MtryRecord {
    pub mtry: usize,
    /// Pooled out-of-fold RMSE.
    pub rmse: f64,
    /// Mean of the per-fold RMSEs.
    pub fold_mean_rmse: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MtryTuning {
    pub best_mtry: usize,
    pub records: Vec<MtryRecord>,
}

/// Cross-validates each `mtry` in the grid and keeps the one with the lowest
/// pooled RMSE (ties go to the smaller value). Also returns the CV report
/// of the winner.
pub fn tune_mtry(
    samples: &SampleTable,
    mtry_grid: &[usize],
    folds: &FoldAssignment,
    config: &ForestConfig,
) -> Result<(MtryTuning, CvReport)> {
    if mtry_grid.is_empty() {
        return Err(AoaError::invalid("mtry grid is empty"));
    }
    let p = samples.predictor_names().len();
    if let Some(&bad) = mtry_grid.iter().find(|&&m| m == 0 || m > p) {
        return Err(AoaError::invalid(format!("mtry {bad} outside [1, {p}]")));
    }
    let mut grid = mtry_grid.to_vec();
    grid.sort_unstable();
    grid.dedup();

    let mut records = Vec::with_capacity(grid.len());
    let mut best: Option<(usize, CvReport)> = None;
    for &m in &grid {
        let report = cross_validate(samples, folds, &config.clone().with_mtry(m))?;
        records.push(MtryRecord {
            mtry: m,
            rmse: report.rmse,
            fold_mean_rmse: report.fold_mean_rmse,
        });
        if best.as_ref().is_none_or(|(_, b)| report.rmse < b.rmse) {
            best = Some((m, report));
        }
    }
    let (best_mtry, report) = best.expect("grid is nonempty");
    Ok((MtryTuning { best_mtry, records }, report))
}
