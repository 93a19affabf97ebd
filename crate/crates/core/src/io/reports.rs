//! CSV reports: importance, CV, training DI, calibration and metrics.

use std::path::Path;

use crate::aoa::{CalibrationTable, TrainingDi};
use crate::error::{AoaError, Result};
use crate::forest::PermutationImportance;
use crate::predictor_space::ImportanceWeights;
use crate::samples::SampleTable;
use crate::validation::CvReport;

fn finish(w: csv::Writer<Vec<u8>>) -> Result<String> {
    let bytes = w.into_inner().map_err(|e| AoaError::invalid(e.to_string()))?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

fn opt(v: Option<f64>) -> String {
    v.map_or_else(|| "NA".to_string(), |x| x.to_string())
}

fn nan_na(v: f64) -> String {
    if v.is_nan() {
        "NA".into()
    } else {
        v.to_string()
    }
}

/// `predictor,weight,importance`: the clamped distance weight and the raw
/// permutation importance.
pub fn importance_csv(importance: &PermutationImportance) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["predictor", "weight", "importance"])?;
    for (name, &v) in importance.names.iter().zip(&importance.values) {
        w.write_record([name.clone(), v.max(0.0).to_string(), v.to_string()])?;
    }
    finish(w)
}

/// Reads `predictor,weight` rows (extra columns ignored).
pub fn parse_importance_csv(text: &str) -> Result<ImportanceWeights> {
    let mut r = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(text.as_bytes());
    let headers = r.headers()?.clone();
    let pi = headers
        .iter()
        .position(|h| h == "predictor")
        .ok_or_else(|| AoaError::parse("header", "missing column `predictor`"))?;
    let wi = headers
        .iter()
        .position(|h| h == "weight")
        .ok_or_else(|| AoaError::parse("header", "missing column `weight`"))?;
    let (mut names, mut values) = (Vec::new(), Vec::new());
    for (i, rec) in r.records().enumerate() {
        let rec = rec?;
        names.push(rec.get(pi).unwrap_or("").to_string());
        let s = rec.get(wi).unwrap_or("");
        values.push(s.parse::<f64>().map_err(|_| {
            AoaError::parse(format!("row {}, column `weight`", i + 2), format!("`{s}` is not a number"))
        })?);
    }
    ImportanceWeights::new(names, values)
}

pub fn read_importance_csv(path: &Path) -> Result<ImportanceWeights> {
    parse_importance_csv(&super::read_text(path)?)
}

/// Per-fold rows plus `pooled` and `fold_mean` summary rows.
pub fn cv_report_csv(report: &CvReport) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["fold", "n", "rmse", "pearson_r", "r_squared", "strategy"])?;
    let strategy = report.folds.strategy().to_string();
    for s in &report.per_fold {
        w.write_record([s.fold.to_string(), s.n.to_string(), s.rmse.to_string(), "NA".into(), "NA".into(), strategy.clone()])?;
    }
    let n = report.predictions.len().to_string();
    w.write_record([
        "pooled".to_string(),
        n.clone(),
        report.rmse.to_string(),
        nan_na(report.pearson_r),
        nan_na(report.r_squared),
        strategy.clone(),
    ])?;
    w.write_record([
        "fold_mean".to_string(),
        n,
        report.fold_mean_rmse.to_string(),
        "NA".into(),
        "NA".into(),
        strategy,
    ])?;
    finish(w)
}

/// `index,x,y,fold,di,strategy` for each training point.
pub fn training_di_csv(samples: &SampleTable, result: &TrainingDi) -> Result<String> {
    if samples.len() != result.di.len() {
        return Err(AoaError::invalid("training DI length differs from sample count"));
    }
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["index", "x", "y", "fold", "di", "strategy"])?;
    let strategy = result.folds.strategy().to_string();
    for i in 0..samples.len() {
        w.write_record([
            i.to_string(),
            samples.x[i].to_string(),
            samples.y[i].to_string(),
            result.folds.folds()[i].to_string(),
            result.di[i].to_string(),
            strategy.clone(),
        ])?;
    }
    finish(w)
}

/// The `di` column of a training-DI CSV.
pub fn parse_training_di_csv(text: &str) -> Result<Vec<f64>> {
    let mut r = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(text.as_bytes());
    let di = r
        .headers()?
        .iter()
        .position(|h| h == "di")
        .ok_or_else(|| AoaError::parse("header", "missing column `di`"))?;
    r.records()
        .enumerate()
        .map(|(i, rec)| {
            let rec = rec?;
            let s = rec.get(di).unwrap_or("");
            s.parse::<f64>()
                .ok()
                .filter(|v| v.is_finite() && *v >= 0.0)
                .ok_or_else(|| AoaError::parse(format!("row {}, column `di`", i + 2), format!("`{s}` is not a DI value")))
        })
        .collect()
}

pub fn read_training_di_csv(path: &Path) -> Result<Vec<f64>> {
    parse_training_di_csv(&super::read_text(path)?)
}

/// One row per quantile and scenario; `NA` where an AOA (or its
/// complement) is empty.
pub fn calibration_csv(table: &CalibrationTable) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["quantile", "scenario_id", "cv_rmse", "rmspe_in", "rmspe_out", "diff", "n_inside", "n_outside"])?;
    for r in &table.rows {
        w.write_record([
            r.quantile.to_string(),
            r.scenario_id.clone(),
            r.cv_rmse.to_string(),
            opt(r.rmspe_in),
            opt(r.rmspe_out),
            opt(r.diff),
            r.n_inside.to_string(),
            r.n_outside.to_string(),
        ])?;
    }
    finish(w)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Metrics {
    pub n: usize,
    pub rmse: f64,
    pub pearson_r: f64,
    pub r_squared: f64,
}

pub fn metrics_csv(metrics: &Metrics) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["n", "rmse", "pearson_r", "r_squared"])?;
    w.write_record([
        metrics.n.to_string(),
        metrics.rmse.to_string(),
        nan_na(metrics.pearson_r),
        nan_na(metrics.r_squared),
    ])?;
    finish(w)
}
