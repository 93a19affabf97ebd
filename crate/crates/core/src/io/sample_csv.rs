use std::path::Path;

use crate::error::{AoaError, Result};
use crate::matrix::Matrix;
use crate::samples::{PredictorMatrix, SampleTable};

const RESERVED: [&str; 5] = ["x", "y", "response", "fold", "cluster"];

/// Parses a sample CSV: required `x`, `y`, `response` columns, optional
/// integer `fold` and `cluster` columns; every other column is a predictor,
/// in file order.
pub fn parse_samples(text: &str) -> Result<SampleTable> {
    let mut reader = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(text.as_bytes());
    let headers: Vec<String> = reader.headers()?.iter().map(str::to_string).collect();
    for (i, h) in headers.iter().enumerate() {
        if h.is_empty() {
            return Err(AoaError::parse(format!("header column {}", i + 1), "empty column name"));
        }
        if headers[..i].contains(h) {
            return Err(AoaError::parse(format!("header column {}", i + 1), format!("duplicate column `{h}`")));
        }
    }
    let col = |name: &str| headers.iter().position(|h| h == name);
    let need = |name: &str| col(name).ok_or_else(|| AoaError::parse("header", format!("missing required column `{name}`")));
    let (xi, yi, ri) = (need("x")?, need("y")?, need("response")?);
    let (fi, ci) = (col("fold"), col("cluster"));
    let pred_cols: Vec<usize> = (0..headers.len()).filter(|&i| !RESERVED.contains(&headers[i].as_str())).collect();

    let (mut xs, mut ys, mut resp) = (Vec::new(), Vec::new(), Vec::new());
    let (mut folds, mut clusters) = (Vec::new(), Vec::new());
    let mut data = Vec::new();
    for (r, record) in reader.records().enumerate() {
        let record = record?;
        let line = r + 2;
        let num = |i: usize| -> Result<f64> {
            let s = record.get(i).unwrap_or("");
            s.parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(|| AoaError::parse(format!("row {line}, column `{}`", headers[i]), format!("`{s}` is not a finite number")))
        };
        let int = |i: usize| -> Result<i64> {
            let s = record.get(i).unwrap_or("");
            s.parse::<i64>()
                .or_else(|_| {
                    s.parse::<f64>()
                        .ok()
                        .filter(|v| v.fract() == 0.0 && v.is_finite())
                        .map(|v| v as i64)
                        .ok_or(())
                })
                .map_err(|_| AoaError::parse(format!("row {line}, column `{}`", headers[i]), format!("`{s}` is not an integer label")))
        };
        xs.push(num(xi)?);
        ys.push(num(yi)?);
        resp.push(num(ri)?);
        for &j in &pred_cols {
            data.push(num(j)?);
        }
        if let Some(i) = fi {
            folds.push(int(i)?);
        }
        if let Some(i) = ci {
            clusters.push(int(i)?);
        }
    }
    let names: Vec<String> = pred_cols.iter().map(|&j| headers[j].clone()).collect();
    let m = Matrix::from_vec(resp.len(), names.len(), data)?;
    let mut table = SampleTable::new(xs, ys, resp, PredictorMatrix::new(names, m)?)?;
    if fi.is_some() {
        table = table.with_folds(folds)?;
    }
    if ci.is_some() {
        table = table.with_clusters(clusters)?;
    }
    Ok(table)
}

pub fn render_samples(table: &SampleTable) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let mut header = vec!["x".to_string(), "y".to_string(), "response".to_string()];
    header.extend(table.predictor_names().iter().cloned());
    if table.fold.is_some() {
        header.push("fold".into());
    }
    if table.cluster.is_some() {
        header.push("cluster".into());
    }
    w.write_record(&header)?;
    for i in 0..table.len() {
        let mut rec = vec![table.x[i].to_string(), table.y[i].to_string(), table.response[i].to_string()];
        rec.extend(table.predictors.matrix().row(i).iter().map(f64::to_string));
        if let Some(f) = &table.fold {
            rec.push(f[i].to_string());
        }
        if let Some(c) = &table.cluster {
            rec.push(c[i].to_string());
        }
        w.write_record(&rec)?;
    }
    let bytes = w.into_inner().map_err(|e| AoaError::invalid(e.to_string()))?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

pub fn read_samples(path: &Path) -> Result<SampleTable> {
    parse_samples(&super::read_text(path)?).map_err(|e| match e {
        AoaError::Parse { location, message } => AoaError::Parse {
            location: format!("{}: {location}", path.display()),
            message,
        },
        other => other,
    })
}

pub fn write_samples(table: &SampleTable, path: &Path) -> Result<()> {
    super::write_atomic(path, render_samples(table)?.as_bytes())
}
