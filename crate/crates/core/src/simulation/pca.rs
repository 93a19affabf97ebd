//! Principal components of a predictor subset (correlation-matrix PCA).

use crate::error::{AoaError, Result};
use crate::grid::{Grid, PredictorStack};
use crate::linalg::symmetric_eigen;
use crate::matrix::Matrix;
use crate::stats;

#[derive(Debug, Clone)]
pub struct PcaResult {
    pub pc1: Grid,
    pub pc2: Grid,
    /// Unit loading vectors of the first two components, over the subset.
    pub loadings: [Vec<f64>; 2],
    /// All eigenvalues of the correlation matrix, descending.
    pub eigenvalues: Vec<f64>,
    pub subset: Vec<usize>,
}

const PERFECT_CORRELATION: f64 = 1.0 - 1e-10;

/// Standardizes the subset over all non-missing cells, eigendecomposes its
/// correlation matrix and returns PC1/PC2 score grids. Each loading vector
/// is signed so its first nonzero entry is positive.
pub fn pca_first_two(stack: &PredictorStack, subset: &[usize]) -> Result<PcaResult> {
    if subset.len() < 2 {
        return Err(AoaError::invalid("PCA needs at least 2 predictors"));
    }
    for (i, &s) in subset.iter().enumerate() {
        if s >= stack.len() {
            return Err(AoaError::invalid(format!("predictor index {s} out of range")));
        }
        if subset[..i].contains(&s) {
            return Err(AoaError::invalid(format!("predictor index {s} repeated in PCA subset")));
        }
    }
    let names = stack.names();
    let cells: Vec<usize> = stack.valid_indices();
    if cells.len() < 3 {
        return Err(AoaError::invalid("PCA needs at least 3 non-missing cells"));
    }
    let k = subset.len();
    let n = cells.len();

    let mut z = Matrix::zeros(n, k);
    for (col, &j) in subset.iter().enumerate() {
        let layer = &stack.layers()[j];
        let values: Vec<f64> = cells.iter().map(|&c| layer.values[c]).collect();
        let mean = stats::mean(&values);
        let sd = stats::sample_sd(&values).unwrap_or(0.0);
        if !(sd > 0.0) {
            return Err(AoaError::degenerate(format!("PCA predictor `{}` is constant", names[j])));
        }
        for (i, v) in values.iter().enumerate() {
            z.set(i, col, (v - mean) / sd);
        }
    }

    let mut corr = Matrix::zeros(k, k);
    for a in 0..k {
        for b in a..k {
            let s: f64 = (0..n).map(|i| z.get(i, a) * z.get(i, b)).sum::<f64>() / (n - 1) as f64;
            corr.set(a, b, s);
            corr.set(b, a, s);
        }
    }
    for a in 0..k {
        for b in (a + 1)..k {
            if corr.get(a, b).abs() >= PERFECT_CORRELATION {
                return Err(AoaError::degenerate(format!(
                    "PCA subset is rank deficient: `{}` and `{}` are perfectly correlated",
                    names[subset[a]], names[subset[b]]
                )));
            }
        }
    }

    let eig = symmetric_eigen(&corr)?;
    if eig.values[1] <= 1e-10 * eig.values[0].max(1.0) {
        return Err(AoaError::degenerate("PCA subset has rank below 2"));
    }
    let mut loadings = [eig.vectors[0].clone(), eig.vectors[1].clone()];
    for l in &mut loadings {
        if let Some(first) = l.iter().find(|v| v.abs() > 1e-12) {
            if *first < 0.0 {
                l.iter_mut().for_each(|v| *v = -*v);
            }
        }
    }

    let geometry = *stack.geometry();
    let mut pc1 = Grid::filled(geometry, f64::NAN);
    let mut pc2 = Grid::filled(geometry, f64::NAN);
    for (i, &c) in cells.iter().enumerate() {
        let row = z.row(i);
        pc1.values[c] = row.iter().zip(&loadings[0]).map(|(a, b)| a * b).sum();
        pc2.values[c] = row.iter().zip(&loadings[1]).map(|(a, b)| a * b).sum();
    }
    Ok(PcaResult {
        pc1,
        pc2,
        loadings,
        eigenvalues: eig.values,
        subset: subset.to_vec(),
    })
}
