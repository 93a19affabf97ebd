//! Point records: coordinates, predictors, response and optional grouping.

use crate::error::{AoaError, Result};
use crate::grid::PredictorStack;
use crate::matrix::Matrix;

/// A matrix whose columns are named predictors.
#[derive(Debug, Clone, PartialEq)]
pub struct PredictorMatrix {
    names: Vec<String>,
    matrix: Matrix,
}

impl PredictorMatrix {
    pub fn new(names: Vec<String>, matrix: Matrix) -> Result<Self> {
        if names.len() != matrix.ncols() {
            return Err(AoaError::invalid(format!(
                "{} predictor names for {} columns",
                names.len(),
                matrix.ncols()
            )));
        }
        for (i, n) in names.iter().enumerate() {
            if names[..i].contains(n) {
                return Err(AoaError::invalid(format!("duplicate predictor name `{n}`")));
            }
        }
        Ok(PredictorMatrix { names, matrix })
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn matrix(&self) -> &Matrix {
        &self.matrix
    }

    pub fn nrows(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn column_index(&self, name: &str) -> Result<usize> {
        self.names
            .iter()
            .position(|n| n == name)
            .ok_or_else(|| AoaError::UnknownPredictor(name.to_string()))
    }

    pub fn column_indices<S: AsRef<str>>(&self, names: &[S]) -> Result<Vec<usize>> {
        names.iter().map(|n| self.column_index(n.as_ref())).collect()
    }

    /// The named columns, in the order given.
    pub fn select<S: AsRef<str>>(&self, names: &[S]) -> Result<Matrix> {
        Ok(self.matrix.select_columns(&self.column_indices(names)?))
    }

    pub fn select_rows(&self, rows: &[usize]) -> PredictorMatrix {
        PredictorMatrix {
            names: self.names.clone(),
            matrix: self.matrix.select_rows(rows),
        }
    }

    /// Replaces the values of one column.
    pub fn set_column(&mut self, name: &str, values: &[f64]) -> Result<()> {
        let j = self.column_index(name)?;
        if values.len() != self.matrix.nrows() {
            return Err(AoaError::invalid("column length mismatch"));
        }
        for (i, &v) in values.iter().enumerate() {
            self.matrix.set(i, j, v);
        }
        Ok(())
    }
}

/// Training or evaluation samples.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleTable {
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    pub response: Vec<f64>,
    pub predictors: PredictorMatrix,
    /// Explicit fold labels, if the samples carry them.
    pub fold: Option<Vec<i64>>,
    /// Spatial cluster labels, if the samples carry them.
    pub cluster: Option<Vec<i64>>,
}

impl SampleTable {
    pub fn new(
        x: Vec<f64>,
        y: Vec<f64>,
        response: Vec<f64>,
        predictors: PredictorMatrix,
    ) -> Result<Self> {
        let n = predictors.nrows();
        if x.len() != n || y.len() != n || response.len() != n {
            return Err(AoaError::invalid(format!(
                "sample columns disagree in length: x {}, y {}, response {}, predictors {n}",
                x.len(),
                y.len(),
                response.len()
            )));
        }
        Ok(SampleTable {
            x,
            y,
            response,
            predictors,
            fold: None,
            cluster: None,
        })
    }

    /// Samples without coordinates (all set to 0), handy for non-spatial use.
    pub fn from_matrix(names: Vec<String>, matrix: Matrix, response: Vec<f64>) -> Result<Self> {
        let n = matrix.nrows();
        SampleTable::new(vec![0.0; n], vec![0.0; n], response, PredictorMatrix::new(names, matrix)?)
    }

    pub fn with_folds(mut self, fold: Vec<i64>) -> Result<Self> {
        if fold.len() != self.len() {
            return Err(AoaError::invalid("fold column length mismatch"));
        }
        self.fold = Some(fold);
        Ok(self)
    }

    pub fn with_clusters(mut self, cluster: Vec<i64>) -> Result<Self> {
        if cluster.len() != self.len() {
            return Err(AoaError::invalid("cluster column length mismatch"));
        }
        self.cluster = Some(cluster);
        Ok(self)
    }

    pub fn len(&self) -> usize {
        self.response.len()
    }

    pub fn is_empty(&self) -> bool {
        self.response.is_empty()
    }

    pub fn predictor_names(&self) -> &[String] {
        self.predictors.names()
    }

    pub fn select_rows(&self, rows: &[usize]) -> SampleTable {
        let pick = |v: &[f64]| rows.iter().map(|&r| v[r]).collect::<Vec<_>>();
        let pick_i = |v: &Vec<i64>| rows.iter().map(|&r| v[r]).collect::<Vec<_>>();
        SampleTable {
            x: pick(&self.x),
            y: pick(&self.y),
            response: pick(&self.response),
            predictors: self.predictors.select_rows(rows),
            fold: self.fold.as_ref().map(pick_i),
            cluster: self.cluster.as_ref().map(pick_i),
        }
    }

    /// Errors if any predictor or response value is missing or non-finite.
    pub fn ensure_complete(&self) -> Result<()> {
        for (i, row) in self.predictors.matrix().rows_iter().enumerate() {
            if let Some(j) = row.iter().position(|v| !v.is_finite()) {
                return Err(AoaError::invalid(format!(
                    "sample row {i}: predictor `{}` is missing or non-finite",
                    self.predictors.names()[j]
                )));
            }
        }
        if let Some(i) = self.response.iter().position(|v| !v.is_finite()) {
            return Err(AoaError::invalid(format!("sample row {i}: response is missing or non-finite")));
        }
        Ok(())
    }

    /// Extracts samples at the given cells of a stack, with the response
    /// read from `truth`. Coordinates are cell centers.
    pub fn from_cells(stack: &PredictorStack, truth: &crate::grid::Grid, cells: &[usize]) -> Result<Self> {
        stack.geometry().ensure_same(&truth.geometry, "truth grid")?;
        let geom = stack.geometry();
        let p = stack.len();
        let mut m = Matrix::zeros(cells.len(), p);
        let (mut xs, mut ys, mut resp) = (Vec::new(), Vec::new(), Vec::new());
        for (i, &c) in cells.iter().enumerate() {
            if c >= geom.len() {
                return Err(AoaError::invalid(format!("cell {c} out of bounds")));
            }
            for (j, layer) in stack.layers().iter().enumerate() {
                m.set(i, j, layer.values[c]);
            }
            let (x, y) = geom.cell_center(c);
            xs.push(x);
            ys.push(y);
            resp.push(truth.values[c]);
        }
        SampleTable::new(xs, ys, resp, PredictorMatrix::new(stack.names().to_vec(), m)?)
    }
}
