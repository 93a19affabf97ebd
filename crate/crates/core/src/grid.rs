//! Raster grids and co-registered predictor stacks.

use serde::{Deserialize, Serialize};

use crate::error::{AoaError, Result};
use crate::matrix::Matrix;
use crate::samples::PredictorMatrix;

pub const DEFAULT_NODATA: f64 = -9999.0;

/// Raster layout shared by co-registered grids. Row 0 is the northern edge.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridGeometry {
    pub nrows: usize,
    pub ncols: usize,
    pub xllcorner: f64,
    pub yllcorner: f64,
    pub cellsize: f64,
    pub nodata: f64,
}

impl GridGeometry {
    pub fn new(nrows: usize, ncols: usize, cellsize: f64) -> Result<Self> {
        let g = GridGeometry {
            nrows,
            ncols,
            xllcorner: 0.0,
            yllcorner: 0.0,
            cellsize,
            nodata: DEFAULT_NODATA,
        };
        g.validate()?;
        Ok(g)
    }

    pub fn validate(&self) -> Result<()> {
        if self.nrows == 0 || self.ncols == 0 {
            return Err(AoaError::invalid("grid must have at least one row and column"));
        }
        if !(self.cellsize.is_finite() && self.cellsize > 0.0) {
            return Err(AoaError::invalid(format!("cell size must be positive, got {}", self.cellsize)));
        }
        if !self.xllcorner.is_finite() || !self.yllcorner.is_finite() {
            return Err(AoaError::invalid("grid origin must be finite"));
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.nrows * self.ncols
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// True when both geometries describe the same cells. The nodata
    /// sentinel is a file-level detail and is not compared.
    pub fn same_extent(&self, other: &GridGeometry) -> bool {
        self.nrows == other.nrows
            && self.ncols == other.ncols
            && self.xllcorner == other.xllcorner
            && self.yllcorner == other.yllcorner
            && self.cellsize == other.cellsize
    }

    pub fn ensure_same(&self, other: &GridGeometry, what: &str) -> Result<()> {
        if self.same_extent(other) {
            Ok(())
        } else {
            Err(AoaError::GeometryMismatch(format!(
                "{what}: {}x{} @ ({}, {}) cell {} vs {}x{} @ ({}, {}) cell {}",
                self.nrows,
                self.ncols,
                self.xllcorner,
                self.yllcorner,
                self.cellsize,
                other.nrows,
                other.ncols,
                other.xllcorner,
                other.yllcorner,
                other.cellsize
            )))
        }
    }

    #[inline]
    pub fn index(&self, row: usize, col: usize) -> usize {
        row * self.ncols + col
    }

    #[inline]
    pub fn row_col(&self, index: usize) -> (usize, usize) {
        (index / self.ncols, index % self.ncols)
    }

    /// Map coordinates of a cell center.
    pub fn cell_center(&self, index: usize) -> (f64, f64) {
        let (r, c) = self.row_col(index);
        let x = self.xllcorner + (c as f64 + 0.5) * self.cellsize;
        let y = self.yllcorner + ((self.nrows - r) as f64 - 0.5) * self.cellsize;
        (x, y)
    }

    /// Cell containing the map coordinate, if inside the grid.
    pub fn cell_at(&self, x: f64, y: f64) -> Option<usize> {
        let c = ((x - self.xllcorner) / self.cellsize).floor();
        let r_from_bottom = ((y - self.yllcorner) / self.cellsize).floor();
        if c < 0.0 || r_from_bottom < 0.0 {
            return None;
        }
        let (c, rb) = (c as usize, r_from_bottom as usize);
        if c >= self.ncols || rb >= self.nrows {
            return None;
        }
        Some(self.index(self.nrows - 1 - rb, c))
    }
}

/// A single-band raster. Missing cells hold `NaN`.
#[derive(Debug, Clone, PartialEq)]
pub struct Grid {
    pub geometry: GridGeometry,
    pub values: Vec<f64>,
}

impl Grid {
    pub fn new(geometry: GridGeometry, values: Vec<f64>) -> Result<Self> {
        geometry.validate()?;
        if values.len() != geometry.len() {
            return Err(AoaError::invalid(format!(
                "grid of {}x{} needs {} values, got {}",
                geometry.nrows,
                geometry.ncols,
                geometry.len(),
                values.len()
            )));
        }
        Ok(Grid { geometry, values })
    }

    pub fn filled(geometry: GridGeometry, value: f64) -> Self {
        Grid {
            values: vec![value; geometry.len()],
            geometry,
        }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.values[self.geometry.index(row, col)]
    }

    pub fn is_missing(&self, index: usize) -> bool {
        self.values[index].is_nan()
    }

    /// Indices of all non-missing cells.
    pub fn valid_indices(&self) -> Vec<usize> {
        (0..self.values.len()).filter(|&i| !self.values[i].is_nan()).collect()
    }

    /// Minimum and maximum over non-missing cells.
    pub fn finite_range(&self) -> Option<(f64, f64)> {
        self.values
            .iter()
            .filter(|v| v.is_finite())
            .fold(None, |acc, &v| match acc {
                None => Some((v, v)),
                Some((lo, hi)) => Some((lo.min(v), hi.max(v))),
            })
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Grid {
        Grid {
            geometry: self.geometry,
            values: self.values.iter().map(|&v| if v.is_nan() { v } else { f(v) }).collect(),
        }
    }

    /// Cellwise combination; missing in either input gives missing.
    pub fn zip_with(&self, other: &Grid, f: impl Fn(f64, f64) -> f64) -> Result<Grid> {
        self.geometry.ensure_same(&other.geometry, "cellwise combination")?;
        let values = self
            .values
            .iter()
            .zip(&other.values)
            .map(|(&a, &b)| if a.is_nan() || b.is_nan() { f64::NAN } else { f(a, b) })
            .collect();
        Ok(Grid {
            geometry: self.geometry,
            values,
        })
    }
}

/// Named, co-registered predictor grids sharing one missing-value mask: a
/// cell is missing when any layer is missing there.
#[derive(Debug, Clone)]
pub struct PredictorStack {
    geometry: GridGeometry,
    names: Vec<String>,
    layers: Vec<Grid>,
}

impl PredictorStack {
    pub fn new(names: Vec<String>, layers: Vec<Grid>) -> Result<Self> {
        if names.len() != layers.len() {
            return Err(AoaError::invalid(format!(
                "{} names for {} predictor grids",
                names.len(),
                layers.len()
            )));
        }
        let first = layers
            .first()
            .ok_or_else(|| AoaError::invalid("predictor stack needs at least one grid"))?;
        let geometry = first.geometry;
        for (name, layer) in names.iter().zip(&layers) {
            geometry.ensure_same(&layer.geometry, &format!("predictor `{name}`"))?;
        }
        for (i, n) in names.iter().enumerate() {
            if names[..i].contains(n) {
                return Err(AoaError::invalid(format!("duplicate predictor name `{n}`")));
            }
        }
        Ok(PredictorStack {
            geometry,
            names,
            layers,
        })
    }

    pub fn geometry(&self) -> &GridGeometry {
        &self.geometry
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn layers(&self) -> &[Grid] {
        &self.layers
    }

    pub fn len(&self) -> usize {
        self.layers.len()
    }

    pub fn is_empty(&self) -> bool {
        self.layers.is_empty()
    }

    pub fn layer(&self, name: &str) -> Result<&Grid> {
        self.names
            .iter()
            .position(|n| n == name)
            .map(|i| &self.layers[i])
            .ok_or_else(|| AoaError::UnknownPredictor(name.to_string()))
    }

    /// Appends a layer (used e.g. to leak the response as a predictor).
    pub fn push(&mut self, name: String, layer: Grid) -> Result<()> {
        self.geometry.ensure_same(&layer.geometry, &format!("predictor `{name}`"))?;
        if self.names.contains(&name) {
            return Err(AoaError::invalid(format!("duplicate predictor name `{name}`")));
        }
        self.names.push(name);
        self.layers.push(layer);
        Ok(())
    }

    pub fn is_missing(&self, index: usize) -> bool {
        self.layers.iter().any(|l| l.values[index].is_nan())
    }

    /// Indices of cells where every layer has a value.
    pub fn valid_indices(&self) -> Vec<usize> {
        (0..self.geometry.len()).filter(|&i| !self.is_missing(i)).collect()
    }

    /// Predictor values of one cell, in stack order.
    pub fn cell_values(&self, index: usize) -> Vec<f64> {
        self.layers.iter().map(|l| l.values[index]).collect()
    }

    /// All cells as a predictor matrix (one row per cell, stack column
    /// order). Rows of missing cells are entirely `NaN`.
    pub fn to_matrix(&self) -> PredictorMatrix {
        let n = self.geometry.len();
        let p = self.layers.len();
        let mut m = Matrix::zeros(n, p);
        for i in 0..n {
            let missing = self.is_missing(i);
            let row = m.row_mut(i);
            for (j, layer) in self.layers.iter().enumerate() {
                row[j] = if missing { f64::NAN } else { layer.values[i] };
            }
        }
        PredictorMatrix::new(self.names.clone(), m).expect("stack names are unique")
    }
}
