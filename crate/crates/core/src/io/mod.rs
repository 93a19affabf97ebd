//! File formats: ASCII grids, sample CSVs, forest model JSON, CSV reports
//! and PPM heatmaps. All writers go through a temp file and rename.

mod ascii_grid;
mod heatmap;
mod model;
mod reports;
mod sample_csv;

pub use ascii_grid::{format_significant, parse_grid, read_grid, render_grid, write_grid, GridWriteOptions};
pub use heatmap::{export_heatmap, render_heatmap, Palette, Rgb, MASK_COLOR, MISSING_COLOR};
pub use model::{model_from_json, model_to_json, read_model, write_model, MODEL_SCHEMA_VERSION};
pub use reports::{
    calibration_csv, cv_report_csv, importance_csv, metrics_csv, parse_importance_csv, parse_training_di_csv,
    read_importance_csv, read_training_di_csv, training_di_csv, Metrics,
};
pub use sample_csv::{parse_samples, read_samples, render_samples, write_samples};

use std::fs;
use std::io::Write;
use std::path::Path;

use crate::error::{AoaError, Result};

/// Writes `bytes` to a sibling temp file, then renames it over `path`.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| AoaError::io(dir, e))?;
    }
    let file_name = path
        .file_name()
        .ok_or_else(|| AoaError::invalid(format!("not a file path: {}", path.display())))?;
    let tmp = path.with_file_name(format!(".{}.tmp{}", file_name.to_string_lossy(), std::process::id()));
    let mut f = fs::File::create(&tmp).map_err(|e| AoaError::io(&tmp, e))?;
    f.write_all(bytes).map_err(|e| AoaError::io(&tmp, e))?;
    f.sync_all().map_err(|e| AoaError::io(&tmp, e))?;
    drop(f);
    fs::rename(&tmp, path).map_err(|e| AoaError::io(path, e))
}

pub(crate) fn read_text(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| AoaError::io(path, e))
}
