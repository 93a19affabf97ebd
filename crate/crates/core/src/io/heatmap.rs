//! Binary PPM (P6) heatmaps of grids.

use std::path::Path;

use crate::aoa::{AoaMask, MaskCell};
use crate::error::{AoaError, Result};
use crate::grid::Grid;

pub type Rgb = [u8; 3];

/// Cells outside the AOA.
pub const MASK_COLOR: Rgb = [255, 105, 180];
pub const MISSING_COLOR: Rgb = [255, 255, 255];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Palette {
    #[default]
    Viridis,
    Grayscale,
}

impl std::str::FromStr for Palette {
    type Err = AoaError;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "viridis" => Ok(Palette::Viridis),
            "gray" | "grey" | "grayscale" | "greyscale" => Ok(Palette::Grayscale),
            other => Err(AoaError::invalid(format!("unknown palette `{other}`"))),
        }
    }
}

const VIRIDIS: [Rgb; 5] = [[68, 1, 84], [59, 82, 139], [33, 145, 140], [94, 201, 98], [253, 231, 37]];

impl Palette {
    /// Color at `t` in [0, 1], linearly interpolated between stops.
    pub fn color(&self, t: f64) -> Rgb {
        let t = t.clamp(0.0, 1.0);
        match self {
            Palette::Grayscale => {
                let v = (t * 255.0).round() as u8;
                [v, v, v]
            }
            Palette::Viridis => {
                let pos = t * (VIRIDIS.len() - 1) as f64;
                let i = (pos.floor() as usize).min(VIRIDIS.len() - 2);
                let f = pos - i as f64;
                let (a, b) = (VIRIDIS[i], VIRIDIS[i + 1]);
                let mix = |k: usize| (a[k] as f64 + f * (b[k] as f64 - a[k] as f64)).round() as u8;
                [mix(0), mix(1), mix(2)]
            }
        }
    }
}

/// Renders `grid` as a P6 image. Values map linearly over the finite range;
/// missing cells get [`MISSING_COLOR`] and cells outside `mask` get
/// [`MASK_COLOR`].
pub fn render_heatmap(grid: &Grid, palette: Palette, mask: Option<&AoaMask>) -> Result<Vec<u8>> {
    if grid.is_empty() {
        return Err(AoaError::invalid("cannot render an empty grid"));
    }
    let (lo, hi) = grid
        .finite_range()
        .ok_or_else(|| AoaError::invalid("cannot render a grid with no finite values"))?;
    if let Some(m) = mask {
        grid.geometry.ensure_same(&m.geometry, "heatmap mask")?;
    }
    let g = &grid.geometry;
    let mut out = format!("P6\n{} {}\n255\n", g.ncols, g.nrows).into_bytes();
    out.reserve(grid.len() * 3);
    for (i, &v) in grid.values.iter().enumerate() {
        let outside = mask.is_some_and(|m| m.cells[i] == MaskCell::Outside);
        let color = if !v.is_finite() {
            MISSING_COLOR
        } else if outside {
            MASK_COLOR
        } else if hi > lo {
            palette.color((v - lo) / (hi - lo))
        } else {
            palette.color(0.0)
        };
        out.extend_from_slice(&color);
    }
    Ok(out)
}

pub fn export_heatmap(grid: &Grid, path: &Path, palette: Palette, mask: Option<&AoaMask>) -> Result<()> {
    super::write_atomic(path, &render_heatmap(grid, palette, mask)?)
}
