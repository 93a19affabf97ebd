use std::path::Path;

use crate::error::{AoaError, Result};
use crate::grid::{Grid, GridGeometry};

#[derive(Debug, Clone, Copy)]
pub struct GridWriteOptions {
    /// Significant digits per value; `None` writes the shortest exact
    /// representation.
    pub significant_digits: Option<usize>,
}

impl Default for GridWriteOptions {
    fn default() -> Self {
        GridWriteOptions {
            significant_digits: Some(6),
        }
    }
}

/// Formats `v` with `digits` significant digits in `%g` style: fixed
/// notation for moderate exponents, scientific otherwise, trailing zeros
/// trimmed.
pub fn format_significant(v: f64, digits: usize) -> String {
    let digits = digits.max(1);
    if v == 0.0 || !v.is_finite() {
        return format!("{v}");
    }
    let sci = format!("{:.*e}", digits - 1, v);
    let (mantissa, exp) = sci.split_once('e').expect("exponent present");
    let exp: i32 = exp.parse().expect("integer exponent");
    if exp < -4 || exp >= digits as i32 {
        let m = trim_zeros(mantissa);
        return format!("{m}e{exp}");
    }
    let decimals = (digits as i32 - 1 - exp).max(0) as usize;
    trim_zeros(&format!("{:.*}", decimals, v)).to_string()
}

fn trim_zeros(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}

const HEADER_KEYS: [&str; 6] = ["ncols", "nrows", "xllcorner", "yllcorner", "cellsize", "nodata_value"];

/// Parses an ESRI ASCII grid. Header keys are case-insensitive;
/// `xllcenter`/`yllcenter` are accepted and converted to corners; the
/// nodata value maps to `NaN`.
pub fn parse_grid(text: &str) -> Result<Grid> {
    let mut lines = text.lines().enumerate().peekable();
    let mut header: [Option<f64>; 6] = [None; 6];
    let mut centered = [false; 2];

    while let Some(&(i, line)) = lines.peek() {
        let mut parts = line.split_whitespace();
        let Some(key) = parts.next() else {
            lines.next();
            continue;
        };
        let key_l = key.to_ascii_lowercase();
        let slot = match key_l.as_str() {
            "xllcenter" => {
                centered[0] = true;
                Some(2)
            }
            "yllcenter" => {
                centered[1] = true;
                Some(3)
            }
            k => HEADER_KEYS.iter().position(|h| *h == k),
        };
        let Some(slot) = slot else { break };
        let value = parts
            .next()
            .ok_or_else(|| AoaError::parse(format!("line {}", i + 1), format!("header `{key}` has no value")))?;
        let v: f64 = value
            .parse()
            .map_err(|_| AoaError::parse(format!("line {}", i + 1), format!("bad header value `{value}`")))?;
        if header[slot].replace(v).is_some() {
            return Err(AoaError::parse(format!("line {}", i + 1), format!("duplicate header `{key}`")));
        }
        lines.next();
    }

    let need = |k: usize| {
        header[k].ok_or_else(|| AoaError::parse("header", format!("missing `{}`", HEADER_KEYS[k])))
    };
    let ncols = need(0)?;
    let nrows = need(1)?;
    if ncols < 1.0 || nrows < 1.0 || ncols.fract() != 0.0 || nrows.fract() != 0.0 {
        return Err(AoaError::parse("header", "nrows and ncols must be positive integers"));
    }
    let cellsize = need(4)?;
    let mut geometry = GridGeometry {
        nrows: nrows as usize,
        ncols: ncols as usize,
        xllcorner: need(2)?,
        yllcorner: need(3)?,
        cellsize,
        nodata: header[5].unwrap_or(crate::grid::DEFAULT_NODATA),
    };
    if centered[0] {
        geometry.xllcorner -= cellsize / 2.0;
    }
    if centered[1] {
        geometry.yllcorner -= cellsize / 2.0;
    }
    geometry
        .validate()
        .map_err(|e| AoaError::parse("header", e.to_string()))?;

    let expected = geometry.len();
    let mut values = Vec::with_capacity(expected);
    for (i, line) in lines {
        for tok in line.split_whitespace() {
            let v: f64 = tok
                .parse()
                .map_err(|_| AoaError::parse(format!("line {}", i + 1), format!("unparseable value `{tok}`")))?;
            if values.len() == expected {
                return Err(AoaError::parse(
                    format!("line {}", i + 1),
                    format!("more than the {expected} values the header declares"),
                ));
            }
            values.push(if v == geometry.nodata || v.is_nan() { f64::NAN } else { v });
        }
    }
    if values.len() != expected {
        return Err(AoaError::parse(
            "body",
            format!("expected {expected} values, found {}", values.len()),
        ));
    }
    Grid::new(geometry, values)
}

pub fn render_grid(grid: &Grid, options: GridWriteOptions) -> String {
    let g = &grid.geometry;
    let fmt = |v: f64| match options.significant_digits {
        Some(d) => format_significant(v, d),
        None => format!("{v}"),
    };
    let mut out = String::with_capacity(grid.len() * 10 + 128);
    out.push_str(&format!("ncols {}\n", g.ncols));
    out.push_str(&format!("nrows {}\n", g.nrows));
    out.push_str(&format!("xllcorner {}\n", g.xllcorner));
    out.push_str(&format!("yllcorner {}\n", g.yllcorner));
    out.push_str(&format!("cellsize {}\n", g.cellsize));
    out.push_str(&format!("NODATA_value {}\n", g.nodata));
    for r in 0..g.nrows {
        let row: Vec<String> = (0..g.ncols)
            .map(|c| {
                let v = grid.get(r, c);
                if v.is_nan() {
                    format!("{}", g.nodata)
                } else {
                    fmt(v)
                }
            })
            .collect();
        out.push_str(&row.join(" "));
        out.push('\n');
    }
    out
}

pub fn read_grid(path: &Path) -> Result<Grid> {
    parse_grid(&super::read_text(path)?).map_err(|e| match e {
        AoaError::Parse { location, message } => AoaError::Parse {
            location: format!("{}: {location}", path.display()),
            message,
        },
        other => other,
    })
}

pub fn write_grid(grid: &Grid, path: &Path, options: GridWriteOptions) -> Result<()> {
    super::write_atomic(path, render_grid(grid, options).as_bytes())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn significant_formatting() {
        assert_eq!(format_significant(7.0, 6), "7");
        assert_eq!(format_significant(0.1234567, 6), "0.123457");
        assert_eq!(format_significant(123456789.0, 6), "1.23457e8");
        assert_eq!(format_significant(-0.000012345678, 6), "-1.23457e-5");
        assert_eq!(format_significant(9.9999999, 6), "10");
        assert_eq!(format_significant(0.0001, 6), "0.0001");
    }

    #[test]
    fn one_cell_round_trip() {
        let g = Grid::new(GridGeometry::new(1, 1, 1.0).unwrap(), vec![7.0]).unwrap();
        let text = render_grid(&g, GridWriteOptions::default());
        assert_eq!(parse_grid(&text).unwrap(), g);
    }

    #[test]
    fn nodata_maps_to_missing_and_back() {
        let g = Grid::new(GridGeometry::new(1, 2, 1.0).unwrap(), vec![f64::NAN, 1.5]).unwrap();
        let text = render_grid(&g, GridWriteOptions::default());
        assert!(text.lines().last().unwrap().starts_with("-9999 "));
        let back = parse_grid(&text).unwrap();
        assert!(back.values[0].is_nan());
        assert_eq!(back.values[1], 1.5);
    }

    #[test]
    fn header_is_case_insensitive_and_accepts_centers() {
        let text = "NCOLS 2\nNROWS 1\nXLLCENTER 0.5\nYLLCENTER 0.5\nCELLSIZE 1\nnodata_value -1\n3 -1\n";
        let g = parse_grid(text).unwrap();
        assert_eq!(g.geometry.xllcorner, 0.0);
        assert!(g.values[1].is_nan());
    }

    #[test]
    fn malformed_inputs_report_location() {
        let missing = "ncols 2\nnrows 1\nxllcorner 0\ncellsize 1\n1 2\n";
        assert!(parse_grid(missing).unwrap_err().to_string().contains("yllcorner"));
        let short = "ncols 2\nnrows 2\nxllcorner 0\nyllcorner 0\ncellsize 1\n1 2 3\n";
        assert!(parse_grid(short).unwrap_err().to_string().contains("expected 4"));
        let bad = "ncols 2\nnrows 1\nxllcorner 0\nyllcorner 0\ncellsize 1\n1 x\n";
        let err = parse_grid(bad).unwrap_err().to_string();
        assert!(err.contains("line 6") && err.contains("`x`"), "{err}");
        let long = "ncols 1\nnrows 1\nxllcorner 0\nyllcorner 0\ncellsize 1\n1 2\n";
        assert!(parse_grid(long).is_err());
    }
}
