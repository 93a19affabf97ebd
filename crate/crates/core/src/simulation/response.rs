//! Virtual response: Gaussian response curves along the first two
//! principal components, combined and rescaled to [0, 1].

use serde::{Deserialize, Serialize};

use crate::error::{AoaError, Result};
use crate::grid::Grid;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResponseSpec {
    /// Predictor indices whose PCA drives the response.
    pub subset: Vec<usize>,
    /// Response optimum along PC1 and PC2.
    pub mean: [f64; 2],
    /// Response tolerance along PC1 and PC2.
    pub sd: [f64; 2],
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Combination {
    #[default]
    Multiplicative,
    /// Mean of the two curves, kept for sensitivity runs.
    Additive,
}

impl std::str::FromStr for Combination {
    type Err = AoaError;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "multiplicative" | "product" => Ok(Combination::Multiplicative),
            "additive" | "sum" => Ok(Combination::Additive),
            other => Err(AoaError::invalid(format!("unknown response combination `{other}`"))),
        }
    }
}

impl ResponseSpec {
    pub fn validate(&self, n_predictors: usize) -> Result<()> {
        if !(self.sd[0] > 0.0 && self.sd[1] > 0.0) {
            return Err(AoaError::invalid("response standard deviations must be positive"));
        }
        if self.mean.iter().any(|m| !m.is_finite()) {
            return Err(AoaError::invalid("response means must be finite"));
        }
        if self.subset.len() < 2 {
            return Err(AoaError::invalid("response subset needs at least 2 predictors"));
        }
        for (i, &s) in self.subset.iter().enumerate() {
            if s >= n_predictors || self.subset[..i].contains(&s) {
                return Err(AoaError::invalid(format!("invalid response subset index {s}")));
            }
        }
        Ok(())
    }

    /// The full factorial grid of response settings: means of PC1 in
    /// {1, 2, 3}, of PC2 in {-1, 0, 1}, and sds in {1, 2, 3} on each axis.
    pub fn full_grid(subset: &[usize]) -> Vec<ResponseSpec> {
        let mut out = Vec::with_capacity(81);
        for m1 in [1.0, 2.0, 3.0] {
            for m2 in [-1.0, 0.0, 1.0] {
                for s1 in [1.0, 2.0, 3.0] {
                    for s2 in [1.0, 2.0, 3.0] {
                        out.push(ResponseSpec {
                            subset: subset.to_vec(),
                            mean: [m1, m2],
                            sd: [s1, s2],
                        });
                    }
                }
            }
        }
        out
    }
}

#[inline]
fn gaussian(x: f64, mean: f64, sd: f64) -> f64 {
    (-(x - mean).powi(2) / (2.0 * sd * sd)).exp()
}

/// Combined Gaussian response before rescaling; 1 at the optimum under
/// multiplicative combination.
pub fn raw_gaussian_response(pc1: &Grid, pc2: &Grid, spec: &ResponseSpec, combination: Combination) -> Result<Grid> {
    if !(spec.sd[0] > 0.0 && spec.sd[1] > 0.0) {
        return Err(AoaError::invalid("response standard deviations must be positive"));
    }
    pc1.zip_with(pc2, |a, b| {
        let g1 = gaussian(a, spec.mean[0], spec.sd[0]);
        let g2 = gaussian(b, spec.mean[1], spec.sd[1]);
        match combination {
            Combination::Multiplicative => g1 * g2,
            Combination::Additive => 0.5 * (g1 + g2),
        }
    })
}

/// Combined response min-max rescaled to [0, 1] over non-missing cells.
pub fn gaussian_response(pc1: &Grid, pc2: &Grid, spec: &ResponseSpec, combination: Combination) -> Result<Grid> {
    let raw = raw_gaussian_response(pc1, pc2, spec, combination)?;
    let (lo, hi) = raw
        .finite_range()
        .ok_or_else(|| AoaError::degenerate("response surface has no valid cells"))?;
    if !(hi > lo) {
        return Err(AoaError::degenerate("response surface is constant; cannot rescale"));
    }
    Ok(raw.map(|v| ((v - lo) / (hi - lo)).clamp(0.0, 1.0)))
}
