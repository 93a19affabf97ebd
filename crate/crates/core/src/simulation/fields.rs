//! Synthetic smooth predictor fields: sums of Gaussian bumps plus a linear
//! trend, optionally tied to a parent predictor.

use rand::Rng as _;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{AoaError, Result};
use crate::grid::{Grid, GridGeometry, PredictorStack};
use crate::rng::{derived_rng, stream, Rng};

/// `child = slope * parent + intercept + own field`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParentLink {
    pub index: usize,
    pub slope: f64,
    pub intercept: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictorRecipe {
    pub name: String,
    /// Inclusive range for the number of bumps.
    pub bumps: (usize, usize),
    /// Range of absolute bump amplitudes; signs are random.
    pub amplitude: (f64, f64),
    /// Range of bump widths (standard deviation, in cells).
    pub width: (f64, f64),
    /// Linear trend: change across the full grid width and height.
    pub trend: [f64; 2],
    pub offset: f64,
    pub parent: Option<ParentLink>,
    /// Standard deviation of independent per-cell noise.
    pub noise_sd: f64,
}

impl PredictorRecipe {
    pub fn constant(name: &str, value: f64) -> Self {
        PredictorRecipe {
            name: name.to_string(),
            bumps: (0, 0),
            amplitude: (1.0, 1.0),
            width: (1.0, 1.0),
            trend: [0.0, 0.0],
            offset: value,
            parent: None,
            noise_sd: 0.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FieldSpec {
    pub nrows: usize,
    pub ncols: usize,
    pub cell_size: f64,
    pub predictors: Vec<PredictorRecipe>,
    pub seed: u64,
}

/// Minimum predictor count: the virtual response uses a six-predictor subset.
pub const MIN_PREDICTORS: usize = 6;

impl FieldSpec {
    /// Desk-scale landscape: `nrows x ncols`, `p` predictors named
    /// `x1..xp`, 5 to 15 bumps each, random trends, and every third
    /// predictor correlated with its predecessor.
    pub fn desk(nrows: usize, ncols: usize, p: usize, seed: u64) -> Self {
        let mut rng = derived_rng(seed, &[stream::FIELD, u64::MAX]);
        let extent = nrows.max(ncols) as f64;
        let predictors = (0..p)
            .map(|j| {
                let parent = (j % 3 == 2).then(|| ParentLink {
                    index: j - 1,
                    slope: if rng.random_bool(0.5) { 0.8 } else { -0.8 },
                    intercept: 0.0,
                });
                PredictorRecipe {
                    name: format!("x{}", j + 1),
                    bumps: (5, 15),
                    amplitude: (0.5, 2.0),
                    width: (0.08 * extent, 0.3 * extent),
                    trend: [rng.random_range(-1.5..1.5), rng.random_range(-1.5..1.5)],
                    offset: 0.0,
                    parent,
                    noise_sd: 0.0,
                }
            })
            .collect();
        FieldSpec {
            nrows,
            ncols,
            cell_size: 1.0,
            predictors,
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        GridGeometry::new(self.nrows, self.ncols, self.cell_size)?;
        if self.predictors.len() < MIN_PREDICTORS {
            return Err(AoaError::invalid(format!(
                "field spec needs at least {MIN_PREDICTORS} predictors, got {}",
                self.predictors.len()
            )));
        }
        for (j, r) in self.predictors.iter().enumerate() {
            let pos = |(lo, hi): (f64, f64)| lo > 0.0 && lo <= hi && hi.is_finite();
            if !pos(r.amplitude) || !pos(r.width) {
                return Err(AoaError::invalid(format!(
                    "predictor `{}`: amplitude and width ranges must be positive",
                    r.name
                )));
            }
            if r.bumps.0 > r.bumps.1 {
                return Err(AoaError::invalid(format!("predictor `{}`: empty bump range", r.name)));
            }
            if !(r.noise_sd >= 0.0) {
                return Err(AoaError::invalid(format!("predictor `{}`: negative noise", r.name)));
            }
            if let Some(link) = &r.parent {
                if link.index >= j {
                    return Err(AoaError::invalid(format!(
                        "predictor `{}`: parent must precede its child",
                        r.name
                    )));
                }
            }
        }
        Ok(())
    }

    pub fn geometry(&self) -> GridGeometry {
        GridGeometry::new(self.nrows, self.ncols, self.cell_size).expect("validated")
    }
}

fn own_field(recipe: &PredictorRecipe, geom: &GridGeometry, rng: &mut Rng) -> Vec<f64> {
    let (nr, nc) = (geom.nrows as f64, geom.ncols as f64);
    let k = rng.random_range(recipe.bumps.0..=recipe.bumps.1);
    let sample = |rng: &mut Rng, (lo, hi): (f64, f64)| if lo == hi { lo } else { rng.random_range(lo..hi) };
    let bumps: Vec<(f64, f64, f64, f64)> = (0..k)
        .map(|_| {
            let r0 = rng.random_range(-0.1 * nr..1.1 * nr);
            let c0 = rng.random_range(-0.1 * nc..1.1 * nc);
            let sign = if rng.random_bool(0.5) { 1.0 } else { -1.0 };
            let amp = sign * sample(rng, recipe.amplitude);
            let w = sample(rng, recipe.width);
            (r0, c0, amp, w)
        })
        .collect();
    let mut values = vec![0.0; geom.len()];
    for r in 0..geom.nrows {
        for c in 0..geom.ncols {
            let (rf, cf) = (r as f64 + 0.5, c as f64 + 0.5);
            let mut v = recipe.offset + recipe.trend[0] * cf / nc + recipe.trend[1] * rf / nr;
            for &(r0, c0, amp, w) in &bumps {
                let d2 = (rf - r0).powi(2) + (cf - c0).powi(2);
                v += amp * (-d2 / (2.0 * w * w)).exp();
            }
            values[geom.index(r, c)] = v;
        }
    }
    if recipe.noise_sd > 0.0 {
        for v in &mut values {
            *v += recipe.noise_sd * rng.sample::<f64, _>(StandardNormal);
        }
    }
    values
}

/// Generates the predictor stack described by `spec`; deterministic in the
/// spec's seed.
pub fn generate_predictor_stack(spec: &FieldSpec) -> Result<PredictorStack> {
    spec.validate()?;
    let geom = spec.geometry();
    let mut layers: Vec<Grid> = Vec::with_capacity(spec.predictors.len());
    for (j, recipe) in spec.predictors.iter().enumerate() {
        let mut rng = derived_rng(spec.seed, &[stream::FIELD, j as u64]);
        let mut values = own_field(recipe, &geom, &mut rng);
        if let Some(link) = &recipe.parent {
            for (v, &p) in values.iter_mut().zip(&layers[link.index].values) {
                *v += link.slope * p + link.intercept;
            }
        }
        layers.push(Grid::new(geom, values)?);
    }
    PredictorStack::new(spec.predictors.iter().map(|r| r.name.clone()).collect(), layers)
}
