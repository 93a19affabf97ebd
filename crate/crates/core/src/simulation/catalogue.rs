//! Scenario catalogues: a key/value config expanded into scenario specs,
//! and a parallel runner.
//!
//! Config format: one `key = value` per line, `#` starts a comment, lists
//! are comma-separated. Unknown keys are rejected. See `configs/` for
//! complete examples.

use std::collections::BTreeMap;
use std::sync::atomic::{AtomicUsize, Ordering};

use log::{info, warn};
use rayon::prelude::*;

use super::fields::FieldSpec;
use super::response::{Combination, ResponseSpec};
use super::scenario::{run_scenario, CvStrategy, SamplingDesign, ScenarioResult, ScenarioSpec};
use crate::aoa::{calibrate_quantiles, CalibrationInput, CalibrationTable, CALIBRATION_QUANTILES};
use crate::error::{AoaError, Result};
use crate::forest::ForestConfig;
use crate::rng::{derive_seed, stream};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DesignKind {
    Random,
    Clustered,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CatalogueConfig {
    pub grid_rows: usize,
    pub grid_cols: usize,
    pub predictors: usize,
    pub field_seed: u64,
    pub response_subset: Vec<usize>,
    pub mu1: Vec<f64>,
    pub mu2: Vec<f64>,
    pub sigma1: Vec<f64>,
    pub sigma2: Vec<f64>,
    /// Number of response settings used, evenly spaced through the full
    /// factorial grid; 0 uses all of them.
    pub responses: usize,
    pub combination: Combination,
    pub design: DesignKind,
    pub sample_sizes: Vec<usize>,
    pub n_clusters: usize,
    pub per_cluster: usize,
    pub cluster_radius: f64,
    pub replicates: usize,
    /// CV strategies; a clustered catalogue may list both.
    pub cv: Vec<CvKind>,
    pub cv_folds: usize,
    pub n_trees: usize,
    pub min_node_size: usize,
    pub mtry: Vec<usize>,
    pub quantiles: Vec<f64>,
    pub master_seed: u64,
    pub leak_response: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CvKind {
    Random,
    Cluster,
}

impl Default for CatalogueConfig {
    /// The desk-scale catalogue: 10 response settings x n in {25, 50, 100}
    /// x 2 replicates on a 100 x 100 grid with 10 predictors.
    fn default() -> Self {
        CatalogueConfig {
            grid_rows: 100,
            grid_cols: 100,
            predictors: 10,
            field_seed: 2020,
            response_subset: vec![0, 1, 2, 3, 4, 5],
            mu1: vec![1.0, 2.0, 3.0],
            mu2: vec![-1.0, 0.0, 1.0],
            sigma1: vec![1.0, 2.0, 3.0],
            sigma2: vec![1.0, 2.0, 3.0],
            responses: 10,
            combination: Combination::Multiplicative,
            design: DesignKind::Random,
            sample_sizes: vec![25, 50, 100],
            n_clusters: 50,
            per_cluster: 10,
            cluster_radius: 3.0,
            replicates: 2,
            cv: vec![CvKind::Random],
            cv_folds: 10,
            n_trees: 500,
            min_node_size: 5,
            mtry: vec![2, 4, 6, 8, 10],
            quantiles: CALIBRATION_QUANTILES.to_vec(),
            master_seed: 42,
            leak_response: false,
        }
    }
}

fn parse_list<T: std::str::FromStr>(key: &str, value: &str, line: usize) -> Result<Vec<T>> {
    value
        .split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| {
            s.parse::<T>()
                .map_err(|_| AoaError::parse(format!("line {line}"), format!("bad value `{s}` for `{key}`")))
        })
        .collect()
}

fn parse_one<T: std::str::FromStr>(key: &str, value: &str, line: usize) -> Result<T> {
    value
        .trim()
        .parse::<T>()
        .map_err(|_| AoaError::parse(format!("line {line}"), format!("bad value `{}` for `{key}`", value.trim())))
}

impl CatalogueConfig {
    pub fn parse(text: &str) -> Result<Self> {
        let mut cfg = CatalogueConfig::default();
        let mut seen = BTreeMap::new();
        for (i, raw) in text.lines().enumerate() {
            let line = i + 1;
            let content = raw.split('#').next().unwrap_or("").trim();
            if content.is_empty() {
                continue;
            }
            let (key, value) = content
                .split_once('=')
                .ok_or_else(|| AoaError::parse(format!("line {line}"), "expected `key = value`"))?;
            let key = key.trim().to_ascii_lowercase();
            if seen.insert(key.clone(), line).is_some() {
                return Err(AoaError::parse(format!("line {line}"), format!("duplicate key `{key}`")));
            }
            let v = value.trim();
            match key.as_str() {
                "grid_rows" => cfg.grid_rows = parse_one(&key, v, line)?,
                "grid_cols" => cfg.grid_cols = parse_one(&key, v, line)?,
                "predictors" => cfg.predictors = parse_one(&key, v, line)?,
                "field_seed" => cfg.field_seed = parse_one(&key, v, line)?,
                "response_subset" => cfg.response_subset = parse_list(&key, v, line)?,
                "mu1" => cfg.mu1 = parse_list(&key, v, line)?,
                "mu2" => cfg.mu2 = parse_list(&key, v, line)?,
                "sigma1" => cfg.sigma1 = parse_list(&key, v, line)?,
                "sigma2" => cfg.sigma2 = parse_list(&key, v, line)?,
                "responses" => cfg.responses = parse_one(&key, v, line)?,
                "combination" => cfg.combination = v.parse()?,
                "design" => {
                    cfg.design = match v.to_ascii_lowercase().as_str() {
                        "random" => DesignKind::Random,
                        "clustered" => DesignKind::Clustered,
                        _ => return Err(AoaError::parse(format!("line {line}"), format!("unknown design `{v}`"))),
                    }
                }
                "sample_sizes" => cfg.sample_sizes = parse_list(&key, v, line)?,
                "n_clusters" => cfg.n_clusters = parse_one(&key, v, line)?,
                "per_cluster" => cfg.per_cluster = parse_one(&key, v, line)?,
                "cluster_radius" => cfg.cluster_radius = parse_one(&key, v, line)?,
                "replicates" => cfg.replicates = parse_one(&key, v, line)?,
                "cv" => {
                    cfg.cv = v
                        .split(',')
                        .map(|s| match s.trim().to_ascii_lowercase().as_str() {
                            "random" => Ok(CvKind::Random),
                            "cluster" => Ok(CvKind::Cluster),
                            other => Err(AoaError::parse(format!("line {line}"), format!("unknown cv `{other}`"))),
                        })
                        .collect::<Result<_>>()?
                }
                "cv_folds" => cfg.cv_folds = parse_one(&key, v, line)?,
                "n_trees" => cfg.n_trees = parse_one(&key, v, line)?,
                "min_node_size" => cfg.min_node_size = parse_one(&key, v, line)?,
                "mtry" => cfg.mtry = parse_list(&key, v, line)?,
                "quantiles" => cfg.quantiles = parse_list(&key, v, line)?,
                "master_seed" => cfg.master_seed = parse_one(&key, v, line)?,
                "leak_response" => cfg.leak_response = parse_one(&key, v, line)?,
                _ => return Err(AoaError::parse(format!("line {line}"), format!("unknown key `{key}`"))),
            }
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        let nonempty = |name: &str, len: usize| {
            if len == 0 {
                Err(AoaError::invalid(format!("catalogue `{name}` list is empty")))
            } else {
                Ok(())
            }
        };
        nonempty("mu1", self.mu1.len())?;
        nonempty("mu2", self.mu2.len())?;
        nonempty("sigma1", self.sigma1.len())?;
        nonempty("sigma2", self.sigma2.len())?;
        nonempty("mtry", self.mtry.len())?;
        nonempty("quantiles", self.quantiles.len())?;
        nonempty("cv", self.cv.len())?;
        if self.design == DesignKind::Random {
            nonempty("sample_sizes", self.sample_sizes.len())?;
            if self.cv.contains(&CvKind::Cluster) {
                return Err(AoaError::invalid("leave-cluster-out CV needs design = clustered"));
            }
        }
        if self.replicates == 0 {
            return Err(AoaError::invalid("replicates must be at least 1"));
        }
        if let Some(q) = self.quantiles.iter().find(|q| !(**q > 0.0 && **q <= 1.0)) {
            return Err(AoaError::invalid(format!("quantile {q} outside (0, 1]")));
        }
        Ok(())
    }

    /// Response settings actually used, in factorial order.
    pub fn response_specs(&self) -> Vec<ResponseSpec> {
        let mut all = Vec::new();
        for &m1 in &self.mu1 {
            for &m2 in &self.mu2 {
                for &s1 in &self.sigma1 {
                    for &s2 in &self.sigma2 {
                        all.push(ResponseSpec {
                            subset: self.response_subset.clone(),
                            mean: [m1, m2],
                            sd: [s1, s2],
                        });
                    }
                }
            }
        }
        if self.responses == 0 || self.responses >= all.len() {
            return all;
        }
        let total = all.len();
        (0..self.responses).map(|i| all[i * total / self.responses].clone()).collect()
    }

    /// Expands the config into one spec per response x design size x
    /// replicate x CV strategy. A replicate's seed is shared across CV
    /// strategies so they see the same sample.
    pub fn expand(&self) -> Vec<ScenarioSpec> {
        let field = FieldSpec::desk(self.grid_rows, self.grid_cols, self.predictors, self.field_seed);
        let forest = ForestConfig {
            n_trees: self.n_trees,
            min_node_size: self.min_node_size,
            ..ForestConfig::default()
        };
        let designs: Vec<SamplingDesign> = match self.design {
            DesignKind::Random => self.sample_sizes.iter().map(|&n| SamplingDesign::Random { n }).collect(),
            DesignKind::Clustered => vec![SamplingDesign::Clustered {
                n_clusters: self.n_clusters,
                per_cluster: self.per_cluster,
                radius: self.cluster_radius,
            }],
        };
        let mut specs = Vec::new();
        for (r, response) in self.response_specs().into_iter().enumerate() {
            for design in &designs {
                let n = design.n_samples();
                for rep in 0..self.replicates {
                    let seed = derive_seed(self.master_seed, &[stream::SCENARIO, r as u64, n as u64, rep as u64]);
                    for cv in &self.cv {
                        let (cv, tag) = match cv {
                            CvKind::Random => (CvStrategy::RandomK { k: self.cv_folds }, "cvrandom"),
                            CvKind::Cluster => (CvStrategy::LeaveClusterOut, "cvcluster"),
                        };
                        let id = if self.cv.len() > 1 {
                            format!("r{r:02}_n{n}_rep{rep}_{tag}")
                        } else {
                            format!("r{r:02}_n{n}_rep{rep}")
                        };
                        specs.push(ScenarioSpec {
                            id,
                            field: field.clone(),
                            response: response.clone(),
                            combination: self.combination,
                            design: design.clone(),
                            cv,
                            forest: forest.clone(),
                            mtry_grid: self.mtry.clone(),
                            quantiles: self.quantiles.clone(),
                            seed,
                            leak_response: self.leak_response,
                        });
                    }
                }
            }
        }
        specs
    }
}

#[derive(Debug)]
pub struct CatalogueResult {
    /// Successful runs, in spec order.
    pub results: Vec<ScenarioResult>,
    /// Failed runs: scenario id and error message.
    pub failures: Vec<(String, String)>,
}

impl CatalogueResult {
    pub fn calibration_inputs(&self) -> Vec<CalibrationInput> {
        self.results.iter().map(ScenarioResult::calibration_input).collect()
    }

    pub fn calibrate(&self, quantiles: &[f64]) -> Result<CalibrationTable> {
        calibrate_quantiles(&self.calibration_inputs(), quantiles)
    }
}

/// Runs every spec, in parallel when `parallelism` allows. Failed scenarios
/// are logged and skipped; the call fails only when every scenario fails.
pub fn run_catalogue(specs: &[ScenarioSpec], parallelism: Option<usize>) -> Result<CatalogueResult> {
    if specs.is_empty() {
        return Err(AoaError::invalid("catalogue has no scenarios"));
    }
    let done = AtomicUsize::new(0);
    let total = specs.len();
    let run = || {
        specs
            .par_iter()
            .map(|spec| {
                let out = run_scenario(spec);
                let k = done.fetch_add(1, Ordering::Relaxed) + 1;
                match &out {
                    Ok(r) => info!("[{k}/{total}] {} cv_rmse={:.4}", r.id, r.cv.rmse),
                    Err(e) => warn!("[{k}/{total}] {e}"),
                }
                out
            })
            .collect::<Vec<_>>()
    };
    let outcomes = match parallelism {
        Some(threads) => rayon::ThreadPoolBuilder::new()
            .num_threads(threads.max(1))
            .build()
            .map_err(|e| AoaError::invalid(format!("thread pool: {e}")))?
            .install(run),
        None => run(),
    };

    let mut results = Vec::new();
    let mut failures = Vec::new();
    for (spec, out) in specs.iter().zip(outcomes) {
        match out {
            Ok(r) => results.push(r),
            Err(e) => failures.push((spec.id.clone(), e.to_string())),
        }
    }
    if results.is_empty() {
        return Err(AoaError::degenerate(format!(
            "all {total} scenarios failed; first error: {}",
            failures[0].1
        )));
    }
    Ok(CatalogueResult { results, failures })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_expands_to_sixty() {
        let cfg = CatalogueConfig::default();
        assert_eq!(cfg.response_specs().len(), 10);
        let specs = cfg.expand();
        assert_eq!(specs.len(), 60);
        let mut ids: Vec<&str> = specs.iter().map(|s| s.id.as_str()).collect();
        ids.sort_unstable();
        ids.dedup();
        assert_eq!(ids.len(), 60);
    }

    #[test]
    fn full_factorial_shape_is_972() {
        let cfg = CatalogueConfig::parse("responses = 0\nsample_sizes = 25, 50, 75, 100\nreplicates = 3\n").unwrap();
        assert_eq!(cfg.response_specs().len(), 81);
        assert_eq!(cfg.expand().len(), 972);
    }

    #[test]
    fn parse_rejects_unknown_and_duplicate_keys() {
        assert!(CatalogueConfig::parse("bogus = 1").is_err());
        assert!(CatalogueConfig::parse("replicates = 1\nreplicates = 2").is_err());
        assert!(CatalogueConfig::parse("replicates = two").is_err());
        assert!(CatalogueConfig::parse("cv = cluster").is_err());
        assert!(CatalogueConfig::parse("quantiles = 0.5, 1.5").is_err());
    }

    #[test]
    fn clustered_with_both_cv_shares_seeds() {
        let cfg = CatalogueConfig::parse(
            "design = clustered\ncv = cluster, random\nmu1 = 3\nmu2 = -1\nsigma1 = 2\nsigma2 = 2\nreplicates = 5 # five samples\n",
        )
        .unwrap();
        let specs = cfg.expand();
        assert_eq!(specs.len(), 10);
        assert_eq!(specs[0].seed, specs[1].seed);
        assert_ne!(specs[0].cv, specs[1].cv);
        assert_ne!(specs[0].seed, specs[2].seed);
    }
}
