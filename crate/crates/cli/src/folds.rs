//! `--folds` parsing and resolution against a sample table.

use std::str::FromStr;

use aoa_core::validation::{assign_cluster_folds, assign_random_folds, FoldAssignment};
use aoa_core::{AoaError, Matrix, PredictorMatrix, SampleTable};

use crate::{CliError, CliResult};

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum FoldSpec {
    Random { k: usize },
    Cluster { column: String },
    File { column: String },
}

impl FoldSpec {
    fn rank(&self) -> u8 {
        match self {
            FoldSpec::File { .. } => 2,
            FoldSpec::Cluster { .. } => 1,
            FoldSpec::Random { .. } => 0,
        }
    }
}

impl FromStr for FoldSpec {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        let (kind, arg) = s.split_once(':').unwrap_or((s, ""));
        let (key, value) = arg.split_once('=').unwrap_or(("", ""));
        match (kind, key) {
            ("random", "k") => value
                .parse()
                .ok()
                .filter(|&k| k >= 2)
                .map(|k| FoldSpec::Random { k })
                .ok_or_else(|| format!("`{value}` is not a fold count >= 2")),
            ("random", "") if arg.is_empty() => Ok(FoldSpec::Random { k: 10 }),
            ("cluster", "col") if !value.is_empty() => Ok(FoldSpec::Cluster { column: value.into() }),
            ("file", "col") if !value.is_empty() => Ok(FoldSpec::File { column: value.into() }),
            _ => Err(format!("expected random:k=N, cluster:col=NAME or file:col=NAME, got `{s}`")),
        }
    }
}

/// Picks the highest-precedence spec, or a default based on the columns
/// present in `samples`.
pub fn choose(specs: &[FoldSpec], samples: &SampleTable) -> FoldSpec {
    if let Some(best) = specs.iter().max_by_key(|s| s.rank()) {
        return best.clone();
    }
    if samples.fold.is_some() {
        FoldSpec::File { column: "fold".into() }
    } else if samples.cluster.is_some() {
        FoldSpec::Cluster { column: "cluster".into() }
    } else {
        FoldSpec::Random { k: 10 }
    }
}

/// Resolves `spec` into folds. A label column other than `fold`/`cluster`
/// is taken out of the predictors.
pub fn resolve(spec: &FoldSpec, samples: &mut SampleTable, seed: u64) -> CliResult<FoldAssignment> {
    let folds = match spec {
        FoldSpec::Random { k } => {
            if *k > samples.len() {
                return Err(CliError::Usage(format!("random:k={k} exceeds the {} samples", samples.len())));
            }
            assign_random_folds(samples.len(), *k, seed)?
        }
        FoldSpec::Cluster { column } => assign_cluster_folds(&labels(samples, column)?)?.with_column(column),
        FoldSpec::File { column } => FoldAssignment::from_labels(&labels(samples, column)?)?.with_column(column),
    };
    log::info!("folds: {} ({} folds)", folds.strategy(), folds.n_folds());
    Ok(folds)
}

fn labels(samples: &mut SampleTable, column: &str) -> CliResult<Vec<i64>> {
    let special = match column {
        "fold" => samples.fold.clone(),
        "cluster" => samples.cluster.clone(),
        _ => None,
    };
    if let Some(l) = special {
        return Ok(l);
    }
    let j = samples
        .predictors
        .column_index(column)
        .map_err(|_| AoaError::InvalidInput(format!("samples have no column `{column}` to take folds from")))?;
    let values = samples.predictors.matrix().column(j);
    let labels = values
        .iter()
        .enumerate()
        .map(|(i, v)| {
            if v.fract() == 0.0 && v.is_finite() {
                Ok(*v as i64)
            } else {
                Err(AoaError::InvalidInput(format!("row {}: fold label `{v}` in `{column}` is not an integer", i + 1)))
            }
        })
        .collect::<Result<Vec<_>, _>>()?;
    let keep: Vec<String> = samples.predictor_names().iter().filter(|n| *n != column).cloned().collect();
    let m: Matrix = samples.predictors.select(&keep)?;
    samples.predictors = PredictorMatrix::new(keep, m)?;
    Ok(labels)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_specs() {
        assert_eq!("random:k=5".parse::<FoldSpec>().unwrap(), FoldSpec::Random { k: 5 });
        assert_eq!("random".parse::<FoldSpec>().unwrap(), FoldSpec::Random { k: 10 });
        assert_eq!(
            "cluster:col=site".parse::<FoldSpec>().unwrap(),
            FoldSpec::Cluster { column: "site".into() }
        );
        assert!("random:k=1".parse::<FoldSpec>().is_err());
        assert!("file:col=".parse::<FoldSpec>().is_err());
        assert!("spatial".parse::<FoldSpec>().is_err());
    }

    #[test]
    fn precedence() {
        let t = SampleTable::from_matrix(vec!["a".into()], Matrix::from_rows(&[vec![1.0], vec![2.0]]).unwrap(), vec![0.0, 1.0]).unwrap();
        let specs = vec![
            FoldSpec::Random { k: 3 },
            FoldSpec::File { column: "f".into() },
            FoldSpec::Cluster { column: "c".into() },
        ];
        assert_eq!(choose(&specs, &t), FoldSpec::File { column: "f".into() });
        assert_eq!(choose(&specs[..1], &t), FoldSpec::Random { k: 3 });
        assert_eq!(choose(&[], &t), FoldSpec::Random { k: 10 });
        let t = t.with_clusters(vec![1, 2]).unwrap();
        assert_eq!(choose(&[], &t), FoldSpec::Cluster { column: "cluster".into() });
    }
}
