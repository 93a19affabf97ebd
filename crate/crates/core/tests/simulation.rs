//! Scenario runner behavior on small landscapes.

use aoa_core::simulation::{
    generate_predictor_stack, pca_first_two, run_catalogue, run_scenario, sample_clustered, CatalogueConfig, FieldSpec,
    ParentLink, PredictorRecipe, ScenarioSpec,
};
use aoa_core::validation::assign_cluster_folds;

const SMALL: &str = "
grid_rows = 40
grid_cols = 40
predictors = 6
field_seed = 11
response_subset = 0, 1, 2, 3, 4, 5
mu1 = 2
mu2 = 0
sigma1 = 2
sigma2 = 2
responses = 1
combination = multiplicative
design = random
sample_sizes = 60
replicates = 2
cv = random
cv_folds = 5
n_trees = 60
min_node_size = 5
mtry = 2, 4
quantiles = 0.5, 0.95
master_seed = 3
";

fn specs(extra: &str) -> Vec<ScenarioSpec> {
    CatalogueConfig::parse(&format!("{SMALL}{extra}")).unwrap().expand()
}

#[test]
fn scenarios_are_deterministic() {
    let spec = &specs("")[0];
    let a = run_scenario(spec).unwrap();
    let b = run_scenario(spec).unwrap();
    assert_eq!(a.prediction.values, b.prediction.values);
    assert_eq!(a.di.values, b.di.values);
    assert_eq!(a.importance, b.importance);
    assert_eq!(a.seeds, b.seeds);
}

#[test]
fn catalogue_order_does_not_matter() {
    let s = specs("");
    let forward = run_catalogue(&s, Some(1)).unwrap();
    let reversed: Vec<ScenarioSpec> = s.iter().rev().cloned().collect();
    let backward = run_catalogue(&reversed, Some(3)).unwrap();
    let a = forward.calibrate(&[0.95]).unwrap();
    let b = backward.calibrate(&[0.95]).unwrap();
    assert_eq!(a.summary, b.summary);
}

#[test]
fn truth_spans_unit_interval() {
    let r = run_scenario(&specs("")[0]).unwrap();
    let (lo, hi) = r.truth.finite_range().unwrap();
    assert_eq!((lo, hi), (0.0, 1.0));
}

#[test]
fn leaked_response_predicts_itself() {
    let plain = run_scenario(&specs("")[0]).unwrap();
    let leak = run_scenario(&specs("leak_response = true\n")[0]).unwrap();
    assert!(leak.importance.names.iter().any(|n| n == "response"));
    let top = leak
        .importance
        .values
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.total_cmp(b.1))
        .unwrap()
        .0;
    assert_eq!(leak.importance.names[top], "response");
    let rin = |r: &aoa_core::simulation::ScenarioResult| r.aoa_stats(0.95).unwrap().rmspe_in.unwrap();
    assert!(rin(&leak) < 0.05, "leaky rmspe_in {}", rin(&leak));
    assert!(rin(&leak) < rin(&plain));
}

#[test]
fn perfectly_correlated_subset_fails_cleanly() {
    let mut field = FieldSpec::desk(20, 20, 6, 4);
    field.predictors[1] = PredictorRecipe {
        parent: Some(ParentLink {
            index: 0,
            slope: 2.0,
            intercept: 1.0,
        }),
        ..PredictorRecipe::constant("x2", 0.0)
    };
    let stack = generate_predictor_stack(&field).unwrap();
    assert!(pca_first_two(&stack, &[0, 1, 2]).is_err());
}

#[test]
fn fifty_clusters_give_fifty_folds() {
    let field = FieldSpec::desk(100, 100, 6, 9);
    let stack = generate_predictor_stack(&field).unwrap();
    let truth = stack.layers()[0].clone();
    let samples = sample_clustered(&stack, &truth, 50, 10, 3.0, 17).unwrap();
    assert_eq!(samples.len(), 500);
    let folds = assign_cluster_folds(samples.cluster.as_ref().unwrap()).unwrap();
    assert_eq!(folds.n_folds(), 50);
    assert!(folds.fold_sizes().iter().all(|&s| s == 10));
    let geom = stack.geometry();
    let mut cells: Vec<usize> = samples
        .x
        .iter()
        .zip(&samples.y)
        .map(|(&x, &y)| geom.cell_at(x, y).unwrap())
        .collect();
    cells.sort_unstable();
    cells.dedup();
    assert_eq!(cells.len(), 500);
}

#[test]
fn scenario_errors_name_the_scenario() {
    let mut spec = specs("")[0].clone();
    spec.response.subset = vec![0, 0, 1];
    let err = run_scenario(&spec).unwrap_err().to_string();
    assert!(err.contains(&spec.id), "{err}");
}
