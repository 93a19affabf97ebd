use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use aoa_core::aoa::{aoa_mask, threshold_from_values, training_di_with_model, AoaMask, DEFAULT_QUANTILE};
use aoa_core::forest::{permutation_importance, train_forest, tune_mtry, ForestConfig, PermutationImportance, TrainedForest};
use aoa_core::io::{self, GridWriteOptions, Metrics, Palette};
use aoa_core::predictor_space::DissimilarityModel;
use aoa_core::rng::{derive_seed, stream};
use aoa_core::simulation::{run_catalogue, CatalogueConfig, CatalogueResult, ScenarioResult};
use aoa_core::validation::{cross_validate, pearson_r, rmse};
use aoa_core::{AoaError, Grid, PredictorMatrix, PredictorStack, SampleTable};
use log::{info, warn};

use crate::folds::{self, FoldSpec};
use crate::{CliError, CliResult, Command, ForestArgs, DEFAULT_SEED};

pub fn run(command: Command, explicit_seed: Option<u64>) -> CliResult {
    let seed = explicit_seed.unwrap_or(DEFAULT_SEED);
    match command {
        Command::Train {
            samples,
            model,
            importance,
            cv_report,
            mtry,
            forest,
            folds,
        } => train(&samples, &model, importance.as_deref(), cv_report.as_deref(), &mtry, &forest, &folds.folds, seed),
        Command::Importance { model, samples, out } => importance_cmd(&model, &samples, out.as_deref(), seed),
        Command::Cv {
            samples,
            mtry,
            out,
            forest,
            folds,
        } => cv(&samples, mtry, out.as_deref(), &forest, &folds.folds, seed),
        Command::Predict { model, grids, out, sd } => predict(&model, &grids, &out, sd.as_deref()),
        Command::Di {
            samples,
            grids,
            model,
            weights,
            out,
            training_di,
            folds,
        } => di(&samples, &grids, model.as_deref(), weights.as_deref(), &out, training_di.as_deref(), &folds.folds, seed),
        Command::Aoa {
            di,
            training_di,
            quantile,
            out,
            heatmap,
        } => aoa(&di, &training_di, quantile, &out, heatmap.as_deref()),
        Command::Calibrate { config, out, quantiles } => calibrate(&config, &out, &quantiles, explicit_seed),
        Command::Simulate { config, out_dir, heatmaps } => simulate(&config, &out_dir, heatmaps, explicit_seed),
        Command::Metrics {
            prediction,
            truth,
            mask,
            outside,
            out,
        } => metrics(&prediction, &truth, mask.as_deref(), outside, out.as_deref()),
        Command::Heatmap { grid, out, mask, palette } => heatmap(&grid, &out, mask.as_deref(), &palette),
    }
}

fn write_text(path: &Path, text: &str) -> CliResult {
    io::write_atomic(path, text.as_bytes())?;
    info!("wrote {}", path.display());
    Ok(())
}

fn write_grid(grid: &Grid, path: &Path) -> CliResult {
    io::write_grid(grid, path, GridWriteOptions::default())?;
    info!("wrote {}", path.display());
    Ok(())
}

/// Every `.asc` file in `dir`, named by file stem.
fn read_stack(dir: &Path) -> CliResult<PredictorStack> {
    let entries = std::fs::read_dir(dir).map_err(|e| AoaError::Io {
        path: dir.display().to_string(),
        source: e,
    })?;
    let mut files: Vec<PathBuf> = entries
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x.eq_ignore_ascii_case("asc")))
        .collect();
    files.sort();
    if files.is_empty() {
        return Err(AoaError::InvalidInput(format!("no .asc grids in {}", dir.display())).into());
    }
    let mut names = Vec::new();
    let mut layers = Vec::new();
    for f in files {
        names.push(f.file_stem().unwrap_or_default().to_string_lossy().into_owned());
        layers.push(io::read_grid(&f)?);
    }
    Ok(PredictorStack::new(names, layers)?)
}

fn load_samples(path: &Path, predictors: &[String]) -> CliResult<SampleTable> {
    let mut samples = io::read_samples(path)?;
    if !predictors.is_empty() {
        let m = samples.predictors.select(predictors)?;
        samples.predictors = PredictorMatrix::new(predictors.to_vec(), m)?;
    }
    Ok(samples)
}

fn forest_config(args: &ForestArgs, seed: u64) -> CliResult<ForestConfig> {
    if args.trees == 0 || args.min_node_size == 0 {
        return Err(CliError::Usage("--trees and --min-node-size must be at least 1".into()));
    }
    Ok(ForestConfig {
        n_trees: args.trees,
        min_node_size: args.min_node_size,
        seed: derive_seed(seed, &[stream::FOREST]),
        ..ForestConfig::default()
    })
}

fn importance_of(forest: &TrainedForest, samples: &SampleTable, seed: u64) -> CliResult<PermutationImportance> {
    Ok(permutation_importance(forest, samples, derive_seed(seed, &[stream::IMPORTANCE]))?)
}

#[allow(clippy::too_many_arguments)]
fn train(
    samples_path: &Path,
    model_path: &Path,
    importance_path: Option<&Path>,
    cv_path: Option<&Path>,
    mtry: &[usize],
    args: &ForestArgs,
    fold_specs: &[FoldSpec],
    seed: u64,
) -> CliResult {
    let mut samples = load_samples(samples_path, &args.predictors)?;
    let spec = folds::choose(fold_specs, &samples);
    let folds = folds::resolve(&spec, &mut samples, derive_seed(seed, &[stream::FOLDS]))?;
    samples.ensure_complete()?;
    let p = samples.predictor_names().len();
    let grid: Vec<usize> = if mtry.is_empty() {
        let even: Vec<usize> = (2..=p).step_by(2).collect();
        if even.is_empty() {
            vec![1]
        } else {
            even
        }
    } else {
        mtry.to_vec()
    };
    let config = forest_config(args, seed)?;
    let (tuning, report) = tune_mtry(&samples, &grid, &folds, &config)?;
    for r in &tuning.records {
        info!("mtry {}: cv rmse {:.6}", r.mtry, r.rmse);
    }
    let mut forest = train_forest(&samples, &config.with_mtry(tuning.best_mtry))?;
    forest.set_tuning(tuning.clone());
    io::write_model(&forest, model_path)?;
    info!("wrote {}", model_path.display());

    if let Some(path) = importance_path {
        write_text(path, &io::importance_csv(&importance_of(&forest, &samples, seed)?)?)?;
    }
    if let Some(path) = cv_path {
        write_text(path, &io::cv_report_csv(&report)?)?;
    }
    println!("folds\t{}", folds.strategy());
    println!("mtry\t{}", tuning.best_mtry);
    println!("cv_rmse\t{}", report.rmse);
    println!("cv_r_squared\t{}", report.r_squared);
    Ok(())
}

fn importance_cmd(model_path: &Path, samples_path: &Path, out: Option<&Path>, seed: u64) -> CliResult {
    let forest = io::read_model(model_path)?;
    let samples = io::read_samples(samples_path)?;
    let csv = io::importance_csv(&importance_of(&forest, &samples, seed)?)?;
    match out {
        Some(path) => write_text(path, &csv),
        None => {
            print!("{csv}");
            Ok(())
        }
    }
}

fn cv(samples_path: &Path, mtry: Option<usize>, out: Option<&Path>, args: &ForestArgs, fold_specs: &[FoldSpec], seed: u64) -> CliResult {
    let mut samples = load_samples(samples_path, &args.predictors)?;
    let spec = folds::choose(fold_specs, &samples);
    let folds = folds::resolve(&spec, &mut samples, derive_seed(seed, &[stream::FOLDS]))?;
    let mut config = forest_config(args, seed)?;
    config.mtry = mtry;
    let report = cross_validate(&samples, &folds, &config)?;
    let csv = io::cv_report_csv(&report)?;
    match out {
        Some(path) => write_text(path, &csv),
        None => {
            print!("{csv}");
            Ok(())
        }
    }
}

fn predict(model_path: &Path, grids: &Path, out: &Path, sd: Option<&Path>) -> CliResult {
    let forest = io::read_model(model_path)?;
    let stack = read_stack(grids)?;
    write_grid(&forest.predict_stack(&stack)?, out)?;
    if let Some(path) = sd {
        write_grid(&forest.ensemble_sd_stack(&stack)?, path)?;
    }
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn di(
    samples_path: &Path,
    grids: &Path,
    model_path: Option<&Path>,
    weights_path: Option<&Path>,
    out: &Path,
    training_path: Option<&Path>,
    fold_specs: &[FoldSpec],
    seed: u64,
) -> CliResult {
    let mut samples = io::read_samples(samples_path)?;
    let spec = folds::choose(fold_specs, &samples);
    let folds = folds::resolve(&spec, &mut samples, derive_seed(seed, &[stream::FOLDS]))?;

    let weights = match (weights_path, model_path) {
        (Some(path), _) => {
            info!("using weights from {}", path.display());
            io::read_importance_csv(path)?
        }
        (None, Some(path)) => {
            let forest = io::read_model(path)?;
            importance_of(&forest, &samples, seed)?.to_weights()?
        }
        (None, None) => return Err(CliError::Usage("di needs --model or --weights".into())),
    };
    let stack = read_stack(grids)?;
    let names = weights.names().to_vec();
    for n in &names {
        stack.layer(n)?;
    }
    let model = DissimilarityModel::fit(&samples, &names, &weights)?;
    let grid = model.di_grid(&stack)?;
    write_grid(&grid, out)?;

    let training = training_di_with_model(&model, &folds, &[DEFAULT_QUANTILE])?;
    if let Some(path) = training_path {
        write_text(path, &io::training_di_csv(&samples, &training)?)?;
    }
    println!("folds\t{}", folds.strategy());
    println!("mean_distance\t{}", model.mean_distance());
    println!("threshold_q{DEFAULT_QUANTILE}\t{}", training.threshold(DEFAULT_QUANTILE)?);
    Ok(())
}

fn aoa(di_path: &Path, training_path: &Path, quantile: f64, out: &Path, heatmap: Option<&Path>) -> CliResult {
    if !(quantile > 0.0 && quantile <= 1.0) {
        return Err(CliError::Usage(format!("--quantile must lie in (0, 1], got {quantile}")));
    }
    let di = io::read_grid(di_path)?;
    let training = io::read_training_di_csv(training_path)?;
    let threshold = threshold_from_values(&training, quantile)?;
    let mask = aoa_mask(&di, threshold)?.with_quantile(quantile);
    write_grid(&mask.to_grid(), out)?;
    if let Some(path) = heatmap {
        io::export_heatmap(&di, path, Palette::Viridis, Some(&mask))?;
        info!("wrote {}", path.display());
    }
    let c = mask.counts();
    println!("quantile\t{quantile}");
    println!("threshold\t{threshold}");
    println!("inside\t{}", c.inside);
    println!("outside\t{}", c.outside);
    println!("missing\t{}", c.missing);
    Ok(())
}

fn load_catalogue(path: &Path, explicit_seed: Option<u64>) -> CliResult<CatalogueConfig> {
    let text = std::fs::read_to_string(path).map_err(|e| AoaError::Io {
        path: path.display().to_string(),
        source: e,
    })?;
    let mut cfg = CatalogueConfig::parse(&text)?;
    if let Some(seed) = explicit_seed {
        cfg.master_seed = seed;
    }
    Ok(cfg)
}

fn run_config(cfg: &CatalogueConfig) -> CliResult<CatalogueResult> {
    let specs = cfg.expand();
    info!("running {} scenarios", specs.len());
    let result = run_catalogue(&specs, None)?;
    for (id, err) in &result.failures {
        warn!("scenario {id} skipped: {err}");
    }
    Ok(result)
}

fn calibrate(config: &Path, out: &Path, quantiles: &[f64], explicit_seed: Option<u64>) -> CliResult {
    let mut cfg = load_catalogue(config, explicit_seed)?;
    if !quantiles.is_empty() {
        cfg.quantiles = quantiles.to_vec();
        cfg.validate()?;
    }
    let result = run_config(&cfg)?;
    let table = result.calibrate(&cfg.quantiles)?;
    write_text(out, &io::calibration_csv(&table)?)?;
    println!("quantile\tmean_diff\tmedian_diff\tscenarios\tempty_aoa");
    for s in &table.summary {
        println!("{}\t{}\t{}\t{}\t{}", s.quantile, s.mean_diff, s.median_diff, s.n_scenarios, s.n_missing);
    }
    Ok(())
}

fn simulate(config: &Path, out_dir: &Path, heatmaps: bool, explicit_seed: Option<u64>) -> CliResult {
    let cfg = load_catalogue(config, explicit_seed)?;
    let specs = cfg.expand();
    let result = run_config(&cfg)?;
    for r in &result.results {
        let spec = specs.iter().find(|s| s.id == r.id).expect("result for a known spec");
        let json = serde_json::to_string_pretty(&serde_json::json!({ "spec": spec, "seeds": r.seeds }))
            .map_err(AoaError::from)?;
        write_scenario(r, &out_dir.join(&r.id), &json, heatmaps)?;
    }
    write_text(&out_dir.join("calibration.csv"), &io::calibration_csv(&result.calibrate(&cfg.quantiles)?)?)?;
    println!("scenarios\t{}", result.results.len());
    println!("failed\t{}", result.failures.len());
    Ok(())
}

fn write_scenario(r: &ScenarioResult, dir: &Path, spec_json: &str, heatmaps: bool) -> CliResult {
    for (name, layer) in r.stack.names().iter().zip(r.stack.layers()) {
        write_grid(layer, &dir.join("predictors").join(format!("{name}.asc")))?;
    }
    write_grid(&r.truth, &dir.join("truth.asc"))?;
    write_grid(&r.prediction, &dir.join("prediction.asc"))?;
    write_grid(&r.forest.ensemble_sd_stack(&r.stack)?, &dir.join("sd.asc"))?;
    write_grid(&r.di, &dir.join("di.asc"))?;

    let quantile = if r.training_di.thresholds.iter().any(|(q, _)| *q == DEFAULT_QUANTILE) {
        DEFAULT_QUANTILE
    } else {
        r.training_di.thresholds.last().map(|(q, _)| *q).unwrap_or(DEFAULT_QUANTILE)
    };
    let mask = r.aoa_mask(quantile)?;
    write_grid(&mask.to_grid(), &dir.join("aoa.asc"))?;

    let labels: Vec<i64> = r.folds.folds().iter().map(|&f| f as i64).collect();
    let samples = r.samples.clone().with_folds(labels)?;
    write_text(&dir.join("samples.csv"), &io::render_samples(&samples)?)?;
    io::write_model(&r.forest, &dir.join("model.json"))?;
    write_text(&dir.join("importance.csv"), &io::importance_csv(&r.importance)?)?;
    write_text(&dir.join("cv.csv"), &io::cv_report_csv(&r.cv)?)?;
    write_text(&dir.join("training_di.csv"), &io::training_di_csv(&r.samples, &r.training_di)?)?;
    write_text(&dir.join("scenario.json"), spec_json)?;
    if heatmaps {
        io::export_heatmap(&r.di, &dir.join("di.ppm"), Palette::Viridis, Some(&mask))?;
        io::export_heatmap(&r.prediction, &dir.join("prediction.ppm"), Palette::Viridis, Some(&mask))?;
        io::export_heatmap(&r.truth, &dir.join("truth.ppm"), Palette::Viridis, None)?;
    }
    Ok(())
}

fn metrics(pred_path: &Path, truth_path: &Path, mask_path: Option<&Path>, outside: bool, out: Option<&Path>) -> CliResult {
    let pred = io::read_grid(pred_path)?;
    let truth = io::read_grid(truth_path)?;
    pred.geometry.ensure_same(&truth.geometry, "prediction vs truth")?;
    let selected: Vec<bool> = match mask_path {
        Some(path) => {
            let grid = io::read_grid(path)?;
            grid.geometry.ensure_same(&pred.geometry, "mask vs prediction")?;
            let mask = AoaMask::from_grid(&grid);
            if outside {
                mask.outside()
            } else {
                mask.inside()
            }
        }
        None => vec![true; pred.len()],
    };
    let (p, t): (Vec<f64>, Vec<f64>) = pred
        .values
        .iter()
        .zip(&truth.values)
        .zip(&selected)
        .filter(|((p, t), s)| **s && !p.is_nan() && !t.is_nan())
        .map(|((p, t), _)| (*p, *t))
        .unzip();
    if p.is_empty() {
        return Err(AoaError::InvalidInput("no cells with both prediction and truth in the selection".into()).into());
    }
    let r = pearson_r(&p, &t).unwrap_or(f64::NAN);
    let m = Metrics {
        n: p.len(),
        rmse: rmse(&p, &t, None)?,
        pearson_r: r,
        r_squared: r * r,
    };
    let mut text = String::new();
    let _ = writeln!(text, "n\t{}\nrmse\t{}\npearson_r\t{}\nr_squared\t{}", m.n, m.rmse, m.pearson_r, m.r_squared);
    print!("{text}");
    if let Some(path) = out {
        write_text(path, &io::metrics_csv(&m)?)?;
    }
    Ok(())
}

fn heatmap(grid_path: &Path, out: &Path, mask_path: Option<&Path>, palette: &str) -> CliResult {
    let palette: Palette = palette.parse().map_err(|e: AoaError| CliError::Usage(e.to_string()))?;
    let grid = io::read_grid(grid_path)?;
    let mask = mask_path.map(|p| io::read_grid(p).map(|g| AoaMask::from_grid(&g))).transpose()?;
    io::export_heatmap(&grid, out, palette, mask.as_ref())?;
    info!("wrote {}", out.display());
    Ok(())
}

