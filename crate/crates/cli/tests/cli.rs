use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use tempfile::TempDir;

const SMALL_CONFIG: &str = "\
grid_rows = 30
grid_cols = 30
predictors = 6
field_seed = 11
response_subset = 0, 1, 2, 3
mu1 = 2
mu2 = 0
sigma1 = 2
sigma2 = 1
responses = 1
sample_sizes = 40
replicates = 1
cv_folds = 5
n_trees = 40
mtry = 2, 4
quantiles = 0.25, 0.5, 0.9, 0.95, 0.99, 1
master_seed = 3
";

fn aoa(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_aoa"))
        .args(args)
        .env_remove("AOA_SEED")
        .output()
        .expect("run aoa")
}

fn ok(args: &[&str]) -> String {
    let out = aoa(args);
    assert!(
        out.status.success(),
        "aoa {args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

/// Simulated scenario directory plus a scratch directory.
fn scenario() -> (TempDir, PathBuf) {
    let tmp = TempDir::new().unwrap();
    let cfg = tmp.path().join("small.cfg");
    fs::write(&cfg, SMALL_CONFIG).unwrap();
    let out = tmp.path().join("sim");
    ok(&["-q", "simulate", "--config", s(&cfg), "--out-dir", s(&out), "--heatmaps"]);
    let dir = out.join("r00_n40_rep0");
    (tmp, dir)
}

fn stdout_value(text: &str, key: &str) -> String {
    text.lines()
        .find_map(|l| l.strip_prefix(&format!("{key}\t")))
        .unwrap_or_else(|| panic!("no `{key}` in {text}"))
        .to_string()
}

fn read_asc(path: &Path) -> Vec<f64> {
    let text = fs::read_to_string(path).unwrap();
    let mut nodata = f64::NAN;
    let mut values = Vec::new();
    for line in text.lines() {
        let first = line.split_whitespace().next().unwrap_or("");
        if first.chars().next().is_some_and(|c| c.is_ascii_alphabetic()) {
            if first.eq_ignore_ascii_case("nodata_value") {
                nodata = line.split_whitespace().nth(1).unwrap().parse().unwrap();
            }
            continue;
        }
        values.extend(line.split_whitespace().map(|t| {
            let v: f64 = t.parse().unwrap();
            if v == nodata {
                f64::NAN
            } else {
                v
            }
        }));
    }
    values
}

#[test]
fn help_and_usage_errors() {
    assert_eq!(aoa(&["--help"]).status.code(), Some(0));
    assert_eq!(aoa(&["--version"]).status.code(), Some(0));
    assert_eq!(aoa(&["train", "--bogus"]).status.code(), Some(1));
    assert_eq!(aoa(&[]).status.code(), Some(1));
    assert_eq!(
        aoa(&["cv", "--samples", "x.csv", "--folds", "spatial:k=3"]).status.code(),
        Some(1)
    );
    let out = aoa(&["aoa", "--di", "a.asc", "--training-di", "b.csv", "--quantile", "1.5", "--out", "m.asc"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("quantile"));
}

#[test]
fn data_errors_exit_2() {
    let tmp = TempDir::new().unwrap();
    let missing = tmp.path().join("missing.csv");
    let out = aoa(&["cv", "--samples", s(&missing)]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("missing.csv"));

    let bad = tmp.path().join("bad.csv");
    fs::write(&bad, "x,y,response,a\n0,0,1,oops\n").unwrap();
    let out = aoa(&["cv", "--samples", s(&bad)]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("row"));
}

#[test]
fn simulate_writes_artifacts() {
    let (_tmp, dir) = scenario();
    for f in [
        "truth.asc",
        "prediction.asc",
        "sd.asc",
        "di.asc",
        "aoa.asc",
        "samples.csv",
        "model.json",
        "importance.csv",
        "cv.csv",
        "training_di.csv",
        "scenario.json",
        "di.ppm",
        "predictors/x1.asc",
        "predictors/x6.asc",
    ] {
        assert!(dir.join(f).exists(), "missing {f}");
    }
    let cal = fs::read_to_string(dir.parent().unwrap().join("calibration.csv")).unwrap();
    assert!(cal.starts_with("quantile,scenario_id,cv_rmse,rmspe_in,rmspe_out,diff,n_inside,n_outside"));
}

#[test]
fn case_study_pipeline() {
    let (tmp, dir) = scenario();
    let t = tmp.path();
    let samples = dir.join("samples.csv");
    let grids = dir.join("predictors");
    let model = t.join("model.json");
    let imp = t.join("importance.csv");
    let cv = t.join("cv.csv");

    let out = ok(&[
        "-q", "train", "--samples", s(&samples), "--model", s(&model), "--importance", s(&imp), "--cv-report", s(&cv),
        "--trees", "60", "--mtry", "2,4", "--seed", "9",
    ]);
    // samples written by simulate carry a fold column, which wins by default
    assert_eq!(stdout_value(&out, "folds"), "file:col=fold");
    let cv_text = fs::read_to_string(&cv).unwrap();
    assert!(cv_text.starts_with("fold,n,rmse"));
    assert!(cv_text.contains("\npooled,40,"));
    assert!(fs::read_to_string(&imp).unwrap().starts_with("predictor,weight"));
    let cv_rmse: f64 = stdout_value(&out, "cv_rmse").parse().unwrap();

    let pred = t.join("pred.asc");
    let sd = t.join("sd.asc");
    ok(&["-q", "predict", "--model", s(&model), "--grids", s(&grids), "--out", s(&pred), "--sd", s(&sd)]);

    let di = t.join("di.asc");
    let tdi = t.join("tdi.csv");
    let out = ok(&[
        "-q", "di", "--samples", s(&samples), "--grids", s(&grids), "--model", s(&model), "--out", s(&di),
        "--training-di", s(&tdi), "--seed", "9",
    ]);
    assert_eq!(stdout_value(&out, "folds"), "file:col=fold");
    assert!(fs::read_to_string(&tdi).unwrap().contains("file:col=fold"));

    // quantile 1.0 keeps every cell up to the largest training DI
    let mask = t.join("mask.asc");
    let out = ok(&["-q", "aoa", "--di", s(&di), "--training-di", s(&tdi), "--quantile", "1.0", "--out", s(&mask)]);
    let threshold: f64 = stdout_value(&out, "threshold").parse().unwrap();
    let tdi_max = fs::read_to_string(&tdi)
        .unwrap()
        .lines()
        .skip(1)
        .map(|l| l.split(',').nth(4).unwrap().parse::<f64>().unwrap())
        .fold(f64::MIN, f64::max);
    assert_eq!(threshold, tdi_max);
    for (d, m) in read_asc(&di).iter().zip(read_asc(&mask)) {
        assert_eq!(m == 1.0, *d <= threshold, "di {d} mask {m}");
    }

    let mask95 = t.join("mask95.asc");
    let heat = t.join("di.ppm");
    ok(&["-q", "aoa", "--di", s(&di), "--training-di", s(&tdi), "--out", s(&mask95), "--heatmap", s(&heat)]);
    assert!(fs::read(&heat).unwrap().starts_with(b"P6\n30 30\n255\n"));

    let metrics_csv = t.join("metrics.csv");
    let truth = dir.join("truth.asc");
    let out = ok(&[
        "metrics", "--prediction", s(&pred), "--truth", s(&truth), "--mask", s(&mask95), "--out", s(&metrics_csv),
    ]);
    let inside: f64 = stdout_value(&out, "rmse").parse().unwrap();
    assert!(inside > 0.0 && inside < 4.0 * cv_rmse, "inside rmse {inside} vs cv {cv_rmse}");
    assert!(fs::read_to_string(&metrics_csv).unwrap().starts_with("n,rmse,pearson_r,r_squared"));
}

#[test]
fn seeded_runs_are_byte_identical() {
    let (tmp, dir) = scenario();
    let samples = dir.join("samples.csv");
    let run = |name: &str, seed_flag: bool| {
        let model = tmp.path().join(name);
        let mut cmd = Command::new(env!("CARGO_BIN_EXE_aoa"));
        cmd.args(["-q", "train", "--samples", s(&samples), "--model", s(&model), "--trees", "20", "--folds", "random:k=4"]);
        if seed_flag {
            cmd.args(["--seed", "77"]);
        } else {
            cmd.env("AOA_SEED", "77");
        }
        assert!(cmd.output().unwrap().status.success());
        fs::read(model).unwrap()
    };
    let a = run("a.json", true);
    let b = run("b.json", true);
    let c = run("c.json", false);
    assert_eq!(a, b);
    assert_eq!(a, c);
    let d = {
        let model = tmp.path().join("d.json");
        ok(&["-q", "train", "--samples", s(&samples), "--model", s(&model), "--trees", "20", "--folds", "random:k=4", "--seed", "78"]);
        fs::read(model).unwrap()
    };
    assert_ne!(a, d);
}

#[test]
fn fold_precedence_is_echoed() {
    let (tmp, dir) = scenario();
    let samples = dir.join("samples.csv");
    let out_path = tmp.path().join("cv.csv");
    ok(&[
        "-q", "cv", "--samples", s(&samples), "--trees", "20", "--folds", "random:k=3", "--folds", "file:col=fold",
        "--out", s(&out_path),
    ]);
    let text = fs::read_to_string(&out_path).unwrap();
    assert!(text.lines().skip(1).all(|l| l.ends_with("file:col=fold")), "{text}");

    ok(&["-q", "cv", "--samples", s(&samples), "--trees", "20", "--folds", "random:k=3", "--out", s(&out_path)]);
    let text = fs::read_to_string(&out_path).unwrap();
    assert_eq!(text.lines().filter(|l| l.contains("random:k=3")).count(), 5);
}

#[test]
fn expert_weights_bypass_the_forest() {
    let (tmp, dir) = scenario();
    let t = tmp.path();
    let weights = t.join("w.csv");
    fs::write(&weights, "predictor,weight\nx1,1\nx2,0.5\nx3,0\n").unwrap();
    let di = t.join("di.asc");
    let out = ok(&[
        "-q", "di", "--samples", s(&dir.join("samples.csv")), "--grids", s(&dir.join("predictors")), "--weights", s(&weights),
        "--out", s(&di),
    ]);
    assert!(stdout_value(&out, "mean_distance").parse::<f64>().unwrap() > 0.0);
    assert_eq!(read_asc(&di).len(), 900);

    fs::write(&weights, "predictor,weight\nnope,1\n").unwrap();
    let code = aoa(&[
        "di", "--samples", s(&dir.join("samples.csv")), "--grids", s(&dir.join("predictors")), "--weights", s(&weights),
        "--out", s(&di),
    ])
    .status
    .code();
    assert_eq!(code, Some(2));
}

#[test]
fn calibrate_writes_one_group_per_quantile() {
    let tmp = TempDir::new().unwrap();
    let cfg = tmp.path().join("small.cfg");
    fs::write(&cfg, SMALL_CONFIG.replace("replicates = 1", "replicates = 2")).unwrap();
    let out = tmp.path().join("cal.csv");
    ok(&["-q", "calibrate", "--config", s(&cfg), "--out", s(&out)]);
    let text = fs::read_to_string(&out).unwrap();
    let mut groups: Vec<String> = text.lines().skip(1).map(|l| l.split(',').next().unwrap().to_string()).collect();
    assert_eq!(groups.len(), 12);
    groups.dedup();
    assert_eq!(groups, ["0.25", "0.5", "0.9", "0.95", "0.99", "1"]);
}

#[test]
fn geometry_mismatch_is_a_data_error() {
    let tmp = TempDir::new().unwrap();
    let a = tmp.path().join("a.asc");
    let b = tmp.path().join("b.asc");
    fs::write(&a, "ncols 2\nnrows 1\nxllcorner 0\nyllcorner 0\ncellsize 1\nNODATA_value -9999\n1 2\n").unwrap();
    fs::write(&b, "ncols 1\nnrows 2\nxllcorner 0\nyllcorner 0\ncellsize 1\nNODATA_value -9999\n1\n2\n").unwrap();
    let out = aoa(&["metrics", "--prediction", s(&a), "--truth", s(&b)]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("geometry"));
}
