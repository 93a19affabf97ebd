//! File round-trips and image output through real files.

mod support;

use aoa_core::aoa::aoa_mask;
use aoa_core::forest::{train_forest, ForestConfig};
use aoa_core::io::{
    export_heatmap, read_grid, read_model, read_samples, write_grid, write_model, write_samples, GridWriteOptions, Palette,
    MASK_COLOR, MISSING_COLOR,
};
use aoa_core::predictor_space::{DissimilarityModel, ImportanceWeights};
use aoa_core::{Grid, GridGeometry, PredictorStack};
use approx::assert_relative_eq;

#[test]
fn large_grid_round_trips_through_a_file() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("field.asc");
    let mut geom = GridGeometry::new(100, 100, 25.0).unwrap();
    geom.xllcorner = 500_000.0;
    geom.yllcorner = 4_200_000.5;
    let values: Vec<f64> = (0..10_000)
        .map(|i| if i % 97 == 0 { f64::NAN } else { (i as f64 * 0.37).sin() * 1e3 / (1 + i % 7) as f64 })
        .collect();
    let grid = Grid::new(geom, values).unwrap();

    write_grid(&grid, &path, GridWriteOptions { significant_digits: None }).unwrap();
    let back = read_grid(&path).unwrap();
    assert_eq!(back.geometry, grid.geometry);
    for (a, b) in grid.values.iter().zip(&back.values) {
        assert!(a.is_nan() && b.is_nan() || a == b);
    }

    write_grid(&grid, &path, GridWriteOptions::default()).unwrap();
    let rounded = read_grid(&path).unwrap();
    for (a, b) in grid.values.iter().zip(&rounded.values) {
        if !a.is_nan() {
            assert_relative_eq!(*a, *b, max_relative = 5e-6);
        }
    }
    // no temp files left behind
    assert_eq!(std::fs::read_dir(dir.path()).unwrap().count(), 1);
}

#[test]
fn samples_and_model_round_trip_through_files() {
    let dir = tempfile::tempdir().unwrap();
    let rows: Vec<Vec<f64>> = (0..30).map(|i| vec![i as f64 / 7.0, (i as f64).cos(), 1.0 / (i + 1) as f64]).collect();
    let mut samples = support::table(&rows).with_folds((0..30).map(|i| i % 3).collect()).unwrap();
    samples.x = (0..30).map(|i| i as f64 + 0.5).collect();
    samples.y = (0..30).map(|i| 100.0 - i as f64).collect();
    let path = dir.path().join("samples.csv");
    write_samples(&samples, &path).unwrap();
    assert_eq!(read_samples(&path).unwrap(), samples);

    let forest = train_forest(&samples, &ForestConfig::default().with_trees(10).with_seed(6)).unwrap();
    let model_path = dir.path().join("nested/model.json");
    write_model(&forest, &model_path).unwrap();
    let back = read_model(&model_path).unwrap();
    assert_eq!(back, forest);
    assert_eq!(back.predict(&samples.predictors).unwrap(), forest.predict(&samples.predictors).unwrap());
}

#[test]
fn corrupt_files_are_errors() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.asc");
    std::fs::write(&path, "ncols 2\nnrows 2\ncellsize 1\n1 2 3\n").unwrap();
    assert!(read_grid(&path).is_err());
    assert!(read_grid(&dir.path().join("missing.asc")).is_err());
    std::fs::write(&path, "{\"schema_version\": 99}").unwrap();
    assert!(read_model(&path).is_err());
}

#[test]
fn heatmap_marks_cells_outside_the_aoa() {
    let dir = tempfile::tempdir().unwrap();
    let geom = GridGeometry::new(6, 8, 1.0).unwrap();
    let values: Vec<f64> = (0..48).map(|i| if i == 47 { f64::NAN } else { (i % 8) as f64 }).collect();
    let stack = PredictorStack::new(support::names(1), vec![Grid::new(geom, values).unwrap()]).unwrap();
    let names = support::names(1);
    let train = support::table(&[vec![0.0], vec![1.0], vec![2.0]]);
    let model = DissimilarityModel::fit(&train, &names, &ImportanceWeights::uniform(&names)).unwrap();
    let di = model.di_grid(&stack).unwrap();
    let mask = aoa_mask(&di, 1.0).unwrap();

    let path = dir.path().join("di.ppm");
    export_heatmap(&di, &path, Palette::Grayscale, Some(&mask)).unwrap();
    let bytes = std::fs::read(&path).unwrap();
    let header = b"P6\n8 6\n255\n";
    assert_eq!(&bytes[..header.len()], header);
    assert_eq!(bytes.len(), header.len() + 48 * 3);
    let pixel = |r: usize, c: usize| -> [u8; 3] {
        let k = header.len() + 3 * (r * 8 + c);
        [bytes[k], bytes[k + 1], bytes[k + 2]]
    };
    // mean distance among 0, 1, 2 is 4/3, so DI = distance * 0.75
    // (standardized by sd 1); column c sits at distance max(c - 2, 0)
    for r in 0..6 {
        for c in 0..8 {
            if r * 8 + c == 47 {
                assert_eq!(pixel(r, c), MISSING_COLOR);
            } else if c > 3 {
                assert_eq!(pixel(r, c), MASK_COLOR, "cell {r},{c}");
            } else {
                let g = pixel(r, c)[0];
                assert_eq!(pixel(r, c), [g, g, g]);
            }
        }
    }
    assert_eq!(pixel(0, 0), [0, 0, 0]);
    // columns 0..=2 have DI 0, column 3 DI 0.75, range max 3.75
    assert_eq!(pixel(2, 3)[0], (0.75f64 / 3.75 * 255.0).round() as u8);
}
