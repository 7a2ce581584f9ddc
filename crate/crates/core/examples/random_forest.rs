//! Plain random forest on a CSV train/test pair.
//!
//! cargo run --release --example random_forest -- data/yeast_train.csv data/yeast_test.csv 500

use std::time::Instant;

use gcforest::dataset::{load_csv, CsvSchema};
use gcforest::forest::{train_forest, ForestConfig};
use gcforest::metrics::accuracy;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let args: Vec<String> = std::env::args().collect();
    let train_path = args.get(1).map_or("data/yeast_train.csv", String::as_str);
    let test_path = args.get(2).map_or("data/yeast_test.csv", String::as_str);
    let n_trees: usize = args.get(3).map_or(Ok(500), |s| s.parse())?;

    let train = load_csv(train_path, &CsvSchema::label("class"))?;
    let test = load_csv(test_path, &CsvSchema::label("class").with_classes(train.classes.clone()))?;

    let t0 = Instant::now();
    let rows: Vec<usize> = (0..train.n_instances()).collect();
    let forest = train_forest(&train, &rows, &ForestConfig::random_forest(n_trees).with_seed(1))?;
    let fit_secs = t0.elapsed().as_secs_f64();
    let pred = forest.predict(&test.features)?;
    println!(
        "{n_trees} trees: test accuracy {:.4}, fit {fit_secs:.1}s",
        accuracy(&pred, &test.labels)?
    );
    Ok(())
}
