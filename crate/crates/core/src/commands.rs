//! Command implementations behind the `gcforest` binary.

use std::path::{Path, PathBuf};

use crate::bench::{run_suite, BenchReport, BenchSettings, Suite};
use crate::config::RunConfig;
use crate::dataset::{load_csv, load_features_csv, CsvSchema, Dataset};
use crate::error::{Error, Result};
use crate::model::{fit_with_stats, GcModel};
use crate::persist::{load, save_with_probe};
use crate::report::EvalReport;

#[derive(Debug, Clone)]
pub struct TrainOutput {
    pub model_path: PathBuf,
    pub probe_path: PathBuf,
    /// On the estimating split (or the training rows for the training criterion).
    pub report: EvalReport,
    pub test_report: Option<EvalReport>,
}

fn load_train(cfg: &RunConfig) -> Result<Dataset> {
    let ds = load_csv(&cfg.train, &CsvSchema::label(cfg.label_column.clone()))?;
    match cfg.panel_shape {
        Some([h, w]) => ds.with_panel_shape(h, w),
        None => Ok(ds),
    }
}

fn load_labelled(model: &GcModel, path: &Path, label_column: &str) -> Result<Dataset> {
    load_csv(
        path,
        &CsvSchema::label(label_column).with_classes(model.classes().to_vec()),
    )
}

/// Train from a run config, save the model and probe file, write reports.
pub fn cmd_train(config_path: impl AsRef<Path>) -> Result<TrainOutput> {
    let cfg = RunConfig::load(config_path)?;
    let train = load_train(&cfg)?;
    let gc = cfg.gc_config(&train)?;
    log::info!(
        "training on {} ({} rows, {} features, {} classes)",
        cfg.train.display(),
        train.n_instances(),
        train.n_features(),
        train.n_classes()
    );
    let (model, stats) = fit_with_stats(&train, &gc)?;

    let probe_rows: Vec<usize> = (0..train.n_instances().min(cfg.probe_rows)).collect();
    let probe_path = save_with_probe(&model, &cfg.model, &train.features.select_rows(&probe_rows))?;

    let report = if stats.growth.holdout_truth.is_empty() {
        let pred = model.predict_batch(&train.features)?;
        EvalReport::new("training", &pred.labels, &train.labels, &model, Some(&stats))?
    } else {
        EvalReport::new(
            "estimating",
            &stats.growth.holdout_pred,
            &stats.growth.holdout_truth,
            &model,
            Some(&stats),
        )?
    };
    report.write_json(&cfg.report)?;

    let test_report = match &cfg.test {
        Some(path) => {
            let test = load_labelled(&model, path, &cfg.label_column)?;
            let pred = model.predict_batch(&test.features)?;
            let r = EvalReport::new("test", &pred.labels, &test.labels, &model, Some(&stats))?;
            r.write_json(cfg.test_report_path())?;
            Some(r)
        }
        None => None,
    };
    Ok(TrainOutput {
        model_path: cfg.model,
        probe_path,
        report,
        test_report,
    })
}

/// Predict every row of `input` and write `label,p_<class>...` rows to
/// `output`. A column named `label_column` in the input is ignored.
pub fn cmd_predict(
    model_path: impl AsRef<Path>,
    input: impl AsRef<Path>,
    output: impl AsRef<Path>,
    label_column: &str,
) -> Result<usize> {
    let model = load(model_path)?;
    let x = load_features_csv(input, Some(label_column))?;
    let pred = model.predict_batch(&x)?;
    let output = output.as_ref();
    let csv_err = |e: csv::Error| Error::Csv(e.to_string());
    let mut w = csv::Writer::from_path(output).map_err(csv_err)?;
    let header: Vec<String> = std::iter::once("label".to_string())
        .chain(model.classes().iter().map(|c| format!("p_{c}")))
        .collect();
    w.write_record(&header).map_err(csv_err)?;
    for (i, &label) in pred.labels.iter().enumerate() {
        let rec: Vec<String> = std::iter::once(model.classes()[label].clone())
            .chain(pred.probs.row(i).iter().map(|p| format!("{p:?}")))
            .collect();
        w.write_record(&rec).map_err(csv_err)?;
    }
    w.flush().map_err(|e| Error::io(output, e))?;
    Ok(pred.labels.len())
}

pub fn cmd_evaluate(model_path: impl AsRef<Path>, test: impl AsRef<Path>, label_column: &str) -> Result<EvalReport> {
    let model = load(model_path)?;
    let test = test.as_ref();
    let ds = load_labelled(&model, test, label_column)?;
    let pred = model.predict_batch(&ds.features)?;
    EvalReport::new(test.display().to_string(), &pred.labels, &ds.labels, &model, None)
}

pub fn cmd_benchmark(suite: Suite, settings: &BenchSettings) -> Result<BenchReport> {
    run_suite(suite, settings)
}
