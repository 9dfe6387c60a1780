//! End-to-end orchestration: manifest to evaluation report in one call,
//! plus the window-size / k sweep. Every run is deterministic for a
//! given config, and all artifacts land under the configured output
//! directory with fixed names.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::artifacts::{
    write_confusion_csv, write_confusion_svg, write_json, write_predictions_csv,
    write_roc_csv, write_roc_svg, PredictionRow,
};
use crate::asfe::{run_asfe, AsfeConfig, AsfeReport};
use crate::dataset::{load_manifest, load_records, split_records, Partition, SignalRecord};
use crate::error::{Error, Result};
use crate::eval::{
    argmax_labels, evaluate, subsequence_correlation, CorrelationSummary, EvalReport,
};
use crate::features::build_feature_table;
use crate::gbt::{self, GbtHyperParams, GbtModel};
use crate::nosw::segment_dataset;
use crate::table::FeatureTable;
use crate::task::TaskKind;

fn default_window_size() -> usize {
    4096
}
fn default_train_fraction() -> f64 {
    0.8
}
fn default_seed() -> u64 {
    42
}
fn default_true() -> bool {
    true
}
fn default_correlation_segments() -> usize {
    12
}

/// One config document drives a whole run. Only `manifest` and `out_dir`
/// are required in the JSON form; everything else has the documented
/// default.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PipelineConfig {
    /// Dataset manifest path.
    pub manifest: PathBuf,
    /// Artifact directory; created if missing.
    #[serde(default)]
    pub out_dir: PathBuf,
    #[serde(default = "default_window_size")]
    pub window_size: usize,
    #[serde(default = "default_train_fraction")]
    pub train_fraction: f64,
    #[serde(default = "default_seed")]
    pub seed: u64,
    #[serde(default)]
    pub task: TaskKind,
    #[serde(default = "default_true")]
    pub asfe_enabled: bool,
    #[serde(default)]
    pub asfe: AsfeConfig,
    #[serde(default)]
    pub gbt: GbtHyperParams,
    /// How many leading test-signal windows feed the sub-sequence
    /// correlation analysis in the report; 0 disables it. Kept small
    /// because the matrix grows quadratically.
    #[serde(default = "default_correlation_segments")]
    pub correlation_segments: usize,
}

impl PipelineConfig {
    /// Minimal config with the documented defaults everywhere else.
    pub fn new(manifest: impl Into<PathBuf>, out_dir: impl Into<PathBuf>) -> Self {
        PipelineConfig {
            manifest: manifest.into(),
            out_dir: out_dir.into(),
            window_size: default_window_size(),
            train_fraction: default_train_fraction(),
            seed: default_seed(),
            task: TaskKind::default(),
            asfe_enabled: true,
            asfe: AsfeConfig::default(),
            gbt: GbtHyperParams::default(),
            correlation_segments: default_correlation_segments(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.manifest.as_os_str().is_empty() {
            return Err(Error::Config("config needs a manifest path".into()));
        }
        if self.out_dir.as_os_str().is_empty() {
            return Err(Error::Config("config needs an output directory".into()));
        }
        if self.window_size == 0 {
            return Err(Error::Config("window_size must be at least 1".into()));
        }
        if !(self.train_fraction > 0.0 && self.train_fraction < 1.0) {
            return Err(Error::Config(format!(
                "train_fraction must lie strictly between 0 and 1, got {}",
                self.train_fraction
            )));
        }
        if self.asfe_enabled {
            self.asfe.validate()?;
        }
        self.gbt.validate()
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let config: PipelineConfig = serde_json::from_str(&text).map_err(|e| {
            Error::parse(path, format!("line {}, column {}: {}", e.line(), e.column(), e))
        })?;
        Ok(config)
    }

    /// The boosting hyperparameters with the class count forced to match
    /// the task, so configs never have to state it twice.
    fn gbt_for_task(&self) -> GbtHyperParams {
        GbtHyperParams {
            num_classes: self.task.num_classes(),
            ..self.gbt.clone()
        }
    }

    fn asfe_for_task(&self) -> AsfeConfig {
        let mut asfe = self.asfe.clone();
        asfe.probe.num_classes = self.task.num_classes();
        asfe
    }
}

/// What [`run`] leaves behind, with the heavyweight artifacts on disk
/// and the headline results in memory.
#[derive(Debug, Clone)]
pub struct RunArtifacts {
    pub out_dir: PathBuf,
    pub report: EvalReport,
    pub asfe_report: Option<AsfeReport>,
    pub model_path: PathBuf,
    pub train_rows: usize,
    pub test_rows: usize,
}

struct StageLog {
    lines: Vec<String>,
    started: Instant,
}

impl StageLog {
    fn new() -> Self {
        StageLog {
            lines: Vec::new(),
            started: Instant::now(),
        }
    }

    fn note(&mut self, message: impl AsRef<str>) {
        let message = message.as_ref();
        log::info!("{message}");
        let mut line = String::new();
        let _ = write!(line, "[{:9.3}s] {message}", self.started.elapsed().as_secs_f64());
        self.lines.push(line);
    }

    fn write(&self, path: &Path) -> Result<()> {
        let mut body = self.lines.join("\n");
        body.push('\n');
        std::fs::write(path, body).map_err(|e| Error::io(path, e))
    }
}

/// Run the whole pipeline: split, segment, featurize, optionally ASFE,
/// train, predict, evaluate, and write every artifact under
/// `config.out_dir`.
pub fn run(config: &PipelineConfig) -> Result<RunArtifacts> {
    config.validate()?;
    std::fs::create_dir_all(&config.out_dir).map_err(|e| Error::io(&config.out_dir, e))?;
    let out = |name: &str| config.out_dir.join(name);
    let mut log = StageLog::new();

    let manifest = load_manifest(&config.manifest)?;
    let records = load_records(&manifest)?;
    log.note(format!(
        "loaded {} records of {} samples from {}",
        records.len(),
        manifest.signal_length,
        config.manifest.display()
    ));

    let split = split_records(&manifest, config.train_fraction, config.seed)?;
    log.note(format!(
        "split {} train / {} test records (fraction {}, seed {})",
        split.count(Partition::Train),
        split.count(Partition::Test),
        config.train_fraction,
        config.seed
    ));

    let (train_segments, test_segments) =
        segment_dataset(&records, &split, config.window_size)?;
    log.note(format!(
        "segmented into {} train / {} test windows of {} samples",
        train_segments.len(),
        test_segments.len(),
        config.window_size
    ));

    let correlation = correlation_summary(config, &records, &split)?;
    drop(records);

    let mut train_table = build_feature_table(&train_segments)?;
    drop(train_segments);
    let mut test_table = build_feature_table(&test_segments)?;
    drop(test_segments);
    log.note(format!(
        "extracted {} spectrum features per window",
        train_table.n_features()
    ));

    let asfe_report = if config.asfe_enabled {
        let report = run_asfe(
            &mut train_table,
            &mut test_table,
            config.task,
            &config.asfe_for_task(),
        )?;
        log.note(format!(
            "asfe selected {:?}; tables now hold {} columns ({} aggregates, {} crosses)",
            report.selected_features,
            report.total_columns,
            report.aggregation_columns,
            report.cross_columns
        ));
        write_json(&out("asfe_report.json"), &report)?;
        Some(report)
    } else {
        log.note("asfe disabled; training on the base features");
        None
    };

    train_table.write_csv(&out("features_train.csv"))?;
    test_table.write_csv(&out("features_test.csv"))?;

    let class_names = config.task.class_names();
    let labels = config.task.labels_for(&train_table);
    let model = gbt::train(
        &train_table,
        &labels,
        &class_names,
        &config.gbt_for_task(),
        config.task.gbt_task(),
    )?;
    let model_path = out("model.json");
    model.save(&model_path)?;
    log.note(format!(
        "trained {} trees over {} rounds; model saved to {}",
        model.forest.len(),
        config.gbt.num_rounds,
        model_path.display()
    ));

    let (mut report, predictions) = score(&model, &test_table, config.task)?;
    report.correlation = correlation;
    write_predictions_csv(&out("predictions.csv"), &class_names, &predictions)?;
    write_json(&out("eval.json"), &report)?;
    write_roc_csv(&out("roc.csv"), &report.roc)?;
    write_confusion_csv(&out("confusion.csv"), &report.confusion)?;
    write_roc_svg(&out("roc.svg"), &report.roc)?;
    write_confusion_svg(&out("confusion.svg"), &report.confusion)?;
    log.note(format!(
        "evaluated {} test windows: accuracy {:.4}, auc {:.4}",
        report.rows, report.accuracy, report.auc
    ));

    let train_rows = train_table.n_rows();
    let test_rows = test_table.n_rows();
    log.write(&out("run.log"))?;
    Ok(RunArtifacts {
        out_dir: config.out_dir.clone(),
        report,
        asfe_report,
        model_path,
        train_rows,
        test_rows,
    })
}

/// Predict a table and assemble the evaluation report plus the per-row
/// prediction dump.
pub fn score(
    model: &GbtModel,
    table: &FeatureTable,
    task: TaskKind,
) -> Result<(EvalReport, Vec<PredictionRow>)> {
    let probabilities = model.predict(table)?;
    let actual = task.labels_for(table);
    let predicted = argmax_labels(&probabilities)?;
    let class_names = task.class_names();
    let rows = (0..table.n_rows())
        .map(|row| {
            let meta = table.meta(row);
            PredictionRow {
                parent_id: meta.parent_id.clone(),
                window_index: meta.window_index,
                actual: class_names[actual[row]].clone(),
                predicted: class_names[predicted[row]].clone(),
                probabilities: probabilities[row].clone(),
            }
        })
        .collect();
    let report = evaluate(task, &actual, &probabilities)?;
    Ok((report, rows))
}

/// Pearson correlation band between the leading windows of the first
/// test record, when the config asks for it and the record is long
/// enough for at least two windows.
fn correlation_summary(
    config: &PipelineConfig,
    records: &[SignalRecord],
    split: &crate::dataset::SplitAssignment,
) -> Result<Option<CorrelationSummary>> {
    if config.correlation_segments < 2 {
        return Ok(None);
    }
    let record = records
        .iter()
        .find(|r| split.partition_of(&r.id) == Some(Partition::Test));
    let record = match record {
        Some(r) => r,
        None => return Ok(None),
    };
    let window = config.window_size;
    let available = record.samples.len() / window;
    let segments = available.min(config.correlation_segments);
    if segments < 2 {
        return Ok(None);
    }
    let matrix = subsequence_correlation(&record.samples[..segments * window], window)?;
    Ok(CorrelationSummary::from_matrices(window, &[matrix]))
}

/// One grid cell of a sweep run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub window_size: usize,
    /// Selected-feature count, or 0 for rows swept with ASFE disabled.
    pub k: usize,
    pub train_windows: usize,
    pub test_windows: usize,
    pub accuracy: f64,
    pub macro_f1: f64,
    pub auc: f64,
}

pub fn write_sweep_csv(path: &Path, rows: &[SweepRow]) -> Result<()> {
    let mut body = String::from("window_size,k,train_windows,test_windows,accuracy,macro_f1,auc\n");
    for row in rows {
        let _ = writeln!(
            body,
            "{},{},{},{},{},{},{}",
            row.window_size,
            row.k,
            row.train_windows,
            row.test_windows,
            row.accuracy,
            row.macro_f1,
            row.auc
        );
    }
    std::fs::write(path, body).map_err(|e| Error::io(path, e))
}

/// Accuracy grid over window sizes and (when ASFE is enabled) k values,
/// written to `sweep.csv` under the output directory. The dataset is
/// loaded and split once; each window size is featurized once and shared
/// across the k column.
pub fn sweep(
    config: &PipelineConfig,
    window_sizes: &[usize],
    ks: &[usize],
) -> Result<Vec<SweepRow>> {
    config.validate()?;
    if window_sizes.is_empty() {
        return Err(Error::Config("sweep needs at least one window size".into()));
    }
    if config.asfe_enabled && ks.is_empty() {
        return Err(Error::Config("sweep needs at least one k value".into()));
    }
    std::fs::create_dir_all(&config.out_dir).map_err(|e| Error::io(&config.out_dir, e))?;

    let manifest = load_manifest(&config.manifest)?;
    let records = load_records(&manifest)?;
    let split = split_records(&manifest, config.train_fraction, config.seed)?;
    let class_names = config.task.class_names();

    let mut rows = Vec::new();
    for &window_size in window_sizes {
        let (train_segments, test_segments) = segment_dataset(&records, &split, window_size)?;
        let base_train = build_feature_table(&train_segments)?;
        let base_test = build_feature_table(&test_segments)?;
        drop((train_segments, test_segments));

        let k_grid: Vec<Option<usize>> = if config.asfe_enabled {
            ks.iter().map(|&k| Some(k)).collect()
        } else {
            vec![None]
        };
        for k in k_grid {
            let mut train_table = base_train.clone();
            let mut test_table = base_test.clone();
            if let Some(k) = k {
                let mut asfe = config.asfe_for_task();
                asfe.k = k;
                run_asfe(&mut train_table, &mut test_table, config.task, &asfe)?;
            }
            let labels = config.task.labels_for(&train_table);
            let model = gbt::train(
                &train_table,
                &labels,
                &class_names,
                &config.gbt_for_task(),
                config.task.gbt_task(),
            )?;
            let (report, _) = score(&model, &test_table, config.task)?;
            log::info!(
                "sweep window {window_size} k {:?}: accuracy {:.4}",
                k,
                report.accuracy
            );
            rows.push(SweepRow {
                window_size,
                k: k.unwrap_or(0),
                train_windows: train_table.n_rows(),
                test_windows: test_table.n_rows(),
                accuracy: report.accuracy,
                macro_f1: report.macro_avg.f1,
                auc: report.auc,
            });
        }
    }
    write_sweep_csv(&config.out_dir.join("sweep.csv"), &rows)?;
    Ok(rows)
}
