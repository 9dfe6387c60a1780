//! `cavdet`: acoustic cavitation detection pipeline.
//!
//! `run` drives the whole flow from one JSON config; the stage
//! subcommands (`segment`, `featurize`, `train`, `predict`, `evaluate`)
//! expose the same steps with file-based handoff, `synth` fabricates
//! labeled datasets, and `sweep` scans window sizes and k values.

mod segments_io;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use cavdet::artifacts::{
    write_confusion_csv, write_confusion_svg, write_json, write_predictions_csv, write_roc_csv,
    write_roc_svg,
};
use cavdet::dataset::{load_manifest, load_records, split_records, Partition, SignalCodec};
use cavdet::features::build_feature_table;
use cavdet::gbt::{train as train_gbt, GbtHyperParams, GbtModel};
use cavdet::nosw::segment_dataset;
use cavdet::pipeline::{run as run_pipeline, score, sweep as run_sweep, PipelineConfig};
use cavdet::synth::{write_dataset, SynthSpec};
use cavdet::table::FeatureTable;
use cavdet::{Error, Result, TaskKind};

#[derive(Parser)]
#[command(
    name = "cavdet",
    version,
    about = "Classify valve flow states from acoustic recordings"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the full pipeline from a JSON config file.
    Run(RunArgs),
    /// Generate a labeled synthetic dataset.
    Synth(SynthArgs),
    /// Split a dataset and cut it into non-overlapping windows.
    Segment(SegmentArgs),
    /// Turn a segment directory into a spectrum-feature table.
    Featurize(FeaturizeArgs),
    /// Train a boosted-tree model on a feature table.
    Train(TrainArgs),
    /// Score a feature table with a trained model.
    Predict(PredictArgs),
    /// Evaluate a trained model and write the metric artifacts.
    Evaluate(EvaluateArgs),
    /// Scan window sizes and k values, writing an accuracy grid.
    Sweep(SweepArgs),
}

#[derive(Args)]
struct RunArgs {
    /// Pipeline config JSON (see README for the schema).
    #[arg(long)]
    config: PathBuf,
    /// Override the config's output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Override the config's dataset manifest.
    #[arg(long)]
    manifest: Option<PathBuf>,
    /// Override the config's window size.
    #[arg(long)]
    window_size: Option<usize>,
    /// Override the config's split seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Override the config's train fraction.
    #[arg(long)]
    train_fraction: Option<f64>,
    /// Override the task: binary or four_class.
    #[arg(long)]
    task: Option<String>,
    /// Override how many features the selection stage keeps (5-10).
    #[arg(long)]
    k: Option<usize>,
    /// Disable the feature-engineering stage for this run.
    #[arg(long)]
    no_asfe: bool,
}

#[derive(Args)]
struct SynthArgs {
    /// Directory to write the dataset into.
    #[arg(long)]
    out: PathBuf,
    /// Generator spec JSON; defaults to the built-in desk-scale spec.
    #[arg(long)]
    spec: Option<PathBuf>,
    /// Seed for the built-in spec (ignored when --spec is given).
    #[arg(long, default_value_t = 42)]
    seed: u64,
    /// Override the number of signals per class.
    #[arg(long)]
    signals_per_class: Option<usize>,
    /// Override the signal length in samples.
    #[arg(long)]
    length: Option<usize>,
}

#[derive(Args)]
struct SegmentArgs {
    /// Dataset manifest JSON.
    #[arg(long)]
    manifest: PathBuf,
    /// Directory to write windows, index.csv, and segment_meta.json into.
    #[arg(long)]
    out: PathBuf,
    /// Window size in samples.
    #[arg(long)]
    window_size: usize,
    /// Fraction of signals assigned to the training partition.
    #[arg(long, default_value_t = 0.8)]
    train_fraction: f64,
    /// Split shuffle seed.
    #[arg(long, default_value_t = 42)]
    seed: u64,
}

#[derive(Args)]
struct FeaturizeArgs {
    /// A directory written by `segment`.
    #[arg(long)]
    segments: PathBuf,
    /// Output feature CSV path.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct TrainArgs {
    /// Feature CSV written by `featurize` or `run`.
    #[arg(long)]
    features: PathBuf,
    /// Output model JSON path.
    #[arg(long)]
    out: PathBuf,
    /// Task: binary or four_class.
    #[arg(long, default_value = "binary")]
    task: String,
    /// Which partition's rows to train on: train, test, or all.
    #[arg(long, default_value = "train")]
    partition: String,
    #[arg(long, default_value_t = GbtHyperParams::default().num_rounds)]
    num_rounds: usize,
    #[arg(long, default_value_t = GbtHyperParams::default().max_depth)]
    max_depth: usize,
    #[arg(long, default_value_t = GbtHyperParams::default().learning_rate)]
    learning_rate: f64,
    #[arg(long, default_value_t = GbtHyperParams::default().lambda)]
    lambda: f64,
    #[arg(long, default_value_t = GbtHyperParams::default().gamma)]
    gamma: f64,
    #[arg(long, default_value_t = GbtHyperParams::default().min_child_hessian)]
    min_child_hessian: f64,
}

#[derive(Args)]
struct PredictArgs {
    /// Model JSON written by `train` or `run`.
    #[arg(long)]
    model: PathBuf,
    /// Feature CSV to score.
    #[arg(long)]
    features: PathBuf,
    /// Output predictions CSV path.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct EvaluateArgs {
    /// Model JSON written by `train` or `run`.
    #[arg(long)]
    model: PathBuf,
    /// Feature CSV with the rows to evaluate.
    #[arg(long)]
    features: PathBuf,
    /// Directory for eval.json, roc.csv, confusion.csv, and the SVGs.
    #[arg(long)]
    out: PathBuf,
    /// Which partition's rows to evaluate: train, test, or all.
    #[arg(long, default_value = "test")]
    partition: String,
}

#[derive(Args)]
struct SweepArgs {
    /// Pipeline config JSON.
    #[arg(long)]
    config: PathBuf,
    /// Override the config's output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Comma-separated window sizes; defaults to the config's one value.
    #[arg(long)]
    windows: Option<String>,
    /// Comma-separated k values; defaults to the config's one value.
    #[arg(long)]
    ks: Option<String>,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info"))
        .format_timestamp(None)
        .init();
    let cli = Cli::parse();
    match dispatch(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(error) => {
            eprintln!("error: {error}");
            ExitCode::from(error.exit_code() as u8)
        }
    }
}

fn dispatch(command: Command) -> Result<()> {
    match command {
        Command::Run(args) => cmd_run(args),
        Command::Synth(args) => cmd_synth(args),
        Command::Segment(args) => cmd_segment(args),
        Command::Featurize(args) => cmd_featurize(args),
        Command::Train(args) => cmd_train(args),
        Command::Predict(args) => cmd_predict(args),
        Command::Evaluate(args) => cmd_evaluate(args),
        Command::Sweep(args) => cmd_sweep(args),
    }
}

fn load_config(path: &Path, args: &RunArgs) -> Result<PipelineConfig> {
    let mut config = PipelineConfig::load(path)?;
    if let Some(out) = &args.out {
        config.out_dir = out.clone();
    }
    if let Some(manifest) = &args.manifest {
        config.manifest = manifest.clone();
    }
    if let Some(window_size) = args.window_size {
        config.window_size = window_size;
    }
    if let Some(seed) = args.seed {
        config.seed = seed;
    }
    if let Some(train_fraction) = args.train_fraction {
        config.train_fraction = train_fraction;
    }
    if let Some(task) = &args.task {
        config.task = TaskKind::parse(task)?;
    }
    if let Some(k) = args.k {
        config.asfe.k = k;
    }
    if args.no_asfe {
        config.asfe_enabled = false;
    }
    Ok(config)
}

fn cmd_run(args: RunArgs) -> Result<()> {
    let config = load_config(&args.config, &args)?;
    let artifacts = run_pipeline(&config)?;
    println!(
        "{} task on {} train / {} test windows",
        config.task, artifacts.train_rows, artifacts.test_rows
    );
    if let Some(asfe) = &artifacts.asfe_report {
        println!(
            "asfe kept {:?} and grew the table to {} columns",
            asfe.selected_features, asfe.total_columns
        );
    }
    println!(
        "accuracy {:.4}  macro-F1 {:.4}  AUC {:.4}",
        artifacts.report.accuracy, artifacts.report.macro_avg.f1, artifacts.report.auc
    );
    println!("artifacts in {}", artifacts.out_dir.display());
    Ok(())
}

fn cmd_synth(args: SynthArgs) -> Result<()> {
    let mut spec = match &args.spec {
        Some(path) => {
            let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
            serde_json::from_str::<SynthSpec>(&text)
                .map_err(|e| Error::parse(path, e.to_string()))?
        }
        None => SynthSpec::desk(args.seed),
    };
    if let Some(count) = args.signals_per_class {
        spec.signals_per_class = count;
    }
    if let Some(length) = args.length {
        spec.signal_length = length;
    }
    let manifest_path = write_dataset(&spec, &args.out)?;
    println!(
        "wrote {} signals ({} samples each) and {}",
        spec.signals_per_class * spec.classes.len(),
        spec.signal_length,
        manifest_path.display()
    );
    Ok(())
}

fn cmd_segment(args: SegmentArgs) -> Result<()> {
    let manifest = load_manifest(&args.manifest)?;
    let records = load_records(&manifest)?;
    let split = split_records(&manifest, args.train_fraction, args.seed)?;
    let (mut segments, mut test) = segment_dataset(&records, &split, args.window_size)?;
    let train_count = segments.len();
    segments.append(&mut test);
    let meta = segments_io::SegmentMeta {
        window_size: args.window_size,
        sample_rate: manifest.sample_rate,
        codec: SignalCodec::F32le,
    };
    segments_io::write_segments(&args.out, &segments, &meta)?;
    println!(
        "wrote {} train / {} test windows to {}",
        train_count,
        segments.len() - train_count,
        args.out.display()
    );
    Ok(())
}

fn cmd_featurize(args: FeaturizeArgs) -> Result<()> {
    let (segments, meta) = segments_io::read_segments(&args.segments)?;
    let table = build_feature_table(&segments)?;
    table.write_csv(&args.out)?;
    println!(
        "featurized {} windows of {} samples into {}",
        table.n_rows(),
        meta.window_size,
        args.out.display()
    );
    Ok(())
}

fn parse_partition_filter(s: &str) -> Result<Option<Partition>> {
    match s {
        "all" => Ok(None),
        other => Partition::parse(other).map(Some),
    }
}

fn filtered_rows(table: &FeatureTable, filter: Option<Partition>) -> Result<FeatureTable> {
    let filtered = match filter {
        Some(partition) => table.filtered(|m| m.partition == partition),
        None => table.clone(),
    };
    if filtered.n_rows() == 0 {
        return Err(Error::Data(match filter {
            Some(partition) => format!("the feature table has no {partition} rows"),
            None => "the feature table has no rows".into(),
        }));
    }
    Ok(filtered)
}

fn cmd_train(args: TrainArgs) -> Result<()> {
    let task = TaskKind::parse(&args.task)?;
    let table = FeatureTable::read_csv(&args.features)?;
    let rows = filtered_rows(&table, parse_partition_filter(&args.partition)?)?;
    let params = GbtHyperParams {
        num_rounds: args.num_rounds,
        max_depth: args.max_depth,
        learning_rate: args.learning_rate,
        lambda: args.lambda,
        gamma: args.gamma,
        min_child_hessian: args.min_child_hessian,
        num_classes: task.num_classes(),
        ..GbtHyperParams::default()
    };
    let labels = task.labels_for(&rows);
    let model = train_gbt(&rows, &labels, &task.class_names(), &params, task.gbt_task())?;
    model.save(&args.out)?;
    println!(
        "trained {} trees on {} rows ({} features); model at {}",
        model.forest.len(),
        rows.n_rows(),
        rows.n_features(),
        args.out.display()
    );
    Ok(())
}

/// The task a saved model was trained for, recovered from its class list.
fn task_of_model(model: &GbtModel) -> Result<TaskKind> {
    for task in [TaskKind::Binary, TaskKind::FourClass] {
        if model.class_names == task.class_names() {
            return Ok(task);
        }
    }
    Err(Error::Data(format!(
        "model classes {:?} do not match any known task",
        model.class_names
    )))
}

fn cmd_predict(args: PredictArgs) -> Result<()> {
    let model = GbtModel::load(&args.model)?;
    let task = task_of_model(&model)?;
    let table = FeatureTable::read_csv(&args.features)?;
    let (report, predictions) = score(&model, &table, task)?;
    write_predictions_csv(&args.out, &model.class_names, &predictions)?;
    println!(
        "scored {} rows (accuracy {:.4}); predictions at {}",
        predictions.len(),
        report.accuracy,
        args.out.display()
    );
    Ok(())
}

fn cmd_evaluate(args: EvaluateArgs) -> Result<()> {
    let model = GbtModel::load(&args.model)?;
    let task = task_of_model(&model)?;
    let table = FeatureTable::read_csv(&args.features)?;
    let rows = filtered_rows(&table, parse_partition_filter(&args.partition)?)?;
    let (report, _) = score(&model, &rows, task)?;
    std::fs::create_dir_all(&args.out).map_err(|e| Error::io(&args.out, e))?;
    write_json(&args.out.join("eval.json"), &report)?;
    write_roc_csv(&args.out.join("roc.csv"), &report.roc)?;
    write_confusion_csv(&args.out.join("confusion.csv"), &report.confusion)?;
    write_roc_svg(&args.out.join("roc.svg"), &report.roc)?;
    write_confusion_svg(&args.out.join("confusion.svg"), &report.confusion)?;
    println!(
        "evaluated {} rows: accuracy {:.4}, macro-F1 {:.4}, AUC {:.4}; report in {}",
        report.rows,
        report.accuracy,
        report.macro_avg.f1,
        report.auc,
        args.out.display()
    );
    Ok(())
}

fn parse_list<T: std::str::FromStr>(flag: &str, text: &str) -> Result<Vec<T>> {
    text.split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| {
            s.parse::<T>()
                .map_err(|_| Error::Config(format!("bad --{flag} entry {s:?}")))
        })
        .collect()
}

fn cmd_sweep(args: SweepArgs) -> Result<()> {
    let mut config = PipelineConfig::load(&args.config)?;
    if let Some(out) = &args.out {
        config.out_dir = out.clone();
    }
    let windows = match &args.windows {
        Some(text) => parse_list("windows", text)?,
        None => vec![config.window_size],
    };
    let ks = match &args.ks {
        Some(text) => parse_list("ks", text)?,
        None => vec![config.asfe.k],
    };
    let rows = run_sweep(&config, &windows, &ks)?;
    println!("window_size  k   accuracy  macro_f1  auc");
    for row in &rows {
        println!(
            "{:>11}  {:>2}  {:>8.4}  {:>8.4}  {:>5.4}",
            row.window_size, row.k, row.accuracy, row.macro_f1, row.auc
        );
    }
    println!(
        "grid written to {}",
        config.out_dir.join("sweep.csv").display()
    );
    Ok(())
}
