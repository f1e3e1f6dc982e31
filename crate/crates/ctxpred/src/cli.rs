//! Command-line interface: dataset synthesis, training, evaluation,
//! zero-shot splits, gradient checking, and report rendering.
//!
//! Every output file is written atomically (a sibling temp file is
//! renamed into place), so a failing run never leaves a truncated
//! artifact behind.

use std::fs;
use std::io::{BufReader, BufWriter, Write as _};
use std::path::{Path, PathBuf};

use clap::Parser;
use serde::{Deserialize, Serialize};

use crate::data::synth::{generate, SynthConfig, SynthRule};
use crate::data::{Dataset, TripletType};
use crate::embed::EmbeddingStore;
use crate::error::{Error, Result};
use crate::eval::{
    dataset_recall, render_report, zero_shot_split, MethodMetrics, PredictContext, PriorTable,
    ReportOptions, Task,
};
use crate::features::{DirFeatureMaps, FeatureMapSource, SPATIAL_DIM};
use crate::gradcheck::{check_kind, GradCheckConfig};
use crate::model::{
    ComboTable, ModelConfig, ModelKind, ModelParams, ALL_KINDS, DEFAULT_CODE_DIM,
};
use crate::train::{
    build_instances, render_log, train, InstanceOptions, TrainConfig, TrainFeature, TrainInstance,
};

/// Parsed command line.
#[derive(Parser, Debug, Clone)]
#[command(
    name = "ctxpred",
    about = "Context-aware interaction classification for visual relationship detection",
    disable_help_subcommand = true
)]
pub struct RunConfig {
    /// Command: synth, train, eval, zsplit, gradcheck or report.
    #[arg(long, value_parser = ["synth", "train", "eval", "zsplit", "gradcheck", "report"])]
    pub cmd: String,

    /// Model kind (train, gradcheck); eval reads it from the checkpoint.
    #[arg(long)]
    pub model: Option<String>,

    /// Training annotation file.
    #[arg(long)]
    pub train: Option<PathBuf>,

    /// Test annotation file.
    #[arg(long)]
    pub test: Option<PathBuf>,

    /// Word-embedding table in plain text.
    #[arg(long)]
    pub emb: Option<PathBuf>,

    /// Directory holding binary feature-map files.
    #[arg(long)]
    pub fmaps: Option<PathBuf>,

    /// Checkpoint file (written by train, read by eval).
    #[arg(long)]
    pub ckpt: Option<PathBuf>,

    /// Language-prior table (eval).
    #[arg(long)]
    pub priors: Option<PathBuf>,

    /// Output path: synth and train treat it as required; report and
    /// zsplit print to stdout when it is omitted.
    #[arg(long)]
    pub out: Option<PathBuf>,

    /// Recall levels.
    #[arg(long, value_delimiter = ',', default_value = "50,100")]
    pub k: Vec<usize>,

    /// Tasks to evaluate.
    #[arg(long, value_delimiter = ',', default_value = "predicate,phrase,relationship")]
    pub tasks: Vec<String>,

    /// Overlap threshold for phrase and relationship matching.
    #[arg(long, default_value_t = crate::eval::DEFAULT_IOU_THRESHOLD)]
    pub iou: f64,

    /// Master seed for synthesis, initialization and shuffling.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,

    /// Training epochs.
    #[arg(long, default_value_t = 100)]
    pub epochs: usize,

    /// Mini-batch size.
    #[arg(long, default_value_t = 32)]
    pub batch: usize,

    /// Learning rate.
    #[arg(long, default_value_t = 0.001)]
    pub lr: f64,

    /// Context-code width m.
    #[arg(long = "code-dim", default_value_t = DEFAULT_CODE_DIM)]
    pub code_dim: usize,

    /// Keep only the 50 most confident proposals per image (eval).
    #[arg(long)]
    pub top50: bool,

    /// Error on labels missing from the embedding table instead of
    /// falling back to the mean vector.
    #[arg(long = "strict-emb")]
    pub strict_emb: bool,

    /// Also report zero-shot metrics (eval); needs --train.
    #[arg(long = "zero-shot")]
    pub zero_shot: bool,

    /// Synthesis rule: xor or linear.
    #[arg(long, default_value = "xor")]
    pub rule: String,

    /// Instance count for synth.
    #[arg(long)]
    pub images: Option<usize>,

    /// Object classes for synth.
    #[arg(long)]
    pub classes: Option<usize>,

    /// Predicate count for synth (linear rule).
    #[arg(long)]
    pub predicates: Option<usize>,

    /// Word-embedding width for synth.
    #[arg(long = "emb-dim")]
    pub emb_dim: Option<usize>,

    /// Label-flip probability for synth.
    #[arg(long)]
    pub noise: Option<f64>,

    /// Fraction of pair types held out of training (linear rule).
    #[arg(long)]
    pub holdout: Option<f64>,

    /// Random instances per kind (gradcheck).
    #[arg(long, default_value_t = 20)]
    pub instances: usize,

    /// Relative-error tolerance (gradcheck).
    #[arg(long, default_value_t = 1e-5)]
    pub tol: f64,

    /// Metric files to combine (report).
    pub inputs: Vec<PathBuf>,
}

/// Parse argv; the error carries clap's usage text.
pub fn parse_flags<I, T>(argv: I) -> std::result::Result<RunConfig, clap::Error>
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    RunConfig::try_parse_from(argv)
}

/// Execute one parsed command.
pub fn run(cfg: &RunConfig) -> Result<()> {
    for &k in &cfg.k {
        if k == 0 {
            return Err(Error::InvalidConfig("--k values must be >= 1".to_string()));
        }
    }
    if !(cfg.iou > 0.0 && cfg.iou <= 1.0) {
        return Err(Error::InvalidConfig(format!(
            "--iou must be in (0, 1], got {}",
            cfg.iou
        )));
    }
    match cfg.cmd.as_str() {
        "synth" => run_synth(cfg),
        "train" => run_train(cfg),
        "eval" => run_eval(cfg),
        "zsplit" => run_zsplit(cfg),
        "gradcheck" => run_gradcheck(cfg),
        "report" => run_report(cfg),
        other => Err(Error::InvalidConfig(format!("unknown command {other:?}"))),
    }
}

fn require<'a>(path: &'a Option<PathBuf>, flag: &str, cmd: &str) -> Result<&'a Path> {
    path.as_deref()
        .ok_or_else(|| Error::InvalidConfig(format!("{cmd} needs {flag}")))
}

/// Write through a sibling temp file so the target is never truncated.
fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    if let Some(parent) = path.parent() {
        if !parent.as_os_str().is_empty() {
            fs::create_dir_all(parent)?;
        }
    }
    let mut tmp_name = path
        .file_name()
        .ok_or_else(|| Error::InvalidConfig(format!("{} has no file name", path.display())))?
        .to_os_string();
    tmp_name.push(".tmp");
    let tmp = path.with_file_name(tmp_name);
    fs::write(&tmp, bytes)?;
    fs::rename(&tmp, path)?;
    Ok(())
}

/// Open a file for reading, failing with the path in the message.
fn open(path: &Path) -> Result<fs::File> {
    fs::File::open(path).map_err(|e| annotate(e.into(), path))
}

fn load_dataset(path: &Path) -> Result<Dataset> {
    Dataset::load(BufReader::new(open(path)?)).map_err(|e| annotate(e, path))
}

fn load_store(path: &Path) -> Result<EmbeddingStore> {
    EmbeddingStore::load(BufReader::new(open(path)?)).map_err(|e| annotate(e, path))
}

/// Prefix config-level errors with the file they came from.
fn annotate(e: Error, path: &Path) -> Error {
    match e {
        Error::Io(_) | Error::Json(_) | Error::Parse { .. } => {
            Error::InvalidConfig(format!("{}: {e}", path.display()))
        }
        other => other,
    }
}

fn synth_config(cfg: &RunConfig) -> Result<SynthConfig> {
    let rule = SynthRule::parse(&cfg.rule)?;
    let mut sc = match rule {
        SynthRule::ContextXor => SynthConfig::xor_defaults(),
        SynthRule::ContextLinear => SynthConfig::linear_defaults(),
    };
    sc.seed = cfg.seed;
    if let Some(v) = cfg.images {
        sc.images = v;
    }
    if let Some(v) = cfg.classes {
        sc.object_classes = v;
    }
    if let Some(v) = cfg.predicates {
        sc.predicates = v;
    }
    if let Some(v) = cfg.emb_dim {
        sc.embed_dim = v;
    }
    if let Some(v) = cfg.noise {
        sc.noise = v;
    }
    if let Some(v) = cfg.holdout {
        sc.holdout = v;
    }
    Ok(sc)
}

fn run_synth(cfg: &RunConfig) -> Result<()> {
    let out_dir = require(&cfg.out, "--out", "synth")?;
    let sc = synth_config(cfg)?;
    let out = generate(&sc)?;

    let mut buf = Vec::new();
    out.train.save(&mut buf)?;
    write_atomic(&out_dir.join("train.json"), &buf)?;
    buf.clear();
    out.test.save(&mut buf)?;
    write_atomic(&out_dir.join("test.json"), &buf)?;
    write_atomic(&out_dir.join("embeddings.txt"), out.embeddings.as_bytes())?;
    for (key, fm) in &out.feature_maps {
        buf.clear();
        fm.save(&mut buf)?;
        write_atomic(&out_dir.join("fmaps").join(key), &buf)?;
    }
    println!(
        "synth({}): {} train / {} test images, {} feature maps, {} held-out types -> {}",
        cfg.rule,
        out.train.images.len(),
        out.test.images.len(),
        out.feature_maps.len(),
        out.holdout_types.len(),
        out_dir.display()
    );
    Ok(())
}

/// Feature width used by the model: spatial kinds have a fixed one, map
/// kinds take it from the instances.
fn feature_dim_of(kind: ModelKind, instances: &[TrainInstance]) -> Result<usize> {
    if kind.takes_spatial() {
        return Ok(SPATIAL_DIM);
    }
    match instances.first().map(|i| &i.input) {
        Some(TrainFeature::Map(fm)) => Ok(fm.channels()),
        _ => Err(Error::EmptyInput("no feature maps resolved")),
    }
}

fn run_train(cfg: &RunConfig) -> Result<()> {
    let kind = ModelKind::parse(
        cfg.model
            .as_deref()
            .ok_or_else(|| Error::InvalidConfig("train needs --model".to_string()))?,
    )?;
    let train_path = require(&cfg.train, "--train", "train")?;
    let ckpt_path = require(&cfg.out, "--out", "train")?;
    let dataset = load_dataset(train_path)?;

    let store = match (&cfg.emb, kind.uses_context()) {
        (Some(path), _) => Some(load_store(path)?),
        (None, true) => {
            return Err(Error::InvalidConfig(format!("kind {kind} needs --emb")))
        }
        (None, false) => None,
    };
    let fmaps = match (&cfg.fmaps, kind.takes_spatial()) {
        (Some(path), _) => Some(DirFeatureMaps::new(path.clone())),
        (None, false) => {
            return Err(Error::InvalidConfig(format!("kind {kind} needs --fmaps")))
        }
        (None, true) => None,
    };
    let combos = kind
        .is_baseline2()
        .then(|| ComboTable::from_triplets(dataset.indexed_triplets()));

    let opts = InstanceOptions {
        store: store.as_ref(),
        strict_embeddings: cfg.strict_emb,
        combos: combos.as_ref(),
        fmaps: fmaps.as_ref().map(|d| d as &dyn FeatureMapSource),
        type_filter: None,
    };
    let instances = build_instances(&dataset, kind, &opts)?;

    let mut model_cfg = ModelConfig::new(kind, dataset.predicates.len(), feature_dim_of(kind, &instances)?)
        .with_code_dim(cfg.code_dim);
    if let Some(store) = &store {
        model_cfg = model_cfg.with_embed_dim(store.dimension());
    }
    if let Some(combos) = &combos {
        model_cfg = model_cfg.with_combos(combos.len());
    }

    let train_cfg = TrainConfig {
        lr_new: cfg.lr,
        batch_size: cfg.batch,
        epochs: cfg.epochs,
        seed: cfg.seed,
        ..TrainConfig::default()
    };
    let mut params = ModelParams::init(model_cfg, cfg.seed)?;
    let log = train(&mut params, &instances, &train_cfg)?;

    let mut buf = Vec::new();
    params.save(&mut buf)?;
    write_atomic(ckpt_path, &buf)?;
    let log_path = ckpt_path.with_extension("log");
    write_atomic(&log_path, render_log(&log).as_bytes())?;
    let last = log.last();
    println!(
        "train({kind}): {} instances, {} epochs, final loss {:.6}, accuracy {:.6} -> {}",
        instances.len(),
        log.len(),
        last.map_or(f64::NAN, |r| r.mean_loss),
        last.map_or(f64::NAN, |r| r.train_accuracy),
        ckpt_path.display()
    );
    Ok(())
}

/// Metrics file written by `eval` and consumed by `report`.
#[derive(Debug, Serialize, Deserialize)]
pub struct EvalOutput {
    pub version: u32,
    pub metrics: MethodMetrics,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub zero_shot: Option<MethodMetrics>,
}

fn run_eval(cfg: &RunConfig) -> Result<()> {
    let ckpt_path = require(&cfg.ckpt, "--ckpt", "eval")?;
    let test_path = require(&cfg.test, "--test", "eval")?;
    let out_path = require(&cfg.out, "--out", "eval")?;
    let mut reader = BufReader::new(open(ckpt_path)?);
    let params = ModelParams::load(&mut reader).map_err(|e| annotate(e, ckpt_path))?;
    let kind = params.config.kind;
    let test = load_dataset(test_path)?;

    let tasks: Vec<Task> = cfg
        .tasks
        .iter()
        .map(|t| Task::parse(t))
        .collect::<Result<_>>()?;
    let store = match (&cfg.emb, kind.uses_context()) {
        (Some(path), _) => Some(load_store(path)?),
        (None, true) => {
            return Err(Error::InvalidConfig(format!("kind {kind} needs --emb")))
        }
        (None, false) => None,
    };
    if cfg.strict_emb {
        if let Some(store) = &store {
            for label in &test.object_vocab {
                store.lookup_strict(label)?;
            }
        }
    }
    let fmaps = match (&cfg.fmaps, kind.takes_spatial()) {
        (Some(path), _) => Some(DirFeatureMaps::new(path.clone())),
        (None, false) => {
            return Err(Error::InvalidConfig(format!("kind {kind} needs --fmaps")))
        }
        (None, true) => None,
    };
    let train_set = match &cfg.train {
        Some(path) => Some(load_dataset(path)?),
        None => None,
    };
    if kind.is_baseline2() && train_set.is_none() {
        return Err(Error::InvalidConfig(format!(
            "kind {kind} needs --train to rebuild its combination table"
        )));
    }
    if cfg.zero_shot && train_set.is_none() {
        return Err(Error::InvalidConfig(
            "--zero-shot needs --train to identify seen types".to_string(),
        ));
    }
    let combos = train_set
        .as_ref()
        .filter(|_| kind.is_baseline2())
        .map(|d| ComboTable::from_triplets(d.indexed_triplets()));
    let priors = match &cfg.priors {
        Some(path) => Some(
            PriorTable::load(BufReader::new(open(path)?)).map_err(|e| annotate(e, path))?,
        ),
        None => None,
    };
    let ctx = PredictContext {
        store: store.as_ref(),
        combos: combos.as_ref(),
        fmaps: fmaps.as_ref().map(|d| d as &dyn FeatureMapSource),
        priors: priors.as_ref(),
        top50: cfg.top50,
    };

    let mut metrics = MethodMetrics::new(kind.name());
    for &task in &tasks {
        for &k in &cfg.k {
            let r = dataset_recall(&params, &test, &ctx, k, task, cfg.iou, None)?;
            metrics.insert(task, k, r.fraction());
        }
    }
    let zero_shot = if cfg.zero_shot {
        let split = zero_shot_split(train_set.as_ref().expect("checked above"), &test);
        let mut zs = MethodMetrics::new(format!("{} (zero-shot)", kind.name()));
        for &task in &tasks {
            for &k in &cfg.k {
                let r = dataset_recall(&params, &test, &ctx, k, task, cfg.iou, Some(&split))?;
                zs.insert(task, k, r.fraction());
            }
        }
        Some(zs)
    } else {
        None
    };

    let output = EvalOutput {
        version: 1,
        metrics,
        zero_shot,
    };
    let mut buf = serde_json::to_vec_pretty(&output)?;
    buf.push(b'\n');
    write_atomic(out_path, &buf)?;
    let mut methods = vec![output.metrics.clone()];
    methods.extend(output.zero_shot.clone());
    print!("{}", render_report(&methods, &ReportOptions::default()));
    Ok(())
}

/// File format for the zero-shot type list.
#[derive(Debug, Serialize, Deserialize)]
struct ZsplitOutput {
    version: u32,
    types: Vec<TripletType>,
}

fn run_zsplit(cfg: &RunConfig) -> Result<()> {
    let train_path = require(&cfg.train, "--train", "zsplit")?;
    let test_path = require(&cfg.test, "--test", "zsplit")?;
    let train_set = load_dataset(train_path)?;
    let test_set = load_dataset(test_path)?;
    let split = zero_shot_split(&train_set, &test_set);
    let output = ZsplitOutput {
        version: 1,
        types: split.iter().cloned().collect(),
    };
    let mut buf = serde_json::to_vec_pretty(&output)?;
    buf.push(b'\n');
    match &cfg.out {
        Some(out_path) => {
            write_atomic(out_path, &buf)?;
            println!(
                "zsplit: {} of {} test types unseen in training -> {}",
                split.len(),
                test_set.triplet_types().len(),
                out_path.display()
            );
        }
        None => {
            std::io::stdout().write_all(&buf)?;
        }
    }
    Ok(())
}

fn run_gradcheck(cfg: &RunConfig) -> Result<()> {
    let kinds: Vec<ModelKind> = match &cfg.model {
        Some(name) => vec![ModelKind::parse(name)?],
        None => ALL_KINDS.to_vec(),
    };
    let check_cfg = GradCheckConfig {
        instances: cfg.instances,
        tolerance: cfg.tol,
        seed: cfg.seed,
        ..GradCheckConfig::default()
    };
    let mut lines = String::new();
    let mut all_passed = true;
    for kind in kinds {
        let report = check_kind(kind, &check_cfg)?;
        let line = report.render_line();
        println!("{line}");
        lines.push_str(&line);
        lines.push('\n');
        all_passed &= report.passed;
    }
    if let Some(out) = &cfg.out {
        write_atomic(out, lines.as_bytes())?;
    }
    if !all_passed {
        return Err(Error::Precondition(format!(
            "gradient check exceeded tolerance {:e}",
            check_cfg.tolerance
        )));
    }
    Ok(())
}

fn run_report(cfg: &RunConfig) -> Result<()> {
    if cfg.inputs.is_empty() {
        return Err(Error::InvalidConfig(
            "report needs at least one metrics file".to_string(),
        ));
    }
    let mut methods = Vec::new();
    for path in &cfg.inputs {
        let file: EvalOutput = serde_json::from_reader(BufReader::new(open(path)?))
            .map_err(|e| annotate(Error::Json(e), path))?;
        if file.version != 1 {
            return Err(Error::UnsupportedVersion(file.version));
        }
        methods.push(file.metrics);
        methods.extend(file.zero_shot);
    }
    let report = render_report(&methods, &ReportOptions::default());
    match &cfg.out {
        Some(path) => {
            write_atomic(path, report.as_bytes())?;
            println!("report: {} methods -> {}", methods.len(), path.display());
        }
        None => {
            let stdout = std::io::stdout();
            let mut w = BufWriter::new(stdout.lock());
            w.write_all(report.as_bytes())?;
        }
    }
    Ok(())
}
