//! `lobrep` command-line front end.
//!
//! Exit codes: 0 on success, 1 on runtime failures, 2 on malformed input.

mod config;
mod files;

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use lobrep::dataset::{build_samples_with_labels, series_labels, window_tensor};
use lobrep::eval::{run_grid, Checkpoint, Metrics};
use lobrep::ingest::{Fi2010Layout, Fi2010Options, NormalizationMode, NormalizationSpec};
use lobrep::io::write_atomic;
use lobrep::learn::ModelKind;
use lobrep::perturb::{perturb_event_stream, perturb_series, Paradigm};
use lobrep::represent::Scheme;
use lobrep::synth::{generate, SynthConfig};
use lobrep::tensor::{Sidecar, Tensor};
use lobrep::{Class, SampleSpec, SnapshotSeries};

use config::{CommonArgs, DataFormat};
use files::{SeriesFile, SeriesMeta};

#[derive(Debug)]
pub enum Failure {
    /// Exit code 1.
    Runtime(String),
    /// Exit code 2: input data or config that does not parse.
    Parse(String),
}

impl Failure {
    fn context(self, path: &Path) -> Self {
        match self {
            Failure::Runtime(m) => Failure::Runtime(format!("{}: {m}", path.display())),
            Failure::Parse(m) => Failure::Parse(format!("{}: {m}", path.display())),
        }
    }
}

impl From<lobrep::Error> for Failure {
    fn from(e: lobrep::Error) -> Self {
        if e.is_parse_error() {
            Failure::Parse(e.to_string())
        } else {
            Failure::Runtime(e.to_string())
        }
    }
}

macro_rules! from_core {
    ($($t:ty),*) => {$(
        impl From<$t> for Failure {
            fn from(e: $t) -> Self {
                lobrep::Error::from(e).into()
            }
        }
    )*};
}
from_core!(
    lobrep::IngestError,
    lobrep::perturb::PerturbError,
    lobrep::dataset::DatasetError,
    lobrep::tensor::TensorError,
    lobrep::eval::MetricsError
);

type Result<T> = std::result::Result<T, Failure>;

#[derive(Parser)]
#[command(name = "lobrep", version, about = "Limit order book representations and perturbation robustness")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Parse FI-2010 or event files into a series cache.
    Ingest(IngestArgs),
    /// Generate a synthetic event stream.
    Synth(SynthArgs),
    /// Build one representation tensor per window.
    Represent(RepresentArgs),
    /// Fill empty ticks behind the quotes.
    Perturb(PerturbArgs),
    /// Compute price-movement labels.
    Label(LabelArgs),
    /// Write labelled feature tensors for external models.
    Export(ExportArgs),
    /// Train one model and save a checkpoint.
    Train(TrainArgs),
    /// Score a checkpoint on a series.
    Evaluate(EvaluateArgs),
    /// Run the model x scheme x paradigm x seed grid.
    Grid(GridArgs),
}

#[derive(Args)]
struct IngestArgs {
    #[arg(long, value_enum, default_value = "fi2010")]
    format: DataFormat,
    #[arg(long, default_value_t = 0.01)]
    tick_size: f64,
    #[arg(long, default_value_t = 1)]
    min_order_size: u64,
    /// Depth L of emitted snapshots (event input only; FI-2010 is always 10).
    #[arg(long, default_value_t = 10)]
    levels: usize,
    #[arg(long, value_enum, default_value = "auto")]
    layout: Layout,
    /// FI-2010 values are already z-scored.
    #[arg(long)]
    prenormalized: bool,
    #[arg(long, value_enum, default_value = "none")]
    normalize: Normalize,
    /// Days used to fit z-score statistics.
    #[arg(long, default_value_t = 7)]
    fit_days: usize,
    #[arg(long, short)]
    out: PathBuf,
    /// Input files, one or more trading days each, in order.
    #[arg(required = true)]
    inputs: Vec<PathBuf>,
}

#[derive(Clone, Copy, serde::Serialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
enum Layout {
    Auto,
    RowMajor,
    FeatureMajor,
}

#[derive(Clone, Copy, serde::Serialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
enum Normalize {
    None,
    Zscore,
}

#[derive(Args)]
struct SynthArgs {
    /// TOML file with generator settings.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    events: Option<usize>,
    #[arg(long, short)]
    out: PathBuf,
}

#[derive(Args)]
struct RepresentArgs {
    #[arg(long)]
    series: PathBuf,
    #[arg(long, value_parser = parse_scheme)]
    scheme: Scheme,
    /// Take every n-th window.
    #[arg(long, default_value_t = 1)]
    stride: usize,
    #[command(flatten)]
    common: CommonArgs,
    #[arg(long, short)]
    out: PathBuf,
}

#[derive(Args)]
struct PerturbArgs {
    /// Series cache to perturb snapshot by snapshot.
    #[arg(long, conflicts_with = "events", required_unless_present = "events")]
    series: Option<PathBuf>,
    /// Event CSV replayed and perturbed against the full book.
    #[arg(long)]
    events: Option<PathBuf>,
    #[arg(long, default_value_t = 0.01)]
    tick_size: f64,
    #[arg(long, default_value_t = 1)]
    min_order_size: u64,
    #[arg(long, default_value_t = 10)]
    levels: usize,
    #[arg(long, value_parser = parse_paradigm)]
    paradigm: Paradigm,
    #[command(flatten)]
    common: CommonArgs,
    #[arg(long, short)]
    out: PathBuf,
}

#[derive(Args)]
struct LabelArgs {
    #[arg(long)]
    series: PathBuf,
    #[command(flatten)]
    common: CommonArgs,
    #[arg(long, short)]
    out: PathBuf,
}

#[derive(Args)]
struct ExportArgs {
    #[arg(long)]
    series: PathBuf,
    /// Clean series to take labels from (defaults to `--series`).
    #[arg(long)]
    labels_from: Option<PathBuf>,
    #[arg(long, value_parser = parse_scheme)]
    scheme: Scheme,
    /// Split tag recorded in the sidecar.
    #[arg(long, default_value = "test")]
    split: String,
    #[arg(long, default_value_t = 1)]
    stride: usize,
    #[command(flatten)]
    common: CommonArgs,
    /// Feature tensor path; labels go to `<stem>.labels.lobt`.
    #[arg(long, short)]
    out: PathBuf,
}

#[derive(Args)]
struct TrainArgs {
    #[arg(long)]
    train: PathBuf,
    #[arg(long, value_parser = parse_model, default_value = "linear")]
    model: ModelKind,
    #[arg(long, value_parser = parse_scheme, default_value = "mw")]
    scheme: Scheme,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[command(flatten)]
    fit: FitArgs,
    #[command(flatten)]
    common: CommonArgs,
    /// Series to score after training.
    #[arg(long)]
    test: Option<PathBuf>,
    /// Where to write test metrics (requires `--test`).
    #[arg(long, requires = "test")]
    metrics: Option<PathBuf>,
    /// Checkpoint path.
    #[arg(long, short)]
    out: PathBuf,
}

#[derive(Args)]
struct FitArgs {
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    learning_rate: Option<f64>,
    #[arg(long)]
    batch_size: Option<usize>,
    #[arg(long)]
    train_stride: Option<usize>,
    #[arg(long)]
    test_stride: Option<usize>,
}

#[derive(Args)]
struct EvaluateArgs {
    #[arg(long)]
    checkpoint: PathBuf,
    #[arg(long)]
    series: PathBuf,
    #[arg(long)]
    labels_from: Option<PathBuf>,
    /// Metrics JSON output; printed to stdout when absent.
    #[arg(long, short)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct GridArgs {
    #[arg(long, num_args = 1.., value_delimiter = ',')]
    train: Vec<PathBuf>,
    #[arg(long, num_args = 1.., value_delimiter = ',')]
    test: Vec<PathBuf>,
    #[arg(long, value_enum)]
    format: Option<DataFormat>,
    /// Comma-separated list or `all`.
    #[arg(long)]
    models: Option<String>,
    #[arg(long)]
    schemes: Option<String>,
    #[arg(long)]
    paradigms: Option<String>,
    /// Number of seeds, run as 0..n.
    #[arg(long)]
    seeds: Option<u64>,
    #[command(flatten)]
    fit: FitArgs,
    #[command(flatten)]
    common: CommonArgs,
    #[arg(long, short)]
    out: PathBuf,
}

fn parse_scheme(s: &str) -> std::result::Result<Scheme, String> {
    Scheme::parse(s).ok_or_else(|| format!("unknown scheme {s:?}"))
}

fn parse_paradigm(s: &str) -> std::result::Result<Paradigm, String> {
    Paradigm::parse(s).ok_or_else(|| format!("unknown paradigm {s:?}"))
}

fn parse_model(s: &str) -> std::result::Result<ModelKind, String> {
    ModelKind::parse(s).ok_or_else(|| format!("unknown model {s:?}"))
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    write_atomic(path, text.as_bytes()).map_err(|e| Failure::Runtime(format!("{}: {e}", path.display())))
}

fn json(value: &impl serde::Serialize) -> Result<String> {
    let mut s = serde_json::to_string_pretty(value).map_err(|e| Failure::Runtime(e.to_string()))?;
    s.push('\n');
    Ok(s)
}

fn ingest(a: IngestArgs) -> Result<()> {
    let fi = Fi2010Options {
        tick_size: a.tick_size,
        min_order_size: a.min_order_size,
        layout: match a.layout {
            Layout::Auto => Fi2010Layout::Auto,
            Layout::RowMajor => Fi2010Layout::RowMajor,
            Layout::FeatureMajor => Fi2010Layout::FeatureMajor,
        },
        prenormalized: a.prenormalized,
    };
    let options = serde_json::json!({
        "format": a.format, "fi2010": fi, "levels": a.levels, "normalize": a.normalize, "fit_days": a.fit_days,
    });
    let key = files::hash_inputs(&a.inputs, &options)?;
    if files::cache_hit(&a.out, &key) {
        let cached = SeriesFile::read(&a.out)?;
        println!("{} (cached)", summary_line(&a.out, &cached.series));
        return Ok(());
    }
    let mut series = files::parse_inputs(&a.inputs, a.format, &fi, a.levels)?;
    let mut normalization = None;
    if let Normalize::Zscore = a.normalize {
        let fit_on = if series.days().len() > a.fit_days { series.split_days(a.fit_days)?.0 } else { series.clone() };
        let spec = NormalizationSpec::fit_zscore(&fit_on)?;
        debug_assert_eq!(spec.mode, NormalizationMode::Zscore);
        series = lobrep::ingest::normalize(&series, &spec)?;
        normalization = Some(spec);
    }
    let file = SeriesFile { meta: SeriesMeta { source_sha256: Some(key.clone()), paradigm: None, normalization }, series };
    file.write(&a.out)?;
    write_text(&files::key_path(&a.out), &format!("{key}\n"))?;
    println!("{}", summary_line(&a.out, &file.series));
    Ok(())
}

fn summary_line(out: &Path, s: &SnapshotSeries) -> String {
    format!("{}: {} rows, {} days, L={}", out.display(), s.len(), s.days().len(), s.levels)
}

fn synth(a: SynthArgs) -> Result<()> {
    let mut cfg: SynthConfig = match &a.config {
        Some(p) => {
            let text = std::fs::read_to_string(p).map_err(|e| Failure::Runtime(format!("{}: {e}", p.display())))?;
            toml::from_str(&text).map_err(|e| Failure::Parse(format!("{}: {e}", p.display())))?
        }
        None => SynthConfig::default(),
    };
    cfg.seed = a.seed.unwrap_or(cfg.seed);
    cfg.events = a.events.unwrap_or(cfg.events);
    let stream = generate(&cfg).map_err(lobrep::Error::from)?;
    lobrep::ingest::write_events(&stream, &a.out)?;
    println!("{}: {} events", a.out.display(), stream.events.len());
    Ok(())
}

/// Window end positions that fit inside one trading day.
fn window_positions(s: &SnapshotSeries, history: usize, stride: usize) -> Vec<usize> {
    s.days()
        .into_iter()
        .flat_map(|(start, end)| (start + history.saturating_sub(1)..end).step_by(stride.max(1)))
        .collect()
}

fn represent(a: RepresentArgs) -> Result<()> {
    let cfg = a.common.resolve()?.experiment;
    let file = SeriesFile::read(&a.series)?;
    let s = &file.series;
    let spec = SampleSpec { stride: a.stride, ..cfg.sample_spec(a.scheme, a.stride) };
    let positions = window_positions(s, cfg.window.history, a.stride);
    let (rows, cols) = (cfg.window.history, spec.row_width(s.levels));
    let mut data = Vec::with_capacity(positions.len() * rows * cols);
    let mut refs = Vec::with_capacity(positions.len());
    for &t in &positions {
        let r = window_tensor(s, t, &spec)?;
        refs.push(r.meta.reference_tick.map(|x| x.0));
        data.extend_from_slice(&r.data);
    }
    let tensor = Tensor::from_f64_as_f32(vec![positions.len(), rows, cols], &data)?;
    tensor.write(&a.out)?;
    Sidecar {
        kind: "features".into(),
        scheme: Some(a.scheme.name().into()),
        paradigm: file.meta.paradigm.map(|p| p.name().into()),
        shape: tensor.dims.clone(),
        levels: Some(s.levels),
        tick_size: Some(s.tick_size),
        window: Some(cfg.window),
        extra: serde_json::json!({ "positions": positions, "reference_ticks": refs }),
        ..Default::default()
    }
    .write(&a.out)?;
    println!("{}: {:?}", a.out.display(), tensor.dims);
    Ok(())
}

fn perturb(a: PerturbArgs) -> Result<()> {
    let cfg = a.common.resolve()?.experiment;
    let spec = cfg.perturbation(a.paradigm);
    let (series, source) = match (&a.series, &a.events) {
        (Some(p), _) => {
            let f = SeriesFile::read(p)?;
            (perturb_series(&f.series, &spec)?, f.meta.source_sha256)
        }
        (None, Some(p)) => {
            let stream = lobrep::ingest::read_events(p, a.tick_size, a.min_order_size)
                .map_err(|e| Failure::from(e).context(p))?;
            (perturb_event_stream(&stream, &spec, a.levels)?, None)
        }
        (None, None) => unreachable!("clap requires an input"),
    };
    if series.depth_truncated {
        eprintln!("warning: snapshots too shallow for the fill cap; filled up to the known depth");
    }
    let file =
        SeriesFile { meta: SeriesMeta { source_sha256: source, paradigm: Some(a.paradigm), normalization: None }, series };
    file.write(&a.out)?;
    println!("{} ({})", summary_line(&a.out, &file.series), a.paradigm.name());
    Ok(())
}

fn label(a: LabelArgs) -> Result<()> {
    let cfg = a.common.resolve()?.experiment;
    let s = SeriesFile::read(&a.series)?.series;
    let labels = series_labels(&s, &cfg.sample_spec(Scheme::Mw, 1))?;
    let mut out = String::from("t,class\n");
    let mut counts = [0usize; 3];
    for (t, c) in labels.iter().enumerate() {
        if let Some(c) = c {
            counts[c.index()] += 1;
            let _ = writeln!(out, "{t},{}", c.name());
        }
    }
    write_text(&a.out, &out)?;
    println!("{}: up {}, stationary {}, down {}", a.out.display(), counts[0], counts[1], counts[2]);
    Ok(())
}

fn labels_path(out: &Path) -> PathBuf {
    let stem = out.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    out.with_file_name(format!("{stem}.labels.lobt"))
}

fn export(a: ExportArgs) -> Result<()> {
    let cfg = a.common.resolve()?.experiment;
    let file = SeriesFile::read(&a.series)?;
    let clean = match &a.labels_from {
        Some(p) => SeriesFile::read(p)?.series,
        None => file.series.clone(),
    };
    let spec = cfg.sample_spec(a.scheme, a.stride);
    let samples = build_samples_with_labels(&file.series, &clean, &spec)?;
    let n = samples.positions.len();
    let features = Tensor::from_f64_as_f32(vec![n, samples.rows, samples.cols], &samples.data.inputs)?;
    let ys: Vec<f64> = samples.data.labels.iter().map(|&y| y as f64).collect();
    let labels = Tensor::from_f64_as_f32(vec![n], &ys)?;
    let lpath = labels_path(&a.out);
    let paradigm = file.meta.paradigm.unwrap_or(Paradigm::None);
    let sidecar = Sidecar {
        kind: "features".into(),
        scheme: Some(a.scheme.name().into()),
        split: Some(a.split.clone()),
        paradigm: Some(paradigm.name().into()),
        label_file: lpath.file_name().map(|f| f.to_string_lossy().into_owned()),
        shape: features.dims.clone(),
        levels: Some(file.series.levels),
        tick_size: Some(file.series.tick_size),
        window: Some(cfg.window),
        label: Some(cfg.label),
        classes: Class::ALL.iter().map(|c| c.name().to_string()).collect(),
        extra: serde_json::json!({ "positions": samples.positions, "label_source": cfg.label_source }),
    };
    labels.write(&lpath)?;
    Sidecar { kind: "labels".into(), label_file: None, shape: vec![n], extra: serde_json::Value::Null, ..sidecar.clone() }
        .write(&lpath)?;
    features.write(&a.out)?;
    sidecar.write(&a.out)?;
    println!("{}: {:?}, labels {}", a.out.display(), features.dims, lpath.display());
    Ok(())
}

impl FitArgs {
    fn apply(&self, cfg: &mut lobrep::ExperimentConfig) {
        if let Some(v) = self.epochs {
            cfg.train.max_epochs = v;
        }
        if let Some(v) = self.learning_rate {
            cfg.train.learning_rate = v;
        }
        if let Some(v) = self.batch_size {
            cfg.train.batch_size = v;
        }
        if let Some(v) = self.train_stride {
            cfg.train_stride = v;
        }
        if let Some(v) = self.test_stride {
            cfg.test_stride = v;
        }
    }
}

fn train(a: TrainArgs) -> Result<()> {
    let mut cfg = a.common.resolve()?.experiment;
    a.fit.apply(&mut cfg);
    let series = SeriesFile::read(&a.train)?.series;
    let ckpt = Checkpoint::fit(&series, &cfg, a.model, a.scheme, a.seed)?;
    ckpt.save(&a.out)?;
    println!("{}: {} {} seed {}", a.out.display(), a.model.name(), a.scheme.name(), a.seed);
    if let Some(test) = &a.test {
        let series = SeriesFile::read(test)?.series;
        let m = ckpt.evaluate(&series, &series)?;
        report(&m, a.metrics.as_deref())?;
    }
    Ok(())
}

fn report(m: &Metrics, out: Option<&Path>) -> Result<()> {
    let text = json(m)?;
    match out {
        Some(p) => {
            write_text(p, &text)?;
            println!("accuracy {:.2}, f_score {:.2}", m.accuracy, m.f_score);
        }
        None => print!("{text}"),
    }
    Ok(())
}

fn evaluate(a: EvaluateArgs) -> Result<()> {
    let ckpt = Checkpoint::load(&a.checkpoint)?;
    let series = SeriesFile::read(&a.series)?.series;
    let clean = match &a.labels_from {
        Some(p) => SeriesFile::read(p)?.series,
        None => series.clone(),
    };
    report(&ckpt.evaluate(&series, &clean)?, a.out.as_deref())
}

fn grid(a: GridArgs) -> Result<()> {
    let file = a.common.resolve()?;
    let (mut cfg, mut data) = (file.experiment, file.data);
    a.fit.apply(&mut cfg);
    if let Some(s) = &a.models {
        cfg.models = config::parse_models(s)?;
    }
    if let Some(s) = &a.schemes {
        cfg.schemes = config::parse_schemes(s)?;
    }
    if let Some(s) = &a.paradigms {
        cfg.paradigms = config::parse_paradigms(s)?;
    }
    if let Some(n) = a.seeds {
        cfg.seeds = (0..n).collect();
    }
    if !a.train.is_empty() {
        data.train = a.train.clone();
    }
    if !a.test.is_empty() {
        data.test = a.test.clone();
    }
    if let Some(f) = a.format {
        data.format = f;
    }
    cfg.validate()?;
    let inputs = files::grid_data(&data, &cfg)?;
    let report = run_grid(&cfg, &inputs)?;
    report.write(&a.out)?;
    write_text(&a.out.join("data.json"), &json(&data)?)?;
    print!("{}", report.table());
    let failed = report.rows.iter().filter(|r| r.error.is_some()).count();
    if failed > 0 {
        eprintln!("{failed} of {} rows failed; see summary.json", report.rows.len());
    }
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Ingest(a) => ingest(a),
        Command::Synth(a) => synth(a),
        Command::Represent(a) => represent(a),
        Command::Perturb(a) => perturb(a),
        Command::Label(a) => label(a),
        Command::Export(a) => export(a),
        Command::Train(a) => train(a),
        Command::Evaluate(a) => evaluate(a),
        Command::Grid(a) => grid(a),
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Runtime(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(1)
        }
        Err(Failure::Parse(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(2)
        }
    }
}
