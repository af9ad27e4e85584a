//! Experiment config files (TOML) and flag overrides.

use std::path::{Path, PathBuf};

use lobrep::eval::ExperimentConfig;
use lobrep::learn::ModelKind;
use lobrep::perturb::{FillCap, Paradigm};
use lobrep::represent::Scheme;
use lobrep::LabelSource;
use serde::{Deserialize, Serialize};

use crate::Failure;

/// Where grid inputs come from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum DataFormat {
    /// Series caches written by `ingest` or `perturb`.
    #[default]
    Series,
    Fi2010,
    /// `seq,kind,side,price,volume` CSVs; perturbations see the full book.
    Events,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DataSection {
    pub format: DataFormat,
    pub train: Vec<PathBuf>,
    pub test: Vec<PathBuf>,
    pub levels: usize,
    pub tick_size: f64,
    pub min_order_size: u64,
}

impl Default for DataSection {
    fn default() -> Self {
        Self { format: DataFormat::Series, train: Vec::new(), test: Vec::new(), levels: 10, tick_size: 0.01, min_order_size: 1 }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize)]
pub struct ConfigFile {
    pub experiment: ExperimentConfig,
    pub data: DataSection,
}

/// Reads a config file: experiment keys at the top level plus an optional
/// `[data]` table. Relative data paths resolve against the file's directory.
pub fn load(path: Option<&Path>) -> Result<ConfigFile, Failure> {
    let Some(path) = path else {
        return Ok(ConfigFile::default());
    };
    let text = std::fs::read_to_string(path).map_err(|e| Failure::Runtime(format!("{}: {e}", path.display())))?;
    parse(&text, path.parent().unwrap_or(Path::new(""))).map_err(|e| Failure::Parse(format!("{}: {e}", path.display())))
}

pub fn parse(text: &str, base: &Path) -> Result<ConfigFile, String> {
    let mut table: toml::Table = toml::from_str(text).map_err(|e| e.to_string())?;
    let data = match table.remove("data") {
        Some(v) => v.try_into::<DataSection>().map_err(|e| format!("[data]: {e}"))?,
        None => DataSection::default(),
    };
    let known = serde_json::to_value(ExperimentConfig::default()).expect("config serializes");
    if let Some(key) = table.keys().find(|k| known.get(k.as_str()).is_none()) {
        return Err(format!("unknown key {key:?}"));
    }
    let experiment: ExperimentConfig = toml::Value::Table(table).try_into().map_err(|e| e.to_string())?;
    let rebase = |v: Vec<PathBuf>| v.into_iter().map(|p| if p.is_relative() { base.join(p) } else { p }).collect();
    let data = DataSection { train: rebase(data.train), test: rebase(data.test), ..data };
    Ok(ConfigFile { experiment, data })
}

fn list<T>(s: &str, all: &[T], parse: impl Fn(&str) -> Option<T>, what: &str) -> Result<Vec<T>, Failure>
where
    T: Copy,
{
    if s == "all" {
        return Ok(all.to_vec());
    }
    s.split(',')
        .map(|t| parse(t.trim()).ok_or_else(|| Failure::Parse(format!("unknown {what} {t:?}"))))
        .collect()
}

pub fn parse_models(s: &str) -> Result<Vec<ModelKind>, Failure> {
    list(s, &[ModelKind::Linear, ModelKind::Mlp], ModelKind::parse, "model")
}

pub fn parse_schemes(s: &str) -> Result<Vec<Scheme>, Failure> {
    list(s, &Scheme::ALL, Scheme::parse, "scheme")
}

pub fn parse_paradigms(s: &str) -> Result<Vec<Paradigm>, Failure> {
    list(s, &Paradigm::ALL, Paradigm::parse, "paradigm")
}

/// `deepest` or a tick count.
pub fn parse_fill_cap(s: &str) -> Result<FillCap, String> {
    match s {
        "deepest" | "deepest_level" => Ok(FillCap::DeepestLevel),
        n => n.parse().map(FillCap::Ticks).map_err(|_| format!("expected `deepest` or a tick count, got {n:?}")),
    }
}

/// Window, label and perturbation flags shared by several subcommands.
#[derive(Debug, Clone, Default, clap::Args)]
pub struct CommonArgs {
    /// Experiment config file (TOML); flags override its values.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// History length N (also T for level-based windows).
    #[arg(long = "N")]
    pub history: Option<usize>,
    /// Moving-window half-width W in ticks.
    #[arg(long = "W")]
    pub half_width: Option<usize>,
    /// Smoothing std in ticks.
    #[arg(long)]
    pub sigma: Option<f64>,
    #[arg(long)]
    pub horizon: Option<usize>,
    #[arg(long)]
    pub alpha: Option<f64>,
    /// Use the series' provided labels for this horizon instead of computing them.
    #[arg(long)]
    pub provided_labels: Option<usize>,
    /// Injected order size in lots (default: the minimum order size).
    #[arg(long)]
    pub order_size: Option<u64>,
    /// How far behind the quote to fill: `deepest` or a number of ticks.
    #[arg(long, value_parser = parse_fill_cap)]
    pub fill_cap: Option<FillCap>,
    /// Fill only up to the known depth when snapshots are too shallow.
    #[arg(long)]
    pub allow_truncation: bool,
}

impl CommonArgs {
    pub fn resolve(&self) -> Result<ConfigFile, Failure> {
        let mut file = load(self.config.as_deref())?;
        let cfg = &mut file.experiment;
        if let Some(v) = self.history {
            cfg.window.history = v;
        }
        if let Some(v) = self.half_width {
            cfg.window.half_width = v;
        }
        if let Some(v) = self.sigma {
            cfg.window.sigma = v;
        }
        if let Some(v) = self.horizon {
            cfg.label.horizon = v;
        }
        if let Some(v) = self.alpha {
            cfg.label.alpha = v;
        }
        if let Some(k) = self.provided_labels {
            cfg.label_source = LabelSource::Provided(k);
        }
        if self.order_size.is_some() {
            cfg.order_size = self.order_size;
        }
        if let Some(c) = self.fill_cap {
            cfg.fill_cap = c;
        }
        cfg.allow_truncation |= self.allow_truncation;
        cfg.window.validate().map_err(|e| Failure::Parse(e.to_string()))?;
        Ok(file)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn partial_tables_keep_defaults() {
        let f = parse(
            "seeds = [1, 2]\nschemes = [\"mw\"]\n[window]\nhalf_width = 5\n[train]\nmax_epochs = 3\n[data]\nformat = \"events\"\ntrain = [\"a.csv\"]\n",
            Path::new("/cfg"),
        )
        .unwrap();
        assert_eq!(f.experiment.seeds, vec![1, 2]);
        assert_eq!(f.experiment.schemes, vec![Scheme::Mw]);
        assert_eq!(f.experiment.window.half_width, 5);
        assert_eq!(f.experiment.window.history, 10);
        assert_eq!(f.experiment.train.max_epochs, 3);
        assert_eq!(f.experiment.train.batch_size, 64);
        assert_eq!(f.data.format, DataFormat::Events);
        assert_eq!(f.data.train, vec![PathBuf::from("/cfg/a.csv")]);
    }

    #[test]
    fn tagged_values() {
        let f = parse("fill_cap = { ticks = 4 }\nlabel_source = { source = \"provided\", horizon = 50 }\n", Path::new("")).unwrap();
        assert_eq!(f.experiment.fill_cap, FillCap::Ticks(4));
        assert_eq!(f.experiment.label_source, LabelSource::Provided(50));
    }

    #[test]
    fn unknown_keys_rejected() {
        assert!(parse("sedes = [1]\n", Path::new("")).unwrap_err().contains("sedes"));
        assert!(parse("[data]\ntrian = []\n", Path::new("")).is_err());
    }

    #[test]
    fn lists() {
        assert_eq!(parse_schemes("all").unwrap().len(), 4);
        assert_eq!(parse_paradigms("none,both").unwrap(), vec![Paradigm::None, Paradigm::Both]);
        assert!(parse_models("svm").is_err());
        assert_eq!(parse_fill_cap("7").unwrap(), FillCap::Ticks(7));
    }
}
