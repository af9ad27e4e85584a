//! Series caches and input loading.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use lobrep::eval::GridData;
use lobrep::ingest::{self, events_to_series, read_events, Fi2010Options, NormalizationSpec};
use lobrep::io::write_atomic;
use lobrep::perturb::{perturb_event_stream, Paradigm};
use lobrep::{ExperimentConfig, SnapshotSeries};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::config::{DataFormat, DataSection};
use crate::Failure;

/// What a series cache was built from.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SeriesMeta {
    /// Hash over the input files and ingest options.
    #[serde(default)]
    pub source_sha256: Option<String>,
    #[serde(default)]
    pub paradigm: Option<Paradigm>,
    #[serde(default)]
    pub normalization: Option<NormalizationSpec>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeriesFile {
    pub meta: SeriesMeta,
    pub series: SnapshotSeries,
}

impl SeriesFile {
    pub fn read(path: &Path) -> Result<Self, Failure> {
        let text = std::fs::read_to_string(path).map_err(|e| Failure::Runtime(format!("{}: {e}", path.display())))?;
        serde_json::from_str(&text).map_err(|e| Failure::Parse(format!("{}: not a series cache: {e}", path.display())))
    }

    pub fn write(&self, path: &Path) -> Result<(), Failure> {
        let mut text = serde_json::to_string(self).map_err(|e| Failure::Runtime(e.to_string()))?;
        text.push('\n');
        write_atomic(path, text.as_bytes()).map_err(|e| Failure::Runtime(format!("{}: {e}", path.display())))
    }
}

pub fn hash_inputs(paths: &[PathBuf], options: &impl Serialize) -> Result<String, Failure> {
    let mut h = Sha256::new();
    for p in paths {
        let bytes = std::fs::read(p).map_err(|e| Failure::Runtime(format!("{}: {e}", p.display())))?;
        h.update((bytes.len() as u64).to_le_bytes());
        h.update(&bytes);
    }
    h.update(serde_json::to_vec(options).map_err(|e| Failure::Runtime(e.to_string()))?);
    Ok(h.finalize().iter().map(|b| format!("{b:02x}")).collect())
}

pub fn key_path(out: &Path) -> PathBuf {
    let mut s = out.as_os_str().to_os_string();
    s.push(".sha256");
    PathBuf::from(s)
}

/// True when `out` exists and was built from inputs with this hash.
pub fn cache_hit(out: &Path, key: &str) -> bool {
    out.exists() && std::fs::read_to_string(key_path(out)).is_ok_and(|k| k.trim() == key)
}

fn fail(path: &Path) -> impl Fn(lobrep::IngestError) -> Failure + '_ {
    move |e| Failure::from(lobrep::Error::from(e)).context(path)
}

/// Parses each file as one or more trading days and concatenates them.
pub fn parse_inputs(
    paths: &[PathBuf],
    format: DataFormat,
    fi: &Fi2010Options,
    levels: usize,
) -> Result<SnapshotSeries, Failure> {
    if paths.is_empty() {
        return Err(Failure::Runtime("no input files".into()));
    }
    let parts = paths
        .iter()
        .map(|p| match format {
            DataFormat::Fi2010 => ingest::parse_fi2010(p, fi).map_err(fail(p)),
            DataFormat::Events => ingest::parse_events(p, fi.tick_size, fi.min_order_size, levels).map_err(fail(p)),
            DataFormat::Series => Ok(SeriesFile::read(p)?.series),
        })
        .collect::<Result<Vec<_>, _>>()?;
    concat(parts)
}

fn concat(parts: Vec<SnapshotSeries>) -> Result<SnapshotSeries, Failure> {
    SnapshotSeries::concat_days(parts).map_err(|e| Failure::from(lobrep::Error::from(e)))
}

/// Builds grid inputs. Event files are perturbed against the full book, one
/// trading day per file.
pub fn grid_data(data: &DataSection, cfg: &ExperimentConfig) -> Result<GridData, Failure> {
    if data.train.is_empty() || data.test.is_empty() {
        return Err(Failure::Runtime("grid needs train and test inputs".into()));
    }
    let fi = Fi2010Options { tick_size: data.tick_size, min_order_size: data.min_order_size, ..Default::default() };
    if data.format != DataFormat::Events {
        let train = parse_inputs(&data.train, data.format, &fi, data.levels)?;
        let test = parse_inputs(&data.test, data.format, &fi, data.levels)?;
        return Ok(GridData::from_series(train, test, cfg)?);
    }
    let read = |p: &PathBuf| read_events(p, data.tick_size, data.min_order_size).map_err(fail(p));
    let replay = |paths: &[PathBuf]| -> Result<SnapshotSeries, Failure> {
        let parts = paths
            .iter()
            .map(|p| events_to_series(&read(p)?, data.levels).map_err(fail(p)))
            .collect::<Result<Vec<_>, _>>()?;
        concat(parts)
    };
    let streams = data.test.iter().map(read).collect::<Result<Vec<_>, _>>()?;
    let mut tests = BTreeMap::new();
    for &p in &cfg.paradigms {
        let parts = streams
            .iter()
            .map(|s| perturb_event_stream(s, &cfg.perturbation(p), data.levels).map_err(lobrep::Error::from))
            .collect::<Result<Vec<_>, _>>()?;
        tests.insert(p, concat(parts)?);
    }
    Ok(GridData { train: replay(&data.train)?, test_clean: replay(&data.test)?, tests })
}
