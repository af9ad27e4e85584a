//! Parsers for FI-2010-style snapshot files and event-stream CSVs, plus
//! feature normalization.
//!
//! FI-2010 rows hold, per level `i` ascending, `ask_price_i, ask_volume_i,
//! bid_price_i, bid_volume_i` for 10 levels (40 values), optionally followed
//! by more feature columns, and then 5 label columns for horizons
//! 10, 20, 30, 50 and 100 (coded 1 = up, 2 = stationary, 3 = down). Values
//! may be comma- or whitespace-separated. Files in the dataset's native
//! feature-major layout (one feature per line) are transposed on read.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::book::{
    price_to_tick, BookError, BookEvent, BookState, EventKind, Level, LevelSnapshot, Side,
    SnapshotError, Tick,
};
use crate::label::Class;

pub const FI2010_LEVELS: usize = 10;
pub const FI2010_FEATURES: usize = 4 * FI2010_LEVELS;
pub const FI2010_HORIZONS: [usize; 5] = [10, 20, 30, 50, 100];

#[derive(Debug, Error)]
pub enum IngestError {
    #[error("io error on {path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("row {row}: {msg}")]
    MalformedRow { row: usize, msg: String },
    #[error("row {row}: invalid snapshot: {source}")]
    InvalidSnapshot { row: usize, source: SnapshotError },
    #[error("line {line}: {source}")]
    Book { line: usize, source: BookError },
    #[error("feature {feature} has zero variance")]
    DegenerateFeature { feature: usize },
    #[error("{0}")]
    Invalid(String),
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> IngestError + '_ {
    move |source| IngestError::Io { path: path.display().to_string(), source }
}

/// Ordered snapshots sharing one tick grid and nominal depth.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SnapshotSeries {
    pub snapshots: Vec<LevelSnapshot>,
    /// Nominal depth `L`; every snapshot holds at least this many levels per side.
    pub levels: usize,
    pub tick_size: f64,
    pub min_order_size: u64,
    /// Provided class labels keyed by horizon, one per snapshot.
    #[serde(default)]
    pub provided_labels: BTreeMap<usize, Vec<Class>>,
    /// Start offsets of trading days (always begins with 0).
    #[serde(default)]
    pub day_starts: Vec<usize>,
    /// Set when a perturbation could only be applied up to the known depth.
    #[serde(default)]
    pub depth_truncated: bool,
    /// Set when values are z-scored; snapshot ordering invariants no longer apply.
    #[serde(default)]
    pub normalized: bool,
}

impl SnapshotSeries {
    pub fn new(snapshots: Vec<LevelSnapshot>, levels: usize, tick_size: f64, min_order_size: u64) -> Self {
        Self {
            snapshots,
            levels,
            tick_size,
            min_order_size,
            provided_labels: BTreeMap::new(),
            day_starts: vec![0],
            depth_truncated: false,
            normalized: false,
        }
    }

    pub fn len(&self) -> usize {
        self.snapshots.len()
    }

    pub fn is_empty(&self) -> bool {
        self.snapshots.is_empty()
    }

    pub fn mids(&self) -> Vec<f64> {
        self.snapshots.iter().map(crate::book::mid_price).collect()
    }

    /// `(start, end)` ranges of each trading day.
    pub fn days(&self) -> Vec<(usize, usize)> {
        let mut starts = self.day_starts.clone();
        if starts.first() != Some(&0) {
            starts.insert(0, 0);
        }
        let mut out = Vec::with_capacity(starts.len());
        for (i, &s) in starts.iter().enumerate() {
            let e = starts.get(i + 1).copied().unwrap_or(self.len());
            if e > s {
                out.push((s, e));
            }
        }
        out
    }

    /// Checks the series-level invariants and every snapshot.
    pub fn validate(&self) -> Result<(), IngestError> {
        for (i, w) in self.snapshots.windows(2).enumerate() {
            if w[1].index <= w[0].index {
                return Err(IngestError::Invalid(format!(
                    "snapshot indices not strictly increasing at position {}",
                    i + 1
                )));
            }
        }
        for (i, s) in self.snapshots.iter().enumerate() {
            if s.depth() < self.levels {
                return Err(IngestError::Invalid(format!(
                    "snapshot {i} has depth {} < {}",
                    s.depth(),
                    self.levels
                )));
            }
            if !self.normalized {
                s.validate().map_err(|source| IngestError::InvalidSnapshot { row: i + 1, source })?;
            }
        }
        for (h, labels) in &self.provided_labels {
            if labels.len() != self.len() {
                return Err(IngestError::Invalid(format!("label column k={h} has wrong length")));
            }
        }
        Ok(())
    }

    /// Concatenates series that share grid and depth, one trading day each.
    pub fn concat_days(parts: Vec<SnapshotSeries>) -> Result<SnapshotSeries, IngestError> {
        let mut iter = parts.into_iter();
        let mut out = iter.next().ok_or_else(|| IngestError::Invalid("no input series".into()))?;
        for part in iter {
            if part.levels != out.levels || part.tick_size != out.tick_size {
                return Err(IngestError::Invalid("series disagree on depth or tick size".into()));
            }
            let offset = out.len();
            let next_index = out.snapshots.last().map_or(0, |s| s.index + 1);
            let base = part.snapshots.first().map_or(0, |s| s.index);
            for (h, mut labels) in part.provided_labels {
                if let Some(existing) = out.provided_labels.get_mut(&h) {
                    existing.append(&mut labels);
                }
            }
            out.day_starts.extend(part.day_starts.iter().map(|d| d + offset));
            out.snapshots.extend(part.snapshots.into_iter().map(|mut s| {
                s.index = s.index - base + next_index;
                s
            }));
            out.depth_truncated |= part.depth_truncated;
        }
        out.day_starts.dedup();
        // Drop label columns that were not present in every part.
        let n = out.len();
        out.provided_labels.retain(|_, v| v.len() == n);
        Ok(out)
    }

    /// Splits into `(train, test)` with the first `train_days` days in train.
    pub fn split_days(&self, train_days: usize) -> Result<(SnapshotSeries, SnapshotSeries), IngestError> {
        let days = self.days();
        if train_days == 0 || train_days >= days.len() {
            return Err(IngestError::Invalid(format!(
                "cannot put {train_days} of {} days in the training split",
                days.len()
            )));
        }
        let cut = days[train_days].0;
        Ok((self.slice(0, cut), self.slice(cut, self.len())))
    }

    fn slice(&self, start: usize, end: usize) -> SnapshotSeries {
        SnapshotSeries {
            snapshots: self.snapshots[start..end].to_vec(),
            levels: self.levels,
            tick_size: self.tick_size,
            min_order_size: self.min_order_size,
            provided_labels: self
                .provided_labels
                .iter()
                .map(|(h, v)| (*h, v[start..end].to_vec()))
                .collect(),
            day_starts: self
                .day_starts
                .iter()
                .filter(|d| **d >= start && **d < end)
                .map(|d| d - start)
                .chain(std::iter::once(0))
                .collect::<std::collections::BTreeSet<_>>()
                .into_iter()
                .collect(),
            depth_truncated: self.depth_truncated,
            normalized: self.normalized,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Fi2010Layout {
    /// One snapshot per line unless the shape says otherwise.
    #[default]
    Auto,
    RowMajor,
    /// One feature per line, one snapshot per column (the dataset's own files).
    FeatureMajor,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Fi2010Options {
    pub tick_size: f64,
    pub min_order_size: u64,
    pub layout: Fi2010Layout,
    /// Values are already z-scored; skip ordering checks and mark the series.
    pub prenormalized: bool,
}

impl Default for Fi2010Options {
    fn default() -> Self {
        Self { tick_size: 0.01, min_order_size: 1, layout: Fi2010Layout::Auto, prenormalized: false }
    }
}

fn split_fields(line: &str) -> Vec<&str> {
    if line.contains(',') {
        line.split(',').map(str::trim).collect()
    } else {
        line.split_whitespace().collect()
    }
}

fn parse_numbers(line: &str, row: usize) -> Result<Vec<f64>, IngestError> {
    split_fields(line)
        .into_iter()
        .enumerate()
        .map(|(col, f)| {
            f.parse::<f64>().map_err(|_| IngestError::MalformedRow {
                row,
                msg: format!("column {} is not numeric: {f:?}", col + 1),
            })
        })
        .collect()
}

/// Parses FI-2010 text into a series with `L = 10`.
pub fn parse_fi2010_str(text: &str, opts: &Fi2010Options) -> Result<SnapshotSeries, IngestError> {
    let lines: Vec<(usize, &str)> = text
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim()))
        .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'))
        .collect();
    let mut rows = Vec::with_capacity(lines.len());
    for (row, line) in &lines {
        rows.push((*row, parse_numbers(line, *row)?));
    }
    let feature_major = match opts.layout {
        Fi2010Layout::RowMajor => false,
        Fi2010Layout::FeatureMajor => true,
        Fi2010Layout::Auto => {
            let width = rows.first().map_or(0, |r| r.1.len());
            rows.len() >= FI2010_FEATURES + 5 && width > rows.len()
        }
    };
    if feature_major {
        rows = transpose(rows)?;
    }

    let mut snapshots = Vec::with_capacity(rows.len());
    let mut labels: Vec<Vec<Class>> = vec![Vec::new(); FI2010_HORIZONS.len()];
    let mut has_labels = None;
    for (row, values) in rows {
        let n = values.len();
        if n != FI2010_FEATURES && n < FI2010_FEATURES + FI2010_HORIZONS.len() {
            return Err(IngestError::MalformedRow {
                row,
                msg: format!("expected 40 features (+5 labels), found {n} values"),
            });
        }
        let with_labels = n > FI2010_FEATURES;
        match has_labels {
            None => has_labels = Some(with_labels),
            Some(h) if h != with_labels => {
                return Err(IngestError::MalformedRow { row, msg: "label columns present on some rows only".into() })
            }
            _ => {}
        }
        let mut asks = Vec::with_capacity(FI2010_LEVELS);
        let mut bids = Vec::with_capacity(FI2010_LEVELS);
        for lvl in 0..FI2010_LEVELS {
            let base = 4 * lvl;
            asks.push(Level::new(values[base], values[base + 1]));
            bids.push(Level::new(values[base + 2], values[base + 3]));
        }
        let snap = LevelSnapshot { index: snapshots.len() as u64, asks, bids };
        if !opts.prenormalized {
            snap.validate().map_err(|source| IngestError::InvalidSnapshot { row, source })?;
        }
        if with_labels {
            for (j, v) in values[n - FI2010_HORIZONS.len()..].iter().enumerate() {
                let class = Class::from_fi2010_code(*v).ok_or_else(|| IngestError::MalformedRow {
                    row,
                    msg: format!("label {v} is not one of 1, 2, 3"),
                })?;
                labels[j].push(class);
            }
        }
        snapshots.push(snap);
    }
    let mut series = SnapshotSeries::new(snapshots, FI2010_LEVELS, opts.tick_size, opts.min_order_size);
    series.normalized = opts.prenormalized;
    if has_labels == Some(true) {
        series.provided_labels = FI2010_HORIZONS.iter().copied().zip(labels).collect();
    }
    Ok(series)
}

fn transpose(rows: Vec<(usize, Vec<f64>)>) -> Result<Vec<(usize, Vec<f64>)>, IngestError> {
    let width = rows.first().map_or(0, |r| r.1.len());
    if let Some((row, r)) = rows.iter().find(|r| r.1.len() != width) {
        return Err(IngestError::MalformedRow {
            row: *row,
            msg: format!("feature-major line has {} values, expected {width}", r.len()),
        });
    }
    Ok((0..width)
        .map(|c| (c + 1, rows.iter().map(|r| r.1[c]).collect()))
        .collect())
}

pub fn parse_fi2010(path: &Path, opts: &Fi2010Options) -> Result<SnapshotSeries, IngestError> {
    let text = fs::read_to_string(path).map_err(io_err(path))?;
    parse_fi2010_str(&text, opts)
}

/// Renders a series in row-major FI-2010 layout. Floats use shortest
/// round-trip formatting, so parsing the output gives back identical bits.
pub fn render_fi2010(series: &SnapshotSeries) -> Result<String, IngestError> {
    if series.levels != FI2010_LEVELS {
        return Err(IngestError::Invalid(format!("FI-2010 layout needs 10 levels, series has {}", series.levels)));
    }
    let label_cols: Option<Vec<&Vec<Class>>> = if series.provided_labels.is_empty() {
        None
    } else {
        Some(
            FI2010_HORIZONS
                .iter()
                .map(|h| {
                    series
                        .provided_labels
                        .get(h)
                        .ok_or_else(|| IngestError::Invalid(format!("missing label column k={h}")))
                })
                .collect::<Result<_, _>>()?,
        )
    };
    let mut out = String::new();
    for (t, s) in series.snapshots.iter().enumerate() {
        if s.depth() < FI2010_LEVELS {
            return Err(IngestError::Invalid(format!("snapshot {t} has fewer than 10 levels")));
        }
        let mut fields: Vec<String> = Vec::with_capacity(FI2010_FEATURES + 5);
        for lvl in 0..FI2010_LEVELS {
            fields.push(format!("{}", s.asks[lvl].price));
            fields.push(format!("{}", s.asks[lvl].volume));
            fields.push(format!("{}", s.bids[lvl].price));
            fields.push(format!("{}", s.bids[lvl].volume));
        }
        if let Some(cols) = &label_cols {
            for col in cols {
                fields.push(col[t].fi2010_code().to_string());
            }
        }
        out.push_str(&fields.join(","));
        out.push('\n');
    }
    Ok(out)
}

/// Writes `series` as an FI-2010 fixture file.
pub fn write_fi2010(series: &SnapshotSeries, path: &Path) -> Result<(), IngestError> {
    let text = render_fi2010(series)?;
    crate::io::write_atomic(path, text.as_bytes()).map_err(io_err(path))
}

/// An event stream with its grid parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EventStream {
    pub tick_size: f64,
    pub min_order_size: u64,
    /// `(seq, event)` pairs in time order.
    pub events: Vec<(u64, BookEvent)>,
}

pub const EVENT_HEADER: &str = "seq,kind,side,price,volume";

/// Parses the `seq,kind,side,price,volume` CSV format. Line numbers in
/// errors are 1-based and count the header.
pub fn parse_event_csv(text: &str, tick_size: f64, min_order_size: u64) -> Result<EventStream, IngestError> {
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, h)) if h.trim().replace(' ', "") == EVENT_HEADER => {}
        _ => {
            return Err(IngestError::MalformedRow { row: 1, msg: format!("missing header {EVENT_HEADER:?}") })
        }
    }
    let mut events = Vec::new();
    let mut last_seq: Option<u64> = None;
    for (i, line) in lines {
        let row = i + 1;
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let f: Vec<&str> = line.split(',').map(str::trim).collect();
        if f.len() != 5 {
            return Err(IngestError::MalformedRow { row, msg: format!("expected 5 fields, found {}", f.len()) });
        }
        let bad = |msg: String| IngestError::MalformedRow { row, msg };
        let seq: u64 = f[0].parse().map_err(|_| bad(format!("bad seq {:?}", f[0])))?;
        if last_seq.is_some_and(|s| seq <= s) {
            return Err(bad(format!("seq {seq} is not increasing")));
        }
        last_seq = Some(seq);
        let kind = match f[1].to_ascii_lowercase().as_str() {
            "place" => EventKind::Place,
            "cancel" => EventKind::Cancel,
            "execute" => EventKind::Execute,
            other => return Err(bad(format!("unknown kind {other:?}"))),
        };
        let side = match f[2].to_ascii_lowercase().as_str() {
            "ask" => Side::Ask,
            "bid" => Side::Bid,
            other => return Err(bad(format!("unknown side {other:?}"))),
        };
        let price: f64 = f[3].parse().map_err(|_| bad(format!("bad price {:?}", f[3])))?;
        let price = price_to_tick(price, tick_size).map_err(|source| IngestError::Book { line: row, source })?;
        let volume: u64 = f[4].parse().map_err(|_| bad(format!("bad volume {:?}", f[4])))?;
        events.push((seq, BookEvent { kind, side, price, volume }));
    }
    Ok(EventStream { tick_size, min_order_size, events })
}

pub fn read_events(path: &Path, tick_size: f64, min_order_size: u64) -> Result<EventStream, IngestError> {
    let text = fs::read_to_string(path).map_err(io_err(path))?;
    parse_event_csv(&text, tick_size, min_order_size)
}

/// Decimal places needed to print prices on this grid exactly.
fn price_decimals(tick_size: f64) -> usize {
    (0..12).find(|d| {
        let scaled = tick_size * 10f64.powi(*d as i32);
        (scaled - scaled.round()).abs() < 1e-9
    })
    .unwrap_or(12)
}

pub fn render_event_csv(stream: &EventStream) -> String {
    let dp = price_decimals(stream.tick_size);
    let mut out = String::with_capacity(stream.events.len() * 24 + 32);
    out.push_str(EVENT_HEADER);
    out.push('\n');
    for (seq, ev) in &stream.events {
        let _ = writeln!(
            out,
            "{seq},{},{},{:.dp$},{}",
            ev.kind.as_str(),
            ev.side.as_str(),
            ev.price.to_price(stream.tick_size),
            ev.volume
        );
    }
    out
}

pub fn write_events(stream: &EventStream, path: &Path) -> Result<(), IngestError> {
    crate::io::write_atomic(path, render_event_csv(stream).as_bytes()).map_err(io_err(path))
}

/// Replays events through a fresh book, calling `on_emit` with the book and
/// its top-`levels` snapshot after every event that leaves at least `levels`
/// levels on both sides. Snapshot indices are the event sequence numbers.
pub fn replay_events<F>(stream: &EventStream, levels: usize, mut on_emit: F) -> Result<(), IngestError>
where
    F: FnMut(&BookState, LevelSnapshot) -> Result<(), IngestError>,
{
    let mut book = BookState::new(stream.tick_size, stream.min_order_size)
        .map_err(|source| IngestError::Book { line: 0, source })?;
    for (i, (seq, ev)) in stream.events.iter().enumerate() {
        // header is line 1
        book.apply(ev).map_err(|source| IngestError::Book { line: i + 2, source })?;
        if book.depth(Side::Ask) >= levels && book.depth(Side::Bid) >= levels {
            let mut snap = book.snapshot(levels).map_err(|source| IngestError::Book { line: i + 2, source })?;
            snap.index = *seq;
            on_emit(&book, snap)?;
        }
    }
    Ok(())
}

/// Replays an event stream into a snapshot series of depth `levels`.
pub fn events_to_series(stream: &EventStream, levels: usize) -> Result<SnapshotSeries, IngestError> {
    if levels == 0 {
        return Err(IngestError::Invalid("levels must be >= 1".into()));
    }
    let mut snaps = Vec::new();
    replay_events(stream, levels, |_, s| {
        snaps.push(s);
        Ok(())
    })?;
    Ok(SnapshotSeries::new(snaps, levels, stream.tick_size, stream.min_order_size))
}

pub fn parse_events(path: &Path, tick_size: f64, min_order_size: u64, levels: usize) -> Result<SnapshotSeries, IngestError> {
    events_to_series(&read_events(path, tick_size, min_order_size)?, levels)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NormalizationMode {
    #[default]
    None,
    Zscore,
}

/// Per-feature affine normalization over the `4L` level features, in
/// `ask_price, ask_volume, bid_price, bid_volume` order per level.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NormalizationSpec {
    pub mode: NormalizationMode,
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

impl NormalizationSpec {
    pub fn identity() -> Self {
        Self { mode: NormalizationMode::None, mean: Vec::new(), std: Vec::new() }
    }

    /// Fits z-score statistics (population std) on a training series.
    pub fn fit_zscore(train: &SnapshotSeries) -> Result<Self, IngestError> {
        let rows: Vec<Vec<f64>> = train.snapshots.iter().map(|s| level_features(s, train.levels)).collect();
        Self::fit_rows(&rows, 4 * train.levels)
    }

    pub(crate) fn fit_rows(rows: &[Vec<f64>], width: usize) -> Result<Self, IngestError> {
        if rows.is_empty() {
            return Err(IngestError::Invalid("cannot fit normalization on no rows".into()));
        }
        let n = rows.len() as f64;
        let mut mean = vec![0.0; width];
        for r in rows {
            for (m, v) in mean.iter_mut().zip(r) {
                *m += v;
            }
        }
        mean.iter_mut().for_each(|m| *m /= n);
        let mut var = vec![0.0; width];
        for r in rows {
            for ((s, v), m) in var.iter_mut().zip(r).zip(&mean) {
                *s += (v - m) * (v - m);
            }
        }
        let std: Vec<f64> = var.into_iter().map(|s| (s / n).sqrt()).collect();
        if let Some(feature) = std.iter().position(|s| !(*s > 0.0)) {
            return Err(IngestError::DegenerateFeature { feature });
        }
        Ok(Self { mode: NormalizationMode::Zscore, mean, std })
    }

    fn check_width(&self, levels: usize) -> Result<(), IngestError> {
        if self.mode == NormalizationMode::Zscore && self.mean.len() != 4 * levels {
            return Err(IngestError::Invalid(format!(
                "normalization fitted on {} features, series has {}",
                self.mean.len(),
                4 * levels
            )));
        }
        Ok(())
    }

    pub fn apply_row(&self, row: &mut [f64]) {
        if self.mode == NormalizationMode::Zscore {
            for ((v, m), s) in row.iter_mut().zip(&self.mean).zip(&self.std) {
                *v = (*v - m) / s;
            }
        }
    }

    pub fn invert_row(&self, row: &mut [f64]) {
        if self.mode == NormalizationMode::Zscore {
            for ((v, m), s) in row.iter_mut().zip(&self.mean).zip(&self.std) {
                *v = *v * s + m;
            }
        }
    }
}

/// Flattens the top `levels` of a snapshot into `4L` features.
pub fn level_features(s: &LevelSnapshot, levels: usize) -> Vec<f64> {
    let mut row = Vec::with_capacity(4 * levels);
    for i in 0..levels {
        row.extend_from_slice(&[s.asks[i].price, s.asks[i].volume, s.bids[i].price, s.bids[i].volume]);
    }
    row
}

fn map_series(series: &SnapshotSeries, f: impl Fn(&mut [f64])) -> SnapshotSeries {
    let levels = series.levels;
    let mut out = series.clone();
    for s in &mut out.snapshots {
        let mut row = level_features(s, levels);
        f(&mut row);
        s.asks.truncate(levels);
        s.bids.truncate(levels);
        for i in 0..levels {
            s.asks[i] = Level::new(row[4 * i], row[4 * i + 1]);
            s.bids[i] = Level::new(row[4 * i + 2], row[4 * i + 3]);
        }
    }
    out
}

/// Applies `spec` to the top-`L` features of every snapshot. The result is
/// flagged `normalized` (z-scored prices need not stay ordered).
pub fn normalize(series: &SnapshotSeries, spec: &NormalizationSpec) -> Result<SnapshotSeries, IngestError> {
    if spec.mode == NormalizationMode::None {
        return Ok(series.clone());
    }
    spec.check_width(series.levels)?;
    let mut out = map_series(series, |row| spec.apply_row(row));
    out.normalized = true;
    Ok(out)
}

pub fn denormalize(series: &SnapshotSeries, spec: &NormalizationSpec) -> Result<SnapshotSeries, IngestError> {
    if spec.mode == NormalizationMode::None {
        return Ok(series.clone());
    }
    spec.check_width(series.levels)?;
    let mut out = map_series(series, |row| spec.invert_row(row));
    out.normalized = false;
    Ok(out)
}

/// Tick index of every level price, used by callers that need the grid.
pub fn snapshot_ticks(s: &LevelSnapshot, tick_size: f64) -> Result<(Vec<Tick>, Vec<Tick>), BookError> {
    let asks = s.asks.iter().map(|l| price_to_tick(l.price, tick_size)).collect::<Result<_, _>>()?;
    let bids = s.bids.iter().map(|l| price_to_tick(l.price, tick_size)).collect::<Result<_, _>>()?;
    Ok((asks, bids))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::book::Tick;
    use rand::{Rng, SeedableRng};

    fn row(shift: f64, label: Option<[u8; 5]>) -> String {
        let mut f = Vec::new();
        for i in 0..10 {
            let i = i as f64;
            f.push(format!("{}", 10.02 + shift + 0.01 * i));
            f.push(format!("{}", 100.0 + i));
            f.push(format!("{}", 9.98 + shift - 0.01 * i));
            f.push(format!("{}", 200.0 + i));
        }
        if let Some(l) = label {
            f.extend(l.iter().map(|v| v.to_string()));
        }
        f.join(",")
    }

    #[test]
    fn single_row_parses() {
        let s = parse_fi2010_str(&row(0.0, None), &Fi2010Options::default()).unwrap();
        assert_eq!(s.len(), 1);
        assert_eq!(s.levels, 10);
        assert_eq!(s.snapshots[0].asks[0], Level::new(10.02, 100.0));
        assert_eq!(s.snapshots[0].bids[9].volume, 209.0);
        assert!(s.provided_labels.is_empty());
    }

    #[test]
    fn whitespace_and_labels() {
        let text = format!("{}\n{}\n", row(0.0, Some([1, 2, 3, 2, 1])), row(0.01, Some([2, 2, 2, 2, 2])))
            .replace(',', " ");
        let s = parse_fi2010_str(&text, &Fi2010Options::default()).unwrap();
        assert_eq!(s.provided_labels[&50], vec![Class::Stationary, Class::Stationary]);
        assert_eq!(s.provided_labels[&30], vec![Class::Down, Class::Stationary]);
    }

    #[test]
    fn crossed_row_rejected_with_row_number() {
        let mut fields: Vec<String> = row(0.0, None).split(',').map(String::from).collect();
        fields[2] = "10.02".into();
        let text = format!("{}\n{}\n", row(0.0, None), fields.join(","));
        match parse_fi2010_str(&text, &Fi2010Options::default()) {
            Err(IngestError::InvalidSnapshot { row: 2, source }) => {
                assert!(matches!(source, SnapshotError::Crossed { .. }))
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn malformed_rows() {
        let short = "1,2,3";
        assert!(matches!(
            parse_fi2010_str(short, &Fi2010Options::default()),
            Err(IngestError::MalformedRow { row: 1, .. })
        ));
        let text = format!("{}\n{}\n", row(0.0, None), row(0.0, None).replacen("100", "abc", 1));
        match parse_fi2010_str(&text, &Fi2010Options::default()) {
            Err(IngestError::MalformedRow { row: 2, msg }) => assert!(msg.contains("not numeric")),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn feature_major_layout_is_transposed() {
        let rows: Vec<Vec<f64>> = (0..60)
            .map(|t| {
                let text = row(0.01 * (t % 3) as f64, Some([2, 2, 2, 2, 2]));
                text.split(',').map(|v| v.parse().unwrap()).collect()
            })
            .collect();
        let mut text = String::new();
        for c in 0..45 {
            let line: Vec<String> = rows.iter().map(|r| r[c].to_string()).collect();
            text.push_str(&line.join(" "));
            text.push('\n');
        }
        let s = parse_fi2010_str(&text, &Fi2010Options::default()).unwrap();
        assert_eq!(s.len(), 60);
        assert_eq!(s.snapshots[1].asks[0].price, rows[1][0]);
    }

    fn random_series(seed: u64, n: usize) -> SnapshotSeries {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let mut snaps = Vec::new();
        let mut labels: Vec<Vec<Class>> = vec![Vec::new(); 5];
        for t in 0..n {
            let mid: i64 = rng.random_range(900..1100);
            let spread = rng.random_range(1..4);
            let mut a = mid + spread;
            let mut b = mid;
            let mut asks = Vec::new();
            let mut bids = Vec::new();
            for _ in 0..10 {
                asks.push(Level::new(Tick(a).to_price(0.01), rng.random_range(1..1000) as f64));
                bids.push(Level::new(Tick(b).to_price(0.01), rng.random_range(1..1000) as f64));
                a += rng.random_range(1..4);
                b -= rng.random_range(1..4);
            }
            snaps.push(LevelSnapshot { index: t as u64, asks, bids });
            for col in labels.iter_mut() {
                col.push(Class::from_index(rng.random_range(0..3)));
            }
        }
        let mut s = SnapshotSeries::new(snaps, 10, 0.01, 1);
        s.provided_labels = FI2010_HORIZONS.iter().copied().zip(labels).collect();
        s
    }

    #[test]
    fn fixture_round_trip_is_bit_identical() {
        let series = random_series(11, 100);
        let text = render_fi2010(&series).unwrap();
        let back = parse_fi2010_str(&text, &Fi2010Options::default()).unwrap();
        assert_eq!(back, series);
        assert_eq!(render_fi2010(&back).unwrap(), text);
    }

    #[test]
    fn events_build_two_level_book() {
        let csv = "seq,kind,side,price,volume\n\
                   1,place,ask,10.02,5\n\
                   2,place,bid,9.98,4\n\
                   3,place,ask,10.03,1\n\
                   4,place,bid,9.97,2\n";
        let stream = parse_event_csv(csv, 0.01, 1).unwrap();
        let s = events_to_series(&stream, 2).unwrap();
        assert_eq!(s.len(), 1);
        assert_eq!(s.snapshots[0].index, 4);
        assert_eq!(render_event_csv(&stream), csv);
    }

    #[test]
    fn event_errors_carry_line_numbers() {
        let csv = "seq,kind,side,price,volume\n1,place,ask,10.02,5\n2,cancel,ask,10.02,9\n";
        let stream = parse_event_csv(csv, 0.01, 1).unwrap();
        match events_to_series(&stream, 1) {
            Err(IngestError::Book { line: 3, source: BookError::OverCancel { .. } }) => {}
            other => panic!("unexpected {other:?}"),
        }
        assert!(matches!(
            parse_event_csv("seq,kind\n", 0.01, 1),
            Err(IngestError::MalformedRow { row: 1, .. })
        ));
        assert!(matches!(
            parse_event_csv("seq,kind,side,price,volume\n1,place,ask,10.025,5\n", 0.01, 1),
            Err(IngestError::Book { line: 2, .. })
        ));
        assert!(matches!(
            parse_event_csv("seq,kind,side,price,volume\n2,place,ask,10.02,5\n1,place,ask,10.03,5\n", 0.01, 1),
            Err(IngestError::MalformedRow { row: 3, .. })
        ));
    }

    #[test]
    fn normalization_none_is_identity() {
        let s = random_series(1, 5);
        assert_eq!(normalize(&s, &NormalizationSpec::identity()).unwrap(), s);
    }

    #[test]
    fn zscore_inverse_round_trip() {
        let s = random_series(2, 50);
        let spec = NormalizationSpec::fit_zscore(&s).unwrap();
        let z = normalize(&s, &spec).unwrap();
        assert!(z.normalized);
        let back = denormalize(&z, &spec).unwrap();
        for (x, y) in back.snapshots.iter().zip(&s.snapshots) {
            for (a, b) in level_features(x, 10).iter().zip(level_features(y, 10)) {
                assert!((a - b).abs() <= 1e-9 * b.abs().max(1.0));
            }
        }
    }

    #[test]
    fn zscore_statistics_on_three_rows() {
        // hand-computed: mean of {1, 2, 6} = 3, population std = sqrt(14/3)
        let rows = vec![vec![1.0, 10.0], vec![2.0, 10.0], vec![6.0, 13.0]];
        let spec = NormalizationSpec::fit_rows(&rows, 2).unwrap();
        assert!((spec.mean[0] - 3.0).abs() < 1e-12);
        assert!((spec.std[0] - (14.0f64 / 3.0).sqrt()).abs() < 1e-12);
        assert!((spec.mean[1] - 11.0).abs() < 1e-12);
        assert!((spec.std[1] - 2.0f64.sqrt()).abs() < 1e-12);
        let flat = vec![vec![1.0, 5.0], vec![2.0, 5.0]];
        assert!(matches!(
            NormalizationSpec::fit_rows(&flat, 2),
            Err(IngestError::DegenerateFeature { feature: 1 })
        ));
    }

    #[test]
    fn day_split_and_concat() {
        let a = random_series(3, 30);
        let b = random_series(4, 20);
        let c = random_series(5, 10);
        let all = SnapshotSeries::concat_days(vec![a.clone(), b, c]).unwrap();
        assert_eq!(all.day_starts, vec![0, 30, 50]);
        assert_eq!(all.days(), vec![(0, 30), (30, 50), (50, 60)]);
        all.validate().unwrap();
        let (train, test) = all.split_days(2).unwrap();
        assert_eq!(train.len(), 50);
        assert_eq!(test.len(), 10);
        assert_eq!(train.day_starts, vec![0, 30]);
        assert_eq!(test.provided_labels[&50].len(), 10);
        assert!(all.split_days(3).is_err());
    }
}
