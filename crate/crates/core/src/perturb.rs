//! Tick-filling perturbation: minimum-size orders placed on every empty tick
//! behind the best quote, out to the deepest visible level. Best quotes, and
//! so the mid-price, never move.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::book::{mid_price, price_to_tick, BookError, BookState, Level, LevelSnapshot, Side, Tick};
use crate::ingest::{replay_events, EventStream, IngestError, SnapshotSeries};
use crate::represent::{build_level_based, build_mw, RepError, WindowConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Paradigm {
    None,
    Ask,
    Bid,
    Both,
}

impl Paradigm {
    pub const ALL: [Paradigm; 4] = [Paradigm::None, Paradigm::Ask, Paradigm::Bid, Paradigm::Both];

    pub fn sides(self) -> &'static [Side] {
        match self {
            Paradigm::None => &[],
            Paradigm::Ask => &[Side::Ask],
            Paradigm::Bid => &[Side::Bid],
            Paradigm::Both => &[Side::Ask, Side::Bid],
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Paradigm::None => "none",
            Paradigm::Ask => "ask",
            Paradigm::Bid => "bid",
            Paradigm::Both => "both",
        }
    }

    pub fn parse(s: &str) -> Option<Paradigm> {
        match s.to_ascii_lowercase().as_str() {
            "none" => Some(Paradigm::None),
            "ask" | "ask_side" | "ask-side" => Some(Paradigm::Ask),
            "bid" | "bid_side" | "bid-side" => Some(Paradigm::Bid),
            "both" | "both_sides" | "both-sides" => Some(Paradigm::Both),
            _ => None,
        }
    }
}

/// How far behind the best quote ticks are filled.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FillCap {
    /// Up to (not including) the level-`L` price of the unperturbed book.
    #[default]
    DeepestLevel,
    /// The given number of ticks behind the best quote.
    Ticks(u32),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PerturbationSpec {
    pub paradigm: Paradigm,
    /// Lots per injected order; `None` means the minimum order size.
    #[serde(default)]
    pub order_size: Option<u64>,
    #[serde(default)]
    pub fill_cap: FillCap,
    /// For snapshot-only data, fill only up to the known depth instead of
    /// failing when the cap reaches past it.
    #[serde(default)]
    pub allow_truncation: bool,
}

impl PerturbationSpec {
    pub fn new(paradigm: Paradigm) -> Self {
        Self { paradigm, order_size: None, fill_cap: FillCap::DeepestLevel, allow_truncation: false }
    }

    pub fn none() -> Self {
        Self::new(Paradigm::None)
    }

    pub fn with_order_size(mut self, size: u64) -> Self {
        self.order_size = Some(size);
        self
    }

    pub fn resolved_order_size(&self, min_order_size: u64) -> Result<u64, PerturbError> {
        let size = self.order_size.unwrap_or(min_order_size);
        if size < min_order_size || size == 0 {
            return Err(PerturbError::InvalidSpec(format!(
                "order size {size} below minimum order size {min_order_size}"
            )));
        }
        Ok(size)
    }
}

#[derive(Debug, Error)]
pub enum PerturbError {
    #[error("invalid perturbation: {0}")]
    InvalidSpec(String),
    #[error("snapshot {index}: fill range reaches past the known depth")]
    DepthUnknown { index: u64 },
    #[error("window shapes differ: {0}")]
    ShapeMismatch(String),
    #[error("cannot perturb a normalized series")]
    Normalized,
    #[error(transparent)]
    Book(#[from] BookError),
    #[error(transparent)]
    Rep(#[from] RepError),
    #[error(transparent)]
    Ingest(#[from] IngestError),
}

/// Empty ticks to fill on one side. `occupied` is best-first and must hold
/// at least `levels` prices. Returns the ticks and whether any candidate
/// lay beyond `known_until` (the deepest tick whose emptiness is known).
fn fill_ticks(
    side: Side,
    occupied: &[Tick],
    levels: usize,
    cap: FillCap,
    known_until: Option<Tick>,
) -> (Vec<Tick>, bool) {
    let best = occupied[0];
    let dir = match side {
        Side::Ask => 1,
        Side::Bid => -1,
    };
    // distance (in ticks, >= 1) of the last candidate from the best quote
    let reach = match cap {
        FillCap::DeepestLevel => (occupied[levels - 1].0 - best.0).abs() - 1,
        FillCap::Ticks(n) => n as i64,
    };
    let mut out = Vec::new();
    let mut beyond_known = false;
    let mut occ = occupied.iter().peekable();
    for d in 1..=reach {
        let t = best.offset(dir * d);
        if let Some(limit) = known_until {
            if (t.0 - limit.0) * dir > 0 {
                beyond_known = true;
                break;
            }
        }
        while occ.peek().is_some_and(|p| (p.0 - t.0) * dir < 0) {
            occ.next();
        }
        if occ.peek().is_some_and(|p| **p == t) {
            continue;
        }
        out.push(t);
    }
    (out, beyond_known)
}

/// Orders the perturbation would inject into a full book.
pub fn injected_orders(state: &BookState, spec: &PerturbationSpec, levels: usize) -> Result<Vec<(Side, Tick)>, PerturbError> {
    check_depth(state, levels)?;
    let mut out = Vec::new();
    for &side in spec.paradigm.sides() {
        let occupied: Vec<Tick> = match side {
            Side::Ask => state.side(side).keys().copied().collect(),
            Side::Bid => state.side(side).keys().rev().copied().collect(),
        };
        let (ticks, _) = fill_ticks(side, &occupied, levels, spec.fill_cap, None);
        out.extend(ticks.into_iter().map(|t| (side, t)));
    }
    Ok(out)
}

fn check_depth(state: &BookState, levels: usize) -> Result<(), PerturbError> {
    if levels == 0 || state.depth(Side::Ask) < levels || state.depth(Side::Bid) < levels {
        return Err(BookError::InsufficientDepth {
            asks: state.depth(Side::Ask),
            bids: state.depth(Side::Bid),
            required: levels.max(1),
        }
        .into());
    }
    Ok(())
}

/// Fills the empty ticks of the selected sides in a full book.
pub fn perturb_book(state: &BookState, spec: &PerturbationSpec, levels: usize) -> Result<BookState, PerturbError> {
    let size = spec.resolved_order_size(state.min_order_size())?;
    let mut out = state.clone();
    for (side, tick) in injected_orders(state, spec, levels)? {
        out.add_resting(side, tick, size);
    }
    Ok(out)
}

fn merge_fills(levels: &[Level], fills: &[Tick], side: Side, tick_size: f64, size: f64) -> Vec<Level> {
    let mut merged: Vec<Level> = levels
        .iter()
        .copied()
        .chain(fills.iter().map(|t| Level::new(t.to_price(tick_size), size)))
        .collect();
    match side {
        Side::Ask => merged.sort_by(|a, b| a.price.total_cmp(&b.price)),
        Side::Bid => merged.sort_by(|a, b| b.price.total_cmp(&a.price)),
    }
    merged
}

/// Perturbs a snapshot that carries only its visible levels. The result
/// holds the original levels plus the injected ones. The flag reports
/// whether the fill was cut at the known depth.
pub fn perturb_snapshot(
    snap: &LevelSnapshot,
    spec: &PerturbationSpec,
    levels: usize,
    tick_size: f64,
    min_order_size: u64,
) -> Result<(LevelSnapshot, bool), PerturbError> {
    let size = spec.resolved_order_size(min_order_size)? as f64;
    if levels == 0 || snap.depth() < levels {
        return Err(BookError::InsufficientDepth { asks: snap.asks.len(), bids: snap.bids.len(), required: levels.max(1) }.into());
    }
    let mut out = snap.clone();
    let mut truncated = false;
    for &side in spec.paradigm.sides() {
        let lv = match side {
            Side::Ask => &snap.asks,
            Side::Bid => &snap.bids,
        };
        let occupied: Vec<Tick> = lv.iter().map(|l| price_to_tick(l.price, tick_size)).collect::<Result<_, _>>()?;
        let known_until = occupied.last().copied();
        let (ticks, beyond) = fill_ticks(side, &occupied, levels, spec.fill_cap, known_until);
        if beyond {
            if !spec.allow_truncation {
                return Err(PerturbError::DepthUnknown { index: snap.index });
            }
            truncated = true;
        }
        let merged = merge_fills(lv, &ticks, side, tick_size, size);
        match side {
            Side::Ask => out.asks = merged,
            Side::Bid => out.bids = merged,
        }
    }
    Ok((out, truncated))
}

/// Perturbs every snapshot of a series independently. Provided labels are
/// carried over unchanged, since mid-prices do not move.
pub fn perturb_series(series: &SnapshotSeries, spec: &PerturbationSpec) -> Result<SnapshotSeries, PerturbError> {
    if series.normalized {
        return Err(PerturbError::Normalized);
    }
    let mut out = series.clone();
    if spec.paradigm == Paradigm::None {
        return Ok(out);
    }
    for (dst, src) in out.snapshots.iter_mut().zip(&series.snapshots) {
        let (p, truncated) = perturb_snapshot(src, spec, series.levels, series.tick_size, series.min_order_size)?;
        *dst = p;
        out.depth_truncated |= truncated;
    }
    Ok(out)
}

/// Replays an event stream and emits perturbed views: the top-`levels`
/// snapshot of the true book plus the orders injected into the full book.
/// Emptiness is judged against the full book, so any cap is supported.
pub fn perturb_event_stream(
    stream: &EventStream,
    spec: &PerturbationSpec,
    levels: usize,
) -> Result<SnapshotSeries, PerturbError> {
    let size = spec.resolved_order_size(stream.min_order_size)? as f64;
    let mut snaps = Vec::new();
    let mut failure: Option<PerturbError> = None;
    replay_events(stream, levels, |book, snap| {
        match injected_orders(book, spec, levels) {
            Ok(orders) => {
                let mut view = snap;
                for side in [Side::Ask, Side::Bid] {
                    let fills: Vec<Tick> = orders.iter().filter(|o| o.0 == side).map(|o| o.1).collect();
                    if fills.is_empty() {
                        continue;
                    }
                    match side {
                        Side::Ask => view.asks = merge_fills(&view.asks, &fills, side, stream.tick_size, size),
                        Side::Bid => view.bids = merge_fills(&view.bids, &fills, side, stream.tick_size, size),
                    }
                }
                snaps.push(view);
                Ok(())
            }
            Err(e) => {
                failure = Some(e);
                Err(IngestError::Invalid("perturbation failed".into()))
            }
        }
    })
    .map_err(|e| failure.take().unwrap_or(PerturbError::Ingest(e)))?;
    Ok(SnapshotSeries::new(snaps, levels, stream.tick_size, stream.min_order_size))
}

/// How far a perturbation moved each representation of one window.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DisplacementReport {
    pub l2_level_based: f64,
    pub l2_mw: f64,
    pub linf_mw: f64,
    pub total_added_volume: f64,
    pub mid_before: f64,
    pub mid_after: f64,
}

fn total_volume(s: &LevelSnapshot) -> f64 {
    s.asks.iter().chain(&s.bids).map(|l| l.volume).sum()
}

/// Compares the level-based and MW tensors of two windows.
pub fn displacement(
    before: &[LevelSnapshot],
    after: &[LevelSnapshot],
    levels: usize,
    cfg: &WindowConfig,
    tick_size: f64,
) -> Result<DisplacementReport, PerturbError> {
    if before.len() != after.len() || before.is_empty() {
        return Err(PerturbError::ShapeMismatch(format!("{} vs {} snapshots", before.len(), after.len())));
    }
    let lb0 = build_level_based(before, levels, tick_size)?;
    let lb1 = build_level_based(after, levels, tick_size)?;
    let mw0 = build_mw(before, cfg, tick_size)?;
    let mw1 = build_mw(after, cfg, tick_size)?;
    if mw0.meta.reference_tick != mw1.meta.reference_tick {
        return Err(PerturbError::ShapeMismatch("windows have different reference prices".into()));
    }
    let l2 = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt();
    let linf = mw0.data.iter().zip(&mw1.data).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
    let added: f64 = after.iter().map(total_volume).sum::<f64>() - before.iter().map(total_volume).sum::<f64>();
    Ok(DisplacementReport {
        l2_level_based: l2(&lb0.data, &lb1.data),
        l2_mw: l2(&mw0.data, &mw1.data),
        linf_mw: linf,
        total_added_volume: added,
        mid_before: mid_price(before.last().unwrap()),
        mid_after: mid_price(after.last().unwrap()),
    })
}
