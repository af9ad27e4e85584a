//! Aggregated (level-2) limit order book.
//!
//! Prices are held as integer tick counts so that emptiness tests per tick
//! are exact. Currency values only appear at the I/O boundary and in
//! [`LevelSnapshot`].

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Integer price in units of the tick size.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Tick(pub i64);

impl Tick {
    pub fn to_price(self, tick_size: f64) -> f64 {
        self.0 as f64 * tick_size
    }

    pub fn offset(self, ticks: i64) -> Tick {
        Tick(self.0 + ticks)
    }
}

impl fmt::Display for Tick {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}t", self.0)
    }
}

/// Converts a currency price to a tick count, rejecting prices that are not
/// on the grid within 1e-9 relative.
pub fn price_to_tick(price: f64, tick_size: f64) -> Result<Tick, BookError> {
    if !price.is_finite() || !(tick_size > 0.0) {
        return Err(BookError::OffGrid { price, tick_size });
    }
    let ticks = price / tick_size;
    let rounded = ticks.round();
    if (ticks - rounded).abs() > 1e-9 * ticks.abs().max(1.0) {
        return Err(BookError::OffGrid { price, tick_size });
    }
    Ok(Tick(rounded as i64))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Side {
    Ask,
    Bid,
}

impl Side {
    pub fn as_str(self) -> &'static str {
        match self {
            Side::Ask => "ask",
            Side::Bid => "bid",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EventKind {
    Place,
    Cancel,
    Execute,
}

impl EventKind {
    pub fn as_str(self) -> &'static str {
        match self {
            EventKind::Place => "place",
            EventKind::Cancel => "cancel",
            EventKind::Execute => "execute",
        }
    }
}

/// A single book update. Volumes are integer lots.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct BookEvent {
    pub kind: EventKind,
    pub side: Side,
    pub price: Tick,
    pub volume: u64,
}

impl BookEvent {
    pub fn place(side: Side, price: Tick, volume: u64) -> Self {
        Self { kind: EventKind::Place, side, price, volume }
    }

    pub fn cancel(side: Side, price: Tick, volume: u64) -> Self {
        Self { kind: EventKind::Cancel, side, price, volume }
    }

    pub fn execute(side: Side, price: Tick, volume: u64) -> Self {
        Self { kind: EventKind::Execute, side, price, volume }
    }

    /// The event that undoes this one at the aggregate level.
    pub fn inverse(&self) -> Self {
        let kind = match self.kind {
            EventKind::Place => EventKind::Cancel,
            EventKind::Cancel | EventKind::Execute => EventKind::Place,
        };
        Self { kind, ..*self }
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum BookError {
    #[error("{side} {kind} at {price} would cross the book")]
    CrossedBook { side: &'static str, kind: &'static str, price: Tick },
    #[error("no resting {side} volume at {price}")]
    UnknownLevel { side: &'static str, price: Tick },
    #[error("{side} volume {requested} at {price} exceeds resting volume {resting}")]
    OverCancel { side: &'static str, price: Tick, requested: u64, resting: u64 },
    #[error("volume {volume} below minimum order size {min_order_size}")]
    BelowMinSize { volume: u64, min_order_size: u64 },
    #[error("price {price} is not on the {tick_size} tick grid")]
    OffGrid { price: f64, tick_size: f64 },
    #[error("book has {asks} ask and {bids} bid levels, {required} required")]
    InsufficientDepth { asks: usize, bids: usize, required: usize },
    #[error("invalid book parameters: {0}")]
    InvalidConfig(String),
}

/// Live aggregated book: price (ticks) → resting volume per side.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BookState {
    tick_size: f64,
    min_order_size: u64,
    asks: BTreeMap<Tick, u64>,
    bids: BTreeMap<Tick, u64>,
    sequence: u64,
}

impl BookState {
    pub fn new(tick_size: f64, min_order_size: u64) -> Result<Self, BookError> {
        if !(tick_size > 0.0) || !tick_size.is_finite() {
            return Err(BookError::InvalidConfig(format!("tick_size must be > 0, got {tick_size}")));
        }
        if min_order_size == 0 {
            return Err(BookError::InvalidConfig("min_order_size must be > 0".into()));
        }
        Ok(Self {
            tick_size,
            min_order_size,
            asks: BTreeMap::new(),
            bids: BTreeMap::new(),
            sequence: 0,
        })
    }

    pub fn tick_size(&self) -> f64 {
        self.tick_size
    }

    pub fn min_order_size(&self) -> u64 {
        self.min_order_size
    }

    /// Number of events applied so far.
    pub fn sequence(&self) -> u64 {
        self.sequence
    }

    pub fn side(&self, side: Side) -> &BTreeMap<Tick, u64> {
        match side {
            Side::Ask => &self.asks,
            Side::Bid => &self.bids,
        }
    }

    pub fn best_ask(&self) -> Option<Tick> {
        self.asks.keys().next().copied()
    }

    pub fn best_bid(&self) -> Option<Tick> {
        self.bids.keys().next_back().copied()
    }

    pub fn volume_at(&self, side: Side, price: Tick) -> u64 {
        self.side(side).get(&price).copied().unwrap_or(0)
    }

    pub fn depth(&self, side: Side) -> usize {
        self.side(side).len()
    }

    /// Price of the `level`-th best level (1-based) on a side.
    pub fn level_price(&self, side: Side, level: usize) -> Option<Tick> {
        if level == 0 {
            return None;
        }
        match side {
            Side::Ask => self.asks.keys().nth(level - 1).copied(),
            Side::Bid => self.bids.keys().rev().nth(level - 1).copied(),
        }
    }

    /// Applies one event in place. On error the book is left untouched.
    pub fn apply(&mut self, ev: &BookEvent) -> Result<(), BookError> {
        if ev.volume < self.min_order_size {
            return Err(BookError::BelowMinSize {
                volume: ev.volume,
                min_order_size: self.min_order_size,
            });
        }
        match ev.kind {
            EventKind::Place => {
                let crosses = match ev.side {
                    Side::Ask => self.best_bid().is_some_and(|b| ev.price <= b),
                    Side::Bid => self.best_ask().is_some_and(|a| ev.price >= a),
                };
                if crosses {
                    return Err(BookError::CrossedBook {
                        side: ev.side.as_str(),
                        kind: ev.kind.as_str(),
                        price: ev.price,
                    });
                }
                *self.side_mut(ev.side).entry(ev.price).or_insert(0) += ev.volume;
            }
            EventKind::Cancel | EventKind::Execute => {
                let book = self.side_mut(ev.side);
                let resting = *book.get(&ev.price).ok_or(BookError::UnknownLevel {
                    side: ev.side.as_str(),
                    price: ev.price,
                })?;
                if ev.volume > resting {
                    return Err(BookError::OverCancel {
                        side: ev.side.as_str(),
                        price: ev.price,
                        requested: ev.volume,
                        resting,
                    });
                }
                if ev.volume == resting {
                    book.remove(&ev.price);
                } else {
                    book.insert(ev.price, resting - ev.volume);
                }
            }
        }
        self.sequence += 1;
        Ok(())
    }

    /// Functional form of [`BookState::apply`].
    pub fn apply_event(&self, ev: &BookEvent) -> Result<BookState, BookError> {
        let mut next = self.clone();
        next.apply(ev)?;
        Ok(next)
    }

    /// Adds resting volume without the crossing or minimum-size checks.
    /// Used by the perturbation module, which guarantees both.
    pub(crate) fn add_resting(&mut self, side: Side, price: Tick, volume: u64) {
        *self.side_mut(side).entry(price).or_insert(0) += volume;
    }

    fn side_mut(&mut self, side: Side) -> &mut BTreeMap<Tick, u64> {
        match side {
            Side::Ask => &mut self.asks,
            Side::Bid => &mut self.bids,
        }
    }

    /// Top-`levels` view of both sides.
    pub fn snapshot(&self, levels: usize) -> Result<LevelSnapshot, BookError> {
        if levels == 0 || self.asks.len() < levels || self.bids.len() < levels {
            return Err(BookError::InsufficientDepth {
                asks: self.asks.len(),
                bids: self.bids.len(),
                required: levels.max(1),
            });
        }
        let tick = self.tick_size;
        let asks = self
            .asks
            .iter()
            .take(levels)
            .map(|(p, v)| Level::new(p.to_price(tick), *v as f64))
            .collect();
        let bids = self
            .bids
            .iter()
            .rev()
            .take(levels)
            .map(|(p, v)| Level::new(p.to_price(tick), *v as f64))
            .collect();
        Ok(LevelSnapshot { index: self.sequence, asks, bids })
    }
}

/// One price level of a snapshot, in currency and volume units.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Level {
    pub price: f64,
    pub volume: f64,
}

impl Level {
    pub fn new(price: f64, volume: f64) -> Self {
        Self { price, volume }
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SnapshotError {
    #[error("empty {0} side")]
    EmptySide(&'static str),
    #[error("{side} prices not strictly {order} at level {level}")]
    Ordering { side: &'static str, order: &'static str, level: usize },
    #[error("crossed snapshot: best ask {ask} <= best bid {bid}")]
    Crossed { ask: f64, bid: f64 },
    #[error("non-positive {side} volume {volume} at level {level}")]
    Volume { side: &'static str, level: usize, volume: f64 },
    #[error("non-finite value on {side} side at level {level}")]
    NonFinite { side: &'static str, level: usize },
}

/// Aggregated view at one time point. Level 1 is the best quote.
///
/// A snapshot usually holds exactly `L` levels per side. Perturbed views may
/// hold more: the original `L` levels plus the injected orders, so that every
/// representation sees the same perturbed book.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LevelSnapshot {
    pub index: u64,
    pub asks: Vec<Level>,
    pub bids: Vec<Level>,
}

impl LevelSnapshot {
    /// Levels available on the shallower side.
    pub fn depth(&self) -> usize {
        self.asks.len().min(self.bids.len())
    }

    pub fn best_ask(&self) -> Option<Level> {
        self.asks.first().copied()
    }

    pub fn best_bid(&self) -> Option<Level> {
        self.bids.first().copied()
    }

    pub fn spread(&self) -> Option<f64> {
        Some(self.best_ask()?.price - self.best_bid()?.price)
    }

    /// Checks ordering, uncrossedness and positivity.
    pub fn validate(&self) -> Result<(), SnapshotError> {
        let (a1, b1) = match (self.asks.first(), self.bids.first()) {
            (None, _) => return Err(SnapshotError::EmptySide("ask")),
            (_, None) => return Err(SnapshotError::EmptySide("bid")),
            (Some(a), Some(b)) => (a, b),
        };
        for (side, levels) in [("ask", &self.asks), ("bid", &self.bids)] {
            for (i, lvl) in levels.iter().enumerate() {
                if !lvl.price.is_finite() || !lvl.volume.is_finite() {
                    return Err(SnapshotError::NonFinite { side, level: i + 1 });
                }
                if lvl.volume <= 0.0 {
                    return Err(SnapshotError::Volume { side, level: i + 1, volume: lvl.volume });
                }
            }
        }
        for (i, w) in self.asks.windows(2).enumerate() {
            if w[1].price <= w[0].price {
                return Err(SnapshotError::Ordering { side: "ask", order: "ascending", level: i + 2 });
            }
        }
        for (i, w) in self.bids.windows(2).enumerate() {
            if w[1].price >= w[0].price {
                return Err(SnapshotError::Ordering { side: "bid", order: "descending", level: i + 2 });
            }
        }
        if a1.price <= b1.price {
            return Err(SnapshotError::Crossed { ask: a1.price, bid: b1.price });
        }
        Ok(())
    }

    /// Copy restricted to the best `levels` per side.
    pub fn truncated(&self, levels: usize) -> LevelSnapshot {
        LevelSnapshot {
            index: self.index,
            asks: self.asks.iter().take(levels).copied().collect(),
            bids: self.bids.iter().take(levels).copied().collect(),
        }
    }
}

/// Average of the best ask and best bid.
///
/// # Panics
/// If either side is empty; callers hold validated snapshots.
pub fn mid_price(s: &LevelSnapshot) -> f64 {
    let ask = s.asks[0].price;
    let bid = s.bids[0].price;
    (ask + bid) / 2.0
}
