//! Synthetic event streams with a sparse book and a persistent latent regime.
//!
//! The regime decides which side market orders hit and how each side rests
//! its liquidity: the favoured side (bids while rising) places large orders
//! on a coarse tick lattice close to the touch, the other side places small
//! orders spread further out. The book shape, including which ticks are
//! empty, therefore carries information about future mid-price moves.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::book::{BookError, BookEvent, BookState, Side, Tick};
use crate::ingest::EventStream;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SynthConfig {
    pub seed: u64,
    pub events: usize,
    pub tick_size: f64,
    pub min_order_size: u64,
    /// Initial mid-price in ticks; the regime pulls back toward it.
    pub base_tick: i64,
    /// Distance from `base_tick` at which new regimes almost always head back.
    pub reversion_ticks: f64,
    /// Mean regime duration in events.
    pub regime_length: f64,
    /// Probability that regime-driven choices follow the regime.
    pub bias: f64,
    pub p_execute: f64,
    pub p_cancel: f64,
    /// Chance that a placement improves the quote when the spread is wide.
    pub p_improve: f64,
    /// Geometric decay of placement distance from the touch.
    pub placement_decay: f64,
    /// Decay used by the side the regime favours, per lattice step.
    pub near_decay: f64,
    /// The favoured side places on every `favoured_step`-th tick from its
    /// best quote, with volumes scaled by `favoured_volume`.
    pub favoured_step: i64,
    pub favoured_volume: f64,
    /// Decay used by the other side.
    pub far_decay: f64,
    pub max_distance: i64,
    pub volume_range: (u64, u64),
    /// Cancels never drop a side below this many levels.
    pub min_levels: usize,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            events: 50_000,
            tick_size: 0.01,
            min_order_size: 1,
            base_tick: 1000,
            reversion_ticks: 40.0,
            regime_length: 600.0,
            bias: 0.75,
            p_execute: 0.12,
            p_cancel: 0.42,
            p_improve: 0.4,
            placement_decay: 0.08,
            near_decay: 0.35,
            favoured_step: 3,
            favoured_volume: 3.0,
            far_decay: 0.15,
            max_distance: 40,
            volume_range: (100, 500),
            min_levels: 14,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Regime {
    Up,
    Flat,
    Down,
}

struct Gen<'a> {
    cfg: &'a SynthConfig,
    rng: ChaCha8Rng,
    book: BookState,
    regime: Regime,
    events: Vec<(u64, BookEvent)>,
    regimes: Vec<i8>,
}

impl Gen<'_> {
    fn push(&mut self, ev: BookEvent) -> Result<(), BookError> {
        self.book.apply(&ev)?;
        let seq = self.events.len() as u64 + 1;
        self.events.push((seq, ev));
        self.regimes.push(match self.regime {
            Regime::Up => 1,
            Regime::Flat => 0,
            Regime::Down => -1,
        });
        Ok(())
    }

    fn volume(&mut self) -> u64 {
        let (lo, hi) = self.cfg.volume_range;
        self.rng.random_range(lo..=hi)
    }

    /// The side the regime favours for resting liquidity (bids when rising).
    fn favoured_side(&mut self) -> Side {
        let p_bid = match self.regime {
            Regime::Up => self.cfg.bias,
            Regime::Flat => 0.5,
            Regime::Down => 1.0 - self.cfg.bias,
        };
        if self.rng.random_bool(p_bid) {
            Side::Bid
        } else {
            Side::Ask
        }
    }

    fn step_regime(&mut self) {
        if !self.rng.random_bool((1.0 / self.cfg.regime_length).min(1.0)) {
            return;
        }
        let mid = (self.book.best_ask().unwrap().0 + self.book.best_bid().unwrap().0) / 2;
        let drift = mid - self.cfg.base_tick;
        // mean reversion keeps prices in a bounded band
        let p_up = (0.5 - drift as f64 / self.cfg.reversion_ticks).clamp(0.05, 0.95);
        self.regime = match self.rng.random_range(0..3) {
            0 => Regime::Flat,
            _ if self.rng.random_bool(p_up) => Regime::Up,
            _ => Regime::Down,
        };
    }

    fn opposite(side: Side) -> Side {
        match side {
            Side::Ask => Side::Bid,
            Side::Bid => Side::Ask,
        }
    }

    /// Liquidity providers split evenly between sides, but the favoured side
    /// rests closer to the touch.
    fn place(&mut self) -> Result<(), BookError> {
        let side = if self.rng.random_bool(0.5) { Side::Bid } else { Side::Ask };
        let favoured = match self.regime {
            Regime::Up => Some(Side::Bid),
            Regime::Flat => None,
            Regime::Down => Some(Side::Ask),
        };
        // (distance decay, tick step, volume scale)
        let (decay, step, scale) = match favoured {
            Some(f) if f == side => (self.cfg.near_decay, self.cfg.favoured_step, self.cfg.favoured_volume),
            Some(_) => (self.cfg.far_decay, 1, 1.0),
            None => (self.cfg.placement_decay, 1, 1.0),
        };
        let ask = self.book.best_ask().unwrap().0;
        let bid = self.book.best_bid().unwrap().0;
        // the other side joins in as the spread widens
        let p_improve = match favoured {
            Some(f) if f != side => (self.cfg.p_improve * (ask - bid - 1) as f64 / 4.0).min(1.0),
            _ => self.cfg.p_improve,
        };
        let improve = ask - bid > 1 && self.rng.random_bool(p_improve);
        let price = if improve {
            match side {
                Side::Ask => ask - 1,
                Side::Bid => bid + 1,
            }
        } else {
            let mut d = 0;
            while d < self.cfg.max_distance && !self.rng.random_bool(decay) {
                d += step;
            }
            match side {
                Side::Ask => ask + d,
                Side::Bid => bid - d,
            }
        };
        let v = (self.volume() as f64 * scale).round() as u64;
        self.push(BookEvent::place(side, Tick(price), v))
    }

    fn execute(&mut self) -> Result<(), BookError> {
        // rising regimes buy, hitting asks
        let side = Self::opposite(self.favoured_side());
        if self.book.depth(side) <= self.cfg.min_levels {
            return self.place();
        }
        let best = match side {
            Side::Ask => self.book.best_ask(),
            Side::Bid => self.book.best_bid(),
        }
        .unwrap();
        let available = self.book.volume_at(side, best);
        let v = if self.rng.random_bool(0.4) { available } else { self.rng.random_range(1..=available) };
        self.push(BookEvent::execute(side, best, v))
    }

    /// Cancels on the disfavoured side target the levels near the touch.
    fn cancel(&mut self) -> Result<(), BookError> {
        let side = Self::opposite(self.favoured_side());
        let depth = self.book.depth(side);
        if depth <= self.cfg.min_levels {
            return self.place();
        }
        let disfavoured = match self.regime {
            Regime::Up => side == Side::Ask,
            Regime::Flat => false,
            Regime::Down => side == Side::Bid,
        };
        let reach = if disfavoured { 3 } else { depth.min(2 * self.cfg.min_levels) };
        let level = self.rng.random_range(1..=reach);
        let price = self.book.level_price(side, level).unwrap();
        let available = self.book.volume_at(side, price);
        let v = if self.rng.random_bool(0.6) { available } else { self.rng.random_range(1..=available) };
        self.push(BookEvent::cancel(side, price, v))
    }

    fn trim_far_levels(&mut self) -> Result<(), BookError> {
        for side in [Side::Ask, Side::Bid] {
            let depth = self.book.depth(side);
            if depth > 3 * self.cfg.min_levels {
                let price = self.book.level_price(side, depth).unwrap();
                let v = self.book.volume_at(side, price);
                return self.push(BookEvent::cancel(side, price, v));
            }
        }
        Ok(())
    }
}

/// Generates a stream of `cfg.events` events (including the initial book).
pub fn generate(cfg: &SynthConfig) -> Result<EventStream, BookError> {
    Ok(generate_traced(cfg)?.0)
}

/// Like [`generate`], also returning the latent regime (+1 rising, 0 flat,
/// -1 falling) in force at each event.
pub fn generate_traced(cfg: &SynthConfig) -> Result<(EventStream, Vec<i8>), BookError> {
    let book = BookState::new(cfg.tick_size, cfg.min_order_size)?;
    let mut g = Gen {
        cfg,
        rng: ChaCha8Rng::seed_from_u64(cfg.seed),
        book,
        regime: Regime::Flat,
        events: Vec::new(),
        regimes: Vec::new(),
    };

    // initial sparse book: roughly two in three ticks occupied
    for side in [Side::Ask, Side::Bid] {
        let mut placed = 0;
        let mut d = 1;
        while placed < 2 * cfg.min_levels {
            if d == 1 || g.rng.random_bool(0.65) {
                let price = match side {
                    Side::Ask => cfg.base_tick + d,
                    Side::Bid => cfg.base_tick - d,
                };
                let v = g.volume();
                g.push(BookEvent::place(side, Tick(price), v))?;
                placed += 1;
            }
            d += 1;
        }
    }

    while g.events.len() < cfg.events {
        g.step_regime();
        let u: f64 = g.rng.random();
        if u < cfg.p_execute {
            g.execute()?;
        } else if u < cfg.p_execute + cfg.p_cancel {
            g.cancel()?;
        } else {
            g.place()?;
        }
        if g.events.len() < cfg.events {
            g.trim_far_levels()?;
        }
    }
    let stream = EventStream { tick_size: cfg.tick_size, min_order_size: cfg.min_order_size, events: g.events };
    Ok((stream, g.regimes))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ingest::events_to_series;

    #[test]
    fn deterministic_and_valid() {
        let cfg = SynthConfig { events: 3000, ..SynthConfig::default() };
        let a = generate(&cfg).unwrap();
        assert_eq!(a.events.len(), 3000);
        assert_eq!(a.events, generate(&cfg).unwrap().events);
        let s = events_to_series(&a, 10).unwrap();
        s.validate().unwrap();
        assert!(s.len() > 2900);
    }
}
