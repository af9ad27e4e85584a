//! The four input representations built from a window of snapshots.
//!
//! * level-based: `T x 4L`, one row per snapshot, per level
//!   `ask_price, ask_volume, bid_price, bid_volume`.
//! * moving window (MW): `N x (2W+1)` signed volumes on contiguous ticks
//!   centred on the reference price `r`, asks positive and bids negative.
//! * accumulated MW: per-row cumulative depth moving outward from the centre.
//! * smoothed MW: MW convolved along the price axis with a Gaussian kernel.
//!
//! The reference price is the mid of the most recent snapshot snapped to the
//! grid, with an exact half tick rounded toward the bid. All rows of a window
//! share it.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::book::{price_to_tick, BookError, Level, LevelSnapshot, Tick};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scheme {
    LevelBased,
    Mw,
    AccumulatedMw,
    SmoothedMw,
}

impl Scheme {
    pub const ALL: [Scheme; 4] = [Scheme::LevelBased, Scheme::Mw, Scheme::AccumulatedMw, Scheme::SmoothedMw];

    pub fn name(self) -> &'static str {
        match self {
            Scheme::LevelBased => "level_based",
            Scheme::Mw => "mw",
            Scheme::AccumulatedMw => "accumulated_mw",
            Scheme::SmoothedMw => "smoothed_mw",
        }
    }

    pub fn parse(s: &str) -> Option<Scheme> {
        match s.to_ascii_lowercase().replace('-', "_").as_str() {
            "level_based" | "level" | "lb" => Some(Scheme::LevelBased),
            "mw" => Some(Scheme::Mw),
            "accumulated_mw" | "accumulated" | "amw" => Some(Scheme::AccumulatedMw),
            "smoothed_mw" | "smoothed" | "smw" => Some(Scheme::SmoothedMw),
            _ => None,
        }
    }

    pub fn is_moving_window(self) -> bool {
        self != Scheme::LevelBased
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum RepError {
    #[error("empty window")]
    EmptyWindow,
    #[error("snapshot {position} has depth {depth}, {required} required")]
    NonUniformDepth { position: usize, depth: usize, required: usize },
    #[error("expected a {expected} tensor, got {got}")]
    WrongScheme { expected: &'static str, got: &'static str },
    #[error("ask and bid volume share price {0}")]
    SharedCell(Tick),
    #[error("invalid window config: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Book(#[from] BookError),
}

/// Moving-window parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct WindowConfig {
    /// History length (`N`, also `T` for level-based windows).
    pub history: usize,
    /// Half-width in ticks (`W`).
    pub half_width: usize,
    /// Gaussian std in ticks, smoothed MW only.
    pub sigma: f64,
    /// Kernel cutoff in multiples of `sigma`.
    pub truncation: f64,
}

impl Default for WindowConfig {
    fn default() -> Self {
        Self { history: 10, half_width: 20, sigma: 1.0, truncation: 3.0 }
    }
}

impl WindowConfig {
    pub fn validate(&self) -> Result<(), RepError> {
        if self.history == 0 {
            return Err(RepError::InvalidConfig("history must be >= 1".into()));
        }
        if self.half_width == 0 {
            return Err(RepError::InvalidConfig("half_width must be >= 1".into()));
        }
        if !(self.sigma > 0.0) || !self.sigma.is_finite() {
            return Err(RepError::InvalidConfig("sigma must be > 0".into()));
        }
        if !(self.truncation >= 1.0) || !self.truncation.is_finite() {
            return Err(RepError::InvalidConfig("truncation must be >= 1".into()));
        }
        Ok(())
    }

    pub fn width(&self) -> usize {
        2 * self.half_width + 1
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RepMeta {
    pub tick_size: f64,
    /// `L`, level-based only.
    pub levels: Option<usize>,
    /// `W`, moving-window family only.
    pub half_width: Option<usize>,
    pub reference_tick: Option<Tick>,
    pub reference_price: Option<f64>,
    pub sigma: Option<f64>,
    pub truncation: Option<f64>,
}

/// Dense row-major matrix, rows are time (oldest first).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RepTensor {
    pub scheme: Scheme,
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<f64>,
    pub meta: RepMeta,
}

impl RepTensor {
    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.data[r * self.cols + c]
    }

    pub fn row(&self, r: usize) -> &[f64] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    fn row_mut(&mut self, r: usize) -> &mut [f64] {
        &mut self.data[r * self.cols..(r + 1) * self.cols]
    }

    fn expect(&self, scheme: Scheme) -> Result<(), RepError> {
        if self.scheme != scheme {
            return Err(RepError::WrongScheme { expected: scheme.name(), got: self.scheme.name() });
        }
        Ok(())
    }
}

/// Stacks the top `levels` of each snapshot into a `T x 4L` matrix.
pub fn build_level_based(window: &[LevelSnapshot], levels: usize, tick_size: f64) -> Result<RepTensor, RepError> {
    if window.is_empty() {
        return Err(RepError::EmptyWindow);
    }
    if levels == 0 {
        return Err(RepError::InvalidConfig("levels must be >= 1".into()));
    }
    let cols = 4 * levels;
    let mut data = Vec::with_capacity(window.len() * cols);
    for (position, s) in window.iter().enumerate() {
        if s.depth() < levels {
            return Err(RepError::NonUniformDepth { position, depth: s.depth(), required: levels });
        }
        for i in 0..levels {
            data.extend_from_slice(&[s.asks[i].price, s.asks[i].volume, s.bids[i].price, s.bids[i].volume]);
        }
    }
    Ok(RepTensor {
        scheme: Scheme::LevelBased,
        rows: window.len(),
        cols,
        data,
        meta: RepMeta {
            tick_size,
            levels: Some(levels),
            half_width: None,
            reference_tick: None,
            reference_price: None,
            sigma: None,
            truncation: None,
        },
    })
}

/// Inverse of [`build_level_based`]. Snapshot indices are positional.
pub fn unpack_level_based(t: &RepTensor) -> Result<Vec<LevelSnapshot>, RepError> {
    t.expect(Scheme::LevelBased)?;
    let levels = t.cols / 4;
    Ok((0..t.rows)
        .map(|r| {
            let row = t.row(r);
            LevelSnapshot {
                index: r as u64,
                asks: (0..levels).map(|i| Level::new(row[4 * i], row[4 * i + 1])).collect(),
                bids: (0..levels).map(|i| Level::new(row[4 * i + 2], row[4 * i + 3])).collect(),
            }
        })
        .collect())
}

/// Grid-snapped mid of a snapshot; an exact half tick goes to the bid side.
pub fn reference_tick(s: &LevelSnapshot, tick_size: f64) -> Result<Tick, RepError> {
    let ask = s.asks.first().ok_or(RepError::EmptyWindow)?;
    let bid = s.bids.first().ok_or(RepError::EmptyWindow)?;
    let a = price_to_tick(ask.price, tick_size)?;
    let b = price_to_tick(bid.price, tick_size)?;
    Ok(Tick((a.0 + b.0).div_euclid(2)))
}

/// Signed-volume grid over `2W+1` ticks centred on the last snapshot's
/// reference price. Every level carried by a snapshot is placed; prices
/// outside the window are dropped.
pub fn build_mw(window: &[LevelSnapshot], cfg: &WindowConfig, tick_size: f64) -> Result<RepTensor, RepError> {
    cfg.validate()?;
    let last = window.last().ok_or(RepError::EmptyWindow)?;
    let r = reference_tick(last, tick_size)?;
    let w = cfg.half_width as i64;
    let cols = cfg.width();
    let mut data = vec![0.0; window.len() * cols];
    for (n, s) in window.iter().enumerate() {
        let row = &mut data[n * cols..(n + 1) * cols];
        let mut ask_cells = vec![false; cols];
        for lvl in &s.asks {
            let off = price_to_tick(lvl.price, tick_size)?.0 - r.0;
            if off.abs() <= w {
                let c = (off + w) as usize;
                row[c] += lvl.volume;
                ask_cells[c] = true;
            }
        }
        for lvl in &s.bids {
            let p = price_to_tick(lvl.price, tick_size)?;
            let off = p.0 - r.0;
            if off.abs() <= w {
                let c = (off + w) as usize;
                if ask_cells[c] {
                    return Err(RepError::SharedCell(p));
                }
                row[c] -= lvl.volume;
            }
        }
    }
    Ok(RepTensor {
        scheme: Scheme::Mw,
        rows: window.len(),
        cols,
        data,
        meta: RepMeta {
            tick_size,
            levels: None,
            half_width: Some(cfg.half_width),
            reference_tick: Some(r),
            reference_price: Some(r.to_price(tick_size)),
            sigma: None,
            truncation: None,
        },
    })
}

fn half_width_of(t: &RepTensor) -> usize {
    t.meta.half_width.unwrap_or(t.cols / 2)
}

/// Outward cumulative sums from the centre column: ask cell `j > W` holds
/// the sum of cells `W+1..=j`, bid cell `j < W` the sum of `j..W`. The
/// centre column is copied.
pub fn build_accumulated_mw(mw: &RepTensor) -> Result<RepTensor, RepError> {
    mw.expect(Scheme::Mw)?;
    let w = half_width_of(mw);
    let mut out = mw.clone();
    out.scheme = Scheme::AccumulatedMw;
    for r in 0..out.rows {
        let row = out.row_mut(r);
        for j in w + 2..row.len() {
            row[j] += row[j - 1];
        }
        for j in (0..w.saturating_sub(1)).rev() {
            row[j] += row[j + 1];
        }
    }
    Ok(out)
}

/// Inverse of [`build_accumulated_mw`].
pub fn difference_accumulated_mw(acc: &RepTensor) -> Result<RepTensor, RepError> {
    acc.expect(Scheme::AccumulatedMw)?;
    let w = half_width_of(acc);
    let mut out = acc.clone();
    out.scheme = Scheme::Mw;
    for r in 0..out.rows {
        let src = acc.row(r);
        let row = out.row_mut(r);
        for j in w + 2..row.len() {
            row[j] = src[j] - src[j - 1];
        }
        for j in 0..w.saturating_sub(1) {
            row[j] = src[j] - src[j + 1];
        }
    }
    Ok(out)
}

/// Discrete Gaussian weights for offsets `-R..=R`, `R = floor(truncation * sigma)`,
/// normalized to sum to one.
pub fn gaussian_kernel(sigma: f64, truncation: f64) -> Vec<f64> {
    let radius = (truncation * sigma).floor().max(0.0) as i64;
    let mut k: Vec<f64> = (-radius..=radius)
        .map(|d| (-(d * d) as f64 / (2.0 * sigma * sigma)).exp())
        .collect();
    let total: f64 = k.iter().sum();
    k.iter_mut().for_each(|v| *v /= total);
    k
}

/// Smooths each row along the price axis, ask and bid mass separately.
///
/// Each side spreads only within its own half of the row: when a row holds
/// both sides, the gap between the highest bid cell and the lowest ask cell
/// is split in two (asks take the upper half, and the middle cell when the
/// gap is odd). Kernel weight that would cross the split is renormalized
/// back onto the side, so per-side mass is kept and signs never mix. Weight
/// that falls off either end of the window is dropped (zero padding).
pub fn build_smoothed_mw(mw: &RepTensor, cfg: &WindowConfig) -> Result<RepTensor, RepError> {
    mw.expect(Scheme::Mw)?;
    cfg.validate()?;
    let kernel = gaussian_kernel(cfg.sigma, cfg.truncation);
    let radius = (kernel.len() / 2) as i64;
    let cols = mw.cols as i64;
    let mut out = mw.clone();
    out.scheme = Scheme::SmoothedMw;
    out.meta.sigma = Some(cfg.sigma);
    out.meta.truncation = Some(cfg.truncation);
    for r in 0..mw.rows {
        let src = mw.row(r);
        let top_bid = src.iter().rposition(|v| *v < 0.0).map(|c| c as i64);
        let low_ask = src.iter().position(|v| *v > 0.0).map(|c| c as i64);
        // first column belonging to the ask side
        let split = match (top_bid, low_ask) {
            (Some(b), Some(a)) if b < a => b + 1 + (a - b - 1) / 2,
            (Some(b), Some(a)) => {
                return Err(RepError::InvalidConfig(format!(
                    "row {r} has bid volume at column {b} above ask volume at column {a}"
                )))
            }
            (Some(_), None) => i64::MAX,
            (None, _) => i64::MIN,
        };
        let row = out.row_mut(r);
        row.iter_mut().for_each(|v| *v = 0.0);
        for (c, &v) in src.iter().enumerate() {
            if v == 0.0 {
                continue;
            }
            let c = c as i64;
            let on_side = |target: i64| if v > 0.0 { target >= split } else { target < split };
            let norm: f64 = (-radius..=radius)
                .filter(|d| on_side(c + d))
                .map(|d| kernel[(d + radius) as usize])
                .sum();
            for d in -radius..=radius {
                let target = c + d;
                if target < 0 || target >= cols || !on_side(target) {
                    continue;
                }
                row[target as usize] += v * kernel[(d + radius) as usize] / norm;
            }
        }
    }
    Ok(out)
}

/// Builds any scheme from a window. Level-based uses `levels`; the MW family
/// uses every level each snapshot carries.
pub fn build(
    scheme: Scheme,
    window: &[LevelSnapshot],
    levels: usize,
    cfg: &WindowConfig,
    tick_size: f64,
) -> Result<RepTensor, RepError> {
    match scheme {
        Scheme::LevelBased => build_level_based(window, levels, tick_size),
        Scheme::Mw => build_mw(window, cfg, tick_size),
        Scheme::AccumulatedMw => build_accumulated_mw(&build_mw(window, cfg, tick_size)?),
        Scheme::SmoothedMw => build_smoothed_mw(&build_mw(window, cfg, tick_size)?, cfg),
    }
}
