//! Micro-movement targets and three-class labels.
//!
//! The target at time `t` is the relative gap between the mean of the next
//! `k` mid-prices and the current mid: `l_t = (m_+(t) - p_t) / p_t`.

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const DEFAULT_HORIZON: usize = 50;
pub const DEFAULT_ALPHA: f64 = 0.002;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Class {
    Up,
    Stationary,
    Down,
}

impl Class {
    pub const ALL: [Class; 3] = [Class::Up, Class::Stationary, Class::Down];

    /// 0 = up, 1 = stationary, 2 = down.
    pub fn index(self) -> usize {
        match self {
            Class::Up => 0,
            Class::Stationary => 1,
            Class::Down => 2,
        }
    }

    pub fn from_index(i: usize) -> Class {
        match i {
            0 => Class::Up,
            1 => Class::Stationary,
            2 => Class::Down,
            _ => panic!("class index {i} out of range"),
        }
    }

    /// FI-2010 label code: 1 = up, 2 = stationary, 3 = down.
    pub fn fi2010_code(self) -> u8 {
        self.index() as u8 + 1
    }

    pub fn from_fi2010_code(v: f64) -> Option<Class> {
        match v {
            1.0 => Some(Class::Up),
            2.0 => Some(Class::Stationary),
            3.0 => Some(Class::Down),
            _ => None,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Class::Up => "up",
            Class::Stationary => "stationary",
            Class::Down => "down",
        }
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LabelError {
    #[error("horizon {k} from t={t} exceeds series length {len}")]
    HorizonOutOfRange { t: usize, k: usize, len: usize },
    #[error("horizon must be >= 1")]
    ZeroHorizon,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LabelConfig {
    pub horizon: usize,
    pub alpha: f64,
}

impl Default for LabelConfig {
    fn default() -> Self {
        Self { horizon: DEFAULT_HORIZON, alpha: DEFAULT_ALPHA }
    }
}

pub fn micro_movement(mids: &[f64], t: usize, k: usize) -> Result<f64, LabelError> {
    if k == 0 {
        return Err(LabelError::ZeroHorizon);
    }
    if t + k >= mids.len() {
        return Err(LabelError::HorizonOutOfRange { t, k, len: mids.len() });
    }
    let forward = mids[t + 1..=t + k].iter().sum::<f64>() / k as f64;
    Ok((forward - mids[t]) / mids[t])
}

/// Up above `alpha`, down below `-alpha`, stationary in between (inclusive).
pub fn classify(l: f64, alpha: f64) -> Class {
    if l > alpha {
        Class::Up
    } else if l < -alpha {
        Class::Down
    } else {
        Class::Stationary
    }
}

/// Labels for every `t` that has `k` future mids.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabelSeries {
    pub horizon: usize,
    pub alpha: f64,
    pub movements: Vec<f64>,
    pub classes: Vec<Class>,
}

pub fn label_series(mids: &[f64], cfg: &LabelConfig) -> Result<LabelSeries, LabelError> {
    if cfg.horizon == 0 {
        return Err(LabelError::ZeroHorizon);
    }
    let n = mids.len().saturating_sub(cfg.horizon);
    let movements = (0..n)
        .map(|t| micro_movement(mids, t, cfg.horizon))
        .collect::<Result<Vec<_>, _>>()?;
    let classes = movements.iter().map(|l| classify(*l, cfg.alpha)).collect();
    Ok(LabelSeries { horizon: cfg.horizon, alpha: cfg.alpha, movements, classes })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Agreement {
    pub compared: usize,
    pub matching: usize,
    /// Positions where the labels disagree.
    pub mismatches: Vec<usize>,
}

impl Agreement {
    pub fn rate(&self) -> f64 {
        if self.compared == 0 {
            0.0
        } else {
            self.matching as f64 / self.compared as f64
        }
    }
}

/// Compares computed labels against a provided column over the common prefix.
pub fn agreement(computed: &[Class], provided: &[Class]) -> Agreement {
    let compared = computed.len().min(provided.len());
    let mismatches: Vec<usize> = (0..compared).filter(|&i| computed[i] != provided[i]).collect();
    Agreement { compared, matching: compared - mismatches.len(), mismatches }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn two_step_example() {
        let mids = [10.00, 10.05, 10.07];
        let l = micro_movement(&mids, 0, 2).unwrap();
        assert!((l - 0.006).abs() < 1e-12);
        assert_eq!(classify(l, DEFAULT_ALPHA), Class::Up);
    }

    #[test]
    fn constant_and_single_step() {
        let mids = [5.0; 10];
        assert_eq!(micro_movement(&mids, 3, 4).unwrap(), 0.0);
        let mids = [10.0, 10.1, 9.9];
        let l = micro_movement(&mids, 1, 1).unwrap();
        assert_eq!(l, (9.9 - 10.1) / 10.1);
        assert_eq!(
            micro_movement(&mids, 1, 2),
            Err(LabelError::HorizonOutOfRange { t: 1, k: 2, len: 3 })
        );
        assert_eq!(micro_movement(&mids, 0, 0), Err(LabelError::ZeroHorizon));
    }

    #[test]
    fn thresholds() {
        assert_eq!(classify(0.002, 0.002), Class::Stationary);
        assert_eq!(classify(-0.002, 0.002), Class::Stationary);
        assert_eq!(classify(-0.0021, 0.002), Class::Down);
        assert_eq!(classify(0.0021, 0.002), Class::Up);
    }

    #[test]
    fn series_matches_pointwise() {
        let mids: Vec<f64> = (0..200).map(|i| 10.0 + ((i * 37) % 11) as f64 * 0.01).collect();
        let cfg = LabelConfig { horizon: 7, alpha: 0.002 };
        let series = label_series(&mids, &cfg).unwrap();
        assert_eq!(series.movements.len(), 193);
        for (t, l) in series.movements.iter().enumerate() {
            assert_eq!(*l, micro_movement(&mids, t, 7).unwrap());
            assert_eq!(series.classes[t], classify(*l, 0.002));
        }
        assert!(label_series(&mids[..5], &cfg).unwrap().classes.is_empty());
    }

    #[test]
    fn agreement_counts() {
        use Class::*;
        let a = agreement(&[Up, Down, Stationary, Up], &[Up, Up, Stationary]);
        assert_eq!(a.compared, 3);
        assert_eq!(a.mismatches, vec![1]);
        assert!((a.rate() - 2.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn fi2010_codes() {
        for c in Class::ALL {
            assert_eq!(Class::from_fi2010_code(c.fi2010_code() as f64), Some(c));
        }
        assert_eq!(Class::from_fi2010_code(4.0), None);
    }

    proptest! {
        #[test]
        fn classify_is_mirror_symmetric(l in -0.1f64..0.1, alpha in 0.0001f64..0.01) {
            let pos = classify(l, alpha);
            let neg = classify(-l, alpha);
            match pos {
                Class::Up => prop_assert_eq!(neg, Class::Down),
                Class::Down => prop_assert_eq!(neg, Class::Up),
                Class::Stationary => prop_assert_eq!(neg, Class::Stationary),
            }
        }
    }
}
