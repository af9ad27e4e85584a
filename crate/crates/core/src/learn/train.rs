use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{flatten, Batch, Dataset, LearnError, Model, ModelSpec};
use crate::eval::metrics_from_indices;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Optimizer {
    Adam { beta1: f64, beta2: f64, eps: f64 },
    Sgd { momentum: f64 },
}

impl Default for Optimizer {
    fn default() -> Self {
        Optimizer::Adam { beta1: 0.9, beta2: 0.999, eps: 1e-8 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub optimizer: Optimizer,
    pub learning_rate: f64,
    pub batch_size: usize,
    pub max_epochs: usize,
    /// Stop after this many epochs without a validation improvement.
    pub patience: Option<usize>,
    pub shuffle: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            optimizer: Optimizer::default(),
            learning_rate: 1e-3,
            batch_size: 64,
            max_epochs: 20,
            patience: Some(5),
            shuffle: true,
        }
    }
}

impl TrainConfig {
    fn validate(&self) -> Result<(), LearnError> {
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(LearnError::InvalidConfig("learning_rate must be positive".into()));
        }
        if self.batch_size == 0 || self.max_epochs == 0 {
            return Err(LearnError::InvalidConfig("batch_size and max_epochs must be > 0".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochStats {
    pub epoch: usize,
    pub train_loss: f64,
    pub val_f_score: f64,
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    /// Parameters from the epoch with the best validation macro F-score.
    pub model: Model,
    pub best_epoch: usize,
    pub history: Vec<EpochStats>,
}

struct OptState {
    m: Vec<f64>,
    v: Vec<f64>,
    t: i32,
}

impl OptState {
    fn step(&mut self, opt: Optimizer, lr: f64, params: &mut [f64], grad: &[f64]) {
        self.t += 1;
        match opt {
            Optimizer::Adam { beta1, beta2, eps } => {
                let c1 = 1.0 - beta1.powi(self.t);
                let c2 = 1.0 - beta2.powi(self.t);
                for i in 0..params.len() {
                    self.m[i] = beta1 * self.m[i] + (1.0 - beta1) * grad[i];
                    self.v[i] = beta2 * self.v[i] + (1.0 - beta2) * grad[i] * grad[i];
                    params[i] -= lr * (self.m[i] / c1) / ((self.v[i] / c2).sqrt() + eps);
                }
            }
            Optimizer::Sgd { momentum } => {
                for i in 0..params.len() {
                    self.m[i] = momentum * self.m[i] + grad[i];
                    params[i] -= lr * self.m[i];
                }
            }
        }
    }
}

/// Trains from the spec's seeded initialisation. When `val` is empty the
/// training set doubles as the selection set.
pub fn train(spec: ModelSpec, data: &Dataset, val: &Dataset, cfg: &TrainConfig) -> Result<TrainOutcome, LearnError> {
    cfg.validate()?;
    if data.is_empty() {
        return Err(LearnError::EmptyBatch);
    }
    if data.dim != spec.input_dim || (!val.is_empty() && val.dim != spec.input_dim) {
        return Err(LearnError::DimMismatch { expected: spec.input_dim, got: data.dim });
    }
    for c in 0..spec.classes {
        if !data.labels.contains(&c) {
            return Err(LearnError::MissingClass(c));
        }
    }
    let selection = if val.is_empty() { data } else { val };
    let mut model = Model::new(spec)?;
    let mut rng = ChaCha8Rng::seed_from_u64(model.spec.seed ^ 0x5eed_0f5a_u64);
    let mut params = model.params();
    let mut state = OptState { m: vec![0.0; params.len()], v: vec![0.0; params.len()], t: 0 };

    let mut order: Vec<usize> = (0..data.len()).collect();
    let mut xb = Vec::with_capacity(cfg.batch_size * data.dim);
    let mut yb = Vec::with_capacity(cfg.batch_size);
    let mut history = Vec::new();
    let mut best: Option<(f64, usize, Vec<f64>)> = None;
    let mut stale = 0;

    for epoch in 1..=cfg.max_epochs {
        if cfg.shuffle {
            order.shuffle(&mut rng);
        }
        let mut loss_sum = 0.0;
        for chunk in order.chunks(cfg.batch_size) {
            xb.clear();
            yb.clear();
            for &i in chunk {
                xb.extend_from_slice(data.row(i));
                yb.push(data.labels[i]);
            }
            let (loss, g) = model.grad(&Batch { inputs: &xb, labels: &yb })?;
            if !loss.is_finite() {
                return Err(LearnError::Diverged { epoch });
            }
            loss_sum += loss * chunk.len() as f64;
            state.step(cfg.optimizer, cfg.learning_rate, &mut params, &flatten(&g));
            model.set_params(&params)?;
        }
        if params.iter().any(|p| !p.is_finite()) {
            return Err(LearnError::Diverged { epoch });
        }
        let pred = model.predict(&selection.inputs)?;
        let f = metrics_from_indices(&selection.labels, &pred, model.spec.classes).f_score;
        history.push(EpochStats { epoch, train_loss: loss_sum / data.len() as f64, val_f_score: f });
        match &best {
            Some((bf, _, _)) if f <= *bf => {
                stale += 1;
                if cfg.patience.is_some_and(|p| stale >= p) {
                    break;
                }
            }
            _ => {
                best = Some((f, epoch, params.clone()));
                stale = 0;
            }
        }
    }
    let (_, best_epoch, best_params) = best.expect("at least one epoch ran");
    model.set_params(&best_params)?;
    Ok(TrainOutcome { model, best_epoch, history })
}
