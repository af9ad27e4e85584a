//! Built-in classifiers: multinomial logistic regression and a ReLU MLP,
//! trained with mean cross-entropy.

mod train;

pub use train::{train, EpochStats, Optimizer, TrainConfig, TrainOutcome};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const MLP_HIDDEN: [usize; 2] = [100, 50];
pub const NUM_CLASSES: usize = 3;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LearnError {
    #[error("input has {got} features, model expects {expected}")]
    DimMismatch { expected: usize, got: usize },
    #[error("empty batch")]
    EmptyBatch,
    #[error("label {0} out of range")]
    BadLabel(usize),
    #[error("training set has no samples of class {0}")]
    MissingClass(usize),
    #[error("loss became non-finite at epoch {epoch}")]
    Diverged { epoch: usize },
    #[error("invalid model or training config: {0}")]
    InvalidConfig(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelKind {
    Linear,
    Mlp,
}

impl ModelKind {
    pub fn name(self) -> &'static str {
        match self {
            ModelKind::Linear => "linear",
            ModelKind::Mlp => "mlp",
        }
    }

    pub fn parse(s: &str) -> Option<ModelKind> {
        match s.to_ascii_lowercase().as_str() {
            "linear" | "logistic" => Some(ModelKind::Linear),
            "mlp" => Some(ModelKind::Mlp),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelSpec {
    pub kind: ModelKind,
    pub input_dim: usize,
    pub hidden: Vec<usize>,
    pub classes: usize,
    pub seed: u64,
}

impl ModelSpec {
    pub fn linear(input_dim: usize, seed: u64) -> Self {
        Self { kind: ModelKind::Linear, input_dim, hidden: Vec::new(), classes: NUM_CLASSES, seed }
    }

    pub fn mlp(input_dim: usize, seed: u64) -> Self {
        Self { kind: ModelKind::Mlp, input_dim, hidden: MLP_HIDDEN.to_vec(), classes: NUM_CLASSES, seed }
    }

    pub fn of_kind(kind: ModelKind, input_dim: usize, seed: u64) -> Self {
        match kind {
            ModelKind::Linear => Self::linear(input_dim, seed),
            ModelKind::Mlp => Self::mlp(input_dim, seed),
        }
    }

    fn validate(&self) -> Result<(), LearnError> {
        if self.input_dim == 0 || self.classes < 2 || self.hidden.contains(&0) {
            return Err(LearnError::InvalidConfig("dimensions must be > 0 and classes >= 2".into()));
        }
        if self.kind == ModelKind::Linear && !self.hidden.is_empty() {
            return Err(LearnError::InvalidConfig("linear model takes no hidden layers".into()));
        }
        Ok(())
    }

    fn layer_dims(&self) -> Vec<(usize, usize)> {
        let mut dims = Vec::new();
        let mut prev = self.input_dim;
        for &h in &self.hidden {
            dims.push((prev, h));
            prev = h;
        }
        dims.push((prev, self.classes));
        dims
    }
}

/// Fully connected layer; `weights` is `out x in`, row-major.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dense {
    pub in_dim: usize,
    pub out_dim: usize,
    pub weights: Vec<f64>,
    pub bias: Vec<f64>,
}

impl Dense {
    fn zeros(in_dim: usize, out_dim: usize) -> Self {
        Self { in_dim, out_dim, weights: vec![0.0; in_dim * out_dim], bias: vec![0.0; out_dim] }
    }

    fn forward_into(&self, x: &[f64], out: &mut [f64]) {
        for (o, (row, b)) in out.iter_mut().zip(self.weights.chunks_exact(self.in_dim).zip(&self.bias)) {
            *o = b + dot(row, x);
        }
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    let mut s = 0.0;
    for (x, y) in a.iter().zip(b) {
        s += x * y;
    }
    s
}

/// Same layout as a model's layers.
pub type Gradients = Vec<Dense>;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Model {
    pub spec: ModelSpec,
    pub layers: Vec<Dense>,
}

/// A borrowed mini-batch: `inputs` holds `labels.len()` rows of `dim` values.
#[derive(Debug, Clone, Copy)]
pub struct Batch<'a> {
    pub inputs: &'a [f64],
    pub labels: &'a [usize],
}

pub fn softmax_in_place(z: &mut [f64]) {
    let max = z.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut total = 0.0;
    for v in z.iter_mut() {
        *v = (*v - max).exp();
        total += *v;
    }
    z.iter_mut().for_each(|v| *v /= total);
}

impl Model {
    /// Weights drawn from `U(-1/sqrt(fan_in), 1/sqrt(fan_in))`, biases zero.
    pub fn new(spec: ModelSpec) -> Result<Self, LearnError> {
        spec.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
        let layers = spec
            .layer_dims()
            .into_iter()
            .map(|(i, o)| {
                let bound = 1.0 / (i as f64).sqrt();
                let mut d = Dense::zeros(i, o);
                d.weights.iter_mut().for_each(|w| *w = rng.random_range(-bound..bound));
                d
            })
            .collect();
        Ok(Self { spec, layers })
    }

    /// Model with every parameter zero.
    pub fn zeros(spec: ModelSpec) -> Result<Self, LearnError> {
        spec.validate()?;
        let layers = spec.layer_dims().into_iter().map(|(i, o)| Dense::zeros(i, o)).collect();
        Ok(Self { spec, layers })
    }

    pub fn input_dim(&self) -> usize {
        self.spec.input_dim
    }

    pub fn num_params(&self) -> usize {
        self.layers.iter().map(|l| l.weights.len() + l.bias.len()).sum()
    }

    /// Flat parameters: per layer, weights then bias.
    pub fn params(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.num_params());
        for l in &self.layers {
            out.extend_from_slice(&l.weights);
            out.extend_from_slice(&l.bias);
        }
        out
    }

    pub fn set_params(&mut self, flat: &[f64]) -> Result<(), LearnError> {
        if flat.len() != self.num_params() {
            return Err(LearnError::DimMismatch { expected: self.num_params(), got: flat.len() });
        }
        let mut off = 0;
        for l in &mut self.layers {
            let n = l.weights.len();
            l.weights.copy_from_slice(&flat[off..off + n]);
            off += n;
            let n = l.bias.len();
            l.bias.copy_from_slice(&flat[off..off + n]);
            off += n;
        }
        Ok(())
    }

    fn check_dim(&self, x: &[f64]) -> Result<(), LearnError> {
        if x.len() != self.input_dim() {
            return Err(LearnError::DimMismatch { expected: self.input_dim(), got: x.len() });
        }
        Ok(())
    }

    /// Pre-activations of every layer for one input; ReLU is applied when
    /// feeding the next layer.
    fn activations(&self, x: &[f64]) -> Vec<Vec<f64>> {
        let mut acts: Vec<Vec<f64>> = Vec::with_capacity(self.layers.len());
        let mut input: Vec<f64> = x.to_vec();
        for (i, layer) in self.layers.iter().enumerate() {
            let mut z = vec![0.0; layer.out_dim];
            layer.forward_into(&input, &mut z);
            if i + 1 < self.layers.len() {
                input = z.iter().map(|v| v.max(0.0)).collect();
            }
            acts.push(z);
        }
        acts
    }

    /// Class probabilities for one input.
    pub fn forward(&self, x: &[f64]) -> Result<Vec<f64>, LearnError> {
        self.check_dim(x)?;
        let mut logits = self.activations(x).pop().expect("at least one layer");
        softmax_in_place(&mut logits);
        Ok(logits)
    }

    pub fn predict_one(&self, x: &[f64]) -> Result<usize, LearnError> {
        let p = self.forward(x)?;
        Ok(argmax(&p))
    }

    pub fn predict(&self, inputs: &[f64]) -> Result<Vec<usize>, LearnError> {
        inputs.chunks_exact(self.input_dim()).map(|x| self.predict_one(x)).collect()
    }

    fn check_batch(&self, batch: &Batch<'_>) -> Result<(), LearnError> {
        if batch.labels.is_empty() {
            return Err(LearnError::EmptyBatch);
        }
        if batch.inputs.len() != batch.labels.len() * self.input_dim() {
            return Err(LearnError::DimMismatch {
                expected: batch.labels.len() * self.input_dim(),
                got: batch.inputs.len(),
            });
        }
        if let Some(&bad) = batch.labels.iter().find(|&&y| y >= self.spec.classes) {
            return Err(LearnError::BadLabel(bad));
        }
        Ok(())
    }

    /// Mean cross-entropy over a batch.
    pub fn loss(&self, batch: &Batch<'_>) -> Result<f64, LearnError> {
        self.check_batch(batch)?;
        let dim = self.input_dim();
        let mut total = 0.0;
        for (x, &y) in batch.inputs.chunks_exact(dim).zip(batch.labels) {
            let logits = self.activations(x).pop().unwrap();
            total += log_sum_exp(&logits) - logits[y];
        }
        Ok(total / batch.labels.len() as f64)
    }

    /// Mean cross-entropy and its gradient with respect to every parameter.
    pub fn grad(&self, batch: &Batch<'_>) -> Result<(f64, Gradients), LearnError> {
        self.check_batch(batch)?;
        let dim = self.input_dim();
        let n = batch.labels.len() as f64;
        let mut grads: Gradients = self.layers.iter().map(|l| Dense::zeros(l.in_dim, l.out_dim)).collect();
        let mut total = 0.0;
        for (x, &y) in batch.inputs.chunks_exact(dim).zip(batch.labels) {
            let acts = self.activations(x);
            let logits = acts.last().unwrap();
            total += log_sum_exp(logits) - logits[y];
            // d loss / d logits = softmax - onehot
            let mut delta = logits.clone();
            softmax_in_place(&mut delta);
            delta[y] -= 1.0;
            for li in (0..self.layers.len()).rev() {
                let layer = &self.layers[li];
                let relu_in;
                let input: &[f64] = if li == 0 {
                    x
                } else {
                    relu_in = acts[li - 1].iter().map(|v| v.max(0.0)).collect::<Vec<_>>();
                    &relu_in
                };
                let g = &mut grads[li];
                for (o, d) in delta.iter().enumerate() {
                    if *d == 0.0 {
                        continue;
                    }
                    g.bias[o] += d;
                    let row = &mut g.weights[o * layer.in_dim..(o + 1) * layer.in_dim];
                    for (w, xi) in row.iter_mut().zip(input) {
                        *w += d * xi;
                    }
                }
                if li > 0 {
                    let mut back = vec![0.0; layer.in_dim];
                    for (o, d) in delta.iter().enumerate() {
                        if *d == 0.0 {
                            continue;
                        }
                        let row = &layer.weights[o * layer.in_dim..(o + 1) * layer.in_dim];
                        for (b, w) in back.iter_mut().zip(row) {
                            *b += d * w;
                        }
                    }
                    for (b, z) in back.iter_mut().zip(&acts[li - 1]) {
                        if *z <= 0.0 {
                            *b = 0.0;
                        }
                    }
                    delta = back;
                }
            }
        }
        for g in &mut grads {
            g.weights.iter_mut().for_each(|v| *v /= n);
            g.bias.iter_mut().for_each(|v| *v /= n);
        }
        Ok((total / n, grads))
    }
}

fn log_sum_exp(z: &[f64]) -> f64 {
    let max = z.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    max + z.iter().map(|v| (v - max).exp()).sum::<f64>().ln()
}

pub fn argmax(p: &[f64]) -> usize {
    let mut best = 0;
    for (i, v) in p.iter().enumerate() {
        if *v > p[best] {
            best = i;
        }
    }
    best
}

/// Flattens gradients in the same order as [`Model::params`].
pub fn flatten(grads: &Gradients) -> Vec<f64> {
    let mut out = Vec::new();
    for g in grads {
        out.extend_from_slice(&g.weights);
        out.extend_from_slice(&g.bias);
    }
    out
}

/// Row-major samples with class-index labels.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Dataset {
    pub dim: usize,
    pub inputs: Vec<f64>,
    pub labels: Vec<usize>,
}

impl Dataset {
    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.inputs[i * self.dim..(i + 1) * self.dim]
    }

    pub fn batch(&self) -> Batch<'_> {
        Batch { inputs: &self.inputs, labels: &self.labels }
    }

    /// Splits off the last `fraction` of samples (chronological validation).
    pub fn split_tail(&self, fraction: f64) -> (Dataset, Dataset) {
        let n_val = ((self.len() as f64) * fraction).round() as usize;
        let cut = self.len() - n_val.min(self.len());
        let head = Dataset {
            dim: self.dim,
            inputs: self.inputs[..cut * self.dim].to_vec(),
            labels: self.labels[..cut].to_vec(),
        };
        let tail = Dataset {
            dim: self.dim,
            inputs: self.inputs[cut * self.dim..].to_vec(),
            labels: self.labels[cut..].to_vec(),
        };
        (head, tail)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Straightforward reference forward pass written without the model's
    /// helpers: nested loops over explicit weight indices.
    fn reference_forward(model: &Model, x: &[f64]) -> Vec<f64> {
        let mut a = x.to_vec();
        let last = model.layers.len() - 1;
        for (li, l) in model.layers.iter().enumerate() {
            let mut z = Vec::with_capacity(l.out_dim);
            for o in 0..l.out_dim {
                let mut s = l.bias[o];
                for (w, x) in l.weights[o * l.in_dim..(o + 1) * l.in_dim].iter().zip(&a) {
                    s += w * x;
                }
                z.push(if li < last && s < 0.0 { 0.0 } else { s });
            }
            a = z;
        }
        let exps: Vec<f64> = a.iter().map(|v| v.exp()).collect();
        let total: f64 = exps.iter().sum();
        exps.iter().map(|e| e / total).collect()
    }

    fn random_inputs(seed: u64, n: usize) -> Vec<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n).map(|_| rng.random_range(-1.0..1.0)).collect()
    }

    #[test]
    fn zero_model_is_uniform() {
        for spec in [ModelSpec::linear(7, 0), ModelSpec::mlp(7, 0)] {
            let m = Model::zeros(spec).unwrap();
            let p = m.forward(&random_inputs(1, 7)).unwrap();
            for v in p {
                assert!((v - 1.0 / 3.0).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn crafted_linear_argmax() {
        let mut m = Model::zeros(ModelSpec::linear(2, 0)).unwrap();
        m.layers[0].weights = vec![0.0, 0.0, 5.0, 0.0, 0.0, 0.0];
        assert_eq!(m.predict_one(&[1.0, 0.0]).unwrap(), 1);
        assert_eq!(m.forward(&[1.0]), Err(LearnError::DimMismatch { expected: 2, got: 1 }));
    }

    #[test]
    fn forward_matches_reference() {
        for seed in 0..10 {
            for spec in [ModelSpec::linear(12, seed), ModelSpec::mlp(12, seed)] {
                let m = Model::new(spec).unwrap();
                let x = random_inputs(100 + seed, 12);
                let got = m.forward(&x).unwrap();
                let want = reference_forward(&m, &x);
                assert!((got.iter().sum::<f64>() - 1.0).abs() < 1e-9);
                for (g, w) in got.iter().zip(&want) {
                    assert!((g - w).abs() < 1e-12, "{g} vs {w}");
                }
            }
        }
    }

    #[test]
    fn params_round_trip() {
        let m = Model::new(ModelSpec::mlp(5, 3)).unwrap();
        let mut z = Model::zeros(ModelSpec::mlp(5, 3)).unwrap();
        z.set_params(&m.params()).unwrap();
        assert_eq!(z, m);
        assert_eq!(m.num_params(), 5 * 100 + 100 + 100 * 50 + 50 + 50 * 3 + 3);
        assert!(z.set_params(&[1.0]).is_err());
    }

    #[test]
    fn duplicated_batch_same_gradient() {
        let m = Model::new(ModelSpec::mlp(4, 9)).unwrap();
        let x = random_inputs(5, 12);
        let y = [0, 2, 1];
        let (l1, g1) = m.grad(&Batch { inputs: &x, labels: &y }).unwrap();
        let x2 = [x.clone(), x.clone()].concat();
        let y2 = [y, y].concat();
        let (l2, g2) = m.grad(&Batch { inputs: &x2, labels: &y2 }).unwrap();
        assert!((l1 - l2).abs() < 1e-14);
        for (a, b) in flatten(&g1).iter().zip(flatten(&g2)) {
            assert!((a - b).abs() < 1e-14);
        }
    }

    #[test]
    fn saturated_separated_fixture_has_vanishing_gradient() {
        let mut m = Model::zeros(ModelSpec::linear(3, 0)).unwrap();
        // class c fires on feature c with a very large margin
        m.layers[0].weights = vec![50.0, 0.0, 0.0, 0.0, 50.0, 0.0, 0.0, 0.0, 50.0];
        let x = [1.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 1.0];
        let (loss, g) = m.grad(&Batch { inputs: &x, labels: &[0, 1, 2] }).unwrap();
        let norm = flatten(&g).iter().map(|v| v * v).sum::<f64>().sqrt();
        assert!(loss < 1e-6);
        assert!(norm < 1e-6, "{norm}");
    }

    #[test]
    fn batch_errors() {
        let m = Model::zeros(ModelSpec::linear(2, 0)).unwrap();
        assert_eq!(m.grad(&Batch { inputs: &[], labels: &[] }).unwrap_err(), LearnError::EmptyBatch);
        assert!(matches!(m.grad(&Batch { inputs: &[1.0], labels: &[0] }), Err(LearnError::DimMismatch { .. })));
        assert_eq!(m.loss(&Batch { inputs: &[1.0, 1.0], labels: &[3] }).unwrap_err(), LearnError::BadLabel(3));
    }

    #[test]
    fn small_step_does_not_increase_loss() {
        for spec in [ModelSpec::linear(6, 4), ModelSpec::mlp(6, 4)] {
            let mut m = Model::new(spec).unwrap();
            let x = random_inputs(8, 6 * 20);
            let y: Vec<usize> = (0..20).map(|i| i % 3).collect();
            let batch = Batch { inputs: &x, labels: &y };
            let (before, g) = m.grad(&batch).unwrap();
            let p: Vec<f64> = m.params().iter().zip(flatten(&g)).map(|(p, g)| p - 1e-4 * g).collect();
            m.set_params(&p).unwrap();
            assert!(m.loss(&batch).unwrap() <= before);
        }
    }
}
