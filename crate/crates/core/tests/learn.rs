use lobrep::learn::{flatten, train, Batch, Dataset, Model, ModelSpec, TrainConfig};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn dataset(rng: &mut ChaCha8Rng, n: usize, dim: usize, label: impl Fn(&[f64]) -> usize) -> Dataset {
    let mut inputs = Vec::with_capacity(n * dim);
    let mut labels = Vec::with_capacity(n);
    for _ in 0..n {
        let x: Vec<f64> = (0..dim).map(|_| rng.random_range(-1.0..1.0)).collect();
        labels.push(label(&x));
        inputs.extend(x);
    }
    Dataset { dim, inputs, labels }
}

/// Three bands of the first feature with a 0.05 margin; the second is noise.
fn separable(seed: u64, n: usize) -> Dataset {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut d = Dataset { dim: 2, inputs: Vec::new(), labels: Vec::new() };
    while d.labels.len() < n {
        let (a, b): (f64, f64) = (rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));
        if (a.abs() - 0.2).abs() < 0.05 {
            continue;
        }
        d.labels.push(if a > 0.2 { 0 } else if a < -0.2 { 2 } else { 1 });
        d.inputs.extend([a, b]);
    }
    d
}

fn accuracy(m: &Model, d: &Dataset) -> f64 {
    let pred = m.predict(&d.inputs).unwrap();
    100.0 * pred.iter().zip(&d.labels).filter(|(p, y)| p == y).count() as f64 / d.len() as f64
}

#[test]
fn central_differences_match_backprop_on_mlp_with_reference_loss() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let data = dataset(&mut rng, 7, 4, |x| (x[0] > 0.0) as usize + (x[1] > 0.3) as usize);
    let mut model = Model::new(ModelSpec::mlp(4, 9)).unwrap();
    let batch = data.batch();
    let (_, grads) = model.grad(&batch).unwrap();
    let analytic = flatten(&grads);
    let base = model.params();

    // independent loss: mean negative log softmax, recomputed from forward()
    let reference = |m: &Model, b: &Batch<'_>| -> f64 {
        let dim = m.input_dim();
        b.labels
            .iter()
            .enumerate()
            .map(|(i, &y)| -m.forward(&b.inputs[i * dim..(i + 1) * dim]).unwrap()[y].ln())
            .sum::<f64>()
            / b.labels.len() as f64
    };
    let eps = 1e-5;
    let mut worst: f64 = 0.0;
    for i in (0..base.len()).step_by(37) {
        let mut p = base.clone();
        p[i] += eps;
        model.set_params(&p).unwrap();
        let up = reference(&model, &batch);
        p[i] -= 2.0 * eps;
        model.set_params(&p).unwrap();
        let down = reference(&model, &batch);
        let numeric = (up - down) / (2.0 * eps);
        let rel = (analytic[i] - numeric).abs() / analytic[i].abs().max(numeric.abs()).max(1e-6);
        worst = worst.max(rel);
    }
    assert!(worst < 1e-4, "worst relative error {worst}");
}

#[test]
fn separable_toy_is_learned() {
    let data = separable(1, 600);
    let cfg = TrainConfig { max_epochs: 200, patience: None, learning_rate: 0.05, ..TrainConfig::default() };
    let empty = Dataset { dim: 2, inputs: Vec::new(), labels: Vec::new() };
    let out = train(ModelSpec::linear(2, 0), &data, &empty, &cfg).unwrap();
    assert!(accuracy(&out.model, &data) >= 99.0, "{}", accuracy(&out.model, &data));
    assert!(out.history.len() <= 200);

    let out = train(ModelSpec::mlp(2, 0), &data, &empty, &TrainConfig { learning_rate: 0.01, ..cfg }).unwrap();
    assert!(accuracy(&out.model, &separable(2, 300)) >= 97.0);
}

#[test]
fn shuffled_labels_give_majority_rate() {
    use rand::seq::SliceRandom;
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let mut all = separable(3, 3000);
    all.labels.shuffle(&mut rng);
    let (tr, va) = all.split_tail(0.3);
    let out = train(ModelSpec::linear(2, 1), &tr, &va, &TrainConfig { max_epochs: 10, ..TrainConfig::default() }).unwrap();
    let counts = (0..3).map(|c| va.labels.iter().filter(|&&y| y == c).count()).max().unwrap();
    let majority = 100.0 * counts as f64 / va.len() as f64;
    let acc = accuracy(&out.model, &va);
    assert!((acc - majority).abs() <= 5.0, "accuracy {acc}, majority {majority}");
}

#[test]
fn same_seed_same_bits() {
    let data = separable(5, 300);
    let val = separable(6, 60);
    let cfg = TrainConfig { max_epochs: 5, ..TrainConfig::default() };
    let a = train(ModelSpec::mlp(2, 42), &data, &val, &cfg).unwrap();
    let b = train(ModelSpec::mlp(2, 42), &data, &val, &cfg).unwrap();
    let bits = |m: &Model| m.params().iter().map(|p| p.to_bits()).collect::<Vec<_>>();
    assert_eq!(bits(&a.model), bits(&b.model));
    assert_eq!(a.best_epoch, b.best_epoch);
    let c = train(ModelSpec::mlp(2, 43), &data, &val, &cfg).unwrap();
    assert_ne!(bits(&a.model), bits(&c.model));
}

#[test]
fn missing_class_is_rejected() {
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let d = dataset(&mut rng, 50, 3, |x| (x[0] > 0.0) as usize);
    assert!(train(ModelSpec::linear(3, 0), &d, &d, &TrainConfig::default()).is_err());
}
