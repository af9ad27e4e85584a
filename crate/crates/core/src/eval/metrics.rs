use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::label::Class;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MetricsError {
    #[error("no samples to score")]
    EmptyInput,
    #[error("{preds} predictions for {labels} labels")]
    LengthMismatch { preds: usize, labels: usize },
}

/// Rows are true classes, columns predicted classes.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    pub classes: usize,
    pub counts: Vec<u64>,
}

impl ConfusionMatrix {
    pub fn new(classes: usize) -> Self {
        Self { classes, counts: vec![0; classes * classes] }
    }

    pub fn from_indices(truth: &[usize], pred: &[usize], classes: usize) -> Self {
        let mut cm = Self::new(classes);
        for (&t, &p) in truth.iter().zip(pred) {
            cm.counts[t * classes + p] += 1;
        }
        cm
    }

    pub fn get(&self, truth: usize, pred: usize) -> u64 {
        self.counts[truth * self.classes + pred]
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }

    pub fn trace(&self) -> u64 {
        (0..self.classes).map(|c| self.get(c, c)).sum()
    }

    pub fn support(&self, class: usize) -> u64 {
        (0..self.classes).map(|p| self.get(class, p)).sum()
    }

    pub fn predicted(&self, class: usize) -> u64 {
        (0..self.classes).map(|t| self.get(t, class)).sum()
    }

    pub fn rows(&self) -> Vec<Vec<u64>> {
        self.counts.chunks(self.classes).map(<[u64]>::to_vec).collect()
    }

    pub fn to_csv(&self) -> String {
        let names: Vec<&str> = (0..self.classes).map(class_name).collect();
        let mut out = format!("true\\pred,{}\n", names.join(","));
        for (t, row) in self.rows().iter().enumerate() {
            let cells: Vec<String> = row.iter().map(u64::to_string).collect();
            out.push_str(&format!("{},{}\n", names[t], cells.join(",")));
        }
        out
    }
}

fn class_name(i: usize) -> &'static str {
    if i < Class::ALL.len() {
        Class::from_index(i).name()
    } else {
        "?"
    }
}

/// Percentages; precision, recall and F are unweighted class means.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub accuracy: f64,
    pub precision: f64,
    pub recall: f64,
    pub f_score: f64,
    pub confusion: ConfusionMatrix,
}

fn ratio(num: u64, den: u64) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

impl Metrics {
    pub fn from_confusion(confusion: ConfusionMatrix) -> Self {
        let k = confusion.classes;
        let (mut p_sum, mut r_sum, mut f_sum) = (0.0, 0.0, 0.0);
        for c in 0..k {
            let tp = confusion.get(c, c);
            let p = ratio(tp, confusion.predicted(c));
            let r = ratio(tp, confusion.support(c));
            let f = if p + r == 0.0 { 0.0 } else { 2.0 * p * r / (p + r) };
            p_sum += p;
            r_sum += r;
            f_sum += f;
        }
        let k = k as f64;
        Self {
            accuracy: if confusion.total() == 0 { 0.0 } else { 100.0 * confusion.trace() as f64 / confusion.total() as f64 },
            precision: 100.0 * p_sum / k,
            recall: 100.0 * r_sum / k,
            f_score: 100.0 * f_sum / k,
            confusion,
        }
    }
}

/// Scores class-index predictions; callers guarantee equal, non-zero lengths.
pub fn metrics_from_indices(truth: &[usize], pred: &[usize], classes: usize) -> Metrics {
    Metrics::from_confusion(ConfusionMatrix::from_indices(truth, pred, classes))
}

pub fn metrics(preds: &[Class], labels: &[Class]) -> Result<Metrics, MetricsError> {
    if preds.len() != labels.len() {
        return Err(MetricsError::LengthMismatch { preds: preds.len(), labels: labels.len() });
    }
    if labels.is_empty() {
        return Err(MetricsError::EmptyInput);
    }
    let t: Vec<usize> = labels.iter().map(|c| c.index()).collect();
    let p: Vec<usize> = preds.iter().map(|c| c.index()).collect();
    Ok(metrics_from_indices(&t, &p, Class::ALL.len()))
}
