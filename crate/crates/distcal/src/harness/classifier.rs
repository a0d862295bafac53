//! Stand-in prediction heads: multinomial logistic regression trained by
//! full-batch gradient descent (fixed schedule, zero-initialized, fully
//! deterministic) and a closed-form nearest-class-mean control.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::feature::ClassId;
use crate::linalg::{self, Matrix};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ClassifierKind {
    Logistic,
    Ncm,
}

impl std::str::FromStr for ClassifierKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "logistic" => Ok(Self::Logistic),
            "ncm" => Ok(Self::Ncm),
            other => Err(Error::InvalidParameter {
                name: "classifier",
                reason: format!("unknown classifier `{other}`"),
            }),
        }
    }
}

/// Fixed gradient-descent schedule for the logistic head.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub epochs: usize,
    pub learning_rate: f64,
    pub weight_decay: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: 300,
            learning_rate: 0.1,
            weight_decay: 1e-4,
        }
    }
}

pub trait Classifier {
    fn predict(&self, x: &[f64]) -> ClassId;
}

/// Softmax regression over raw features.
#[derive(Debug, Clone, PartialEq)]
pub struct LogisticClassifier {
    pub classes: Vec<ClassId>,
    /// One row of weights per class.
    pub weights: Matrix,
    pub bias: Vec<f64>,
}

impl LogisticClassifier {
    pub fn logits(&self, x: &[f64]) -> Vec<f64> {
        linalg::add(&self.weights.matvec(x), &self.bias)
    }
}

impl Classifier for LogisticClassifier {
    fn predict(&self, x: &[f64]) -> ClassId {
        let logits = self.logits(x);
        // Ties resolve to the lowest class id (strict > keeps the first max).
        let mut best = 0;
        for (i, v) in logits.iter().enumerate() {
            if *v > logits[best] {
                best = i;
            }
        }
        self.classes[best]
    }
}

/// Predicts the class whose training mean is nearest in Euclidean distance.
#[derive(Debug, Clone, PartialEq)]
pub struct NcmClassifier {
    pub classes: Vec<ClassId>,
    pub means: Vec<Vec<f64>>,
}

impl Classifier for NcmClassifier {
    fn predict(&self, x: &[f64]) -> ClassId {
        let mut best = 0;
        let mut best_dist = f64::INFINITY;
        for (i, mean) in self.means.iter().enumerate() {
            let dist = linalg::distance(x, mean);
            if dist < best_dist {
                best_dist = dist;
                best = i;
            }
        }
        self.classes[best]
    }
}

fn class_indices(labels: &[ClassId], classes: &[ClassId]) -> Result<Vec<usize>> {
    labels
        .iter()
        .map(|label| {
            classes
                .binary_search(label)
                .map_err(|_| Error::UnknownClass(*label))
        })
        .collect()
}

fn check_training_inputs(
    xs: &[&[f64]],
    labels: &[ClassId],
    classes: &[ClassId],
) -> Result<Vec<usize>> {
    if xs.is_empty() {
        return Err(Error::EmptyInput("training features"));
    }
    if xs.len() != labels.len() {
        return Err(Error::DimensionMismatch {
            expected: xs.len(),
            got: labels.len(),
        });
    }
    debug_assert!(classes.windows(2).all(|w| w[0] < w[1]), "sorted classes");
    let indices = class_indices(labels, classes)?;
    for (class_index, class) in classes.iter().enumerate() {
        if !indices.contains(&class_index) {
            return Err(Error::EmptyClass(*class));
        }
    }
    Ok(indices)
}

/// Softmax probabilities for one logit row, stably via max subtraction.
pub(crate) fn softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|v| (v - max).exp()).collect();
    let total: f64 = exps.iter().sum();
    exps.into_iter().map(|v| v / total).collect()
}

/// Mean cross-entropy plus (wd/2)·‖W‖²_F. The objective minimized by
/// `train_logistic`, exposed so gradients can be finite-difference checked.
pub fn logistic_objective(
    weights: &Matrix,
    bias: &[f64],
    xs: &[&[f64]],
    label_indices: &[usize],
    weight_decay: f64,
) -> f64 {
    let n = xs.len() as f64;
    let mut loss = 0.0;
    for (x, &label) in xs.iter().zip(label_indices) {
        let logits = linalg::add(&weights.matvec(x), bias);
        let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let log_sum: f64 = logits.iter().map(|v| (v - max).exp()).sum::<f64>().ln() + max;
        loss += log_sum - logits[label];
    }
    loss / n + 0.5 * weight_decay * weights.iter().map(|v| v * v).sum::<f64>()
}

/// Analytic gradient of `logistic_objective` w.r.t. weights and bias.
pub fn logistic_gradient(
    weights: &Matrix,
    bias: &[f64],
    xs: &[&[f64]],
    label_indices: &[usize],
    weight_decay: f64,
) -> (Matrix, Vec<f64>) {
    let (num_classes, dim) = (weights.rows(), weights.cols());
    let n = xs.len() as f64;
    let mut grad_w = weights.scale(weight_decay);
    let mut grad_b = vec![0.0; num_classes];
    for (x, &label) in xs.iter().zip(label_indices) {
        let logits = linalg::add(&weights.matvec(x), bias);
        let mut p = softmax(&logits);
        p[label] -= 1.0;
        for c in 0..num_classes {
            let coeff = p[c] / n;
            grad_b[c] += coeff;
            for j in 0..dim {
                grad_w[(c, j)] += coeff * x[j];
            }
        }
    }
    (grad_w, grad_b)
}

/// Full-batch gradient descent from zero-initialized weights.
pub fn train_logistic(
    xs: &[&[f64]],
    labels: &[ClassId],
    classes: &[ClassId],
    cfg: &TrainConfig,
) -> Result<LogisticClassifier> {
    let label_indices = check_training_inputs(xs, labels, classes)?;
    let dim = xs[0].len();
    let mut weights = Matrix::zeros(classes.len(), dim);
    let mut bias = vec![0.0; classes.len()];
    for _ in 0..cfg.epochs {
        let (grad_w, grad_b) =
            logistic_gradient(&weights, &bias, xs, &label_indices, cfg.weight_decay);
        weights = weights.add(&grad_w.scale(-cfg.learning_rate));
        linalg::axpy(&mut bias, &grad_b, -cfg.learning_rate);
    }
    Ok(LogisticClassifier {
        classes: classes.to_vec(),
        weights,
        bias,
    })
}

/// Closed-form class means.
pub fn train_ncm(xs: &[&[f64]], labels: &[ClassId], classes: &[ClassId]) -> Result<NcmClassifier> {
    let label_indices = check_training_inputs(xs, labels, classes)?;
    let dim = xs[0].len();
    let mut sums: Vec<Vec<f64>> = vec![vec![0.0; dim]; classes.len()];
    let mut counts = vec![0usize; classes.len()];
    for (x, &index) in xs.iter().zip(&label_indices) {
        linalg::axpy(&mut sums[index], x, 1.0);
        counts[index] += 1;
    }
    let means = sums
        .into_iter()
        .zip(&counts)
        .map(|(sum, &count)| linalg::scale(&sum, 1.0 / count as f64))
        .collect();
    Ok(NcmClassifier {
        classes: classes.to_vec(),
        means,
    })
}

/// Trains the selected head over an explicit class universe.
pub fn train_classifier(
    kind: ClassifierKind,
    xs: &[&[f64]],
    labels: &[ClassId],
    classes: &[ClassId],
    cfg: &TrainConfig,
) -> Result<Box<dyn Classifier>> {
    Ok(match kind {
        ClassifierKind::Logistic => Box::new(train_logistic(xs, labels, classes, cfg)?),
        ClassifierKind::Ncm => Box::new(train_ncm(xs, labels, classes)?),
    })
}

/// Accuracy of a classifier over labeled features, tallied per class.
pub fn tally<'a>(
    classifier: &dyn Classifier,
    queries: impl Iterator<Item = (&'a [f64], ClassId)>,
) -> BTreeMap<ClassId, (usize, usize)> {
    let mut per_class: BTreeMap<ClassId, (usize, usize)> = BTreeMap::new();
    for (values, truth) in queries {
        let entry = per_class.entry(truth).or_insert((0, 0));
        entry.1 += 1;
        if classifier.predict(values) == truth {
            entry.0 += 1;
        }
    }
    per_class
}
