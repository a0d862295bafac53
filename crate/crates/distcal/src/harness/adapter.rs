//! Linear feature adapter trained jointly with the logistic head.
//!
//! The adapter A (initialized to the identity) maps the learner's corrupted
//! features; the regularization term pulls adapted features toward frozen
//! teacher features. Per epoch the gradient of
//!
//! ```text
//! CE(logits(A·x), y) + (wd/2)·‖W‖² + λ·reg_loss(A·x, teacher)
//! ```
//!
//! flows through both the head (W, b) and the adapter. With λ = 0 the
//! regularization gradient is skipped entirely, so the run is bit-for-bit
//! the plain adapter baseline.

use crate::error::Result;
use crate::feature::{ClassId, FeatureVector};
use crate::linalg::{self, Matrix};
use crate::regularization::{self, LossBreakdown, RegPair};

use super::classifier::{softmax, Classifier, LogisticClassifier, TrainConfig};

#[derive(Debug, Clone, PartialEq)]
pub struct AdapterModel {
    pub adapter: Matrix,
    pub classifier: LogisticClassifier,
    /// Joint loss at the end of training.
    pub training_loss: LossBreakdown,
}

impl AdapterModel {
    pub fn adapt(&self, x: &[f64]) -> Vec<f64> {
        self.adapter.matvec(x)
    }
}

impl Classifier for AdapterModel {
    fn predict(&self, x: &[f64]) -> ClassId {
        self.classifier.predict(&self.adapt(x))
    }
}

fn reg_pairs(adapted: &[Vec<f64>], teacher: &[&[f64]]) -> Result<Vec<RegPair>> {
    adapted
        .iter()
        .zip(teacher)
        .map(|(z, t)| {
            RegPair::new(
                FeatureVector::new(z.clone())?,
                FeatureVector::new(t.to_vec())?,
            )
        })
        .collect()
}

/// Joint full-batch training of adapter and head.
///
/// `init_head` continues from an already-trained head (the staged
/// calibrate-then-regularize schedule); otherwise the head starts at zero.
pub fn train_with_adapter(
    learner: &[&[f64]],
    teacher: &[&[f64]],
    labels: &[ClassId],
    classes: &[ClassId],
    cfg: &TrainConfig,
    lambda: f64,
    init_head: Option<LogisticClassifier>,
) -> Result<AdapterModel> {
    assert_eq!(learner.len(), teacher.len());
    let label_indices: Vec<usize> = labels
        .iter()
        .map(|label| {
            classes
                .binary_search(label)
                .map_err(|_| crate::error::Error::UnknownClass(*label))
        })
        .collect::<Result<_>>()?;
    for (class_index, class) in classes.iter().enumerate() {
        if !label_indices.contains(&class_index) {
            return Err(crate::error::Error::EmptyClass(*class));
        }
    }

    let dim = learner[0].len();
    let num_classes = classes.len();
    let n = learner.len() as f64;
    let mut adapter = Matrix::identity(dim);
    let (mut weights, mut bias) = match init_head {
        Some(head) => (head.weights, head.bias),
        None => (Matrix::zeros(num_classes, dim), vec![0.0; num_classes]),
    };

    for _ in 0..cfg.epochs {
        let adapted: Vec<Vec<f64>> = learner.iter().map(|x| adapter.matvec(x)).collect();

        let mut grad_w = weights.scale(cfg.weight_decay);
        let mut grad_b = vec![0.0; num_classes];
        let mut grad_z: Vec<Vec<f64>> = Vec::with_capacity(adapted.len());
        for (z, &label) in adapted.iter().zip(&label_indices) {
            let logits = linalg::add(&weights.matvec(z), &bias);
            let mut p = softmax(&logits);
            p[label] -= 1.0;
            for c in 0..num_classes {
                let coeff = p[c] / n;
                grad_b[c] += coeff;
                for j in 0..dim {
                    grad_w[(c, j)] += coeff * z[j];
                }
            }
            grad_z.push(weights.matvec_transposed(&linalg::scale(&p, 1.0 / n)));
        }

        if lambda != 0.0 {
            let pairs = reg_pairs(&adapted, teacher)?;
            let reg_grad = regularization::reg_loss_grad(&pairs)?;
            for (gz, rg) in grad_z.iter_mut().zip(&reg_grad) {
                linalg::axpy(gz, rg, lambda);
            }
        }

        let mut grad_a = Matrix::zeros(dim, dim);
        for (gz, x) in grad_z.iter().zip(learner) {
            for i in 0..dim {
                let gi = gz[i];
                for (j, xj) in x.iter().enumerate() {
                    grad_a[(i, j)] += gi * xj;
                }
            }
        }

        weights = weights.add(&grad_w.scale(-cfg.learning_rate));
        linalg::axpy(&mut bias, &grad_b, -cfg.learning_rate);
        adapter = adapter.add(&grad_a.scale(-cfg.learning_rate));
    }

    let classifier = LogisticClassifier {
        classes: classes.to_vec(),
        weights,
        bias,
    };
    let adapted: Vec<Vec<f64>> = learner.iter().map(|x| adapter.matvec(x)).collect();
    let adapted_refs: Vec<&[f64]> = adapted.iter().map(Vec::as_slice).collect();
    let task = super::classifier::logistic_objective(
        &classifier.weights,
        &classifier.bias,
        &adapted_refs,
        &label_indices,
        cfg.weight_decay,
    );
    let reg = regularization::reg_loss(&reg_pairs(&adapted, teacher)?)?;
    let training_loss = regularization::joint_loss(task, reg, lambda)?;

    Ok(AdapterModel {
        adapter,
        classifier,
        training_loss,
    })
}
