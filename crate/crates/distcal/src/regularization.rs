//! Distance-based distribution regularization: the mean Euclidean distance
//! between learner features and frozen teacher features,
//!
//! ```text
//! L_reg = (1/N) Σ ‖x_i − x̂_i‖₂
//! ```
//!
//! with its analytic gradient w.r.t. the learner side. The norm is not
//! squared; at a coincident pair the kink is resolved by the zero
//! subgradient. Teachers are constants and receive no gradient.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::feature::FeatureVector;
use crate::linalg;

/// Distance below which a pair counts as coincident.
const KINK_EPS: f64 = 1e-12;

/// One learner/teacher feature pair of equal dimension.
#[derive(Debug, Clone, PartialEq)]
pub struct RegPair {
    pub learner: FeatureVector,
    pub teacher: FeatureVector,
}

impl RegPair {
    pub fn new(learner: FeatureVector, teacher: FeatureVector) -> Result<Self> {
        if learner.dim() != teacher.dim() {
            return Err(Error::DimensionMismatch {
                expected: learner.dim(),
                got: teacher.dim(),
            });
        }
        Ok(Self { learner, teacher })
    }
}

/// Task loss, regularization loss, their weight, and the combined total.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LossBreakdown {
    pub task_loss: f64,
    pub reg_loss: f64,
    pub lambda: f64,
    pub total: f64,
}

fn check_pairs(pairs: &[RegPair]) -> Result<usize> {
    let first = pairs.first().ok_or(Error::EmptyInput("pairs"))?;
    let dim = first.learner.dim();
    for pair in pairs {
        if pair.learner.dim() != dim || pair.teacher.dim() != dim {
            return Err(Error::DimensionMismatch {
                expected: dim,
                got: pair.learner.dim().max(pair.teacher.dim()),
            });
        }
    }
    Ok(dim)
}

/// Mean of per-pair Euclidean norms (not squared norms).
pub fn reg_loss(pairs: &[RegPair]) -> Result<f64> {
    check_pairs(pairs)?;
    let n = pairs.len() as f64;
    Ok(pairs
        .iter()
        .map(|p| linalg::distance(&p.learner.values, &p.teacher.values))
        .sum::<f64>()
        / n)
}

/// Gradient of `reg_loss` w.r.t. each learner: (1/N)·(x − x̂)/‖x − x̂‖, the
/// zero vector at coincident pairs.
pub fn reg_loss_grad(pairs: &[RegPair]) -> Result<Vec<Vec<f64>>> {
    let dim = check_pairs(pairs)?;
    let n = pairs.len() as f64;
    Ok(pairs
        .iter()
        .map(|p| {
            let diff = linalg::sub(&p.learner.values, &p.teacher.values);
            let norm = linalg::norm2(&diff);
            if norm <= KINK_EPS {
                vec![0.0; dim]
            } else {
                linalg::scale(&diff, 1.0 / (n * norm))
            }
        })
        .collect())
}

/// total = task + λ·reg, with all inputs echoed.
pub fn joint_loss(task_loss: f64, reg: f64, lambda: f64) -> Result<LossBreakdown> {
    if task_loss < 0.0 {
        return Err(Error::OutOfRange {
            name: "task_loss",
            value: task_loss,
            expected: "non-negative",
        });
    }
    if reg < 0.0 {
        return Err(Error::OutOfRange {
            name: "reg",
            value: reg,
            expected: "non-negative",
        });
    }
    if lambda < 0.0 {
        return Err(Error::OutOfRange {
            name: "lambda",
            value: lambda,
            expected: "non-negative",
        });
    }
    Ok(LossBreakdown {
        task_loss,
        reg_loss: reg,
        lambda,
        total: task_loss + lambda * reg,
    })
}
