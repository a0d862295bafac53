//! Shift compensation: exponential-moving-average correction of base-class
//! means as they drift during fine-tuning.
//!
//! Each incoming positive feature x of base class c moves that class's mean:
//!
//! ```text
//! μ_c ← θ·μ_c + (1−θ)·x
//! ```
//!
//! θ close to 1 means a tiny correction per feature; θ = 1 is the identity
//! and disables compensation. Only the mean moves; the covariance and count
//! are untouched unless the experimental covariance EMA is switched on.

use serde::{Deserialize, Serialize};

use crate::distributions::{ClassStats, DistributionStore};
use crate::error::{Error, Result};
use crate::feature::FeatureVector;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CompensationConfig {
    /// Retention factor θ in [0, 1].
    pub theta: f64,
    /// Also EMA-update the covariance with the centered outer product.
    /// Experimental; off by default.
    #[serde(default)]
    pub ema_covariance: bool,
}

impl Default for CompensationConfig {
    fn default() -> Self {
        Self {
            theta: 0.9999,
            ema_covariance: false,
        }
    }
}

impl CompensationConfig {
    pub fn validate(&self) -> Result<()> {
        check_theta(self.theta)
    }
}

fn check_theta(theta: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&theta) {
        return Err(Error::OutOfRange {
            name: "theta",
            value: theta,
            expected: "[0, 1]",
        });
    }
    Ok(())
}

/// One EMA step on a class mean. Covariance and count are unchanged.
pub fn ema_update(stats: &ClassStats, x: &FeatureVector, theta: f64) -> Result<ClassStats> {
    check_theta(theta)?;
    if x.dim() != stats.dim() {
        return Err(Error::DimensionMismatch {
            expected: stats.dim(),
            got: x.dim(),
        });
    }
    if let Some(label) = x.class_id {
        if label != stats.class_id {
            return Err(Error::ClassMismatch {
                expected: stats.class_id,
                got: label,
            });
        }
    }
    // θ = 1 is the identity; return the input bit-for-bit.
    if theta == 1.0 {
        return Ok(stats.clone());
    }
    let mean = stats
        .mean
        .iter()
        .zip(&x.values)
        .map(|(m, v)| theta * m + (1.0 - theta) * v)
        .collect();
    Ok(ClassStats {
        class_id: stats.class_id,
        count: stats.count,
        mean,
        covariance: stats.covariance.clone(),
    })
}

/// EMA step honoring the experimental covariance flag.
pub fn ema_update_with(
    stats: &ClassStats,
    x: &FeatureVector,
    cfg: &CompensationConfig,
) -> Result<ClassStats> {
    let mut next = ema_update(stats, x, cfg.theta)?;
    if cfg.ema_covariance && cfg.theta != 1.0 {
        let centered = crate::linalg::sub(&x.values, &next.mean);
        let mut outer = crate::linalg::Matrix::zeros(stats.dim(), stats.dim());
        outer.add_outer(&centered, 1.0);
        next.covariance = next
            .covariance
            .scale(cfg.theta)
            .add(&outer.scale(1.0 - cfg.theta))
            .symmetrized();
    }
    Ok(next)
}

/// Applies `ema_update` for every batch feature, in batch order, to the
/// matching base class. Novel entries are untouched; a feature labeled with
/// a novel or unknown class is an error. Returns a new store.
///
/// Equivalent to folding `ema_update`, but updates means in place so long
/// compensation streams stay cheap.
pub fn compensate_batch(
    store: &DistributionStore,
    batch: &[FeatureVector],
    theta: f64,
) -> Result<DistributionStore> {
    check_theta(theta)?;
    let mut current = store.clone();
    for (index, feature) in batch.iter().enumerate() {
        let id = feature.class_id.ok_or(Error::InvalidParameter {
            name: "batch",
            reason: format!("feature at index {index} has no class label"),
        })?;
        let stats = current.base_stats_mut(id).ok_or(Error::NotABaseClass(id))?;
        if feature.dim() != stats.dim() {
            return Err(Error::DimensionMismatch {
                expected: stats.dim(),
                got: feature.dim(),
            });
        }
        if theta == 1.0 {
            continue;
        }
        for (m, v) in stats.mean.iter_mut().zip(&feature.values) {
            *m = theta * *m + (1.0 - theta) * v;
        }
    }
    Ok(current)
}
