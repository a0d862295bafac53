//! Per-class Gaussian statistics and the base/novel distribution store.
//!
//! Each class c is modeled as a multivariate Gaussian (μ_c, σ_c) estimated
//! from its labeled features: μ_c is the arithmetic mean and σ_c the
//! unbiased sample covariance (divisor N_c − 1), computed in two passes and
//! symmetrized on write. A single-sample class gets the zero covariance by
//! convention; calibration later supplies dispersion from base classes.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::feature::{ClassId, FeatureVector};
use crate::linalg::{self, Matrix};

/// Sufficient statistics of one class: sample count, mean, covariance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassStats {
    pub class_id: ClassId,
    pub count: usize,
    pub mean: Vec<f64>,
    pub covariance: Matrix,
}

impl ClassStats {
    pub fn dim(&self) -> usize {
        self.mean.len()
    }
}

/// Dimension plus two disjoint maps class-id → stats (base and novel sets).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DistributionStore {
    dim: usize,
    base: BTreeMap<ClassId, ClassStats>,
    novel: BTreeMap<ClassId, ClassStats>,
}

impl DistributionStore {
    /// Assembles a store, enforcing disjoint key sets and consistent shapes.
    pub fn from_parts(
        dim: usize,
        base: BTreeMap<ClassId, ClassStats>,
        novel: BTreeMap<ClassId, ClassStats>,
    ) -> Result<Self> {
        for id in base.keys() {
            if novel.contains_key(id) {
                return Err(Error::OverlappingClassSets(*id));
            }
        }
        for stats in base.values().chain(novel.values()) {
            if stats.mean.len() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    got: stats.mean.len(),
                });
            }
            if stats.covariance.rows() != dim || stats.covariance.cols() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    got: stats.covariance.rows(),
                });
            }
        }
        Ok(Self { dim, base, novel })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn base(&self) -> &BTreeMap<ClassId, ClassStats> {
        &self.base
    }

    pub fn novel(&self) -> &BTreeMap<ClassId, ClassStats> {
        &self.novel
    }

    pub fn base_stats(&self, id: ClassId) -> Option<&ClassStats> {
        self.base.get(&id)
    }

    pub fn is_base(&self, id: ClassId) -> bool {
        self.base.contains_key(&id)
    }

    /// Returns a copy with one base entry replaced.
    #[cfg(test)]
    pub(crate) fn with_base_entry(&self, stats: ClassStats) -> Self {
        let mut next = self.clone();
        next.base.insert(stats.class_id, stats);
        next
    }

    pub(crate) fn base_stats_mut(&mut self, id: ClassId) -> Option<&mut ClassStats> {
        self.base.get_mut(&id)
    }
}

/// Keeps the features whose positivity score meets the threshold, in order.
pub fn filter_positive(features: &[FeatureVector], threshold: f64) -> Result<Vec<FeatureVector>> {
    if !(0.0..=1.0).contains(&threshold) {
        return Err(Error::OutOfRange {
            name: "threshold",
            value: threshold,
            expected: "[0, 1]",
        });
    }
    let mut kept = Vec::new();
    for (index, feature) in features.iter().enumerate() {
        let positivity = feature.positivity.ok_or(Error::MissingPositivity(index))?;
        if positivity >= threshold {
            kept.push(feature.clone());
        }
    }
    Ok(kept)
}

/// Mean and unbiased covariance of a non-empty sample set.
///
/// Two passes: the mean first, then centered outer products divided by
/// N − 1. One sample yields the zero covariance.
pub fn compute_class_stats(samples: &[FeatureVector], class_id: ClassId) -> Result<ClassStats> {
    let first = samples.first().ok_or(Error::EmptyInput("samples"))?;
    let dim = first.dim();
    for sample in samples {
        if sample.dim() != dim {
            return Err(Error::DimensionMismatch {
                expected: dim,
                got: sample.dim(),
            });
        }
    }
    let count = samples.len();

    let mut mean = vec![0.0; dim];
    for sample in samples {
        linalg::axpy(&mut mean, &sample.values, 1.0);
    }
    for v in &mut mean {
        *v /= count as f64;
    }

    let mut covariance = Matrix::zeros(dim, dim);
    if count > 1 {
        for sample in samples {
            let centered = linalg::sub(&sample.values, &mean);
            covariance.add_outer(&centered, 1.0);
        }
        covariance = covariance.scale(1.0 / (count - 1) as f64).symmetrized();
    }

    Ok(ClassStats {
        class_id,
        count,
        mean,
        covariance,
    })
}

/// Groups labeled features by class and builds the base/novel store.
///
/// Base classes need at least two samples each; novel classes may be absent
/// entirely (the state of a store right after base training).
pub fn build_store(
    features: &[FeatureVector],
    base_ids: &BTreeSet<ClassId>,
    novel_ids: &BTreeSet<ClassId>,
) -> Result<DistributionStore> {
    if let Some(id) = base_ids.intersection(novel_ids).next() {
        return Err(Error::OverlappingClassSets(*id));
    }
    let first = features.first().ok_or(Error::EmptyInput("features"))?;
    let dim = first.dim();

    let mut grouped: BTreeMap<ClassId, Vec<FeatureVector>> = BTreeMap::new();
    for (index, feature) in features.iter().enumerate() {
        let id = feature.class_id.ok_or(Error::InvalidParameter {
            name: "features",
            reason: format!("feature at index {index} has no class label"),
        })?;
        if !base_ids.contains(&id) && !novel_ids.contains(&id) {
            return Err(Error::UnknownClass(id));
        }
        grouped.entry(id).or_default().push(feature.clone());
    }

    let mut base = BTreeMap::new();
    let mut novel = BTreeMap::new();
    for (id, samples) in &grouped {
        let stats = compute_class_stats(samples, *id)?;
        if base_ids.contains(id) {
            base.insert(*id, stats);
        } else {
            novel.insert(*id, stats);
        }
    }
    for id in base_ids {
        let got = base.get(id).map_or(0, |s| s.count);
        if got < 2 {
            return Err(Error::TooFewSamples { class: *id, got });
        }
    }

    DistributionStore::from_parts(dim, base, novel)
}
