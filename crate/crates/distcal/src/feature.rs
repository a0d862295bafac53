//! Labeled embedding vectors, the unit of data everywhere in this crate.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Non-negative class identifier.
pub type ClassId = u32;

/// A d-dimensional real embedding, optionally labeled with a class id and a
/// positivity score in [0, 1] (a stand-in for detector IOU overlap).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureVector {
    pub values: Vec<f64>,
    pub class_id: Option<ClassId>,
    pub positivity: Option<f64>,
}

impl FeatureVector {
    /// Builds an unlabeled feature, rejecting NaN/Inf coordinates.
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("feature values"));
        }
        Ok(Self {
            values,
            class_id: None,
            positivity: None,
        })
    }

    pub fn with_class(mut self, class_id: ClassId) -> Self {
        self.class_id = Some(class_id);
        self
    }

    /// Attaches a positivity score, rejecting values outside [0, 1].
    pub fn with_positivity(mut self, positivity: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&positivity) {
            return Err(Error::OutOfRange {
                name: "positivity",
                value: positivity,
                expected: "[0, 1]",
            });
        }
        self.positivity = Some(positivity);
        Ok(self)
    }

    /// Trusted constructor for values produced by this crate's own samplers.
    pub(crate) fn from_sampled(values: Vec<f64>, class_id: Option<ClassId>) -> Self {
        Self {
            values,
            class_id,
            positivity: None,
        }
    }

    pub fn dim(&self) -> usize {
        self.values.len()
    }

    /// Rescales to unit Euclidean norm; zero vectors are left unchanged.
    pub fn l2_normalized(&self) -> Self {
        let norm = crate::linalg::norm2(&self.values);
        if norm == 0.0 {
            return self.clone();
        }
        Self {
            values: crate::linalg::scale(&self.values, 1.0 / norm),
            class_id: self.class_id,
            positivity: self.positivity,
        }
    }
}
