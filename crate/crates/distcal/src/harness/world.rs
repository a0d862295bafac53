//! Synthetic generative worlds for episode evaluation.
//!
//! A world holds ground-truth Gaussians for a set of base classes and a set
//! of novel classes. Novel classes are built as convex mixtures of a few
//! base classes, so the premise behind calibration — statistics are shared
//! between nearby classes — holds by construction. An adversarial switch
//! places novel means far from every base mean instead, to demonstrate the
//! failure mode.
//!
//! Base classes also carry a drift vector: the class means moved between
//! "base training time" (when the distribution store is estimated) and
//! "fine-tuning time" (when episodes are sampled). Shift compensation
//! exists to claw this gap back.

use std::collections::BTreeMap;

use rand::seq::index;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::feature::ClassId;
use crate::linalg::{self, Matrix};
use crate::rng::{self, tags};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WorldConfig {
    pub dim: usize,
    pub num_base: usize,
    pub num_novel: usize,
    /// Scale of the isotropic Gaussian the base means are drawn from.
    pub mean_scale: f64,
    /// How many base classes are mixed into each novel class.
    pub novel_mix_count: usize,
    /// Perturbation of novel means, and the corruption level of learner
    /// features in regularized training.
    pub noise_scale: f64,
    /// Overall scale of the random SPD class covariances.
    pub cov_scale: f64,
    /// Distance base means moved between store estimation and episode time.
    pub drift_scale: f64,
    /// Place novel means far from all base means instead of inside their hull.
    pub adversarial: bool,
    pub seed: u64,
}

impl Default for WorldConfig {
    fn default() -> Self {
        Self {
            dim: 16,
            num_base: 15,
            num_novel: 5,
            mean_scale: 1.0,
            novel_mix_count: 3,
            noise_scale: 0.25,
            cov_scale: 0.5,
            drift_scale: 2.0,
            adversarial: false,
            seed: 0,
        }
    }
}

impl WorldConfig {
    pub fn validate(&self) -> Result<()> {
        if self.dim == 0 || self.num_base == 0 || self.num_novel == 0 {
            return Err(Error::InvalidParameter {
                name: "world",
                reason: "dim, num_base and num_novel must be positive".into(),
            });
        }
        if self.novel_mix_count == 0 || self.novel_mix_count > self.num_base {
            return Err(Error::InvalidParameter {
                name: "novel_mix_count",
                reason: format!(
                    "must be in 1..={}, got {}",
                    self.num_base, self.novel_mix_count
                ),
            });
        }
        for (name, value, positive) in [
            ("mean_scale", self.mean_scale, true),
            ("cov_scale", self.cov_scale, true),
            ("noise_scale", self.noise_scale, false),
            ("drift_scale", self.drift_scale, false),
        ] {
            if !value.is_finite() || value < 0.0 || (positive && value == 0.0) {
                return Err(Error::OutOfRange {
                    name,
                    value,
                    expected: if positive { "positive" } else { "non-negative" },
                });
            }
        }
        Ok(())
    }
}

/// Ground-truth mean and covariance of one class.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Gaussian {
    pub mean: Vec<f64>,
    pub covariance: Matrix,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct World {
    pub config: WorldConfig,
    /// Fine-tuning-time truth for base classes.
    pub true_base: BTreeMap<ClassId, Gaussian>,
    pub true_novel: BTreeMap<ClassId, Gaussian>,
    /// Which base classes each novel class was mixed from.
    pub provenance: BTreeMap<ClassId, Vec<ClassId>>,
    /// Per-base-class mean motion since base training.
    pub base_drift: BTreeMap<ClassId, Vec<f64>>,
}

impl World {
    pub fn dim(&self) -> usize {
        self.config.dim
    }

    pub fn base_ids(&self) -> Vec<ClassId> {
        self.true_base.keys().copied().collect()
    }

    pub fn novel_ids(&self) -> Vec<ClassId> {
        self.true_novel.keys().copied().collect()
    }

    pub fn all_ids(&self) -> Vec<ClassId> {
        self.base_ids()
            .into_iter()
            .chain(self.novel_ids())
            .collect()
    }

    /// The base-training-time Gaussian: the current mean minus the drift.
    pub fn pre_drift_base(&self, id: ClassId) -> Option<Gaussian> {
        let current = self.true_base.get(&id)?;
        let drift = self.base_drift.get(&id)?;
        Some(Gaussian {
            mean: linalg::sub(&current.mean, drift),
            covariance: current.covariance.clone(),
        })
    }
}

fn random_spd(rng: &mut impl Rng, dim: usize, scale: f64) -> Matrix {
    // A·Aᵀ/d + 0.1·I, scaled: eigenvalues bounded away from zero.
    let mut gram = Matrix::zeros(dim, dim);
    for _ in 0..dim {
        let row = rng::standard_normal_vec(rng, dim);
        gram.add_outer(&row, 1.0 / dim as f64);
    }
    gram.add_diagonal(0.1).scale(scale).symmetrized()
}

/// Deterministically builds a world from its config.
pub fn generate_world(cfg: &WorldConfig) -> Result<World> {
    cfg.validate()?;
    let mut rng = rng::rng_from(rng::mix(cfg.seed, tags::WORLD));
    let dim = cfg.dim;

    let mut true_base = BTreeMap::new();
    let mut base_drift = BTreeMap::new();
    for id in 0..cfg.num_base as ClassId {
        let mean = linalg::scale(&rng::standard_normal_vec(&mut rng, dim), cfg.mean_scale);
        let covariance = random_spd(&mut rng, dim, cfg.cov_scale);
        let drift = linalg::scale(
            &rng::standard_normal_vec(&mut rng, dim),
            cfg.drift_scale / (dim as f64).sqrt(),
        );
        true_base.insert(id, Gaussian { mean, covariance });
        base_drift.insert(id, drift);
    }

    let base_ids: Vec<ClassId> = true_base.keys().copied().collect();
    let mut true_novel = BTreeMap::new();
    let mut provenance = BTreeMap::new();
    for offset in 0..cfg.num_novel {
        let id = (cfg.num_base + offset) as ClassId;
        if cfg.adversarial {
            // Far outside the base mean cluster, with its own covariance.
            let direction = rng::standard_normal_vec(&mut rng, dim);
            let norm = linalg::norm2(&direction).max(1e-12);
            let radius = (3.0 * cfg.mean_scale * (dim as f64).sqrt()).max(1.0);
            let mean = linalg::scale(&direction, radius / norm);
            let covariance = random_spd(&mut rng, dim, cfg.cov_scale);
            true_novel.insert(id, Gaussian { mean, covariance });
            provenance.insert(id, Vec::new());
            continue;
        }

        let picked = index::sample(&mut rng, cfg.num_base, cfg.novel_mix_count);
        let sources: Vec<ClassId> = picked.iter().map(|i| base_ids[i]).collect();
        let raw: Vec<f64> = (0..cfg.novel_mix_count)
            .map(|_| rng.random::<f64>().max(1e-9))
            .collect();
        let total: f64 = raw.iter().sum();

        let mut mean = vec![0.0; dim];
        let mut covariance = Matrix::zeros(dim, dim);
        for (source, weight) in sources.iter().zip(&raw) {
            let gaussian = &true_base[source];
            linalg::axpy(&mut mean, &gaussian.mean, weight / total);
            covariance = covariance.add(&gaussian.covariance);
        }
        covariance = covariance.scale(1.0 / cfg.novel_mix_count as f64);
        if cfg.noise_scale > 0.0 {
            let noise = rng::standard_normal_vec(&mut rng, dim);
            linalg::axpy(&mut mean, &noise, cfg.noise_scale);
        }
        true_novel.insert(id, Gaussian { mean, covariance });
        provenance.insert(id, sources);
    }

    Ok(World {
        config: *cfg,
        true_base,
        true_novel,
        provenance,
        base_drift,
    })
}
