//! Distribution calibration: borrowing statistics from the k nearest base
//! classes to build a usable Gaussian for a data-starved novel class, then
//! sampling synthetic features from it.
//!
//! Given a support feature x, the k base classes with the smallest
//! Euclidean distance ‖x − μ_c‖₂ are selected (ties broken by ascending
//! class id). With m̄ and S̄ the means of the selected class means and
//! covariances:
//!
//! ```text
//! literal mode:   μ = x + m̄
//! averaged mode:  μ = (x + Σ μ_c) / (k + 1)
//! both modes:     σ = S̄ + α   (α added to every entry)
//! ```
//!
//! The literal form follows the source formulation verbatim; the averaged
//! form is the convention of the antecedent calibration literature. Both
//! are kept selectable so their effect can be compared instead of silently
//! picking one.
//!
//! Sampling draws x̃ = μ + L·z with L the Cholesky factor of σ + εI, where
//! ε follows the jitter policy: start small, escalate tenfold per failed
//! factorization, hard error past the cap.
//!
//! Note that α = 0 with zero source covariances does not make sampling a
//! no-op: the draws collapse onto the calibrated mean, which in literal
//! mode is displaced from the support feature by the averaged base means.

use serde::{Deserialize, Serialize};

use crate::distributions::DistributionStore;
use crate::error::{Error, Result};
use crate::feature::{ClassId, FeatureVector};
use crate::linalg::{self, Matrix};
use crate::rng;

/// How the calibrated mean combines the support feature with base means.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CalibrationMode {
    /// μ = x + mean of selected base means.
    Literal,
    /// μ = (x + sum of selected base means) / (k + 1).
    Averaged,
}

impl std::fmt::Display for CalibrationMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Self::Literal => write!(f, "literal"),
            Self::Averaged => write!(f, "averaged"),
        }
    }
}

impl std::str::FromStr for CalibrationMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "literal" => Ok(Self::Literal),
            "averaged" => Ok(Self::Averaged),
            other => Err(Error::InvalidParameter {
                name: "mode",
                reason: format!("unknown calibration mode `{other}`"),
            }),
        }
    }
}

/// Diagonal-jitter escalation schedule for Cholesky repair.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct JitterPolicy {
    pub start: f64,
    pub max: f64,
}

impl Default for JitterPolicy {
    fn default() -> Self {
        Self {
            start: 1e-8,
            max: 1e-2,
        }
    }
}

/// Hyperparameters of calibration and synthetic sampling.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CalibrationConfig {
    /// Number of nearest base classes borrowed from.
    pub k: usize,
    /// Dispersion added to every covariance entry.
    pub alpha: f64,
    /// Synthetic features drawn per support feature.
    pub samples_per_support: usize,
    pub mode: CalibrationMode,
    pub jitter_start: f64,
    pub jitter_max: f64,
    pub seed: u64,
}

impl Default for CalibrationConfig {
    fn default() -> Self {
        Self {
            k: 4,
            alpha: 1e-4,
            samples_per_support: 1,
            mode: CalibrationMode::Literal,
            jitter_start: 1e-8,
            jitter_max: 1e-2,
            seed: 0,
        }
    }
}

impl CalibrationConfig {
    /// Default k by shot count: small k for low-shot, larger for high-shot.
    pub fn for_shots(shots: usize) -> Self {
        Self {
            k: if shots < 5 { 4 } else { 15 },
            ..Self::default()
        }
    }

    pub fn jitter(&self) -> JitterPolicy {
        JitterPolicy {
            start: self.jitter_start,
            max: self.jitter_max,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.k == 0 {
            return Err(Error::InvalidParameter {
                name: "k",
                reason: "must be at least 1".into(),
            });
        }
        if self.alpha < 0.0 || !self.alpha.is_finite() {
            return Err(Error::OutOfRange {
                name: "alpha",
                value: self.alpha,
                expected: "non-negative",
            });
        }
        if self.samples_per_support == 0 {
            return Err(Error::InvalidParameter {
                name: "samples_per_support",
                reason: "must be at least 1".into(),
            });
        }
        if !(self.jitter_start > 0.0 && self.jitter_max >= self.jitter_start) {
            return Err(Error::InvalidParameter {
                name: "jitter",
                reason: format!(
                    "need 0 < jitter_start <= jitter_max, got {} and {}",
                    self.jitter_start, self.jitter_max
                ),
            });
        }
        Ok(())
    }
}

/// A Gaussian assembled for one novel support feature.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalibratedDistribution {
    pub mean: Vec<f64>,
    pub covariance: Matrix,
    /// The base classes used, nearest first.
    pub source_classes: Vec<ClassId>,
    /// True when the requested k exceeded the number of base classes.
    pub clamped: bool,
}

impl CalibratedDistribution {
    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    /// CSV block for offline inspection: mean row, then d covariance rows.
    pub fn to_csv_block(&self) -> String {
        let sources: Vec<String> = self.source_classes.iter().map(u32::to_string).collect();
        let mut out = format!("# sources={} clamped={}\n", sources.join(";"), self.clamped);
        out.push_str(&csv_block(&self.mean, &self.covariance));
        out
    }
}

/// Renders a mean row followed by the covariance rows.
pub fn csv_block(mean: &[f64], covariance: &Matrix) -> String {
    let mut out = String::new();
    out.push_str(&join_row(mean));
    out.push('\n');
    for i in 0..covariance.rows() {
        out.push_str(&join_row(covariance.row(i)));
        out.push('\n');
    }
    out
}

fn join_row(values: &[f64]) -> String {
    values
        .iter()
        .map(f64::to_string)
        .collect::<Vec<_>>()
        .join(",")
}

/// The min(k, |C_b|) base classes nearest to x by Euclidean distance on
/// class means, ascending; equal distances break by ascending class id.
pub fn nearest_base_classes(
    x: &FeatureVector,
    store: &DistributionStore,
    k: usize,
) -> Result<Vec<(ClassId, f64)>> {
    if store.base().is_empty() {
        return Err(Error::EmptyInput("base classes"));
    }
    if x.dim() != store.dim() {
        return Err(Error::DimensionMismatch {
            expected: store.dim(),
            got: x.dim(),
        });
    }
    let mut distances: Vec<(ClassId, f64)> = store
        .base()
        .iter()
        .map(|(id, stats)| (*id, linalg::distance(&x.values, &stats.mean)))
        .collect();
    distances.sort_by(|a, b| {
        a.1.partial_cmp(&b.1)
            .expect("finite distances")
            .then(a.0.cmp(&b.0))
    });
    distances.truncate(k.min(distances.len()));
    Ok(distances)
}

/// Builds the calibrated Gaussian for one support feature.
pub fn calibrate_distribution(
    x: &FeatureVector,
    store: &DistributionStore,
    cfg: &CalibrationConfig,
) -> Result<CalibratedDistribution> {
    cfg.validate()?;
    let neighbors = nearest_base_classes(x, store, cfg.k)?;
    let clamped = neighbors.len() < cfg.k;
    let dim = store.dim();
    let count = neighbors.len() as f64;

    let mut mean_sum = vec![0.0; dim];
    let mut cov_sum = Matrix::zeros(dim, dim);
    for (id, _) in &neighbors {
        let stats = store.base_stats(*id).expect("neighbor came from store");
        if !stats.covariance.is_finite() {
            return Err(Error::NonFiniteCovariance(*id));
        }
        linalg::axpy(&mut mean_sum, &stats.mean, 1.0);
        cov_sum = cov_sum.add(&stats.covariance);
    }

    let mean = match cfg.mode {
        CalibrationMode::Literal => linalg::add(&x.values, &linalg::scale(&mean_sum, 1.0 / count)),
        CalibrationMode::Averaged => {
            linalg::scale(&linalg::add(&x.values, &mean_sum), 1.0 / (count + 1.0))
        }
    };
    let covariance = cov_sum
        .scale(1.0 / count)
        .add_scalar(cfg.alpha)
        .symmetrized();

    Ok(CalibratedDistribution {
        mean,
        covariance,
        source_classes: neighbors.into_iter().map(|(id, _)| id).collect(),
        clamped,
    })
}

/// Cholesky of σ + εI under the jitter policy. Returns the factor and the
/// jitter actually used; errors past the cap, reporting the smallest
/// eigenvalue of σ.
pub(crate) fn cholesky_with_jitter(
    covariance: &Matrix,
    policy: &JitterPolicy,
) -> Result<(Matrix, f64)> {
    let mut eps = policy.start;
    loop {
        if let Some(factor) = linalg::cholesky(&covariance.add_diagonal(eps)) {
            return Ok((factor, eps));
        }
        eps *= 10.0;
        if eps > policy.max {
            let min_eigenvalue = linalg::symmetric_eigenvalues(covariance)
                .first()
                .copied()
                .unwrap_or(f64::NAN);
            return Err(Error::NotFactorizable {
                jitter: policy.max,
                min_eigenvalue,
            });
        }
    }
}

/// Draws m samples x̃ = mean + L·z from a seeded generator.
fn sample_gaussian(
    mean: &[f64],
    covariance: &Matrix,
    m: usize,
    seed: u64,
    policy: &JitterPolicy,
) -> Result<Vec<Vec<f64>>> {
    if m == 0 {
        return Err(Error::InvalidParameter {
            name: "m",
            reason: "must draw at least one sample".into(),
        });
    }
    let (factor, _) = cholesky_with_jitter(covariance, policy)?;
    let mut generator = rng::rng_from(seed);
    let dim = mean.len();
    Ok((0..m)
        .map(|_| {
            let z = rng::standard_normal_vec(&mut generator, dim);
            linalg::add(mean, &factor.matvec(&z))
        })
        .collect())
}

/// m unlabeled synthetic features from a calibrated distribution, using the
/// default jitter policy. Identical seed, identical output.
pub fn sample_features(
    dist: &CalibratedDistribution,
    m: usize,
    seed: u64,
) -> Result<Vec<FeatureVector>> {
    sample_features_with(dist, m, seed, &JitterPolicy::default())
}

/// As `sample_features`, with an explicit jitter policy.
pub fn sample_features_with(
    dist: &CalibratedDistribution,
    m: usize,
    seed: u64,
    policy: &JitterPolicy,
) -> Result<Vec<FeatureVector>> {
    let draws = sample_gaussian(&dist.mean, &dist.covariance, m, seed, policy)?;
    Ok(draws
        .into_iter()
        .map(|values| FeatureVector::from_sampled(values, None))
        .collect())
}

/// Calibrates around x and samples `cfg.samples_per_support` synthetic
/// features labeled with x's class. The real x is not included.
pub fn calibrate_and_sample(
    x: &FeatureVector,
    store: &DistributionStore,
    cfg: &CalibrationConfig,
) -> Result<Vec<FeatureVector>> {
    let dist = calibrate_distribution(x, store, cfg)?;
    let samples = sample_features_with(&dist, cfg.samples_per_support, cfg.seed, &cfg.jitter())?;
    Ok(samples
        .into_iter()
        .map(|mut f| {
            f.class_id = x.class_id;
            f
        })
        .collect())
}

/// m synthetic features from a stored base-class Gaussian, labeled with the
/// class id, using the default jitter policy.
pub fn sample_base(
    store: &DistributionStore,
    class_id: ClassId,
    m: usize,
    seed: u64,
) -> Result<Vec<FeatureVector>> {
    sample_base_with(store, class_id, m, seed, &JitterPolicy::default())
}

/// As `sample_base`, with an explicit jitter policy.
pub fn sample_base_with(
    store: &DistributionStore,
    class_id: ClassId,
    m: usize,
    seed: u64,
    policy: &JitterPolicy,
) -> Result<Vec<FeatureVector>> {
    let stats = store
        .base_stats(class_id)
        .ok_or(Error::UnknownClass(class_id))?;
    let draws = sample_gaussian(&stats.mean, &stats.covariance, m, seed, policy)?;
    Ok(draws
        .into_iter()
        .map(|values| FeatureVector::from_sampled(values, Some(class_id)))
        .collect())
}
