//! Episode-loop evaluation: build the (stale) base store once, run a method
//! over independent seeded episodes, and aggregate accuracies with a
//! bootstrap confidence interval.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::calibration::CalibrationConfig;
use crate::compensation::CompensationConfig;
use crate::distributions::{compute_class_stats, DistributionStore};
use crate::error::{Error, Result};
use crate::feature::{ClassId, FeatureVector};
use crate::linalg;
use crate::rng::{self, tags};

use super::classifier::{ClassifierKind, TrainConfig};
use super::episode::sample_episode;
use super::methods::{EpisodeContext, EvalMethod, MethodKind, MethodRegistry};
use super::world::World;

/// Everything an evaluation run needs besides the world and the method.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EvalSettings {
    /// K: support features per class.
    pub shots: usize,
    pub episodes: usize,
    pub queries_per_class: usize,
    /// Samples per base class when estimating the store.
    pub base_stat_samples: usize,
    /// Fresh features per base class streamed through shift compensation.
    pub sc_stream_len: usize,
    /// Regularization weight for the adapter arms.
    pub lambda: f64,
    pub seed: u64,
    pub calib: CalibrationConfig,
    pub comp: CompensationConfig,
    pub classifier: ClassifierKind,
    pub train: TrainConfig,
}

impl Default for EvalSettings {
    fn default() -> Self {
        Self {
            shots: 1,
            episodes: 200,
            queries_per_class: 15,
            base_stat_samples: 200,
            sc_stream_len: 10_000,
            lambda: 1e-4,
            seed: 0,
            calib: CalibrationConfig::default(),
            comp: CompensationConfig::default(),
            classifier: ClassifierKind::Logistic,
            train: TrainConfig::default(),
        }
    }
}

impl EvalSettings {
    /// Defaults with the shot count set and k picked for that regime.
    pub fn for_shots(shots: usize) -> Self {
        Self {
            shots,
            calib: CalibrationConfig::for_shots(shots),
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.shots == 0 || self.episodes == 0 || self.queries_per_class == 0 {
            return Err(Error::InvalidParameter {
                name: "settings",
                reason: "shots, episodes and queries_per_class must be positive".into(),
            });
        }
        if self.base_stat_samples < 2 {
            return Err(Error::InvalidParameter {
                name: "base_stat_samples",
                reason: "need at least 2 samples per base class".into(),
            });
        }
        if self.lambda < 0.0 {
            return Err(Error::OutOfRange {
                name: "lambda",
                value: self.lambda,
                expected: "non-negative",
            });
        }
        self.calib.validate()?;
        self.comp.validate()
    }
}

/// Result of one evaluation run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub method: MethodKind,
    pub shots: usize,
    pub episodes: usize,
    /// Pooled query accuracy (equals the query-count-weighted mean of the
    /// per-class accuracies).
    pub accuracy: f64,
    /// 95% bootstrap interval over per-episode accuracies.
    pub ci_low: f64,
    pub ci_high: f64,
    pub per_class_accuracy: BTreeMap<ClassId, f64>,
    pub per_episode_accuracy: Vec<f64>,
    /// Snapshot of the settings the run used.
    pub settings: EvalSettings,
}

impl EvalReport {
    pub fn to_row(&self) -> ReportRow {
        ReportRow {
            method: self.method.as_str().to_string(),
            shots: self.shots,
            k: self.settings.calib.k,
            alpha: self.settings.calib.alpha,
            theta: self.settings.comp.theta,
            lambda: self.settings.lambda,
            episodes: self.episodes,
            accuracy: self.accuracy,
            ci_low: self.ci_low,
            ci_high: self.ci_high,
        }
    }
}

/// One line of the report table; also the JSON object shape.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportRow {
    pub method: String,
    pub shots: usize,
    pub k: usize,
    pub alpha: f64,
    pub theta: f64,
    pub lambda: f64,
    pub episodes: usize,
    pub accuracy: f64,
    pub ci_low: f64,
    pub ci_high: f64,
}

pub const REPORT_CSV_HEADER: &str =
    "method,shots,k,alpha,theta,lambda,episodes,accuracy,ci_low,ci_high";

impl ReportRow {
    pub fn to_csv_line(&self) -> String {
        format!(
            "{},{},{},{},{},{},{},{},{},{}",
            self.method,
            self.shots,
            self.k,
            self.alpha,
            self.theta,
            self.lambda,
            self.episodes,
            self.accuracy,
            self.ci_low,
            self.ci_high
        )
    }

    pub fn parse_csv_line(line: &str) -> Result<Self> {
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 10 {
            return Err(Error::InvalidParameter {
                name: "report row",
                reason: format!("expected 10 fields, got {}", fields.len()),
            });
        }
        fn num<T: std::str::FromStr>(field: &str, name: &'static str) -> Result<T> {
            field.parse().map_err(|_| Error::InvalidParameter {
                name,
                reason: format!("unparseable value `{field}`"),
            })
        }
        Ok(Self {
            method: fields[0].to_string(),
            shots: num(fields[1], "shots")?,
            k: num(fields[2], "k")?,
            alpha: num(fields[3], "alpha")?,
            theta: num(fields[4], "theta")?,
            lambda: num(fields[5], "lambda")?,
            episodes: num(fields[6], "episodes")?,
            accuracy: num(fields[7], "accuracy")?,
            ci_low: num(fields[8], "ci_low")?,
            ci_high: num(fields[9], "ci_high")?,
        })
    }
}

/// Estimates the store the way base training would have: from samples of
/// the pre-drift base Gaussians. Novel classes are absent.
pub fn build_base_store(world: &World, settings: &EvalSettings) -> Result<DistributionStore> {
    let policy = settings.calib.jitter();
    let mut base = BTreeMap::new();
    for id in world.base_ids() {
        let gaussian = world.pre_drift_base(id).expect("base id");
        let (factor, _) = crate::calibration::cholesky_with_jitter(&gaussian.covariance, &policy)?;
        let mut sample_rng = rng::rng_from(rng::mix_all(settings.seed, &[tags::STORE, id as u64]));
        let samples: Vec<FeatureVector> = (0..settings.base_stat_samples)
            .map(|_| {
                let z = rng::standard_normal_vec(&mut sample_rng, world.dim());
                FeatureVector::from_sampled(
                    linalg::add(&gaussian.mean, &factor.matvec(&z)),
                    Some(id),
                )
            })
            .collect();
        base.insert(id, compute_class_stats(&samples, id)?);
    }
    DistributionStore::from_parts(world.dim(), base, BTreeMap::new())
}

/// Runs `method` over `settings.episodes` independent episodes and pools
/// the results.
pub fn evaluate_method(
    world: &World,
    method: &dyn EvalMethod,
    settings: &EvalSettings,
) -> Result<EvalReport> {
    settings.validate()?;
    let store = build_base_store(world, settings)?;

    let mut per_class: BTreeMap<ClassId, (usize, usize)> = BTreeMap::new();
    let mut per_episode_accuracy = Vec::with_capacity(settings.episodes);
    for episode_index in 0..settings.episodes {
        let episode_seed = rng::mix_all(settings.seed, &[tags::EPISODE, episode_index as u64]);
        let episode = sample_episode(
            world,
            settings.shots,
            settings.queries_per_class,
            episode_seed,
        );
        let ctx = EpisodeContext {
            world,
            store: &store,
            episode: &episode,
            settings,
            episode_index,
        };
        let outcome = method.run_episode(&ctx)?;
        for (id, (correct, total)) in &outcome.per_class {
            let entry = per_class.entry(*id).or_insert((0, 0));
            entry.0 += correct;
            entry.1 += total;
        }
        per_episode_accuracy.push(outcome.accuracy());
    }

    let correct: usize = per_class.values().map(|(c, _)| c).sum();
    let total: usize = per_class.values().map(|(_, t)| t).sum();
    let accuracy = correct as f64 / total as f64;
    let per_class_accuracy = per_class
        .into_iter()
        .map(|(id, (c, t))| (id, c as f64 / t as f64))
        .collect();
    let (ci_low, ci_high) = bootstrap_mean_ci(
        &per_episode_accuracy,
        2000,
        rng::mix(settings.seed, tags::BOOTSTRAP),
    );

    Ok(EvalReport {
        method: method.kind(),
        shots: settings.shots,
        episodes: settings.episodes,
        accuracy,
        ci_low,
        ci_high,
        per_class_accuracy,
        per_episode_accuracy,
        settings: *settings,
    })
}

/// Looks the method up by name and evaluates it.
pub fn evaluate_named(
    world: &World,
    registry: &MethodRegistry,
    name: &str,
    settings: &EvalSettings,
) -> Result<EvalReport> {
    let method = registry.get(name)?;
    evaluate_method(world, method.as_ref(), settings)
}

/// Sorted bootstrap resample means.
fn bootstrap_means(values: &[f64], reps: usize, seed: u64) -> Vec<f64> {
    use rand::Rng;
    assert!(!values.is_empty());
    let mut sampler = rng::rng_from(seed);
    let n = values.len();
    let mut means: Vec<f64> = (0..reps)
        .map(|_| {
            let sum: f64 = (0..n).map(|_| values[sampler.random_range(0..n)]).sum();
            sum / n as f64
        })
        .collect();
    means.sort_by(|a, b| a.partial_cmp(b).expect("finite accuracies"));
    means
}

fn percentile(sorted: &[f64], q: f64) -> f64 {
    let rank = ((q * sorted.len() as f64).ceil() as usize).clamp(1, sorted.len());
    sorted[rank - 1]
}

/// Two-sided 95% percentile-bootstrap interval for the mean.
pub fn bootstrap_mean_ci(values: &[f64], reps: usize, seed: u64) -> (f64, f64) {
    let means = bootstrap_means(values, reps, seed);
    (percentile(&means, 0.025), percentile(&means, 0.975))
}

/// A single bootstrap quantile of the mean (e.g. 0.05 for a one-sided
/// lower confidence bound).
pub fn bootstrap_mean_quantile(values: &[f64], reps: usize, seed: u64, q: f64) -> f64 {
    percentile(&bootstrap_means(values, reps, seed), q)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harness::world::{generate_world, WorldConfig};

    fn small_settings() -> EvalSettings {
        EvalSettings {
            episodes: 3,
            queries_per_class: 4,
            base_stat_samples: 40,
            sc_stream_len: 50,
            ..EvalSettings::for_shots(1)
        }
    }

    fn small_world() -> WorldConfig {
        WorldConfig {
            dim: 6,
            num_base: 5,
            num_novel: 2,
            ..WorldConfig::default()
        }
    }

    #[test]
    fn baseline_report_is_reproducible() {
        let world = generate_world(&small_world()).unwrap();
        let registry = MethodRegistry::builtin();
        let settings = small_settings();
        let a = evaluate_named(&world, &registry, "baseline", &settings).unwrap();
        let b = evaluate_named(&world, &registry, "baseline", &settings).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.per_episode_accuracy.len(), 3);
    }

    #[test]
    fn accuracy_is_query_weighted_mean_of_per_class() {
        let world = generate_world(&small_world()).unwrap();
        let registry = MethodRegistry::builtin();
        let report = evaluate_named(&world, &registry, "dc", &small_settings()).unwrap();
        // Every class sees the same query count, so the weighted mean is
        // the plain mean.
        let mean: f64 = report.per_class_accuracy.values().sum::<f64>()
            / report.per_class_accuracy.len() as f64;
        assert!((report.accuracy - mean).abs() < 1e-12);
    }

    #[test]
    fn zero_samples_per_support_is_rejected() {
        let world = generate_world(&small_world()).unwrap();
        let registry = MethodRegistry::builtin();
        let mut settings = small_settings();
        settings.calib.samples_per_support = 0;
        assert!(evaluate_named(&world, &registry, "dc", &settings).is_err());
    }

    #[test]
    fn report_row_csv_round_trips() {
        let row = ReportRow {
            method: "dc_sc".into(),
            shots: 5,
            k: 15,
            alpha: 1e-3,
            theta: 0.9999,
            lambda: 1e-4,
            episodes: 200,
            accuracy: 0.7312345678901,
            ci_low: 0.71,
            ci_high: 0.7512345,
        };
        let parsed = ReportRow::parse_csv_line(&row.to_csv_line()).unwrap();
        assert_eq!(parsed, row);
    }

    #[test]
    fn bootstrap_interval_brackets_the_mean() {
        let values: Vec<f64> = (0..100).map(|i| (i % 10) as f64 / 10.0).collect();
        let (low, high) = bootstrap_mean_ci(&values, 500, 7);
        let mean: f64 = values.iter().sum::<f64>() / values.len() as f64;
        assert!(low <= mean && mean <= high);
        assert!(low < high);
        // Degenerate sample: zero-width interval.
        let constant = vec![0.5; 20];
        assert_eq!(bootstrap_mean_ci(&constant, 100, 7), (0.5, 0.5));
    }
}
