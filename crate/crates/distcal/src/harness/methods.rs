//! Evaluation methods as interchangeable strategies.
//!
//! Every ablation arm — plain fine-tuning, distribution calibration with
//! and without shift compensation, distribution regularization, and their
//! compositions — implements [`EvalMethod`] and is registered by name in a
//! [`MethodRegistry`], so the CLI and sweeps select arms at runtime by
//! string. All randomness inside an arm comes from seeds derived per
//! (purpose, episode, feature index); arms that share a sub-step therefore
//! draw identical values for it.

use std::collections::BTreeMap;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::calibration::{self, CalibrationConfig};
use crate::compensation;
use crate::distributions::DistributionStore;
use crate::error::{Error, Result};
use crate::feature::{ClassId, FeatureVector};
use crate::linalg;
use crate::rng::{self, tags};

use super::adapter::train_with_adapter;
use super::classifier::{tally, train_classifier, train_logistic};
use super::episode::Episode;
use super::evaluate::EvalSettings;
use super::world::World;

/// The built-in ablation arms.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MethodKind {
    Baseline,
    Dc,
    DcSc,
    Dr,
    DcDr,
    DcDrStaged,
}

impl MethodKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            Self::Baseline => "baseline",
            Self::Dc => "dc",
            Self::DcSc => "dc_sc",
            Self::Dr => "dr",
            Self::DcDr => "dc_dr",
            Self::DcDrStaged => "dc_dr_staged",
        }
    }

    /// The five arms of the ablation table, in presentation order.
    pub fn ablation() -> [Self; 5] {
        [Self::Baseline, Self::Dc, Self::DcSc, Self::Dr, Self::DcDr]
    }
}

impl std::fmt::Display for MethodKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for MethodKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "baseline" => Ok(Self::Baseline),
            "dc" => Ok(Self::Dc),
            "dc_sc" => Ok(Self::DcSc),
            "dr" => Ok(Self::Dr),
            "dc_dr" => Ok(Self::DcDr),
            "dc_dr_staged" => Ok(Self::DcDrStaged),
            other => Err(Error::InvalidParameter {
                name: "method",
                reason: format!("unknown method `{other}`"),
            }),
        }
    }
}

/// Everything one episode run may read.
pub struct EpisodeContext<'a> {
    pub world: &'a World,
    /// Base-class statistics estimated at base-training time (pre-drift).
    pub store: &'a DistributionStore,
    pub episode: &'a Episode,
    pub settings: &'a EvalSettings,
    pub episode_index: usize,
}

/// Per-class (correct, total) counts over one episode's queries.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EpisodeOutcome {
    pub per_class: BTreeMap<ClassId, (usize, usize)>,
}

impl EpisodeOutcome {
    pub fn correct(&self) -> usize {
        self.per_class.values().map(|(c, _)| c).sum()
    }

    pub fn total(&self) -> usize {
        self.per_class.values().map(|(_, t)| t).sum()
    }

    pub fn accuracy(&self) -> f64 {
        self.correct() as f64 / self.total() as f64
    }
}

/// One evaluation strategy, selectable by name at runtime.
pub trait EvalMethod: Send + Sync {
    fn name(&self) -> &'static str;
    fn kind(&self) -> MethodKind;
    fn run_episode(&self, ctx: &EpisodeContext<'_>) -> Result<EpisodeOutcome>;
}

/// Name → strategy table. `builtin()` registers the six shipped arms;
/// callers may register their own.
pub struct MethodRegistry {
    entries: BTreeMap<&'static str, Arc<dyn EvalMethod>>,
}

impl MethodRegistry {
    pub fn empty() -> Self {
        Self {
            entries: BTreeMap::new(),
        }
    }

    pub fn builtin() -> Self {
        let mut registry = Self::empty();
        registry.register(Arc::new(BaselineMethod));
        registry.register(Arc::new(DcMethod));
        registry.register(Arc::new(DcScMethod));
        registry.register(Arc::new(DrMethod));
        registry.register(Arc::new(DcDrMethod));
        registry.register(Arc::new(DcDrStagedMethod));
        registry
    }

    pub fn register(&mut self, method: Arc<dyn EvalMethod>) {
        self.entries.insert(method.name(), method);
    }

    pub fn get(&self, name: &str) -> Result<Arc<dyn EvalMethod>> {
        self.entries
            .get(name)
            .cloned()
            .ok_or_else(|| Error::InvalidParameter {
                name: "method",
                reason: format!(
                    "unknown method `{name}` (registered: {})",
                    self.names().join(", ")
                ),
            })
    }

    pub fn get_kind(&self, kind: MethodKind) -> Arc<dyn EvalMethod> {
        self.entries[kind.as_str()].clone()
    }

    pub fn names(&self) -> Vec<&'static str> {
        self.entries.keys().copied().collect()
    }
}

impl Default for MethodRegistry {
    fn default() -> Self {
        Self::builtin()
    }
}

fn labels_of(features: &[FeatureVector]) -> Vec<ClassId> {
    features
        .iter()
        .map(|f| f.class_id.expect("harness features are labeled"))
        .collect()
}

/// Trains the configured head on `features` and scores the clean queries.
fn train_and_tally(ctx: &EpisodeContext<'_>, features: &[FeatureVector]) -> Result<EpisodeOutcome> {
    let xs: Vec<&[f64]> = features.iter().map(|f| f.values.as_slice()).collect();
    let labels = labels_of(features);
    let classes = ctx.world.all_ids();
    let model = train_classifier(
        ctx.settings.classifier,
        &xs,
        &labels,
        &classes,
        &ctx.settings.train,
    )?;
    let per_class = tally(
        model.as_ref(),
        ctx.episode
            .query
            .iter()
            .map(|f| (f.values.as_slice(), f.class_id.unwrap())),
    );
    Ok(EpisodeOutcome { per_class })
}

/// Synthetic features for every support feature: calibrated draws for novel
/// classes, store draws for base classes. Seeds derive from the feature
/// index, so augmentation is identical across arms that share a store.
pub fn augment_support(
    ctx: &EpisodeContext<'_>,
    store: &DistributionStore,
) -> Result<Vec<FeatureVector>> {
    let settings = ctx.settings;
    let ep = ctx.episode_index as u64;
    let mut synthetic = Vec::new();
    for (index, feature) in ctx.episode.support.iter().enumerate() {
        let id = feature.class_id.expect("harness features are labeled");
        if store.is_base(id) {
            let seed = rng::mix_all(settings.seed, &[tags::BASE_SYNTH, ep, index as u64]);
            synthetic.extend(calibration::sample_base_with(
                store,
                id,
                settings.calib.samples_per_support,
                seed,
                &settings.calib.jitter(),
            )?);
        } else {
            let cfg = CalibrationConfig {
                seed: rng::mix_all(settings.seed, &[tags::CALIBRATE, ep, index as u64]),
                ..settings.calib
            };
            synthetic.extend(calibration::calibrate_and_sample(feature, store, &cfg)?);
        }
    }
    Ok(synthetic)
}

/// Streams fresh base features (current truth) through the EMA to correct
/// the stale store.
fn compensate_store(ctx: &EpisodeContext<'_>) -> Result<DistributionStore> {
    let settings = ctx.settings;
    let ep = ctx.episode_index as u64;
    let mut stream_rng = rng::rng_from(rng::mix_all(settings.seed, &[tags::SC_STREAM, ep]));
    let policy = settings.calib.jitter();
    let mut stream = Vec::with_capacity(ctx.world.true_base.len() * settings.sc_stream_len);
    for (id, gaussian) in &ctx.world.true_base {
        let (factor, _) = calibration::cholesky_with_jitter(&gaussian.covariance, &policy)?;
        for _ in 0..settings.sc_stream_len {
            let z = rng::standard_normal_vec(&mut stream_rng, ctx.world.dim());
            let values = linalg::add(&gaussian.mean, &factor.matvec(&z));
            stream.push(FeatureVector::from_sampled(values, Some(*id)));
        }
    }
    compensation::compensate_batch(ctx.store, &stream, settings.comp.theta)
}

/// Learner view of features: additive Gaussian corruption at the world's
/// noise scale. The clean originals serve as teacher features.
fn corrupt(ctx: &EpisodeContext<'_>, features: &[FeatureVector], tag: u64) -> Vec<FeatureVector> {
    let scale = ctx.world.config.noise_scale;
    if scale == 0.0 {
        return features.to_vec();
    }
    let mut noise_rng = rng::rng_from(rng::mix_all(
        ctx.settings.seed,
        &[tag, ctx.episode_index as u64],
    ));
    features
        .iter()
        .map(|f| {
            let noise = rng::standard_normal_vec(&mut noise_rng, f.dim());
            let mut values = f.values.clone();
            linalg::axpy(&mut values, &noise, scale);
            FeatureVector::from_sampled(values, f.class_id)
        })
        .collect()
}

/// Adapter + head training on corrupted features against clean teachers,
/// then scoring on corrupted queries.
fn run_regularized(
    ctx: &EpisodeContext<'_>,
    clean_train: &[FeatureVector],
    staged: bool,
) -> Result<EpisodeOutcome> {
    let corrupted = corrupt(ctx, clean_train, tags::CORRUPT_SUPPORT);
    let learner: Vec<&[f64]> = corrupted.iter().map(|f| f.values.as_slice()).collect();
    let teacher: Vec<&[f64]> = clean_train.iter().map(|f| f.values.as_slice()).collect();
    let labels = labels_of(clean_train);
    let classes = ctx.world.all_ids();

    let init_head = if staged {
        Some(train_logistic(
            &learner,
            &labels,
            &classes,
            &ctx.settings.train,
        )?)
    } else {
        None
    };
    let model = train_with_adapter(
        &learner,
        &teacher,
        &labels,
        &classes,
        &ctx.settings.train,
        ctx.settings.lambda,
        init_head,
    )?;

    let corrupted_queries = corrupt(ctx, &ctx.episode.query, tags::CORRUPT_QUERY);
    let per_class = tally(
        &model,
        corrupted_queries
            .iter()
            .map(|f| (f.values.as_slice(), f.class_id.unwrap())),
    );
    Ok(EpisodeOutcome { per_class })
}

struct BaselineMethod;

impl EvalMethod for BaselineMethod {
    fn name(&self) -> &'static str {
        "baseline"
    }

    fn kind(&self) -> MethodKind {
        MethodKind::Baseline
    }

    fn run_episode(&self, ctx: &EpisodeContext<'_>) -> Result<EpisodeOutcome> {
        train_and_tally(ctx, &ctx.episode.support)
    }
}

struct DcMethod;

impl EvalMethod for DcMethod {
    fn name(&self) -> &'static str {
        "dc"
    }

    fn kind(&self) -> MethodKind {
        MethodKind::Dc
    }

    fn run_episode(&self, ctx: &EpisodeContext<'_>) -> Result<EpisodeOutcome> {
        let mut training = ctx.episode.support.clone();
        training.extend(augment_support(ctx, ctx.store)?);
        train_and_tally(ctx, &training)
    }
}

struct DcScMethod;

impl EvalMethod for DcScMethod {
    fn name(&self) -> &'static str {
        "dc_sc"
    }

    fn kind(&self) -> MethodKind {
        MethodKind::DcSc
    }

    fn run_episode(&self, ctx: &EpisodeContext<'_>) -> Result<EpisodeOutcome> {
        let compensated = compensate_store(ctx)?;
        let mut training = ctx.episode.support.clone();
        training.extend(augment_support(ctx, &compensated)?);
        train_and_tally(ctx, &training)
    }
}

struct DrMethod;

impl EvalMethod for DrMethod {
    fn name(&self) -> &'static str {
        "dr"
    }

    fn kind(&self) -> MethodKind {
        MethodKind::Dr
    }

    fn run_episode(&self, ctx: &EpisodeContext<'_>) -> Result<EpisodeOutcome> {
        run_regularized(ctx, &ctx.episode.support, false)
    }
}

struct DcDrMethod;

impl EvalMethod for DcDrMethod {
    fn name(&self) -> &'static str {
        "dc_dr"
    }

    fn kind(&self) -> MethodKind {
        MethodKind::DcDr
    }

    fn run_episode(&self, ctx: &EpisodeContext<'_>) -> Result<EpisodeOutcome> {
        let mut training = ctx.episode.support.clone();
        training.extend(augment_support(ctx, ctx.store)?);
        run_regularized(ctx, &training, false)
    }
}

/// Calibrate-first, regularize-second: the head is pre-trained on the
/// augmented set, then continues jointly with the adapter.
struct DcDrStagedMethod;

impl EvalMethod for DcDrStagedMethod {
    fn name(&self) -> &'static str {
        "dc_dr_staged"
    }

    fn kind(&self) -> MethodKind {
        MethodKind::DcDrStaged
    }

    fn run_episode(&self, ctx: &EpisodeContext<'_>) -> Result<EpisodeOutcome> {
        let mut training = ctx.episode.support.clone();
        training.extend(augment_support(ctx, ctx.store)?);
        run_regularized(ctx, &training, true)
    }
}
