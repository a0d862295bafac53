//! Synthetic few-shot episode harness: generative worlds, episode sampling,
//! stand-in classifiers, the strategy registry of evaluation arms, and the
//! k/α sweeps.

pub mod adapter;
pub mod classifier;
pub mod episode;
pub mod evaluate;
pub mod methods;
pub mod sweeps;
pub mod world;

pub use adapter::{train_with_adapter, AdapterModel};
pub use classifier::{
    logistic_gradient, logistic_objective, tally, train_classifier, train_logistic, train_ncm,
    Classifier, ClassifierKind, LogisticClassifier, NcmClassifier, TrainConfig,
};
pub use episode::{sample_episode, Episode};
pub use evaluate::{
    bootstrap_mean_ci, bootstrap_mean_quantile, build_base_store, evaluate_method, evaluate_named,
    EvalReport, EvalSettings, ReportRow, REPORT_CSV_HEADER,
};
pub use methods::{
    augment_support, EpisodeContext, EpisodeOutcome, EvalMethod, MethodKind, MethodRegistry,
};
pub use sweeps::{sweep_alpha, sweep_k, sweep_methods, SweepTable};
pub use world::{generate_world, Gaussian, World, WorldConfig};
