//! Layered run configuration: defaults, then a TOML config file, then
//! command-line flags, later layers winning. Unknown keys in the file are
//! rejected rather than silently ignored.

use std::path::{Path, PathBuf};

use serde::Deserialize;

use distcal::calibration::{CalibrationConfig, CalibrationMode};
use distcal::compensation::CompensationConfig;
use distcal::harness::{ClassifierKind, EvalSettings, TrainConfig, WorldConfig};

use crate::{CliError, CliResult};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ReportFormat {
    Csv,
    Json,
}

impl std::str::FromStr for ReportFormat {
    type Err = CliError;

    fn from_str(s: &str) -> CliResult<Self> {
        match s {
            "csv" => Ok(Self::Csv),
            "json" => Ok(Self::Json),
            other => Err(CliError::usage(format!(
                "unknown report format `{other}` (expected csv or json)"
            ))),
        }
    }
}

/// Fully resolved configuration; every field has a default.
#[derive(Debug, Clone)]
pub struct RunConfig {
    pub seed: u64,
    pub out_dir: PathBuf,
    pub report_format: ReportFormat,
    pub method: String,
    pub shots: Vec<usize>,
    pub l2_normalize: bool,
    /// Unset means "pick k by shot count" (4 below 5 shots, 15 at or above).
    pub k: Option<usize>,
    pub alpha: f64,
    pub samples_per_support: usize,
    pub mode: CalibrationMode,
    pub jitter_start: f64,
    pub jitter_max: f64,
    pub theta: f64,
    pub world: WorldConfig,
    pub episodes: usize,
    pub queries_per_class: usize,
    pub base_stat_samples: usize,
    pub sc_stream_len: usize,
    pub lambda: f64,
    pub classifier: ClassifierKind,
}

impl Default for RunConfig {
    fn default() -> Self {
        let calib = CalibrationConfig::default();
        let eval = EvalSettings::default();
        Self {
            seed: 0,
            out_dir: PathBuf::from("out"),
            report_format: ReportFormat::Csv,
            method: "dc".into(),
            shots: vec![1],
            l2_normalize: false,
            k: None,
            alpha: calib.alpha,
            samples_per_support: calib.samples_per_support,
            mode: calib.mode,
            jitter_start: calib.jitter_start,
            jitter_max: calib.jitter_max,
            theta: CompensationConfig::default().theta,
            world: WorldConfig::default(),
            episodes: eval.episodes,
            queries_per_class: eval.queries_per_class,
            base_stat_samples: eval.base_stat_samples,
            sc_stream_len: eval.sc_stream_len,
            lambda: eval.lambda,
            classifier: ClassifierKind::Logistic,
        }
    }
}

impl RunConfig {
    /// Defaults overlaid with the config file, if given.
    pub fn load(config_path: Option<&Path>) -> CliResult<Self> {
        let mut config = Self::default();
        if let Some(path) = config_path {
            let text = std::fs::read_to_string(path)
                .map_err(|e| CliError::usage(format!("{}: {e}", path.display())))?;
            let file: FileConfig = toml::from_str(&text)
                .map_err(|e| CliError::usage(format!("{}: {e}", path.display())))?;
            file.apply(&mut config);
        }
        Ok(config)
    }

    /// Calibration config for a run at the given shot count. All sampling
    /// seeds derive from the single run seed.
    pub fn calib_config(&self, shots: usize) -> CalibrationConfig {
        CalibrationConfig {
            k: self.k.unwrap_or(if shots < 5 { 4 } else { 15 }),
            alpha: self.alpha,
            samples_per_support: self.samples_per_support,
            mode: self.mode,
            jitter_start: self.jitter_start,
            jitter_max: self.jitter_max,
            seed: self.seed,
        }
    }

    pub fn comp_config(&self) -> CompensationConfig {
        CompensationConfig {
            theta: self.theta,
            ema_covariance: false,
        }
    }

    pub fn world_config(&self) -> WorldConfig {
        WorldConfig {
            seed: self.seed,
            ..self.world
        }
    }

    pub fn eval_settings(&self, shots: usize) -> EvalSettings {
        EvalSettings {
            shots,
            episodes: self.episodes,
            queries_per_class: self.queries_per_class,
            base_stat_samples: self.base_stat_samples,
            sc_stream_len: self.sc_stream_len,
            lambda: self.lambda,
            seed: self.seed,
            calib: self.calib_config(shots),
            comp: self.comp_config(),
            classifier: self.classifier,
            train: TrainConfig::default(),
        }
    }
}

/// The config-file schema. Every field optional; unknown keys error.
#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct FileConfig {
    seed: Option<u64>,
    out_dir: Option<PathBuf>,
    report_format: Option<ReportFormat>,
    method: Option<String>,
    shots: Option<Vec<usize>>,
    l2_normalize: Option<bool>,
    calibration: Option<CalibrationSection>,
    compensation: Option<CompensationSection>,
    world: Option<WorldSection>,
    eval: Option<EvalSection>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct CalibrationSection {
    k: Option<usize>,
    alpha: Option<f64>,
    samples_per_support: Option<usize>,
    mode: Option<CalibrationMode>,
    jitter_start: Option<f64>,
    jitter_max: Option<f64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct CompensationSection {
    theta: Option<f64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct WorldSection {
    dim: Option<usize>,
    num_base: Option<usize>,
    num_novel: Option<usize>,
    mean_scale: Option<f64>,
    novel_mix_count: Option<usize>,
    noise_scale: Option<f64>,
    cov_scale: Option<f64>,
    drift_scale: Option<f64>,
    adversarial: Option<bool>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct EvalSection {
    episodes: Option<usize>,
    queries_per_class: Option<usize>,
    base_stat_samples: Option<usize>,
    sc_stream_len: Option<usize>,
    lambda: Option<f64>,
    classifier: Option<ClassifierKind>,
}

macro_rules! overlay {
    ($target:expr, $source:expr, $($field:ident),+ $(,)?) => {
        $(if let Some(value) = $source.$field {
            $target.$field = value;
        })+
    };
}

impl FileConfig {
    fn apply(self, config: &mut RunConfig) {
        overlay!(
            config,
            self,
            seed,
            out_dir,
            report_format,
            method,
            shots,
            l2_normalize
        );
        if let Some(section) = self.calibration {
            if section.k.is_some() {
                config.k = section.k;
            }
            overlay!(
                config,
                section,
                alpha,
                samples_per_support,
                mode,
                jitter_start,
                jitter_max
            );
        }
        if let Some(section) = self.compensation {
            overlay!(config, section, theta);
        }
        if let Some(section) = self.world {
            overlay!(
                config.world,
                section,
                dim,
                num_base,
                num_novel,
                mean_scale,
                novel_mix_count,
                noise_scale,
                cov_scale,
                drift_scale,
                adversarial
            );
        }
        if let Some(section) = self.eval {
            overlay!(
                config,
                section,
                episodes,
                queries_per_class,
                base_stat_samples,
                sc_stream_len,
                lambda,
                classifier
            );
        }
    }
}
