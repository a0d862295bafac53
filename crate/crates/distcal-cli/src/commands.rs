//! Subcommand definitions and implementations.
//!
//! Flag precedence is flag > config file > default, and every sampling seed
//! derives from the single run seed, so identical invocations produce
//! byte-identical outputs.

use std::collections::{BTreeMap, BTreeSet};
use std::path::PathBuf;

use clap::{Parser, Subcommand};

use distcal::calibration::{self, csv_block, CalibrationMode};
use distcal::distributions::{self, DistributionStore};
use distcal::harness::{
    evaluate_named, generate_world, sweep_alpha, sweep_k, ClassifierKind, MethodKind,
    MethodRegistry, ReportRow, SweepTable,
};
use distcal::regularization::{reg_loss, RegPair};
use distcal::rng::{self, tags};
use distcal::{ClassId, FeatureVector};

use crate::config::{ReportFormat, RunConfig};
use crate::features_io::{read_features, write_features};
use crate::report_io::{read_rows, write_rows, write_sweep};
use crate::{CliError, CliResult};

#[derive(Debug, Parser)]
#[command(
    name = "distcal",
    about = "Distribution calibration for few-shot learning: class statistics, shift compensation, synthetic sampling, and episode evaluation",
    version
)]
pub struct Cli {
    /// Seed for all randomness in the invocation.
    #[arg(long, global = true)]
    pub seed: Option<u64>,

    /// TOML config file; flags override its values.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,

    /// Output directory.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Compute per-class distribution blocks from a feature file.
    Stats {
        #[arg(long)]
        input: PathBuf,
        /// Keep only features with positivity >= threshold before
        /// estimating statistics.
        #[arg(long)]
        threshold: Option<f64>,
        /// L2-normalize features first.
        #[arg(long)]
        l2_normalize: bool,
    },
    /// Apply EMA shift compensation to base statistics over a feature stream.
    Compensate {
        /// Feature file the base statistics are estimated from.
        #[arg(long)]
        base: PathBuf,
        /// Feature stream applied through the EMA, in file order.
        #[arg(long)]
        stream: PathBuf,
        #[arg(long)]
        theta: Option<f64>,
    },
    /// Emit a calibrated distribution block per support feature.
    Calibrate {
        #[arg(long)]
        support: PathBuf,
        #[arg(long)]
        base: PathBuf,
        #[arg(short, long)]
        k: Option<usize>,
        #[arg(long)]
        alpha: Option<f64>,
        #[arg(long)]
        mode: Option<CalibrationMode>,
    },
    /// Sample synthetic features from calibrated distributions.
    Sample {
        #[arg(long)]
        support: PathBuf,
        #[arg(long)]
        base: PathBuf,
        #[arg(short, long)]
        k: Option<usize>,
        #[arg(long)]
        alpha: Option<f64>,
        #[arg(long)]
        mode: Option<CalibrationMode>,
        /// Synthetic features per support feature.
        #[arg(short = 'm', long)]
        samples: Option<usize>,
    },
    /// Mean Euclidean distance between two feature files, row by row.
    Regloss {
        #[arg(long)]
        learner: PathBuf,
        #[arg(long)]
        teacher: PathBuf,
    },
    /// Run one evaluation and emit a report row.
    Episode {
        #[arg(long)]
        method: Option<String>,
        #[arg(long)]
        shots: Option<usize>,
        #[arg(long)]
        episodes: Option<usize>,
        #[arg(short, long)]
        k: Option<usize>,
        #[arg(long)]
        alpha: Option<f64>,
        #[arg(long)]
        theta: Option<f64>,
        #[arg(long)]
        lambda: Option<f64>,
        #[arg(long)]
        classifier: Option<String>,
        #[arg(long)]
        format: Option<String>,
    },
    /// Sweep k, alpha, or the method set over episodes.
    Ablate {
        /// What to sweep: k, alpha, or method.
        #[arg(long)]
        sweep: String,
        /// Comma-separated grid values (defaults per sweep).
        #[arg(long)]
        values: Option<String>,
        /// Comma-separated shot counts.
        #[arg(long)]
        shots: Option<String>,
        #[arg(long)]
        episodes: Option<usize>,
        #[arg(long)]
        format: Option<String>,
    },
    /// Merge report files into one table.
    Report {
        #[arg(long, value_delimiter = ',', required = true)]
        inputs: Vec<PathBuf>,
        #[arg(long)]
        format: Option<String>,
    },
}

pub fn run(cli: Cli) -> CliResult<()> {
    let mut config = RunConfig::load(cli.config.as_deref())?;
    if let Some(seed) = cli.seed {
        config.seed = seed;
    }
    if let Some(out) = cli.out {
        config.out_dir = out;
    }

    match cli.command {
        Command::Stats {
            input,
            threshold,
            l2_normalize,
        } => run_stats(&config, &input, threshold, l2_normalize),
        Command::Compensate {
            base,
            stream,
            theta,
        } => run_compensate(&config, &base, &stream, theta),
        Command::Calibrate {
            support,
            base,
            k,
            alpha,
            mode,
        } => run_calibrate(&mut config, &support, &base, k, alpha, mode),
        Command::Sample {
            support,
            base,
            k,
            alpha,
            mode,
            samples,
        } => run_sample(&mut config, &support, &base, k, alpha, mode, samples),
        Command::Regloss { learner, teacher } => run_regloss(&learner, &teacher),
        Command::Episode {
            method,
            shots,
            episodes,
            k,
            alpha,
            theta,
            lambda,
            classifier,
            format,
        } => run_episode(
            &mut config,
            method,
            shots,
            episodes,
            k,
            alpha,
            theta,
            lambda,
            classifier,
            format,
        ),
        Command::Ablate {
            sweep,
            values,
            shots,
            episodes,
            format,
        } => run_ablate(&mut config, &sweep, values, shots, episodes, format),
        Command::Report { inputs, format } => run_report(&config, &inputs, format),
    }
}

fn ensure_out_dir(config: &RunConfig) -> CliResult<()> {
    std::fs::create_dir_all(&config.out_dir)
        .map_err(|e| CliError::data(format!("{}: {e}", config.out_dir.display())))
}

fn group_by_class(features: &[FeatureVector]) -> CliResult<BTreeMap<ClassId, Vec<FeatureVector>>> {
    let mut grouped: BTreeMap<ClassId, Vec<FeatureVector>> = BTreeMap::new();
    for (index, feature) in features.iter().enumerate() {
        let id = feature
            .class_id
            .ok_or_else(|| CliError::data(format!("feature {index} has no class label")))?;
        grouped.entry(id).or_default().push(feature.clone());
    }
    Ok(grouped)
}

fn store_from_file(path: &std::path::Path) -> CliResult<DistributionStore> {
    let features = read_features(path)?;
    let base_ids: BTreeSet<ClassId> = features.iter().filter_map(|f| f.class_id).collect();
    if base_ids.is_empty() {
        return Err(CliError::data(format!(
            "{}: no labeled features to build base statistics from",
            path.display()
        )));
    }
    Ok(distributions::build_store(
        &features,
        &base_ids,
        &BTreeSet::new(),
    )?)
}

fn write_class_blocks(config: &RunConfig, store: &DistributionStore) -> CliResult<()> {
    ensure_out_dir(config)?;
    for (id, stats) in store.base() {
        let path = config.out_dir.join(format!("class_{id}.csv"));
        let mut text = format!("# class={id} count={}\n", stats.count);
        text.push_str(&csv_block(&stats.mean, &stats.covariance));
        std::fs::write(&path, text)
            .map_err(|e| CliError::data(format!("{}: {e}", path.display())))?;
    }
    Ok(())
}

fn run_stats(
    config: &RunConfig,
    input: &std::path::Path,
    threshold: Option<f64>,
    l2_normalize: bool,
) -> CliResult<()> {
    let mut features = read_features(input)?;
    if let Some(threshold) = threshold {
        features = distributions::filter_positive(&features, threshold)?;
    }
    if l2_normalize || config.l2_normalize {
        features = features.iter().map(FeatureVector::l2_normalized).collect();
    }
    let grouped = group_by_class(&features)?;
    if grouped.is_empty() {
        return Err(CliError::data(
            "no features left after filtering".to_string(),
        ));
    }
    ensure_out_dir(config)?;
    for (id, samples) in &grouped {
        let stats = distributions::compute_class_stats(samples, *id)?;
        let path = config.out_dir.join(format!("class_{id}.csv"));
        let mut text = format!("# class={id} count={}\n", stats.count);
        text.push_str(&csv_block(&stats.mean, &stats.covariance));
        std::fs::write(&path, text)
            .map_err(|e| CliError::data(format!("{}: {e}", path.display())))?;
    }
    println!(
        "wrote {} distribution blocks to {}",
        grouped.len(),
        config.out_dir.display()
    );
    Ok(())
}

fn run_compensate(
    config: &RunConfig,
    base: &std::path::Path,
    stream: &std::path::Path,
    theta: Option<f64>,
) -> CliResult<()> {
    let store = store_from_file(base)?;
    let batch = read_features(stream)?;
    let theta = theta.unwrap_or(config.theta);
    let compensated = distcal::compensate_batch(&store, &batch, theta)?;
    write_class_blocks(config, &compensated)?;
    println!(
        "compensated {} base classes over {} features (theta={theta}) into {}",
        compensated.base().len(),
        batch.len(),
        config.out_dir.display()
    );
    Ok(())
}

fn apply_calibration_flags(
    config: &mut RunConfig,
    k: Option<usize>,
    alpha: Option<f64>,
    mode: Option<CalibrationMode>,
) {
    if k.is_some() {
        config.k = k;
    }
    if let Some(alpha) = alpha {
        config.alpha = alpha;
    }
    if let Some(mode) = mode {
        config.mode = mode;
    }
}

fn run_calibrate(
    config: &mut RunConfig,
    support: &std::path::Path,
    base: &std::path::Path,
    k: Option<usize>,
    alpha: Option<f64>,
    mode: Option<CalibrationMode>,
) -> CliResult<()> {
    apply_calibration_flags(config, k, alpha, mode);
    let store = store_from_file(base)?;
    let supports = read_features(support)?;
    if supports.is_empty() {
        return Err(CliError::data("no support features".to_string()));
    }
    let cfg = config.calib_config(config.shots[0]);
    ensure_out_dir(config)?;
    for (index, feature) in supports.iter().enumerate() {
        let dist = calibration::calibrate_distribution(feature, &store, &cfg)?;
        let class = feature
            .class_id
            .map(|c| c.to_string())
            .unwrap_or_else(|| "-".into());
        let path = config.out_dir.join(format!("calib_{index}.csv"));
        let mut text = format!("# support={index} class={class}\n");
        text.push_str(&dist.to_csv_block());
        std::fs::write(&path, text)
            .map_err(|e| CliError::data(format!("{}: {e}", path.display())))?;
    }
    println!(
        "wrote {} calibrated distributions to {}",
        supports.len(),
        config.out_dir.display()
    );
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn run_sample(
    config: &mut RunConfig,
    support: &std::path::Path,
    base: &std::path::Path,
    k: Option<usize>,
    alpha: Option<f64>,
    mode: Option<CalibrationMode>,
    samples: Option<usize>,
) -> CliResult<()> {
    apply_calibration_flags(config, k, alpha, mode);
    if let Some(m) = samples {
        config.samples_per_support = m;
    }
    let store = store_from_file(base)?;
    let supports = read_features(support)?;
    if supports.is_empty() {
        return Err(CliError::data("no support features".to_string()));
    }

    let mut synthetic = Vec::new();
    for (index, feature) in supports.iter().enumerate() {
        let cfg = distcal::CalibrationConfig {
            seed: rng::mix_all(config.seed, &[tags::CALIBRATE, index as u64]),
            ..config.calib_config(config.shots[0])
        };
        synthetic.extend(calibration::calibrate_and_sample(feature, &store, &cfg)?);
    }
    ensure_out_dir(config)?;
    let path = config.out_dir.join("synthetic.csv");
    write_features(&path, &synthetic, store.dim())?;
    println!(
        "wrote {} synthetic features to {}",
        synthetic.len(),
        path.display()
    );
    Ok(())
}

fn run_regloss(learner: &std::path::Path, teacher: &std::path::Path) -> CliResult<()> {
    let learner_features = read_features(learner)?;
    let teacher_features = read_features(teacher)?;
    if learner_features.len() != teacher_features.len() {
        return Err(CliError::data(format!(
            "feature counts differ: {} learner vs {} teacher",
            learner_features.len(),
            teacher_features.len()
        )));
    }
    let pairs = learner_features
        .into_iter()
        .zip(teacher_features)
        .map(|(l, t)| RegPair::new(l, t))
        .collect::<distcal::Result<Vec<_>>>()?;
    let loss = reg_loss(&pairs)?;
    println!("{loss}");
    Ok(())
}

fn parse_format(format: Option<String>, default: ReportFormat) -> CliResult<ReportFormat> {
    format.map_or(Ok(default), |f| f.parse())
}

#[allow(clippy::too_many_arguments)]
fn run_episode(
    config: &mut RunConfig,
    method: Option<String>,
    shots: Option<usize>,
    episodes: Option<usize>,
    k: Option<usize>,
    alpha: Option<f64>,
    theta: Option<f64>,
    lambda: Option<f64>,
    classifier: Option<String>,
    format: Option<String>,
) -> CliResult<()> {
    apply_calibration_flags(config, k, alpha, None);
    if let Some(method) = method {
        config.method = method;
    }
    if let Some(episodes) = episodes {
        config.episodes = episodes;
    }
    if let Some(theta) = theta {
        config.theta = theta;
    }
    if let Some(lambda) = lambda {
        config.lambda = lambda;
    }
    if let Some(classifier) = classifier {
        config.classifier = classifier
            .parse::<ClassifierKind>()
            .map_err(|e| CliError::usage(e.to_string()))?;
    }
    let format = parse_format(format, config.report_format)?;
    let shots = shots.unwrap_or(config.shots[0]);

    let world = generate_world(&config.world_config())?;
    let registry = MethodRegistry::builtin();
    let settings = config.eval_settings(shots);
    let report = evaluate_named(&world, &registry, &config.method, &settings)?;
    let row = report.to_row();

    ensure_out_dir(config)?;
    let name = match format {
        ReportFormat::Csv => "report.csv",
        ReportFormat::Json => "report.json",
    };
    let path = config.out_dir.join(name);
    write_rows(&path, std::slice::from_ref(&row), &[], format)?;
    println!("{}", row.to_csv_line());
    Ok(())
}

fn parse_list<T: std::str::FromStr>(raw: &str, what: &str) -> CliResult<Vec<T>> {
    raw.split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| {
            s.parse::<T>()
                .map_err(|_| CliError::usage(format!("bad {what} value `{s}`")))
        })
        .collect()
}

fn run_ablate(
    config: &mut RunConfig,
    sweep: &str,
    values: Option<String>,
    shots: Option<String>,
    episodes: Option<usize>,
    format: Option<String>,
) -> CliResult<()> {
    if let Some(episodes) = episodes {
        config.episodes = episodes;
    }
    let format = parse_format(format, config.report_format)?;
    let shots_list: Vec<usize> = match shots {
        Some(raw) => parse_list(&raw, "shots")?,
        None => config.shots.clone(),
    };
    if shots_list.is_empty() {
        return Err(CliError::usage("no shot counts given".to_string()));
    }

    let world = generate_world(&config.world_config())?;
    let table = match sweep {
        "k" => {
            let ks: Vec<usize> = match &values {
                Some(raw) => parse_list(raw, "k")?,
                None => vec![1, 3, 5, 10, 15],
            };
            sweep_k(
                &world,
                &ks,
                &shots_list,
                &config.eval_settings(shots_list[0]),
            )?
        }
        "alpha" => {
            let alphas: Vec<f64> = match &values {
                Some(raw) => parse_list(raw, "alpha")?,
                None => vec![0.0, 1e-4, 1e-3, 1e-2, 1e-1],
            };
            sweep_alpha(&world, &alphas, &config.eval_settings(shots_list[0]))?
        }
        "method" => {
            let registry = MethodRegistry::builtin();
            let mut rows: Vec<ReportRow> = Vec::new();
            for &shot in &shots_list {
                let settings = config.eval_settings(shot);
                for kind in MethodKind::ablation() {
                    let report = evaluate_named(&world, &registry, kind.as_str(), &settings)?;
                    rows.push(report.to_row());
                }
            }
            SweepTable {
                rows,
                notes: Vec::new(),
            }
        }
        other => {
            return Err(CliError::usage(format!(
                "unknown sweep `{other}` (expected k, alpha, or method)"
            )))
        }
    };

    ensure_out_dir(config)?;
    let extension = match format {
        ReportFormat::Csv => "csv",
        ReportFormat::Json => "json",
    };
    let path = config.out_dir.join(format!("sweep_{sweep}.{extension}"));
    write_sweep(&path, &table, format)?;
    println!("wrote {} rows to {}", table.rows.len(), path.display());
    Ok(())
}

fn run_report(config: &RunConfig, inputs: &[PathBuf], format: Option<String>) -> CliResult<()> {
    let format = parse_format(format, config.report_format)?;
    let mut rows = Vec::new();
    for input in inputs {
        rows.extend(read_rows(input)?);
    }
    ensure_out_dir(config)?;
    let name = match format {
        ReportFormat::Csv => "merged.csv",
        ReportFormat::Json => "merged.json",
    };
    let path = config.out_dir.join(name);
    write_rows(&path, &rows, &[], format)?;
    println!("merged {} rows into {}", rows.len(), path.display());
    Ok(())
}
