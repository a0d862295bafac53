//! End-to-end tests of the binary: exit codes, config precedence, file
//! formats, and subcommand behavior.

use std::path::Path;
use std::process::{Command, Output};

fn distcal(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_distcal"))
        .args(args)
        .current_dir(dir)
        .output()
        .expect("binary runs")
}

fn stdout(output: &Output) -> String {
    String::from_utf8_lossy(&output.stdout).into_owned()
}

fn stderr(output: &Output) -> String {
    String::from_utf8_lossy(&output.stderr).into_owned()
}

fn write(dir: &Path, name: &str, text: &str) {
    std::fs::write(dir.join(name), text).unwrap();
}

const BASE_FEATURES: &str = "\
class_id,positivity,dim=2
0,0.9,0,0
0,0.8,2,0
0,0.7,1,1
1,0.9,10,10
1,0.8,12,10
1,0.7,11,11
";

const SUPPORT: &str = "\
class_id,positivity,dim=2
7,,5,5
";

#[test]
fn exit_codes_follow_the_contract() {
    let dir = tempfile::tempdir().unwrap();
    // Unknown subcommand: usage text on stderr, exit 1.
    let out = distcal(&["frobnicate"], dir.path());
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr(&out).contains("Usage") || stderr(&out).contains("error"));

    // Missing input file: data error, exit 2.
    let out = distcal(&["stats", "--input", "missing.csv"], dir.path());
    assert_eq!(out.status.code(), Some(2));

    // Malformed row: data error with the line number, exit 2.
    write(
        dir.path(),
        "bad.csv",
        "class_id,positivity,dim=3\n0,0.5,1,2\n",
    );
    let out = distcal(&["stats", "--input", "bad.csv"], dir.path());
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("line 2"), "{}", stderr(&out));

    // Bad flag value: usage error, exit 1.
    let out = distcal(
        &["episode", "--method", "dc", "--shots", "zero"],
        dir.path(),
    );
    assert_eq!(out.status.code(), Some(1));

    // Unknown config key: usage error, exit 1.
    write(dir.path(), "conf.toml", "sead = 4\n");
    let out = distcal(
        &["--config", "conf.toml", "stats", "--input", "bad.csv"],
        dir.path(),
    );
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr(&out).contains("sead"), "{}", stderr(&out));

    // Unknown method name: data-side validation via the registry.
    write(dir.path(), "feats.csv", BASE_FEATURES);
    let out = distcal(
        &["episode", "--method", "nope", "--episodes", "1"],
        dir.path(),
    );
    assert_ne!(out.status.code(), Some(0));
    assert!(stderr(&out).contains("unknown method"), "{}", stderr(&out));

    // Unwritable output path (a file blocks the directory): data error.
    write(dir.path(), "blocked", "");
    let out = distcal(
        &["stats", "--input", "feats.csv", "--out", "blocked/sub"],
        dir.path(),
    );
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn stats_writes_one_block_per_class() {
    let dir = tempfile::tempdir().unwrap();
    write(dir.path(), "feats.csv", BASE_FEATURES);
    let out = distcal(
        &["stats", "--input", "feats.csv", "--out", "dists"],
        dir.path(),
    );
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));

    let block = std::fs::read_to_string(dir.path().join("dists/class_0.csv")).unwrap();
    let lines: Vec<&str> = block.lines().collect();
    assert_eq!(lines[0], "# class=0 count=3");
    assert_eq!(lines[1], "1,0.3333333333333333"); // mean of (0,0),(2,0),(1,1)
    assert_eq!(lines.len(), 4); // comment + mean + 2 covariance rows
    assert!(dir.path().join("dists/class_1.csv").exists());
}

#[test]
fn stats_threshold_filters_before_estimating() {
    let dir = tempfile::tempdir().unwrap();
    write(dir.path(), "feats.csv", BASE_FEATURES);
    // Threshold 0.75 keeps two features per class.
    let out = distcal(
        &[
            "stats",
            "--input",
            "feats.csv",
            "--threshold",
            "0.75",
            "--out",
            "d",
        ],
        dir.path(),
    );
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    let block = std::fs::read_to_string(dir.path().join("d/class_0.csv")).unwrap();
    assert!(block.starts_with("# class=0 count=2"), "{block}");
}

#[test]
fn compensate_theta_zero_replaces_the_mean() {
    let dir = tempfile::tempdir().unwrap();
    write(dir.path(), "base.csv", BASE_FEATURES);
    write(
        dir.path(),
        "stream.csv",
        "class_id,positivity,dim=2\n0,,9,9\n",
    );
    let out = distcal(
        &[
            "compensate",
            "--base",
            "base.csv",
            "--stream",
            "stream.csv",
            "--theta",
            "0",
            "--out",
            "c",
        ],
        dir.path(),
    );
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    let block = std::fs::read_to_string(dir.path().join("c/class_0.csv")).unwrap();
    let mean_line = block.lines().nth(1).unwrap();
    assert_eq!(mean_line, "9,9");
    // Unstreamed class keeps its estimated mean.
    let other = std::fs::read_to_string(dir.path().join("c/class_1.csv")).unwrap();
    assert_eq!(other.lines().nth(1).unwrap(), "11,10.333333333333334");
}

#[test]
fn calibrate_emits_distribution_blocks() {
    let dir = tempfile::tempdir().unwrap();
    write(dir.path(), "base.csv", BASE_FEATURES);
    write(dir.path(), "support.csv", SUPPORT);
    let out = distcal(
        &[
            "calibrate",
            "--support",
            "support.csv",
            "--base",
            "base.csv",
            "-k",
            "2",
            "--alpha",
            "0.5",
            "--mode",
            "averaged",
            "--out",
            "cal",
        ],
        dir.path(),
    );
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    let block = std::fs::read_to_string(dir.path().join("cal/calib_0.csv")).unwrap();
    let lines: Vec<&str> = block.lines().collect();
    assert_eq!(lines[0], "# support=0 class=7");
    assert!(lines[1].starts_with("# sources="));
    assert_eq!(lines.len(), 2 + 1 + 2); // comments + mean + 2 cov rows
}

#[test]
fn sample_emits_a_round_trippable_feature_file() {
    let dir = tempfile::tempdir().unwrap();
    write(dir.path(), "base.csv", BASE_FEATURES);
    write(dir.path(), "support.csv", SUPPORT);
    let out = distcal(
        &[
            "sample",
            "--support",
            "support.csv",
            "--base",
            "base.csv",
            "-m",
            "4",
            "--seed",
            "11",
            "--out",
            "s",
        ],
        dir.path(),
    );
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    let text = std::fs::read_to_string(dir.path().join("s/synthetic.csv")).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "class_id,positivity,dim=2");
    assert_eq!(lines.len(), 1 + 4); // header + m samples for one support
    assert!(
        lines[1].starts_with("7,,"),
        "label carried over: {}",
        lines[1]
    );
}

#[test]
fn regloss_computes_the_three_four_five_example() {
    let dir = tempfile::tempdir().unwrap();
    write(
        dir.path(),
        "learner.csv",
        "class_id,positivity,dim=2\n,,3,4\n",
    );
    write(
        dir.path(),
        "teacher.csv",
        "class_id,positivity,dim=2\n,,0,0\n",
    );
    let out = distcal(
        &[
            "regloss",
            "--learner",
            "learner.csv",
            "--teacher",
            "teacher.csv",
        ],
        dir.path(),
    );
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    assert_eq!(stdout(&out).trim(), "5");

    // Mismatched counts are a data error.
    write(
        dir.path(),
        "short.csv",
        "class_id,positivity,dim=2\n,,0,0\n,,1,1\n",
    );
    let out = distcal(
        &[
            "regloss",
            "--learner",
            "learner.csv",
            "--teacher",
            "short.csv",
        ],
        dir.path(),
    );
    assert_eq!(out.status.code(), Some(2));
}

const TINY_CONFIG: &str = "\
[world]
dim = 6
num_base = 5
num_novel = 2

[eval]
episodes = 2
queries_per_class = 3
base_stat_samples = 30
sc_stream_len = 20
";

#[test]
fn episode_writes_a_report_row() {
    let dir = tempfile::tempdir().unwrap();
    write(dir.path(), "tiny.toml", TINY_CONFIG);
    let out = distcal(
        &[
            "--config",
            "tiny.toml",
            "--seed",
            "3",
            "episode",
            "--method",
            "dc",
            "--shots",
            "1",
            "--out",
            "run",
        ],
        dir.path(),
    );
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    let report = std::fs::read_to_string(dir.path().join("run/report.csv")).unwrap();
    let lines: Vec<&str> = report.lines().collect();
    assert_eq!(
        lines[0],
        "method,shots,k,alpha,theta,lambda,episodes,accuracy,ci_low,ci_high"
    );
    assert!(
        lines[1].starts_with("dc,1,4,0.0001,0.9999,0.0001,2,"),
        "{}",
        lines[1]
    );
    // The same row echoes on stdout.
    assert_eq!(stdout(&out).trim(), lines[1]);
}

#[test]
fn config_precedence_flag_over_file_over_default() {
    let dir = tempfile::tempdir().unwrap();
    let with_k = format!("{TINY_CONFIG}\n[calibration]\nk = 3\n");
    write(dir.path(), "tiny.toml", TINY_CONFIG);
    write(dir.path(), "with_k.toml", &with_k);

    let k_of = |args: &[&str]| -> String {
        let out = distcal(args, dir.path());
        assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
        stdout(&out).trim().split(',').nth(2).unwrap().to_string()
    };

    // Default: k picked by shots (4 for one shot).
    let k_default = k_of(&[
        "--config",
        "tiny.toml",
        "episode",
        "--method",
        "dc",
        "--out",
        "a",
    ]);
    assert_eq!(k_default, "4");
    // Config file overrides the default.
    let k_file = k_of(&[
        "--config",
        "with_k.toml",
        "episode",
        "--method",
        "dc",
        "--out",
        "b",
    ]);
    assert_eq!(k_file, "3");
    // Flag overrides the file.
    let k_flag = k_of(&[
        "--config",
        "with_k.toml",
        "episode",
        "--method",
        "dc",
        "-k",
        "2",
        "--out",
        "c",
    ]);
    assert_eq!(k_flag, "2");
}

#[test]
fn ablate_and_report_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    write(dir.path(), "tiny.toml", TINY_CONFIG);
    let out = distcal(
        &[
            "--config",
            "tiny.toml",
            "--seed",
            "5",
            "ablate",
            "--sweep",
            "k",
            "--values",
            "1,2",
            "--shots",
            "1",
            "--out",
            "sweep",
        ],
        dir.path(),
    );
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    let csv = std::fs::read_to_string(dir.path().join("sweep/sweep_k.csv")).unwrap();
    assert_eq!(csv.lines().filter(|l| l.starts_with("dc,")).count(), 2);
    assert!(csv.contains("# shots=1 best_k="));

    // Merge the sweep with itself via both formats.
    let out = distcal(
        &[
            "report",
            "--inputs",
            "sweep/sweep_k.csv,sweep/sweep_k.csv",
            "--format",
            "json",
            "--out",
            "merged",
        ],
        dir.path(),
    );
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    let json = std::fs::read_to_string(dir.path().join("merged/merged.json")).unwrap();
    let rows: Vec<serde_json::Value> = serde_json::from_str(&json).unwrap();
    assert_eq!(rows.len(), 4);
    assert_eq!(rows[0]["method"], "dc");

    let out = distcal(
        &[
            "report",
            "--inputs",
            "merged/merged.json",
            "--out",
            "merged2",
        ],
        dir.path(),
    );
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    let csv2 = std::fs::read_to_string(dir.path().join("merged2/merged.csv")).unwrap();
    assert_eq!(csv2.lines().count(), 1 + 4);
}

#[test]
fn method_sweep_covers_the_ablation_table() {
    let dir = tempfile::tempdir().unwrap();
    write(dir.path(), "tiny.toml", TINY_CONFIG);
    let out = distcal(
        &[
            "--config",
            "tiny.toml",
            "ablate",
            "--sweep",
            "method",
            "--shots",
            "1",
            "--episodes",
            "1",
            "--out",
            "m",
        ],
        dir.path(),
    );
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    let csv = std::fs::read_to_string(dir.path().join("m/sweep_method.csv")).unwrap();
    for method in ["baseline", "dc", "dc_sc", "dr", "dc_dr"] {
        assert!(
            csv.lines().any(|l| l.starts_with(&format!("{method},"))),
            "missing {method} row in:\n{csv}"
        );
    }
}
