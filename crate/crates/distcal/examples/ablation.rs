//! Runs the full ablation table on the default synthetic world and prints
//! one report row per method.
//!
//! Run with: cargo run --release -p distcal --example ablation

use distcal::harness::{
    evaluate_named, generate_world, EvalSettings, MethodKind, MethodRegistry, WorldConfig,
    REPORT_CSV_HEADER,
};

fn main() {
    let world = generate_world(&WorldConfig::default()).unwrap();
    let registry = MethodRegistry::builtin();
    let settings = EvalSettings {
        episodes: 100,
        ..EvalSettings::for_shots(1)
    };

    println!("{REPORT_CSV_HEADER}");
    for kind in MethodKind::ablation() {
        let report = evaluate_named(&world, &registry, kind.as_str(), &settings).unwrap();
        println!("{}", report.to_row().to_csv_line());
    }
}
