//! Hyperparameter sweeps over the calibration arm: the neighbor count k per
//! shot setting, and the dispersion constant α. Results are plain report
//! rows plus free-form notes; observed optima are reported, not asserted.

use crate::error::Result;

use super::evaluate::{evaluate_method, EvalSettings, ReportRow, REPORT_CSV_HEADER};
use super::methods::{MethodKind, MethodRegistry};
use super::world::World;

/// Report rows plus commentary emitted as `#`-prefixed CSV lines.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepTable {
    pub rows: Vec<ReportRow>,
    pub notes: Vec<String>,
}

impl SweepTable {
    pub fn to_csv(&self) -> String {
        let mut out = String::from(REPORT_CSV_HEADER);
        out.push('\n');
        for row in &self.rows {
            out.push_str(&row.to_csv_line());
            out.push('\n');
        }
        for note in &self.notes {
            out.push_str("# ");
            out.push_str(note);
            out.push('\n');
        }
        out
    }
}

fn best_row(rows: &[ReportRow]) -> &ReportRow {
    rows.iter()
        .max_by(|a, b| {
            a.accuracy
                .partial_cmp(&b.accuracy)
                .expect("finite accuracy")
        })
        .expect("non-empty sweep")
}

/// Accuracy of the calibration arm per (k, shots) cell.
pub fn sweep_k(
    world: &World,
    k_values: &[usize],
    shots_list: &[usize],
    base: &EvalSettings,
) -> Result<SweepTable> {
    let method = MethodRegistry::builtin().get_kind(MethodKind::Dc);
    let mut rows = Vec::new();
    let mut notes = Vec::new();
    for &shots in shots_list {
        let mut shot_rows = Vec::new();
        for &k in k_values {
            let mut settings = *base;
            settings.shots = shots;
            settings.calib.k = k;
            let report = evaluate_method(world, method.as_ref(), &settings)?;
            shot_rows.push(report.to_row());
        }
        let best = best_row(&shot_rows);
        notes.push(format!(
            "shots={} best_k={} accuracy={}",
            shots, best.k, best.accuracy
        ));
        rows.extend(shot_rows);
    }
    Ok(SweepTable { rows, notes })
}

/// Accuracy of the calibration arm per α, with the qualitative-shape flag:
/// whether the best α sits strictly between the sweep endpoints.
pub fn sweep_alpha(world: &World, alpha_values: &[f64], base: &EvalSettings) -> Result<SweepTable> {
    let method = MethodRegistry::builtin().get_kind(MethodKind::Dc);
    let mut rows = Vec::new();
    for &alpha in alpha_values {
        let mut settings = *base;
        settings.calib.alpha = alpha;
        let report = evaluate_method(world, method.as_ref(), &settings)?;
        rows.push(report.to_row());
    }

    let best = best_row(&rows);
    let interior = rows.len() >= 3
        && best.alpha != rows.first().unwrap().alpha
        && best.alpha != rows.last().unwrap().alpha;
    let mut notes = vec![
        format!("best_alpha={} accuracy={}", best.alpha, best.accuracy),
        format!("alpha_optimum_interior={interior}"),
    ];
    if let (Some(first), Some(last)) = (rows.first(), rows.last()) {
        if last.accuracy < best.accuracy {
            notes.push(format!(
                "high_alpha_damages_performance: accuracy {} at alpha={} vs best {}",
                last.accuracy, last.alpha, best.accuracy
            ));
        }
        if first.accuracy < best.accuracy {
            notes.push(format!(
                "dispersion_helps: accuracy {} at alpha={} vs best {}",
                first.accuracy, first.alpha, best.accuracy
            ));
        }
    }
    Ok(SweepTable { rows, notes })
}

/// One row per ablation arm at fixed settings.
pub fn sweep_methods(
    world: &World,
    kinds: &[MethodKind],
    base: &EvalSettings,
) -> Result<SweepTable> {
    let registry = MethodRegistry::builtin();
    let mut rows = Vec::new();
    for kind in kinds {
        let method = registry.get_kind(*kind);
        let report = evaluate_method(world, method.as_ref(), base)?;
        rows.push(report.to_row());
    }
    Ok(SweepTable {
        rows,
        notes: Vec::new(),
    })
}
