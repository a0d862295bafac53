//! Report tables on disk: CSV with the fixed header, or JSON with the same
//! fields as keys. `#`-prefixed CSV lines carry sweep notes and are skipped
//! on read.

use std::path::Path;

use distcal::harness::{ReportRow, SweepTable, REPORT_CSV_HEADER};

use crate::config::ReportFormat;
use crate::{CliError, CliResult};

pub fn render_rows_csv(rows: &[ReportRow], notes: &[String]) -> String {
    let mut out = String::from(REPORT_CSV_HEADER);
    out.push('\n');
    for row in rows {
        out.push_str(&row.to_csv_line());
        out.push('\n');
    }
    for note in notes {
        out.push_str("# ");
        out.push_str(note);
        out.push('\n');
    }
    out
}

pub fn render_rows(
    rows: &[ReportRow],
    notes: &[String],
    format: ReportFormat,
) -> CliResult<String> {
    match format {
        ReportFormat::Csv => Ok(render_rows_csv(rows, notes)),
        ReportFormat::Json => {
            let mut text = if notes.is_empty() {
                serde_json::to_string_pretty(rows)
            } else {
                serde_json::to_string_pretty(&serde_json::json!({
                    "rows": rows,
                    "notes": notes,
                }))
            }
            .map_err(|e| CliError::data(e.to_string()))?;
            text.push('\n');
            Ok(text)
        }
    }
}

pub fn write_rows(
    path: &Path,
    rows: &[ReportRow],
    notes: &[String],
    format: ReportFormat,
) -> CliResult<()> {
    let text = render_rows(rows, notes, format)?;
    std::fs::write(path, text).map_err(|e| CliError::data(format!("{}: {e}", path.display())))?;
    Ok(())
}

pub fn write_sweep(path: &Path, table: &SweepTable, format: ReportFormat) -> CliResult<()> {
    write_rows(path, &table.rows, &table.notes, format)
}

/// Reads rows back from a CSV or JSON report file (by extension).
pub fn read_rows(path: &Path) -> CliResult<Vec<ReportRow>> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::data(format!("{}: {e}", path.display())))?;
    if path.extension().is_some_and(|ext| ext == "json") {
        parse_rows_json(&text).map_err(|e| CliError::data(format!("{}: {e}", path.display())))
    } else {
        parse_rows_csv(&text).map_err(|e| CliError::data(format!("{}: {e}", path.display())))
    }
}

pub fn parse_rows_csv(text: &str) -> Result<Vec<ReportRow>, String> {
    let mut rows = Vec::new();
    for (index, line) in text.lines().enumerate() {
        let trimmed = line.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') || trimmed == REPORT_CSV_HEADER {
            continue;
        }
        let row =
            ReportRow::parse_csv_line(trimmed).map_err(|e| format!("line {}: {e}", index + 1))?;
        rows.push(row);
    }
    Ok(rows)
}

fn parse_rows_json(text: &str) -> Result<Vec<ReportRow>, String> {
    // Either a bare array of rows or {"rows": [...], "notes": [...]}.
    if let Ok(rows) = serde_json::from_str::<Vec<ReportRow>>(text) {
        return Ok(rows);
    }
    #[derive(serde::Deserialize)]
    struct Wrapped {
        rows: Vec<ReportRow>,
    }
    serde_json::from_str::<Wrapped>(text)
        .map(|w| w.rows)
        .map_err(|e| e.to_string())
}
