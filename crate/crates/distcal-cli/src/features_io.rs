//! The feature file format.
//!
//! UTF-8 CSV with a mandatory header `class_id,positivity,dim=<d>` and one
//! row per feature: `class_id,positivity,v0,...,v{d-1}`. The class id and
//! positivity fields may be empty. Values print in shortest round-trip
//! form, so write → read reproduces features exactly.

use std::path::Path;

use distcal::FeatureVector;

use crate::{CliError, CliResult};

/// Parses a feature file, validating every row against the header's `dim`.
pub fn read_features(path: &Path) -> CliResult<Vec<FeatureVector>> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::data(format!("{}: {e}", path.display())))?;
    parse_features(&text).map_err(|e| CliError::data(format!("{}: {e}", path.display())))
}

fn parse_features(text: &str) -> Result<Vec<FeatureVector>, String> {
    let mut lines = text.lines().enumerate();
    let (_, header) = lines.next().ok_or("empty file")?;
    let dim = parse_header(header)?;

    let mut features = Vec::new();
    for (index, line) in lines {
        let line_no = index + 1;
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != dim + 2 {
            return Err(format!(
                "line {line_no}: expected {} fields for dim={dim}, got {}",
                dim + 2,
                fields.len()
            ));
        }
        let class_id = match fields[0] {
            "" => None,
            raw => Some(
                raw.parse::<u32>()
                    .map_err(|_| format!("line {line_no}: bad class_id `{raw}`"))?,
            ),
        };
        let positivity = match fields[1] {
            "" => None,
            raw => Some(
                raw.parse::<f64>()
                    .map_err(|_| format!("line {line_no}: bad positivity `{raw}`"))?,
            ),
        };
        let values = fields[2..]
            .iter()
            .map(|raw| {
                raw.parse::<f64>()
                    .map_err(|_| format!("line {line_no}: bad value `{raw}`"))
            })
            .collect::<Result<Vec<f64>, String>>()?;

        let mut feature = FeatureVector::new(values).map_err(|e| format!("line {line_no}: {e}"))?;
        if let Some(id) = class_id {
            feature = feature.with_class(id);
        }
        if let Some(p) = positivity {
            feature = feature
                .with_positivity(p)
                .map_err(|e| format!("line {line_no}: {e}"))?;
        }
        features.push(feature);
    }
    Ok(features)
}

fn parse_header(header: &str) -> Result<usize, String> {
    let fields: Vec<&str> = header.split(',').collect();
    if fields.len() != 3 || fields[0] != "class_id" || fields[1] != "positivity" {
        return Err(format!(
            "bad header `{header}` (expected `class_id,positivity,dim=<d>`)"
        ));
    }
    let dim_field = fields[2]
        .strip_prefix("dim=")
        .ok_or_else(|| format!("bad header `{header}` (missing `dim=<d>`)"))?;
    let dim: usize = dim_field
        .parse()
        .map_err(|_| format!("bad dimension `{dim_field}`"))?;
    if dim == 0 {
        return Err("dimension must be positive".into());
    }
    Ok(dim)
}

/// Renders features in the file format; all must share the dimension.
pub fn render_features(features: &[FeatureVector], dim: usize) -> CliResult<String> {
    let mut out = format!("class_id,positivity,dim={dim}\n");
    for (index, feature) in features.iter().enumerate() {
        if feature.dim() != dim {
            return Err(CliError::data(format!(
                "feature {index} has dimension {}, expected {dim}",
                feature.dim()
            )));
        }
        let class = feature.class_id.map(|c| c.to_string()).unwrap_or_default();
        let positivity = feature
            .positivity
            .map(|p| p.to_string())
            .unwrap_or_default();
        let values: Vec<String> = feature.values.iter().map(f64::to_string).collect();
        out.push_str(&class);
        out.push(',');
        out.push_str(&positivity);
        out.push(',');
        out.push_str(&values.join(","));
        out.push('\n');
    }
    Ok(out)
}

pub fn write_features(path: &Path, features: &[FeatureVector], dim: usize) -> CliResult<()> {
    let text = render_features(features, dim)?;
    std::fs::write(path, text).map_err(|e| CliError::data(format!("{}: {e}", path.display())))?;
    Ok(())
}
