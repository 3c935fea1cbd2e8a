//! Attribution export: a JSON array of samples plus a CSV matrix (one row
//! per sample, one column per token position) for heatmap plotting.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::{Attribution, AttributionError, Method};
use crate::disk_cache::write_atomic;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttributionSample {
    pub question: String,
    pub document: String,
    pub tokens: Vec<String>,
    pub values: Vec<f64>,
    pub full_value: f64,
    pub base_value: f64,
    pub method: Method,
}

impl AttributionSample {
    pub fn new(question: &str, document: &str, tokens: Vec<String>, a: Attribution) -> Self {
        Self {
            question: question.to_string(),
            document: document.to_string(),
            tokens,
            values: a.values,
            full_value: a.full_value,
            base_value: a.base_value,
            method: a.method,
        }
    }
}

/// Rows are samples, columns token positions; short rows are padded with
/// empty cells.
pub fn attributions_csv(samples: &[AttributionSample]) -> String {
    let width = samples.iter().map(|s| s.values.len()).max().unwrap_or(0);
    let mut out = String::from("sample");
    for i in 0..width {
        let _ = write!(out, ",pos{i}");
    }
    out.push('\n');
    for (row, s) in samples.iter().enumerate() {
        let _ = write!(out, "{row}");
        for i in 0..width {
            match s.values.get(i) {
                Some(v) => {
                    let _ = write!(out, ",{v}");
                }
                None => out.push(','),
            }
        }
        out.push('\n');
    }
    out
}

/// Writes `out_path` (JSON) and a sibling `.csv`; returns the CSV path.
pub fn export_attributions(
    samples: &[AttributionSample],
    out_path: &Path,
) -> Result<PathBuf, AttributionError> {
    let mut json = serde_json::to_string_pretty(samples).map_err(std::io::Error::other)?;
    json.push('\n');
    write_atomic(out_path, json.as_bytes())?;
    let csv_path = out_path.with_extension("csv");
    write_atomic(&csv_path, attributions_csv(samples).as_bytes())?;
    Ok(csv_path)
}
