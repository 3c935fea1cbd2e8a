//! Result and report files. All writes are atomic.

use std::fs::File;
use std::io::{self, BufRead, BufReader};
use std::path::Path;

use super::report::RunReport;
use crate::disk_cache::write_atomic;
use crate::types::PipelineResult;

/// One JSON object per line, in input order.
pub fn results_to_jsonl(results: &[PipelineResult]) -> String {
    let mut out = String::new();
    for r in results {
        out.push_str(&serde_json::to_string(r).expect("results serialize"));
        out.push('\n');
    }
    out
}

pub fn write_results(path: &Path, results: &[PipelineResult]) -> io::Result<()> {
    write_atomic(path, results_to_jsonl(results).as_bytes())
}

pub fn read_results(path: &Path) -> io::Result<Vec<PipelineResult>> {
    let mut out = Vec::new();
    for (i, line) in BufReader::new(File::open(path)?).lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let r = serde_json::from_str(&line).map_err(|e| {
            io::Error::new(io::ErrorKind::InvalidData, format!("line {}: {e}", i + 1))
        })?;
        out.push(r);
    }
    Ok(out)
}

pub fn report_to_json(report: &RunReport) -> String {
    let mut s = serde_json::to_string_pretty(report).expect("report serializes");
    s.push('\n');
    s
}

pub fn write_report(path: &Path, report: &RunReport) -> io::Result<()> {
    write_atomic(path, report_to_json(report).as_bytes())
}

pub fn write_report_csv(path: &Path, report: &RunReport) -> io::Result<()> {
    write_atomic(path, report.qtype_action_csv().as_bytes())
}
