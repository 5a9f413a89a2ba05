//! JSON-lines and CSV writers. Column names here are part of the interface.

use std::io::Write;
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::error::HarnessError;
use crate::run::{RunRecord, Status};
use crate::sweep::SweepSummary;

pub const RECORD_COLUMNS: [&str; 21] = [
    "version",
    "name",
    "point",
    "status",
    "reason_code",
    "route",
    "activation",
    "target",
    "space",
    "seed",
    "budget",
    "width",
    "sup_error",
    "l2_error",
    "dict_size",
    "stage1_error",
    "stage2_error_sum",
    "total_estimate",
    "final_loss",
    "validation_size",
    "runtime_ms",
];

#[derive(Serialize)]
struct CsvRecord<'a> {
    version: &'a str,
    name: &'a str,
    point: usize,
    status: &'a str,
    reason_code: Option<&'a str>,
    route: &'a str,
    activation: &'a str,
    target: &'a str,
    space: &'a str,
    seed: u64,
    budget: Option<f64>,
    width: Option<usize>,
    sup_error: Option<f64>,
    l2_error: Option<f64>,
    dict_size: Option<usize>,
    stage1_error: Option<f64>,
    stage2_error_sum: Option<f64>,
    total_estimate: Option<f64>,
    final_loss: Option<f64>,
    validation_size: usize,
    runtime_ms: Option<f64>,
}

impl<'a> From<&'a RunRecord> for CsvRecord<'a> {
    fn from(r: &'a RunRecord) -> Self {
        let c = r.construct.as_ref();
        CsvRecord {
            version: &r.version,
            name: &r.name,
            point: r.point,
            status: match r.status {
                Status::Ok => "ok",
                Status::Failed => "failed",
            },
            reason_code: r.reason_code.as_deref(),
            route: match r.route {
                crate::config::RouteKind::Train => "train",
                crate::config::RouteKind::Construct => "construct",
            },
            activation: &r.activation,
            target: &r.target,
            space: &r.space,
            seed: r.seed,
            budget: r.budget,
            width: r.width,
            sup_error: r.sup_error,
            l2_error: r.l2_error,
            dict_size: c.map(|c| c.dict_size),
            stage1_error: c.map(|c| c.stage1_error),
            stage2_error_sum: c.map(|c| c.stage2_error_sum),
            total_estimate: c.map(|c| c.total_estimate),
            final_loss: r.train.as_ref().and_then(|t| t.final_loss),
            validation_size: r.validation_size,
            runtime_ms: r.runtime_ms,
        }
    }
}

pub fn jsonl(records: &[RunRecord]) -> Result<String, HarnessError> {
    let mut out = String::new();
    for r in records {
        out.push_str(&serde_json::to_string(r)?);
        out.push('\n');
    }
    Ok(out)
}

pub fn records_csv(records: &[RunRecord]) -> Result<String, HarnessError> {
    let mut w = csv::Writer::from_writer(Vec::new());
    if records.is_empty() {
        w.write_record(RECORD_COLUMNS)?;
    }
    for r in records {
        w.serialize(CsvRecord::from(r))?;
    }
    into_string(w)
}

pub fn summary_csv(summary: &SweepSummary) -> Result<String, HarnessError> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for row in &summary.rows {
        w.serialize(row)?;
    }
    into_string(w)
}

fn into_string(w: csv::Writer<Vec<u8>>) -> Result<String, HarnessError> {
    let bytes = w.into_inner().map_err(|e| HarnessError::Io(e.to_string()))?;
    String::from_utf8(bytes).map_err(|e| HarnessError::Io(e.to_string()))
}

/// `dir/stem.jsonl` becomes `dir/stem<suffix>`.
pub fn sibling(path: &Path, suffix: &str) -> PathBuf {
    let stem = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    path.with_file_name(format!("{stem}{suffix}"))
}

pub fn write_file(path: &Path, text: &str) -> Result<(), HarnessError> {
    if let Some(dir) = path.parent() {
        if !dir.as_os_str().is_empty() {
            std::fs::create_dir_all(dir)?;
        }
    }
    let mut f = std::fs::File::create(path)?;
    f.write_all(text.as_bytes())?;
    Ok(())
}
