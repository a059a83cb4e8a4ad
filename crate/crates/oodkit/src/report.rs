//! JSON and CSV report writers.

use std::fs;
use std::path::Path;

use oodkit_core::{EvalReport, GeometryReport, SweepRow};
use serde::Serialize;

use crate::CliError;

/// Column order of `report.csv`.
pub const EVAL_COLUMNS: [&str; 9] = [
    "method", "auroc", "aupr_in", "aupr_out", "fpr95", "fpr_mode", "lambda", "n_id", "n_ood",
];

pub const GEOMETRY_COLUMNS: [&str; 6] = [
    "dispersion_deg",
    "compactness_deg",
    "separability_deg",
    "classes",
    "n_id",
    "n_ood",
];

/// One ID-dataset / OOD-dataset / method triple.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EvalRecord {
    pub id_dataset: String,
    pub ood_dataset: String,
    #[serde(flatten)]
    pub report: EvalReport,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GeometryRecord {
    pub id_dataset: String,
    pub ood_dataset: String,
    #[serde(flatten)]
    pub report: GeometryReport,
}

fn fixed(v: f64) -> String {
    format!("{v:.6}")
}

fn io_err(path: &Path, e: impl std::fmt::Display) -> CliError {
    CliError::input(format!("{}: {e}", path.display()))
}

pub fn write_json<T: Serialize + ?Sized>(path: &Path, value: &T) -> Result<(), CliError> {
    let mut text = serde_json::to_string_pretty(value).map_err(|e| io_err(path, e))?;
    text.push('\n');
    fs::write(path, text).map_err(|e| io_err(path, e))
}

fn write_rows(
    path: &Path,
    header: &[&str],
    rows: impl IntoIterator<Item = Vec<String>>,
) -> Result<(), CliError> {
    let mut w = csv::Writer::from_path(path).map_err(|e| io_err(path, e))?;
    w.write_record(header).map_err(|e| io_err(path, e))?;
    for row in rows {
        w.write_record(&row).map_err(|e| io_err(path, e))?;
    }
    w.flush().map_err(|e| io_err(path, e))
}

pub fn eval_row(r: &EvalReport) -> Vec<String> {
    vec![
        r.method.name().to_string(),
        fixed(r.auroc),
        fixed(r.aupr_in),
        fixed(r.aupr_out),
        fixed(r.fpr95),
        r.fpr_mode.name().to_string(),
        fixed(r.lambda),
        r.n_id.to_string(),
        r.n_ood.to_string(),
    ]
}

pub fn write_eval_csv(path: &Path, records: &[EvalRecord]) -> Result<(), CliError> {
    write_rows(
        path,
        &EVAL_COLUMNS,
        records.iter().map(|r| eval_row(&r.report)),
    )
}

pub fn write_geometry_csv(path: &Path, r: &GeometryReport) -> Result<(), CliError> {
    let row = vec![
        r.dispersion_deg.map(fixed).unwrap_or_default(),
        fixed(r.compactness_deg),
        fixed(r.separability_deg),
        r.classes.to_string(),
        r.n_id.to_string(),
        r.n_ood.to_string(),
    ];
    write_rows(path, &GEOMETRY_COLUMNS, [row])
}

pub fn write_sweep_csv(path: &Path, rows: &[SweepRow]) -> Result<(), CliError> {
    write_rows(
        path,
        &["k", "auroc", "fpr95"],
        rows.iter()
            .map(|r| vec![r.k.to_string(), fixed(r.auroc), fixed(r.fpr95)]),
    )
}

/// Human-readable table for the terminal.
pub fn eval_table(records: &[EvalRecord]) -> String {
    let mut out = format!(
        "{:<8} {:>8} {:>8} {:>8} {:>8}  {}\n",
        "method", "AUROC", "AUPR-In", "AUPR-Out", "FPR95", "fpr-mode"
    );
    for r in records {
        let r = &r.report;
        out.push_str(&format!(
            "{:<8} {:>8.3} {:>8.3} {:>8.3} {:>8.3}  {}\n",
            r.method.name(),
            r.auroc,
            r.aupr_in,
            r.aupr_out,
            r.fpr95,
            r.fpr_mode
        ));
    }
    out
}
