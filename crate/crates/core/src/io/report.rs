//! Per-case evaluation records and their JSON / CSV serialisation.
//!
//! Numbers are written with six decimal digits so reports diff cleanly.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Scalar metric columns, in CSV order.
pub const SCALAR_COLUMNS: [&str; 4] = ["clDice", "DSC", "IoU", "NSD"];

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    pub delta: f64,
    /// `None` marks an undefined value.
    pub value: Option<f64>,
}

/// One evaluated case: named scalar metrics plus Area/Length dilation curves.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportRecord {
    pub case_id: String,
    pub metrics: BTreeMap<String, Option<f64>>,
    pub area_curve: Vec<CurvePoint>,
    pub length_curve: Vec<CurvePoint>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ReportFormat {
    #[default]
    Json,
    Csv,
}

/// Rounds to six decimal places, the precision of every written report.
pub fn round6(v: f64) -> f64 {
    (v * 1e6).round() / 1e6
}

fn fmt6(v: Option<f64>) -> String {
    v.map(|v| format!("{v:.6}")).unwrap_or_default()
}

/// `1` for whole numbers, otherwise the shortest decimal form (`1.5`).
pub fn delta_label(delta: f64) -> String {
    if delta.fract() == 0.0 && delta.abs() < 1e15 {
        format!("{}", delta as i64)
    } else {
        format!("{delta}")
    }
}

impl ReportRecord {
    fn rounded(&self) -> ReportRecord {
        let round_opt = |v: Option<f64>| v.map(round6);
        let curve = |c: &[CurvePoint]| {
            c.iter()
                .map(|p| CurvePoint {
                    delta: p.delta,
                    value: round_opt(p.value),
                })
                .collect()
        };
        ReportRecord {
            case_id: self.case_id.clone(),
            metrics: self
                .metrics
                .iter()
                .map(|(k, &v)| (k.clone(), round_opt(v)))
                .collect(),
            area_curve: curve(&self.area_curve),
            length_curve: curve(&self.length_curve),
        }
    }
}

fn csv_error(e: impl std::fmt::Display) -> Error {
    Error::Io(e.to_string())
}

pub fn write_report(records: &[ReportRecord], format: ReportFormat) -> Result<Vec<u8>> {
    if records.is_empty() {
        return Err(Error::EmptyInput);
    }
    match format {
        ReportFormat::Json => {
            let rounded: Vec<_> = records.iter().map(ReportRecord::rounded).collect();
            let mut out = serde_json::to_vec_pretty(&rounded).map_err(csv_error)?;
            out.push(b'\n');
            Ok(out)
        }
        ReportFormat::Csv => write_csv(records),
    }
}

fn write_csv(records: &[ReportRecord]) -> Result<Vec<u8>> {
    let deltas: Vec<f64> = records[0].area_curve.iter().map(|p| p.delta).collect();
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(Vec::new());

    let mut header = vec!["case_id".to_string()];
    header.extend(SCALAR_COLUMNS.iter().map(|s| s.to_string()));
    for &d in &deltas {
        header.push(format!("Area_d{}", delta_label(d)));
        header.push(format!("Length_d{}", delta_label(d)));
    }
    w.write_record(&header).map_err(csv_error)?;

    for r in records {
        let lookup = |curve: &[CurvePoint], d: f64| {
            curve.iter().find(|p| p.delta == d).and_then(|p| p.value)
        };
        let mut row = vec![r.case_id.clone()];
        row.extend(
            SCALAR_COLUMNS
                .iter()
                .map(|k| fmt6(r.metrics.get(*k).copied().flatten())),
        );
        for &d in &deltas {
            row.push(fmt6(lookup(&r.area_curve, d)));
            row.push(fmt6(lookup(&r.length_curve, d)));
        }
        w.write_record(&row).map_err(csv_error)?;
    }
    w.into_inner().map_err(csv_error)
}

pub fn parse_report_json(bytes: &[u8]) -> Result<Vec<ReportRecord>> {
    serde_json::from_slice(bytes).map_err(|e| Error::SchemaError(e.to_string()))
}
