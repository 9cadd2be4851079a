//! Feature and dataset tables as delimited text. Missing values are empty
//! cells; numbers use the shortest representation that parses back exactly.

use std::path::Path;

use chrono::NaiveDate;

use super::PipelineError;
use crate::dataset::{Horizon, LabeledExample};
use crate::features::FeatureRow;

pub(crate) fn fmt_opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

fn bad(path: &Path, message: String) -> PipelineError {
    PipelineError::Artifact {
        path: path.to_path_buf(),
        message,
    }
}

fn csv_bytes(header: Vec<String>, records: impl Iterator<Item = Vec<String>>) -> Vec<u8> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(&header).expect("in-memory write");
    for r in records {
        w.write_record(&r).expect("in-memory write");
    }
    w.into_inner().expect("in-memory flush")
}

pub(crate) fn feature_csv(columns: &[String], rows: &[FeatureRow]) -> Vec<u8> {
    let header = ["symbol", "as_of"].iter().map(|s| s.to_string()).chain(columns.iter().cloned()).collect();
    csv_bytes(
        header,
        rows.iter().map(|r| {
            [r.symbol.clone(), r.as_of.to_string()]
                .into_iter()
                .chain(r.values.iter().map(|v| fmt_opt(*v)))
                .collect()
        }),
    )
}

pub(crate) fn labeled_csv(columns: &[String], rows: &[LabeledExample]) -> Vec<u8> {
    let header = ["symbol", "as_of", "label", "realized_stock_return", "fi_benchmark_return"]
        .iter()
        .map(|s| s.to_string())
        .chain(columns.iter().cloned())
        .collect();
    csv_bytes(
        header,
        rows.iter().map(|r| {
            [
                r.row.symbol.clone(),
                r.row.as_of.to_string(),
                r.label.to_string(),
                r.realized_stock_return.to_string(),
                r.fi_benchmark_return.to_string(),
            ]
            .into_iter()
            .chain(r.row.values.iter().map(|v| fmt_opt(*v)))
            .collect()
        }),
    )
}

fn read_records(path: &Path) -> Result<(Vec<String>, Vec<csv::StringRecord>), PipelineError> {
    let mut r = csv::Reader::from_path(path).map_err(|e| bad(path, e.to_string()))?;
    let header: Vec<String> = r.headers().map_err(|e| bad(path, e.to_string()))?.iter().map(String::from).collect();
    let records = r
        .records()
        .collect::<Result<Vec<_>, _>>()
        .map_err(|e| bad(path, e.to_string()))?;
    Ok((header, records))
}

fn parse_f64(path: &Path, s: &str) -> Result<f64, PipelineError> {
    s.parse().map_err(|_| bad(path, format!("not a number: {s:?}")))
}

fn parse_opt(path: &Path, s: &str) -> Result<Option<f64>, PipelineError> {
    if s.is_empty() {
        Ok(None)
    } else {
        parse_f64(path, s).map(Some)
    }
}

fn parse_date(path: &Path, s: &str) -> Result<NaiveDate, PipelineError> {
    s.parse().map_err(|_| bad(path, format!("not a date: {s:?}")))
}

fn parse_row(path: &Path, rec: &csv::StringRecord, meta: usize) -> Result<FeatureRow, PipelineError> {
    Ok(FeatureRow {
        symbol: rec[0].to_string(),
        as_of: parse_date(path, &rec[1])?,
        values: rec.iter().skip(meta).map(|v| parse_opt(path, v)).collect::<Result<_, _>>()?,
    })
}

/// Columns and rows of a feature table.
pub fn read_feature_csv(path: &Path) -> Result<(Vec<String>, Vec<FeatureRow>), PipelineError> {
    let (header, records) = read_records(path)?;
    if header.len() < 2 || header[0] != "symbol" || header[1] != "as_of" {
        return Err(bad(path, "expected symbol,as_of,... header".into()));
    }
    let rows = records.iter().map(|r| parse_row(path, r, 2)).collect::<Result<_, _>>()?;
    Ok((header[2..].to_vec(), rows))
}

/// Columns and examples of a labeled train or test table.
pub fn read_labeled_csv(path: &Path, horizon: Horizon) -> Result<(Vec<String>, Vec<LabeledExample>), PipelineError> {
    let (header, records) = read_records(path)?;
    if header.len() < 5 || header[2] != "label" {
        return Err(bad(path, "expected symbol,as_of,label,... header".into()));
    }
    let rows = records
        .iter()
        .map(|r| {
            let label: u8 = r[2].parse().map_err(|_| bad(path, format!("bad label {:?}", &r[2])))?;
            Ok(LabeledExample {
                row: parse_row(path, r, 5)?,
                horizon,
                label,
                realized_stock_return: parse_f64(path, &r[3])?,
                fi_benchmark_return: parse_f64(path, &r[4])?,
            })
        })
        .collect::<Result<_, PipelineError>>()?;
    Ok((header[5..].to_vec(), rows))
}
