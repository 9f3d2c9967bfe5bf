//! CSV ingestion with mean imputation of missing cells.

use std::collections::BTreeMap;
use std::path::Path;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::Dataset;

pub const DEFAULT_MISSING: [&str; 2] = ["", "NA"];

#[derive(Debug, Clone)]
pub struct Ingested {
    pub dataset: Dataset,
    pub response: String,
    /// Predictor names that survived rank repair, in column order.
    pub predictors: Vec<String>,
    pub dropped: Vec<String>,
    /// Imputed cell count per column; columns without gaps are absent.
    pub imputed: BTreeMap<String, usize>,
}

/// Summary of ingestion for the report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IngestSummary {
    pub path: String,
    pub rows: usize,
    pub response: String,
    pub predictors: Vec<String>,
    pub dropped: Vec<String>,
    pub imputed: BTreeMap<String, usize>,
    pub centered: bool,
}

impl Ingested {
    pub fn summary(&self, path: &Path) -> IngestSummary {
        IngestSummary {
            path: path.display().to_string(),
            rows: self.dataset.n(),
            response: self.response.clone(),
            predictors: self.predictors.clone(),
            dropped: self.dropped.clone(),
            imputed: self.imputed.clone(),
            centered: self.dataset.centered,
        }
    }
}

/// Resolve `response` as a header name first, then as a 0-based column index.
fn response_index(headers: &[String], response: &str) -> Result<usize> {
    if let Some(i) = headers.iter().position(|h| h == response) {
        return Ok(i);
    }
    match response.parse::<usize>() {
        Ok(i) if i < headers.len() => Ok(i),
        _ => Err(Error::Config(format!(
            "response column '{response}' not found (columns: {})",
            headers.join(", ")
        ))),
    }
}

pub fn ingest_csv(path: &Path, response: &str, center: bool, missing: &[String]) -> Result<Ingested> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_path(path)
        .map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
    let headers: Vec<String> = reader
        .headers()
        .map_err(|e| Error::Io(format!("{}: {e}", path.display())))?
        .iter()
        .map(|h| h.trim().to_string())
        .collect();
    let target = response_index(&headers, response)?;
    if headers.len() < 2 {
        return Err(Error::Config(
            "need a response and at least one predictor column".into(),
        ));
    }

    // Column-major cells; `None` marks a missing token.
    let mut columns: Vec<Vec<Option<f64>>> = vec![Vec::new(); headers.len()];
    for (i, record) in reader.records().enumerate() {
        // Row numbers are 1-based data rows, matching a spreadsheet view below the header.
        let row = i + 1;
        let record = record.map_err(|e| Error::Parse {
            row,
            column: String::new(),
            message: e.to_string(),
        })?;
        for (j, cell) in record.iter().enumerate() {
            let cell = cell.trim();
            let value = if missing.iter().any(|m| m == cell) {
                None
            } else {
                let v: f64 = cell.parse().map_err(|_| Error::Parse {
                    row,
                    column: headers[j].clone(),
                    message: format!("'{cell}' is not a number or a missing-value token"),
                })?;
                if !v.is_finite() {
                    return Err(Error::Parse {
                        row,
                        column: headers[j].clone(),
                        message: format!("'{cell}' is not finite"),
                    });
                }
                Some(v)
            };
            columns[j].push(value);
        }
    }

    let rows = columns[0].len();
    let mut imputed = BTreeMap::new();
    let mut filled: Vec<Vec<f64>> = Vec::with_capacity(columns.len());
    for (name, col) in headers.iter().zip(&columns) {
        let observed: Vec<f64> = col.iter().flatten().copied().collect();
        let gaps = rows - observed.len();
        if gaps > 0 {
            if observed.is_empty() {
                return Err(Error::Config(format!("column '{name}' has no observed values")));
            }
            imputed.insert(name.clone(), gaps);
        }
        let mean = observed.iter().sum::<f64>() / observed.len().max(1) as f64;
        filled.push(col.iter().map(|v| v.unwrap_or(mean)).collect());
    }

    let y = DVector::from_vec(filled[target].clone());
    let predictor_idx: Vec<usize> = (0..headers.len()).filter(|&j| j != target).collect();
    let x = DMatrix::from_fn(rows, predictor_idx.len(), |i, k| filled[predictor_idx[k]][i]);
    let dataset = Dataset::prepare(y, x, center)?;

    let dropped: Vec<String> = dataset
        .dropped_columns
        .iter()
        .map(|&k| headers[predictor_idx[k]].clone())
        .collect();
    let predictors = predictor_idx
        .iter()
        .enumerate()
        .filter(|(k, _)| !dataset.dropped_columns.contains(k))
        .map(|(_, &j)| headers[j].clone())
        .collect();
    Ok(Ingested {
        dataset,
        response: headers[target].clone(),
        predictors,
        dropped,
        imputed,
    })
}
