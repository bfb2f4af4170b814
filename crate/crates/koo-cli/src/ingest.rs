//! Delimited-table ingestion: header + numeric body into a validated
//! dataset, with optional response log-transform and intercept column.

use std::path::Path;

use nalgebra::DMatrix;

use koo_core::{build_dataset, RegressionDataset};

use crate::error::{CliError, Result};
use crate::spec::ColumnSpec;

#[derive(Debug, Clone)]
pub struct IngestOptions {
    pub delimiter: u8,
    pub responses: ColumnSpec,
    pub predictors: ColumnSpec,
    /// Natural-log transform of every response (errors on values <= 0).
    pub log_responses: bool,
    /// Append an all-ones predictor column, marked always-keep.
    pub intercept: bool,
}

#[derive(Debug)]
pub struct IngestedDataset {
    pub dataset: RegressionDataset,
    pub response_names: Vec<String>,
    pub predictor_names: Vec<String>,
    /// 0-based indices into the predictor columns that bypass selection.
    pub always_keep: Vec<usize>,
}

fn is_missing(cell: &str) -> bool {
    let t = cell.trim();
    t.is_empty()
        || t.eq_ignore_ascii_case("na")
        || t.eq_ignore_ascii_case("n/a")
        || t.eq_ignore_ascii_case("nan")
        || t.eq_ignore_ascii_case("null")
}

/// Reads a delimited file (one header row, numeric body) and partitions the
/// selected columns into responses and predictors. Rows with missing values
/// are rejected, not imputed.
pub fn ingest_table(path: &Path, options: &IngestOptions) -> Result<IngestedDataset> {
    let mut reader = csv::ReaderBuilder::new()
        .delimiter(options.delimiter)
        .has_headers(true)
        .flexible(false)
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| match e.kind() {
            csv::ErrorKind::Io(_) => {
                CliError::Io(std::io::Error::other(e))
            }
            _ => CliError::Parse(e.to_string()),
        })?;
    let headers: Vec<String> = reader
        .headers()
        .map_err(|e| CliError::Parse(format!("bad header row: {e}")))?
        .iter()
        .map(|h| h.to_string())
        .collect();

    let response_cols = options.responses.resolve(&headers)?;
    let predictor_cols = options.predictors.resolve(&headers)?;
    if let Some(shared) = response_cols.iter().find(|c| predictor_cols.contains(c)) {
        return Err(CliError::Parse(format!(
            "column '{}' selected as both response and predictor",
            headers[*shared]
        )));
    }

    let mut rows: Vec<Vec<f64>> = Vec::new();
    let mut missing_rows: Vec<usize> = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let data_row = i + 1; // 1-based data row, header excluded
        let record = record.map_err(|e| match e.kind() {
            csv::ErrorKind::UnequalLengths { .. } => {
                CliError::Parse(format!("ragged row {data_row}: {e}"))
            }
            _ => CliError::Parse(format!("row {data_row}: {e}")),
        })?;
        let mut row = Vec::with_capacity(record.len());
        let mut missing = false;
        for (j, cell) in record.iter().enumerate() {
            if is_missing(cell) {
                missing = true;
                row.push(f64::NAN);
                continue;
            }
            match cell.parse::<f64>() {
                Ok(v) => row.push(v),
                Err(_) => {
                    return Err(CliError::Parse(format!(
                        "non-numeric cell '{cell}' at row {data_row}, column '{}'",
                        headers.get(j).map(String::as_str).unwrap_or("?")
                    )))
                }
            }
        }
        if missing {
            missing_rows.push(data_row);
        }
        rows.push(row);
    }
    if !missing_rows.is_empty() {
        return Err(CliError::Data(format!(
            "{} row(s) contain missing values and were rejected (rows: {})",
            missing_rows.len(),
            missing_rows
                .iter()
                .map(|r| r.to_string())
                .collect::<Vec<_>>()
                .join(", ")
        )));
    }
    if rows.is_empty() {
        return Err(CliError::Data("no data rows".to_string()));
    }

    let n = rows.len();
    let p = response_cols.len();
    let base_k = predictor_cols.len();
    let mut y = DMatrix::zeros(n, p);
    for (jj, &col) in response_cols.iter().enumerate() {
        for (i, row) in rows.iter().enumerate() {
            let mut v = row[col];
            if options.log_responses {
                if v <= 0.0 {
                    return Err(CliError::Core(koo_core::Error::Domain(format!(
                        "log transform needs positive responses; row {} column '{}' is {v}",
                        i + 1,
                        headers[col]
                    ))));
                }
                v = v.ln();
            }
            y[(i, jj)] = v;
        }
    }
    let k = base_k + usize::from(options.intercept);
    let mut x = DMatrix::zeros(n, k);
    for (jj, &col) in predictor_cols.iter().enumerate() {
        for (i, row) in rows.iter().enumerate() {
            x[(i, jj)] = row[col];
        }
    }
    let mut predictor_names: Vec<String> = predictor_cols
        .iter()
        .map(|&c| headers[c].clone())
        .collect();
    let mut always_keep = Vec::new();
    if options.intercept {
        for i in 0..n {
            x[(i, base_k)] = 1.0;
        }
        predictor_names.push("(intercept)".to_string());
        always_keep.push(base_k);
    }

    let dataset = build_dataset(y, x)?;
    Ok(IngestedDataset {
        dataset,
        response_names: response_cols.iter().map(|&c| headers[c].clone()).collect(),
        predictor_names,
        always_keep,
    })
}
