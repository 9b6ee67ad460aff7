//! CSV ingestion with optional column standardization.

use std::collections::HashSet;
use std::io::Read;
use std::path::Path;

use serde::Serialize;

use mindex::Dataset;

use crate::error::{CliError, Result};

/// Which columns play which role, and which get rescaled.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Schema {
    pub y_column: String,
    pub x0_column: String,
    /// Empty means every remaining column, in file order.
    pub covariate_columns: Vec<String>,
    /// `(a - mean) / std`.
    pub standardize: Vec<String>,
    /// `-(a - mean) / std`, for variables whose sign must be flipped so that
    /// the normalized coefficient is positive.
    pub negate_standardize: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TransformSummary {
    pub column: String,
    pub mean: f64,
    pub std: f64,
    pub negated: bool,
}

#[derive(Debug, Clone)]
pub struct Ingested {
    pub dataset: Dataset<f64>,
    pub covariates: Vec<String>,
    pub transforms: Vec<TransformSummary>,
}

pub fn ingest_csv(path: &Path, schema: &Schema) -> Result<Ingested> {
    let file = std::fs::File::open(path).map_err(|e| CliError::io(path, e))?;
    ingest_reader(file, schema)
}

pub fn ingest_reader<R: Read>(reader: R, schema: &Schema) -> Result<Ingested> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).trim(csv::Trim::All).from_reader(reader);
    let header: Vec<String> = rdr
        .headers()
        .map_err(|e| CliError::Schema(format!("cannot read header row: {e}")))?
        .iter()
        .map(str::to_owned)
        .collect();
    let find = |name: &str| {
        header.iter().position(|h| h == name).ok_or_else(|| CliError::Schema(format!("no column named '{name}'")))
    };
    let y_at = find(&schema.y_column)?;
    let x0_at = find(&schema.x0_column)?;
    let covariates: Vec<String> = if schema.covariate_columns.is_empty() {
        header.iter().filter(|h| **h != schema.y_column && **h != schema.x0_column).cloned().collect()
    } else {
        schema.covariate_columns.clone()
    };
    if covariates.is_empty() {
        return Err(CliError::Schema("at least one covariate column is required".into()));
    }
    let cov_at = covariates.iter().map(|c| find(c)).collect::<Result<Vec<_>>>()?;
    let mut seen = HashSet::new();
    for c in std::iter::once(&schema.y_column).chain([&schema.x0_column]).chain(&covariates) {
        if !seen.insert(c) {
            return Err(CliError::Schema(format!("column '{c}' is used more than once")));
        }
    }

    let p = covariates.len();
    let (mut y, mut x0, mut x) = (Vec::new(), Vec::new(), Vec::new());
    for (r, rec) in rdr.records().enumerate() {
        // Row numbers count the header as row 1.
        let row = r + 2;
        let rec = rec.map_err(|e| CliError::Parse { row, column: String::new(), message: e.to_string() })?;
        let cell = |at: usize| -> Result<f64> {
            let raw = rec.get(at).unwrap_or("");
            raw.parse::<f64>().ok().filter(|v| v.is_finite()).ok_or_else(|| CliError::Parse {
                row,
                column: header[at].clone(),
                message: format!("'{raw}' is not a finite number"),
            })
        };
        let yv = cell(y_at)?;
        if yv != 0.0 && yv != 1.0 {
            return Err(CliError::Schema(format!("row {row}: outcome '{}' must be 0 or 1, got {yv}", schema.y_column)));
        }
        y.push(yv);
        x0.push(cell(x0_at)?);
        for &at in &cov_at {
            x.push(cell(at)?);
        }
    }
    let n = y.len();
    if n < 2 {
        return Err(CliError::Schema(format!("need at least two data rows, found {n}")));
    }

    let mut transforms = Vec::new();
    let both: HashSet<&String> = schema.standardize.iter().collect();
    for (name, negated) in schema
        .standardize
        .iter()
        .map(|c| (c, false))
        .chain(schema.negate_standardize.iter().map(|c| (c, true)))
    {
        if negated && both.contains(name) {
            return Err(CliError::Usage(format!("column '{name}' is both standardized and negate-standardized")));
        }
        let cells: Vec<&mut f64> = if *name == schema.x0_column {
            x0.iter_mut().collect()
        } else if let Some(j) = covariates.iter().position(|c| c == name) {
            x.iter_mut().skip(j).step_by(p).collect()
        } else {
            return Err(CliError::Usage(format!("cannot transform '{name}': not an index column")));
        };
        let summary = standardize(name, cells, negated)?;
        transforms.push(summary);
    }

    let dataset = Dataset::new(x0, x, y, p)?;
    Ok(Ingested { dataset, covariates, transforms })
}

/// Rescales the cells in place with the full-column mean and sample std.
fn standardize(name: &str, mut cells: Vec<&mut f64>, negated: bool) -> Result<TransformSummary> {
    let n = cells.len() as f64;
    let mean = cells.iter().map(|v| **v).sum::<f64>() / n;
    let std = (cells.iter().map(|v| (**v - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt();
    if !(std > 0.0) {
        return Err(CliError::Degenerate(format!("column '{name}' has zero standard deviation")));
    }
    let sign = if negated { -1.0 } else { 1.0 };
    for v in cells.iter_mut() {
        **v = sign * (**v - mean) / std;
    }
    Ok(TransformSummary { column: name.to_owned(), mean, std, negated })
}
