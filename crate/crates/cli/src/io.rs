//! CSV input and output.

use std::fs::File;
use std::path::Path;

use bnn_core::Dataset;
use nalgebra::DMatrix;

use crate::error::{CliError, CliResult};

/// Column name that marks an optional leading label column.
pub const LABEL_COLUMN: &str = "period";

fn reader(path: &Path) -> CliResult<csv::Reader<File>> {
    let file = File::open(path).map_err(|e| CliError::read(path, e))?;
    Ok(csv::ReaderBuilder::new().has_headers(true).trim(csv::Trim::All).from_reader(file))
}

pub fn writer(path: &Path) -> CliResult<csv::Writer<File>> {
    let file = File::create(path).map_err(|e| CliError::write(path, e))?;
    Ok(csv::Writer::from_writer(file))
}

fn csv_err(path: &Path, e: csv::Error) -> CliError {
    CliError::Data(format!("{}: {e}", path.display()))
}

/// Numeric table with an optional leading label column.
pub struct Table {
    pub columns: Vec<String>,
    pub labels: Option<Vec<String>>,
    pub rows: Vec<Vec<f64>>,
}

/// Reads a headed CSV of numbers. A header that parses as numbers is taken
/// as a missing header.
pub fn read_table(path: &Path) -> CliResult<Table> {
    let mut rdr = reader(path)?;
    let header = rdr.headers().map_err(|e| csv_err(path, e))?.clone();
    if header.is_empty() {
        return Err(CliError::Data(format!("{}: empty file", path.display())));
    }
    if header.iter().any(|h| h.parse::<f64>().is_ok()) {
        return Err(CliError::Data(format!(
            "{}: header row missing (first row is numeric)",
            path.display()
        )));
    }
    let has_labels = header.get(0) == Some(LABEL_COLUMN);
    let columns: Vec<String> = header.iter().skip(has_labels as usize).map(str::to_string).collect();
    let mut labels = has_labels.then(Vec::new);
    let mut rows = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(|e| csv_err(path, e))?;
        let line = i + 2;
        if rec.len() != header.len() {
            return Err(CliError::Data(format!(
                "{}: row {line} has {} fields, header has {}",
                path.display(),
                rec.len(),
                header.len()
            )));
        }
        let mut fields = rec.iter();
        if let Some(l) = labels.as_mut() {
            l.push(fields.next().unwrap_or_default().to_string());
        }
        let row = fields
            .zip(&columns)
            .map(|(f, name)| {
                f.parse::<f64>().map_err(|_| {
                    CliError::Data(format!("{}: row {line}, column {name}: '{f}' is not a number", path.display()))
                })
            })
            .collect::<CliResult<Vec<f64>>>()?;
        rows.push(row);
    }
    if rows.is_empty() {
        return Err(CliError::Data(format!("{}: no data rows", path.display())));
    }
    Ok(Table { columns, labels, rows })
}

/// Response in the first numeric column, covariates in the rest.
pub fn read_dataset(path: &Path) -> CliResult<Dataset> {
    let table = read_table(path)?;
    if table.columns.len() < 2 {
        return Err(CliError::Data(format!(
            "{}: need a response column and at least one covariate, found {} column(s)",
            path.display(),
            table.columns.len()
        )));
    }
    let k = table.columns.len() - 1;
    let y: Vec<f64> = table.rows.iter().map(|r| r[0]).collect();
    let x = DMatrix::from_fn(table.rows.len(), k, |i, j| table.rows[i][j + 1]);
    let data = Dataset::new(y, x)?;
    Ok(match table.labels {
        Some(l) => data.with_labels(l)?,
        None => data,
    })
}

/// Covariate rows for forecasting; the width must equal `k`.
pub fn read_covariates(path: &Path, k: usize) -> CliResult<Table> {
    let table = read_table(path)?;
    if table.columns.len() != k {
        return Err(CliError::Data(format!(
            "{}: {} covariate columns, the fitted model has {k}",
            path.display(),
            table.columns.len()
        )));
    }
    Ok(table)
}

/// Realized values: the column named `y`, or the first numeric column.
pub fn read_realized(path: &Path) -> CliResult<Vec<f64>> {
    let table = read_table(path)?;
    let col = table.columns.iter().position(|c| c == "y").unwrap_or(0);
    Ok(table.rows.iter().map(|r| r[col]).collect())
}

/// Writes `data` as `y,x1..xK` (plus the label column when it has labels).
pub fn write_dataset(path: &Path, data: &Dataset, with_labels: bool) -> CliResult<()> {
    let mut w = writer(path)?;
    let k = data.n_covariates();
    let mut header: Vec<String> = Vec::new();
    if with_labels {
        header.push(LABEL_COLUMN.into());
    }
    header.push("y".into());
    header.extend((1..=k).map(|j| format!("x{j}")));
    w.write_record(&header).map_err(|e| csv_err(path, e))?;
    for t in 0..data.len() {
        let mut rec: Vec<String> = Vec::with_capacity(k + 2);
        if with_labels {
            rec.push(data.label(t));
        }
        rec.push(fmt(data.y[t]));
        rec.extend(data.row(t).into_iter().map(fmt));
        w.write_record(&rec).map_err(|e| csv_err(path, e))?;
    }
    w.flush().map_err(|e| CliError::write(path, e))
}

/// Shortest representation that parses back to the same value.
pub fn fmt(v: f64) -> String {
    format!("{v:?}")
}

/// Writes a header plus rows of already formatted fields.
pub fn write_rows<I, R>(path: &Path, header: &[String], rows: I) -> CliResult<()>
where
    I: IntoIterator<Item = R>,
    R: IntoIterator<Item = String>,
{
    let mut w = writer(path)?;
    w.write_record(header).map_err(|e| csv_err(path, e))?;
    for r in rows {
        w.write_record(r).map_err(|e| csv_err(path, e))?;
    }
    w.flush().map_err(|e| CliError::write(path, e))
}
