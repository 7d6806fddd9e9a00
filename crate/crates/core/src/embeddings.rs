//! Embedding tables: one named feature row per image.
//!
//! On disk this is a UTF-8 CSV with header `filename,v1,...,vd` and one
//! decimal row per image.

use std::path::Path;

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingMatrix {
    names: Vec<String>,
    rows: Vec<Vec<f64>>,
}

impl EmbeddingMatrix {
    pub fn new(names: Vec<String>, rows: Vec<Vec<f64>>) -> Result<Self> {
        if names.len() != rows.len() {
            return Err(Error::DimensionMismatch(format!(
                "{} names for {} rows",
                names.len(),
                rows.len()
            )));
        }
        if let Some(first) = rows.first() {
            if first.is_empty() {
                return Err(Error::DimensionMismatch("embedding rows are empty".into()));
            }
            if rows.iter().any(|r| r.len() != first.len()) {
                return Err(Error::DimensionMismatch("embedding rows differ in length".into()));
            }
        }
        if rows.iter().flatten().any(|v| !v.is_finite()) {
            return Err(Error::NonFiniteInput);
        }
        Ok(Self { names, rows })
    }

    /// Unnamed rows, labelled by position.
    pub fn from_rows(rows: Vec<Vec<f64>>) -> Result<Self> {
        let names = (0..rows.len()).map(|i| i.to_string()).collect();
        Self::new(names, rows)
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn rows(&self) -> &[Vec<f64>] {
        &self.rows
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.rows.first().map_or(0, Vec::len)
    }

    /// Row whose name equals `key`, or whose file stem equals `key`.
    pub fn find(&self, key: &str) -> Option<&[f64]> {
        self.names
            .iter()
            .position(|n| n == key || file_stem(n) == key)
            .map(|i| self.rows[i].as_slice())
    }

    pub fn read_csv(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let mut reader = csv::ReaderBuilder::new()
            .has_headers(true)
            .from_path(path)
            .map_err(|e| csv_error(path, e))?;
        let headers = reader.headers().map_err(|e| csv_error(path, e))?.clone();
        if headers.get(0).map(str::trim) != Some("filename") || headers.len() < 2 {
            return Err(Error::csv(path, "header must be `filename,v1,...,vd`"));
        }
        let mut names = Vec::new();
        let mut rows = Vec::new();
        for (line, record) in reader.records().enumerate() {
            let record = record.map_err(|e| csv_error(path, e))?;
            if record.len() != headers.len() {
                return Err(Error::csv(path, format!("row {} has {} fields", line + 2, record.len())));
            }
            names.push(record[0].trim().to_string());
            let values = record
                .iter()
                .skip(1)
                .map(|v| v.trim().parse::<f64>())
                .collect::<std::result::Result<Vec<_>, _>>()
                .map_err(|e| Error::csv(path, format!("row {}: {e}", line + 2)))?;
            rows.push(values);
        }
        Self::new(names, rows)
    }

    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let mut writer = csv::Writer::from_path(path).map_err(|e| csv_error(path, e))?;
        let mut header = vec!["filename".to_string()];
        header.extend((1..=self.dim()).map(|i| format!("v{i}")));
        writer.write_record(&header).map_err(|e| csv_error(path, e))?;
        for (name, row) in self.names.iter().zip(&self.rows) {
            let mut record = vec![name.clone()];
            record.extend(row.iter().map(|v| v.to_string()));
            writer.write_record(&record).map_err(|e| csv_error(path, e))?;
        }
        writer.flush().map_err(|e| Error::io(path, e))
    }
}

fn file_stem(name: &str) -> &str {
    Path::new(name).file_stem().and_then(|s| s.to_str()).unwrap_or(name)
}

pub(crate) fn csv_error(path: &Path, err: csv::Error) -> Error {
    if !err.is_io_error() {
        return Error::csv(path, err);
    }
    match err.into_kind() {
        csv::ErrorKind::Io(source) => Error::io(path, source),
        other => Error::csv(path, format!("{other:?}")),
    }
}
