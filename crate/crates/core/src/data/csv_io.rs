//! Comma-separated ingestion and export.
//!
//! Dialect: comma separator, header row, UTF-8, `.` decimal point. Every column except
//! the label column is a numeric feature. Labels are categorical strings mapped to
//! dense integers in first-seen order.

use std::collections::HashMap;
use std::path::Path;

use super::Dataset;
use crate::error::{Error, Result};
use crate::nn::Matrix;

pub const PROVENANCE_COLUMN: &str = "provenance";

pub fn load_csv(path: impl AsRef<Path>, label_column: &str) -> Result<Dataset> {
    let path = path.as_ref();
    let ingest = |row: usize, column: &str, message: String| Error::Ingestion {
        path: path.to_path_buf(),
        row,
        column: column.to_owned(),
        message,
    };
    let mut reader = csv::ReaderBuilder::new().has_headers(true).from_path(path).map_err(|e| {
        ingest(0, "", format!("cannot open: {e}"))
    })?;
    let headers: Vec<String> = reader
        .headers()
        .map_err(|e| ingest(1, "", e.to_string()))?
        .iter()
        .map(str::to_owned)
        .collect();
    let label_idx = headers
        .iter()
        .position(|h| h == label_column)
        .ok_or_else(|| ingest(1, label_column, "label column not found in header".into()))?;
    let feature_names: Vec<String> =
        headers.iter().enumerate().filter(|&(i, _)| i != label_idx).map(|(_, h)| h.clone()).collect();

    let mut class_index: HashMap<String, usize> = HashMap::new();
    let mut class_names: Vec<String> = Vec::new();
    let mut values = Vec::new();
    let mut labels = Vec::new();
    for (r, record) in reader.records().enumerate() {
        let line = r + 2;
        let record = record.map_err(|e| ingest(line, "", e.to_string()))?;
        if record.len() != headers.len() {
            return Err(ingest(line, "", format!("expected {} cells, found {}", headers.len(), record.len())));
        }
        for (c, cell) in record.iter().enumerate() {
            if c == label_idx {
                let key = cell.trim();
                if key.is_empty() {
                    return Err(ingest(line, &headers[c], "blank label".into()));
                }
                let next = class_names.len();
                let id = *class_index.entry(key.to_owned()).or_insert_with(|| {
                    class_names.push(key.to_owned());
                    next
                });
                labels.push(id);
            } else {
                let v: f64 = cell
                    .trim()
                    .parse()
                    .map_err(|_| ingest(line, &headers[c], format!("unparsable numeric cell {cell:?}")))?;
                if !v.is_finite() {
                    return Err(ingest(line, &headers[c], format!("non-finite value {cell:?}")));
                }
                values.push(v);
            }
        }
    }
    if class_names.len() < 2 {
        return Err(ingest(0, label_column, format!("need at least 2 classes, found {}", class_names.len())));
    }
    let features = Matrix::from_vec(labels.len(), feature_names.len(), values)?;
    Ok(Dataset {
        features,
        labels,
        n_classes: class_names.len(),
        feature_names: Some(feature_names),
        class_names: Some(class_names),
    })
}

/// Writes `dataset` in the ingestion dialect, label column last, and a
/// `provenance` column (`real` / `synthetic`) when `synthetic` is given.
pub fn write_csv(
    path: impl AsRef<Path>,
    dataset: &Dataset,
    label_column: &str,
    synthetic: Option<&[bool]>,
) -> Result<()> {
    if let Some(s) = synthetic {
        if s.len() != dataset.len() {
            return Err(Error::invalid("provenance flags do not match row count"));
        }
    }
    let mut w = csv::Writer::from_path(path)?;
    let mut header: Vec<String> = match &dataset.feature_names {
        Some(n) => n.clone(),
        None => (0..dataset.n_features()).map(|j| format!("x{j}")).collect(),
    };
    header.push(label_column.to_owned());
    if synthetic.is_some() {
        header.push(PROVENANCE_COLUMN.to_owned());
    }
    w.write_record(&header)?;
    for (i, row) in dataset.features.iter_rows().enumerate() {
        let mut rec: Vec<String> = row.iter().map(|v| format!("{v:?}")).collect();
        let l = dataset.labels[i];
        rec.push(match &dataset.class_names {
            Some(names) => names[l].clone(),
            None => l.to_string(),
        });
        if let Some(s) = synthetic {
            rec.push(if s[i] { "synthetic" } else { "real" }.to_owned());
        }
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}
