//! CSV and JSON files: datasets, ratio columns, prediction matrices, tables.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use rba_core::metrics::PredictionMatrix;
use rba_core::{Dataset, Matrix};
use serde::de::DeserializeOwned;
use serde::Serialize;

use crate::error::{config, Error, Result};

/// A dataset read from CSV together with its column and class names.
/// Class `i` of `dataset` is `label_names[i]`.
#[derive(Clone, Debug, PartialEq)]
pub struct LabelledData {
    pub dataset: Dataset,
    pub feature_names: Vec<String>,
    pub label_names: Vec<String>,
}

impl LabelledData {
    /// Default names `x0, x1, …` and `0, 1, …`.
    pub fn unnamed(dataset: Dataset) -> Self {
        LabelledData {
            feature_names: (0..dataset.dim()).map(|j| format!("x{j}")).collect(),
            label_names: (0..dataset.class_count()).map(|k| k.to_string()).collect(),
            dataset,
        }
    }
}

fn reader(path: &Path) -> Result<csv::Reader<File>> {
    csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| Error::csv(path, e))
}

fn writer(path: &Path) -> Result<csv::Writer<File>> {
    csv::Writer::from_path(path).map_err(|e| Error::csv(path, e))
}

fn parse_cell(path: &Path, row: usize, col: &str, cell: &str) -> Result<f64> {
    match cell.parse::<f64>() {
        Ok(v) if v.is_finite() => Ok(v),
        _ => config(format!("{}: row {row}, column {col}: not a finite number: {cell:?}", path.display())),
    }
}

/// Sorted distinct labels: numerically when every label parses as a number,
/// otherwise lexicographically.
fn label_order(raw: &[String]) -> Vec<String> {
    let mut names: Vec<String> = raw.to_vec();
    names.sort();
    names.dedup();
    let numeric: Option<Vec<f64>> = names.iter().map(|s| s.parse::<f64>().ok()).collect();
    if let Some(vals) = numeric {
        let mut pairs: Vec<(f64, String)> = vals.into_iter().zip(names).collect();
        pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
        names = pairs.into_iter().map(|(_, s)| s).collect();
    }
    names
}

/// Reads a headed CSV with the labels in `label_column` and every other
/// column numeric. Labels are mapped to dense ids; pass `known_labels` to
/// reuse the class order of another file (unknown labels are an error).
pub fn read_labelled_csv(path: &Path, label_column: &str, known_labels: Option<&[String]>) -> Result<LabelledData> {
    let mut rdr = reader(path)?;
    let headers = rdr.headers().map_err(|e| Error::csv(path, e))?.clone();
    let Some(label_idx) = headers.iter().position(|h| h == label_column) else {
        return config(format!("{}: no column named {label_column:?}", path.display()));
    };
    let feature_names: Vec<String> = headers
        .iter()
        .enumerate()
        .filter(|&(j, _)| j != label_idx)
        .map(|(_, h)| h.to_string())
        .collect();
    if feature_names.is_empty() {
        return config(format!("{}: no feature columns", path.display()));
    }

    let mut feats = Vec::new();
    let mut raw_labels = Vec::new();
    for (row, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(|e| Error::csv(path, e))?;
        for (j, cell) in rec.iter().enumerate() {
            if j == label_idx {
                raw_labels.push(cell.to_string());
            } else {
                feats.push(parse_cell(path, row + 1, &headers[j], cell)?);
            }
        }
    }
    if raw_labels.is_empty() {
        return config(format!("{}: no data rows", path.display()));
    }

    let label_names = match known_labels {
        Some(k) => k.to_vec(),
        None => label_order(&raw_labels),
    };
    let labels = raw_labels
        .iter()
        .map(|l| match label_names.iter().position(|n| n == l) {
            Some(i) => Ok(i),
            None => config(format!("{}: unknown label {l:?}", path.display())),
        })
        .collect::<Result<Vec<usize>>>()?;
    let features = Matrix::from_vec(raw_labels.len(), feature_names.len(), feats)?;
    let dataset = Dataset::new(features, labels, label_names.len())?;
    Ok(LabelledData {
        dataset,
        feature_names,
        label_names,
    })
}

/// Feature columns of a headed CSV, skipping `label_column` if present.
pub fn read_features_csv(path: &Path, label_column: &str) -> Result<(Matrix, Vec<String>)> {
    let mut rdr = reader(path)?;
    let headers = rdr.headers().map_err(|e| Error::csv(path, e))?.clone();
    let keep: Vec<usize> = (0..headers.len()).filter(|&j| &headers[j] != label_column).collect();
    let names: Vec<String> = keep.iter().map(|&j| headers[j].to_string()).collect();
    let mut data = Vec::new();
    let mut rows = 0;
    for (row, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(|e| Error::csv(path, e))?;
        for &j in &keep {
            data.push(parse_cell(path, row + 1, &headers[j], &rec[j])?);
        }
        rows += 1;
    }
    if rows == 0 || names.is_empty() {
        return config(format!("{}: empty feature table", path.display()));
    }
    Ok((Matrix::from_vec(rows, names.len(), data)?, names))
}

pub fn write_labelled_csv(path: &Path, data: &LabelledData, label_column: &str) -> Result<()> {
    let mut w = writer(path)?;
    let mut header = data.feature_names.clone();
    header.push(label_column.to_string());
    w.write_record(&header).map_err(|e| Error::csv(path, e))?;
    let ds = &data.dataset;
    for i in 0..ds.len() {
        let mut rec: Vec<String> = ds.x(i).iter().map(|v| v.to_string()).collect();
        rec.push(data.label_names[ds.labels()[i]].clone());
        w.write_record(&rec).map_err(|e| Error::csv(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// Single-column CSV aligned with the row order of some dataset.
pub fn write_column_csv(path: &Path, name: &str, values: &[f64]) -> Result<()> {
    let mut w = writer(path)?;
    w.write_record([name]).map_err(|e| Error::csv(path, e))?;
    for v in values {
        w.write_record([v.to_string()]).map_err(|e| Error::csv(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn read_column_csv(path: &Path) -> Result<Vec<f64>> {
    let mut rdr = reader(path)?;
    let headers = rdr.headers().map_err(|e| Error::csv(path, e))?.clone();
    if headers.len() != 1 {
        return config(format!("{}: expected one column, found {}", path.display(), headers.len()));
    }
    rdr.records()
        .enumerate()
        .map(|(row, rec)| {
            let rec = rec.map_err(|e| Error::csv(path, e))?;
            parse_cell(path, row + 1, &headers[0], &rec[0])
        })
        .collect()
}

/// Prediction matrix with one `p_<label>` column per class.
pub fn write_predictions_csv(path: &Path, preds: &PredictionMatrix, label_names: &[String]) -> Result<()> {
    let mut w = writer(path)?;
    let header: Vec<String> = label_names.iter().map(|l| format!("p_{l}")).collect();
    w.write_record(&header).map_err(|e| Error::csv(path, e))?;
    for i in 0..preds.rows() {
        w.write_record(preds.row(i).iter().map(|p| p.to_string()))
            .map_err(|e| Error::csv(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// Inverse of [`write_predictions_csv`]; returns the class names too.
pub fn read_predictions_csv(path: &Path) -> Result<(PredictionMatrix, Vec<String>)> {
    let (probs, names) = read_features_csv(path, "")?;
    let labels = names
        .iter()
        .map(|n| match n.strip_prefix("p_") {
            Some(l) => Ok(l.to_string()),
            None => config(format!("{}: column {n:?} is not of the form p_<label>", path.display())),
        })
        .collect::<Result<Vec<_>>>()?;
    Ok((PredictionMatrix::new(probs)?, labels))
}

/// Any serializable rows as a headed CSV.
pub fn write_records<T: Serialize>(path: &Path, rows: &[T]) -> Result<()> {
    let mut w = writer(path)?;
    for r in rows {
        w.serialize(r).map_err(|e| Error::csv(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn write_json<T: Serialize + ?Sized>(path: &Path, value: &T) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    serde_json::to_writer_pretty(&mut w, value).map_err(|e| Error::json(path, e))?;
    w.write_all(b"\n").and_then(|_| w.flush()).map_err(|e| Error::io(path, e))
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_reader(std::io::BufReader::new(file)).map_err(|e| Error::json(path, e))
}
