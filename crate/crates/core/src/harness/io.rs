use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use ndarray::Array2;

use crate::data::Dataset;
use crate::error::{Error, Result};

pub const LABEL_COLUMN: &str = "label";

/// Reads a headed CSV with numeric feature columns and a `label` column
/// holding 0 (normal) or 1 (anomaly). Row numbers in errors count data rows
/// from 1.
pub fn read_dataset<R: Read>(input: R) -> Result<Dataset> {
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(input);
    let headers = reader.headers()?.clone();
    let label_idx = headers
        .iter()
        .position(|h| h == LABEL_COLUMN)
        .ok_or_else(|| Error::Schema(format!("missing `{LABEL_COLUMN}` column")))?;
    let names: Vec<String> = headers
        .iter()
        .enumerate()
        .filter(|&(i, _)| i != label_idx)
        .map(|(_, h)| h.to_string())
        .collect();

    let mut values = Vec::new();
    let mut labels = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let row = i + 1;
        let record = record?;
        for (j, cell) in record.iter().enumerate() {
            let column = || headers.get(j).unwrap_or("?").to_string();
            if j == label_idx {
                let label: u8 = cell.parse().map_err(|_| Error::Parse {
                    row,
                    column: column(),
                    value: cell.to_string(),
                })?;
                if label > 1 {
                    return Err(Error::Schema(format!(
                        "row {row}: label must be 0 or 1, found {label}"
                    )));
                }
                labels.push(label);
            } else {
                let v: f64 = cell.parse().map_err(|_| Error::Parse {
                    row,
                    column: column(),
                    value: cell.to_string(),
                })?;
                if !v.is_finite() {
                    return Err(Error::Parse {
                        row,
                        column: column(),
                        value: cell.to_string(),
                    });
                }
                values.push(v);
            }
        }
    }
    if labels.is_empty() {
        return Err(Error::Empty("dataset has no rows".into()));
    }
    let features = Array2::from_shape_vec((labels.len(), names.len()), values)
        .map_err(|e| Error::Schema(e.to_string()))?;
    Dataset::with_names(features, labels, names)
}

pub fn load_dataset(path: impl AsRef<Path>) -> Result<Dataset> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    read_dataset(file)
}

/// Writes the dataset in the format [`read_dataset`] accepts. Floats use the
/// shortest representation that parses back to the same value.
pub fn write_dataset<W: Write>(dataset: &Dataset, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let mut header: Vec<&str> = dataset.feature_names.iter().map(String::as_str).collect();
    header.push(LABEL_COLUMN);
    w.write_record(&header)?;
    for (row, &label) in dataset.features.rows().into_iter().zip(&dataset.labels) {
        let mut rec: Vec<String> = row.iter().map(|v| v.to_string()).collect();
        rec.push(label.to_string());
        w.write_record(&rec)?;
    }
    w.flush().map_err(|e| Error::io("dataset csv", e))?;
    Ok(())
}

pub fn save_dataset(dataset: &Dataset, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    write_dataset(dataset, std::io::BufWriter::new(file))
}
