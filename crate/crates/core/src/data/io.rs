//! CSV serialization: header `y,z0,...,z{d-1}` (or `y0,...,y{k-1},z0,...`
//! for vector labels), `%.17g` numerics, plus a JSON sidecar holding the
//! metadata.

use std::fs;
use std::path::{Path, PathBuf};

use super::{Dataset, DatasetMeta};
use crate::error::{Error, Result};
use crate::textfmt::push_g17;
use crate::Scalar;

/// `data/train.csv` -> `data/train.json`.
pub fn sidecar_path(path: &Path) -> PathBuf {
    path.with_extension("json")
}

pub fn dataset_write<T: Scalar>(data: &Dataset<T>, path: &Path) -> Result<()> {
    let mut out = String::new();
    let mut header: Vec<String> = if data.label_dim() == 1 {
        vec!["y".into()]
    } else {
        (0..data.label_dim()).map(|i| format!("y{i}")).collect()
    };
    header.extend((0..data.input_dim()).map(|i| format!("z{i}")));
    out.push_str(&header.join(","));
    out.push('\n');
    for (z, y) in data.inputs().zip(data.targets()) {
        for (pos, v) in y.iter().chain(z).enumerate() {
            if pos > 0 {
                out.push(',');
            }
            push_g17(&mut out, v.as_f64());
        }
        out.push('\n');
    }
    fs::write(path, out).map_err(|e| Error::io(path, e))?;

    let side = sidecar_path(path);
    let meta = serde_json::to_string_pretty(&data.meta)
        .map_err(|e| Error::format(&side, e.to_string()))?;
    fs::write(&side, meta).map_err(|e| Error::io(&side, e))
}

/// Reads a dataset; a missing sidecar yields default (`unknown`) metadata.
pub fn dataset_read<T: Scalar>(path: &Path) -> Result<Dataset<T>> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_reader(text.as_bytes());
    let header = reader
        .headers()
        .map_err(|e| Error::format(path, e.to_string()))?
        .clone();
    if header.is_empty() || header.iter().all(str::is_empty) {
        return Err(Error::format(path, "missing header row"));
    }
    let label_dim = header.iter().take_while(|h| h.starts_with('y')).count();
    let input_dim = header.len() - label_dim;
    if label_dim == 0 || input_dim == 0 {
        return Err(Error::format(
            path,
            format!(
                "header needs y and z columns, got `{}`",
                header.iter().collect::<Vec<_>>().join(",")
            ),
        ));
    }

    let mut inputs = Vec::new();
    let mut labels = Vec::new();
    for (line, record) in reader.records().enumerate() {
        let record = record.map_err(|e| Error::format(path, e.to_string()))?;
        if record.len() != header.len() {
            return Err(Error::format(
                path,
                format!(
                    "row {} has {} fields, header has {}",
                    line + 1,
                    record.len(),
                    header.len()
                ),
            ));
        }
        let values = record
            .iter()
            .map(|f| {
                f.trim().parse::<f64>().map(T::lit).map_err(|_| {
                    Error::format(path, format!("row {}: `{f}` is not a number", line + 1))
                })
            })
            .collect::<Result<Vec<T>>>()?;
        labels.push(values[..label_dim].to_vec());
        inputs.push(values[label_dim..].to_vec());
    }
    if inputs.is_empty() {
        return Err(Error::format(path, "no data rows"));
    }

    let side = sidecar_path(path);
    let meta = match fs::read_to_string(&side) {
        Ok(json) => serde_json::from_str(&json).map_err(|e| Error::format(&side, e.to_string()))?,
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => DatasetMeta::default(),
        Err(e) => return Err(Error::io(&side, e)),
    };
    Dataset::with_vector_labels(inputs, labels, meta)
}
