//! Prediction tables: CSV with header `true,pred` and zero-based labels.

use std::path::Path;

use crate::error::{Error, Result};
use crate::metrics::PredictionSet;

/// Reads a predictions CSV. Without `classes` the count is one past the
/// largest label seen.
pub fn read_predictions(path: &Path, classes: Option<usize>) -> Result<PredictionSet> {
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| Error::Data(format!("{}: {e}", path.display())))?;
    let headers = reader
        .headers()
        .map_err(|e| Error::Data(format!("{}: {e}", path.display())))?
        .clone();
    if headers.iter().collect::<Vec<_>>() != ["true", "pred"] {
        return Err(Error::Data(format!(
            "{}: header must be 'true,pred', found '{}'",
            path.display(),
            headers.iter().collect::<Vec<_>>().join(",")
        )));
    }
    let (mut truth, mut pred) = (Vec::new(), Vec::new());
    for (i, record) in reader.records().enumerate() {
        // line 1 is the header
        let line = i + 2;
        let record = record.map_err(|e| Error::Data(format!("{} line {line}: {e}", path.display())))?;
        let label = |field: usize| -> Result<usize> {
            let s = record.get(field).unwrap_or("");
            let v: usize = s.parse().map_err(|_| {
                Error::Data(format!("{} line {line}: '{s}' is not a non-negative integer label", path.display()))
            })?;
            if let Some(k) = classes {
                if v >= k {
                    return Err(Error::Data(format!(
                        "{} line {line}: label {v} outside 0..{k}",
                        path.display()
                    )));
                }
            }
            Ok(v)
        };
        truth.push(label(0)?);
        pred.push(label(1)?);
    }
    match classes {
        Some(k) => PredictionSet::new(truth, pred, k),
        None => PredictionSet::inferred(truth, pred),
    }
}
