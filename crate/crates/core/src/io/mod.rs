//! On-disk formats: binary tensors, model manifests, compressed archives and
//! prediction tables.

mod archive;
mod manifest;
mod predictions;
mod tensor_file;

pub use archive::{load_archive, save_archive, Archive, ArchivedLayer, Hyper};
pub use manifest::{load_model, write_manifest, LayerEntry, LoadedLayer, Model, ModelManifest};
pub use predictions::read_predictions;
pub use tensor_file::{decode_tensor, encode_tensor, read_tensor, write_tensor};

use std::path::Path;

use crate::error::{Error, Result};

pub(crate) fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| Error::format(path, e.to_string()))
}

pub(crate) fn write_json<T: serde::Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value).map_err(|e| Error::format(path, e.to_string()))?;
    text.push('\n');
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}
