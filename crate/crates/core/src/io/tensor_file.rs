//! Binary tensor files.
//!
//! ```text
//! 0   "TNSR"
//! 4   version = 1
//! 5   ndim (1..=4)
//! 6   6 zero bytes
//! 12  ndim × u32 LE dims
//! ..  product(dims) × f32 LE, row-major
//! ```

use std::path::Path;

use crate::error::{Error, Result};
use crate::tensor::Tensor;

const MAGIC: &[u8; 4] = b"TNSR";
const VERSION: u8 = 1;
const HEADER: usize = 12;

pub fn encode_tensor(t: &Tensor) -> Result<Vec<u8>> {
    let dims = t.dims();
    let mut out = Vec::with_capacity(HEADER + 4 * dims.len() + 4 * t.len());
    out.extend_from_slice(MAGIC);
    out.push(VERSION);
    out.push(dims.len() as u8);
    out.extend_from_slice(&[0; 6]);
    for &d in dims {
        let d = u32::try_from(d).map_err(|_| Error::shape(format!("dimension {d} exceeds u32")))?;
        out.extend_from_slice(&d.to_le_bytes());
    }
    for &v in t.data() {
        let f = v as f32;
        if !f.is_finite() {
            return Err(Error::Numeric(format!("value {v} does not fit in f32")));
        }
        out.extend_from_slice(&f.to_le_bytes());
    }
    Ok(out)
}

/// Parses a tensor file image; `path` only labels errors.
pub fn decode_tensor(bytes: &[u8], path: &Path) -> Result<Tensor> {
    let bad = |msg: String| Error::format(path, msg);
    if bytes.len() < HEADER {
        return Err(bad(format!("{} bytes is shorter than the header", bytes.len())));
    }
    if &bytes[..4] != MAGIC {
        return Err(bad(format!("bad magic {:?}", String::from_utf8_lossy(&bytes[..4]))));
    }
    if bytes[4] != VERSION {
        return Err(bad(format!("unsupported version {}", bytes[4])));
    }
    let ndim = bytes[5] as usize;
    if !(1..=4).contains(&ndim) {
        return Err(bad(format!("ndim {ndim} outside 1..=4")));
    }
    if bytes[6..HEADER].iter().any(|&b| b != 0) {
        return Err(bad("reserved header bytes are not zero".into()));
    }
    let dims_end = HEADER + 4 * ndim;
    if bytes.len() < dims_end {
        return Err(bad("truncated dimension list".into()));
    }
    let dims: Vec<usize> = bytes[HEADER..dims_end]
        .chunks_exact(4)
        .map(|c| u32::from_le_bytes(c.try_into().expect("4-byte chunk")) as usize)
        .collect();
    let count = dims
        .iter()
        .try_fold(1usize, |acc, &d| acc.checked_mul(d))
        .ok_or_else(|| bad(format!("dims {dims:?} overflow")))?;
    let expected = count
        .checked_mul(4)
        .and_then(|n| n.checked_add(dims_end))
        .ok_or_else(|| bad(format!("dims {dims:?} overflow")))?;
    if bytes.len() != expected {
        return Err(bad(format!(
            "payload is {} bytes, dims {dims:?} need {}",
            bytes.len() - dims_end,
            expected - dims_end
        )));
    }
    let data = bytes[dims_end..]
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes(c.try_into().expect("4-byte chunk")) as f64)
        .collect();
    Tensor::new(dims, data).map_err(|e| bad(e.to_string()))
}

pub fn read_tensor(path: &Path) -> Result<Tensor> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_tensor(&bytes, path)
}

pub fn write_tensor(t: &Tensor, path: &Path) -> Result<()> {
    std::fs::write(path, encode_tensor(t)?).map_err(|e| Error::io(path, e))
}
