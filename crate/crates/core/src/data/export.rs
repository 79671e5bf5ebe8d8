//! Binary dataset file: the magic `MRDS`, a little-endian `u32` version and
//! `u8` source code, `u64` N, d and C, then `N·d` `f64` inputs (row-major)
//! and `N` `i64` labels, all little-endian.

use std::fs;
use std::path::Path;

use super::{Dataset, Source};
use crate::error::{Error, Result};
use crate::linalg::Tensor;

pub const EXPORT_MAGIC: &[u8; 4] = b"MRDS";
pub const EXPORT_VERSION: u32 = 1;
const HEADER: usize = 4 + 4 + 1 + 3 * 8;

pub fn write_dataset(ds: &Dataset, path: &Path) -> Result<()> {
    let mut out = Vec::with_capacity(HEADER + ds.inputs().len() * 8 + ds.len() * 8);
    out.extend_from_slice(EXPORT_MAGIC);
    out.extend_from_slice(&EXPORT_VERSION.to_le_bytes());
    out.push(ds.source().code());
    for v in [ds.len(), ds.dim(), ds.classes()] {
        out.extend_from_slice(&(v as u64).to_le_bytes());
    }
    for v in ds.inputs().data() {
        out.extend_from_slice(&v.to_le_bytes());
    }
    for &l in ds.labels() {
        out.extend_from_slice(&(l as i64).to_le_bytes());
    }
    fs::write(path, out).map_err(|e| Error::io(path, e))
}

pub fn read_dataset(path: &Path) -> Result<Dataset> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    let bad = |message: String| Error::Format {
        path: path.to_path_buf(),
        message,
    };
    if bytes.len() < HEADER || &bytes[..4] != EXPORT_MAGIC {
        return Err(bad("not a dataset file".into()));
    }
    let version = u32::from_le_bytes(bytes[4..8].try_into().unwrap());
    if version != EXPORT_VERSION {
        return Err(bad(format!("unsupported version {version}")));
    }
    let source = Source::from_code(bytes[8]).ok_or_else(|| bad(format!("unknown source code {}", bytes[8])))?;
    let word = |i: usize| u64::from_le_bytes(bytes[9 + 8 * i..17 + 8 * i].try_into().unwrap()) as usize;
    let (n, d, c) = (word(0), word(1), word(2));
    let expected = HEADER + n * d * 8 + n * 8;
    if bytes.len() != expected {
        return Err(bad(format!("expected {expected} bytes, found {}", bytes.len())));
    }
    let body = &bytes[HEADER..];
    let inputs = body[..n * d * 8]
        .chunks_exact(8)
        .map(|b| f64::from_le_bytes(b.try_into().unwrap()))
        .collect();
    let labels = body[n * d * 8..]
        .chunks_exact(8)
        .map(|b| {
            let l = i64::from_le_bytes(b.try_into().unwrap());
            usize::try_from(l).map_err(|_| bad(format!("negative label {l}")))
        })
        .collect::<Result<Vec<_>>>()?;
    Dataset::new(Tensor::new(vec![n, d], inputs)?, labels, c, source).map_err(|e| bad(e.to_string()))
}
