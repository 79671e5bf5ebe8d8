use std::fs;
use std::path::Path;

use super::{Dataset, Source};
use crate::error::{Error, Result};
use crate::linalg::Tensor;

const IMAGE_MAGIC: u32 = 0x0000_0803;
const LABEL_MAGIC: u32 = 0x0000_0801;

fn format_error(path: &Path, message: impl Into<String>) -> Error {
    Error::Format {
        path: path.to_path_buf(),
        message: message.into(),
    }
}

fn be_u32(bytes: &[u8], offset: usize, path: &Path) -> Result<u32> {
    bytes
        .get(offset..offset + 4)
        .map(|b| u32::from_be_bytes([b[0], b[1], b[2], b[3]]))
        .ok_or_else(|| format_error(path, "truncated header"))
}

/// Reads an IDX image/label file pair. Pixels are scaled to `[0, 1]`.
pub fn load_mnist_idx(images: &Path, labels: &Path) -> Result<Dataset> {
    let img = fs::read(images).map_err(|e| Error::io(images, e))?;
    let lab = fs::read(labels).map_err(|e| Error::io(labels, e))?;

    let magic = be_u32(&img, 0, images)?;
    if magic != IMAGE_MAGIC {
        return Err(format_error(images, format!("bad magic {magic:#010x}, expected {IMAGE_MAGIC:#010x}")));
    }
    let count = be_u32(&img, 4, images)? as usize;
    let rows = be_u32(&img, 8, images)? as usize;
    let cols = be_u32(&img, 12, images)? as usize;
    let pixels = rows * cols;
    if img.len() != 16 + count * pixels {
        return Err(format_error(
            images,
            format!("expected {} bytes of pixels, found {}", count * pixels, img.len().saturating_sub(16)),
        ));
    }

    let magic = be_u32(&lab, 0, labels)?;
    if magic != LABEL_MAGIC {
        return Err(format_error(labels, format!("bad magic {magic:#010x}, expected {LABEL_MAGIC:#010x}")));
    }
    let label_count = be_u32(&lab, 4, labels)? as usize;
    if label_count != count {
        return Err(format_error(labels, format!("{label_count} labels for {count} images")));
    }
    if lab.len() != 8 + count {
        return Err(format_error(labels, format!("expected {count} label bytes, found {}", lab.len().saturating_sub(8))));
    }
    let label_vec: Vec<usize> = lab[8..].iter().map(|&b| b as usize).collect();
    if let Some(bad) = label_vec.iter().find(|&&l| l > 9) {
        return Err(format_error(labels, format!("label {bad} outside 0..10")));
    }
    let data = img[16..].iter().map(|&p| p as f64 / 255.0).collect();
    Dataset::new(Tensor::new(vec![count, pixels], data)?, label_vec, 10, Source::Mnist)?.with_image_shape(1, rows, cols)
}

/// Loads `(train, test)` from the canonical file names in `dir`.
pub fn load_mnist_dir(dir: &Path) -> Result<(Dataset, Dataset)> {
    let train = load_mnist_idx(&dir.join("train-images-idx3-ubyte"), &dir.join("train-labels-idx1-ubyte"))?;
    let test = load_mnist_idx(&dir.join("t10k-images-idx3-ubyte"), &dir.join("t10k-labels-idx1-ubyte"))?;
    Ok((train, test))
}
