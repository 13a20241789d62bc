//! IDX image/label files: big-endian `u32` magic, big-endian `u32`
//! dimensions, then unsigned bytes.

use std::path::Path;

use super::dataset::{one_hot, Dataset, Split};
use crate::error::{Error, Result};

const IMAGES_MAGIC: u32 = 0x0000_0803;
const LABELS_MAGIC: u32 = 0x0000_0801;
const DIGITS_IMAGES: &[u8] = include_bytes!("../../data/digits-images.idx3-ubyte");
const DIGITS_LABELS: &[u8] = include_bytes!("../../data/digits-labels.idx1-ubyte");
/// Samples held out from the end of the bundled digits as the test set.
pub const DIGITS_TEST_SIZE: usize = 500;

fn be_u32(bytes: &[u8], offset: usize) -> Result<u32> {
    bytes
        .get(offset..offset + 4)
        .map(|b| u32::from_be_bytes([b[0], b[1], b[2], b[3]]))
        .ok_or_else(|| Error::Idx(format!("truncated header at byte {offset}")))
}

/// Images as rows of pixels scaled by 1/255.
pub fn parse_images(bytes: &[u8]) -> Result<Vec<Vec<f64>>> {
    let magic = be_u32(bytes, 0)?;
    if magic != IMAGES_MAGIC {
        return Err(Error::Idx(format!("unsupported magic 0x{magic:08x} for an image file")));
    }
    let count = be_u32(bytes, 4)? as usize;
    let rows = be_u32(bytes, 8)? as usize;
    let cols = be_u32(bytes, 12)? as usize;
    let pixels = rows * cols;
    let payload = &bytes[16..];
    if payload.len() < count * pixels {
        return Err(Error::Idx(format!(
            "truncated payload: {count} images of {pixels} pixels need {} bytes, found {}",
            count * pixels,
            payload.len()
        )));
    }
    Ok(payload[..count * pixels].chunks_exact(pixels.max(1)).take(count).map(scale_row).collect())
}

fn scale_row(row: &[u8]) -> Vec<f64> {
    row.iter().map(|&p| p as f64 / 255.0).collect()
}

pub fn parse_labels(bytes: &[u8]) -> Result<Vec<u8>> {
    let magic = be_u32(bytes, 0)?;
    if magic != LABELS_MAGIC {
        return Err(Error::Idx(format!("unsupported magic 0x{magic:08x} for a label file")));
    }
    let count = be_u32(bytes, 4)? as usize;
    let payload = &bytes[8..];
    if payload.len() < count {
        return Err(Error::Idx(format!("truncated payload: {count} labels, found {} bytes", payload.len())));
    }
    Ok(payload[..count].to_vec())
}

/// Dataset from image and label bytes; targets are one-hot over
/// `max(10, max_label + 1)` classes.
pub fn dataset_from_bytes(images: &[u8], labels: &[u8], split: Split) -> Result<Dataset> {
    let inputs = parse_images(images)?;
    let labels = parse_labels(labels)?;
    if inputs.len() != labels.len() {
        return Err(Error::Idx(format!("{} images but {} labels", inputs.len(), labels.len())));
    }
    let classes = labels.iter().map(|&l| l as usize + 1).max().unwrap_or(0).max(10);
    Dataset::new(inputs, one_hot(&labels, classes), split)
}

pub fn load_idx(images_path: impl AsRef<Path>, labels_path: impl AsRef<Path>) -> Result<Dataset> {
    dataset_from_bytes(&std::fs::read(images_path)?, &std::fs::read(labels_path)?, Split::Train)
}

pub fn encode_images(images: &[Vec<u8>], rows: usize, cols: usize) -> Vec<u8> {
    let mut out = Vec::with_capacity(16 + images.len() * rows * cols);
    for v in [IMAGES_MAGIC, images.len() as u32, rows as u32, cols as u32] {
        out.extend_from_slice(&v.to_be_bytes());
    }
    for img in images {
        out.extend_from_slice(img);
    }
    out
}

pub fn encode_labels(labels: &[u8]) -> Vec<u8> {
    let mut out = Vec::with_capacity(8 + labels.len());
    out.extend_from_slice(&LABELS_MAGIC.to_be_bytes());
    out.extend_from_slice(&(labels.len() as u32).to_be_bytes());
    out.extend_from_slice(labels);
    out
}

/// The bundled 8x8 handwritten digits (1797 samples, 64 inputs, 10 classes),
/// split into training and the last 500 samples for testing.
pub fn digits() -> Result<(Dataset, Dataset)> {
    dataset_from_bytes(DIGITS_IMAGES, DIGITS_LABELS, Split::Train)?.split_tail(DIGITS_TEST_SIZE)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tiny_image_file() {
        let mut bytes = vec![0, 0, 8, 3, 0, 0, 0, 1, 0, 0, 0, 2, 0, 0, 0, 2];
        bytes.extend([0, 128, 255, 64]);
        let rows = parse_images(&bytes).unwrap();
        assert_eq!(rows.len(), 1);
        let expected = [0.0, 128.0 / 255.0, 1.0, 64.0 / 255.0];
        for (a, b) in rows[0].iter().zip(expected) {
            assert!((a - b).abs() < 1e-15);
        }
        assert!((rows[0][1] - 0.50196).abs() < 1e-5);
    }

    #[test]
    fn errors() {
        let bytes = [0, 0, 8, 5, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0];
        let err = parse_images(&bytes).unwrap_err().to_string();
        assert!(err.contains("unsupported magic"), "{err}");
        let mut short = encode_images(&[vec![1, 2, 3, 4]], 2, 2);
        short.pop();
        assert!(parse_images(&short).unwrap_err().to_string().contains("truncated"));
        let imgs = encode_images(&[vec![0; 4], vec![0; 4]], 2, 2);
        assert!(dataset_from_bytes(&imgs, &encode_labels(&[1]), Split::Train).is_err());
        assert!(parse_labels(&[0, 0, 8]).is_err());
    }

    #[test]
    fn full_size_synthetic_file() {
        let images: Vec<Vec<u8>> = (0..10_000).map(|i| vec![(i % 256) as u8; 784]).collect();
        let labels: Vec<u8> = (0..10_000).map(|i| (i % 10) as u8).collect();
        let dir = tempfile::tempdir().unwrap();
        let (ip, lp) = (dir.path().join("img"), dir.path().join("lbl"));
        std::fs::write(&ip, encode_images(&images, 28, 28)).unwrap();
        std::fs::write(&lp, encode_labels(&labels)).unwrap();
        let d = load_idx(&ip, &lp).unwrap();
        assert_eq!(d.len(), 10_000);
        assert!(d.inputs.iter().all(|r| r.len() == 784));
        assert_eq!(d.target_dim(), 10);
        assert_eq!(d.targets[13][3], 1.0);
    }

    #[test]
    fn bundled_digits() {
        let (train, test) = digits().unwrap();
        assert_eq!(train.len() + test.len(), 1797);
        assert_eq!(test.len(), DIGITS_TEST_SIZE);
        assert_eq!(train.input_dim(), 64);
        assert_eq!(train.target_dim(), 10);
        assert!(train.targets.iter().all(|r| r.iter().sum::<f64>() == 1.0));
    }
}
