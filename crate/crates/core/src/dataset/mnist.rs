//! MNIST in the IDX format: big-endian `u32` magic and dimensions followed by
//! raw `u8` data.

use std::path::Path;

use ndarray::Array2;
use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::FeatureTable;
use crate::{Error, Result};

pub const IDX_IMAGES_MAGIC: u32 = 2051;
pub const IDX_LABELS_MAGIC: u32 = 2049;

fn read_u32(bytes: &[u8], offset: usize) -> Result<u32> {
    bytes
        .get(offset..offset + 4)
        .map(|b| u32::from_be_bytes([b[0], b[1], b[2], b[3]]))
        .ok_or_else(|| Error::Data("truncated IDX header".into()))
}

/// Returns `(n, rows, cols, pixels)`.
pub fn parse_idx_images(bytes: &[u8]) -> Result<(usize, usize, usize, &[u8])> {
    let magic = read_u32(bytes, 0)?;
    if magic != IDX_IMAGES_MAGIC {
        return Err(Error::Data(format!(
            "bad IDX image magic {magic} (expected {IDX_IMAGES_MAGIC})"
        )));
    }
    let n = read_u32(bytes, 4)? as usize;
    let rows = read_u32(bytes, 8)? as usize;
    let cols = read_u32(bytes, 12)? as usize;
    let len = n * rows * cols;
    let data = bytes
        .get(16..16 + len)
        .ok_or_else(|| Error::Data(format!("truncated IDX image data: expected {len} bytes")))?;
    Ok((n, rows, cols, data))
}

pub fn parse_idx_labels(bytes: &[u8]) -> Result<&[u8]> {
    let magic = read_u32(bytes, 0)?;
    if magic != IDX_LABELS_MAGIC {
        return Err(Error::Data(format!(
            "bad IDX label magic {magic} (expected {IDX_LABELS_MAGIC})"
        )));
    }
    let n = read_u32(bytes, 4)? as usize;
    bytes
        .get(8..8 + n)
        .ok_or_else(|| Error::Data(format!("truncated IDX label data: expected {n} bytes")))
}

/// Loads MNIST images as features scaled by `1/255`, optionally keeping a
/// random subsample of `subsample_n` images.
pub fn load_mnist(
    images_path: impl AsRef<Path>,
    labels_path: impl AsRef<Path>,
    subsample_n: Option<usize>,
    seed: u64,
) -> Result<FeatureTable> {
    let images_path = images_path.as_ref();
    let labels_path = labels_path.as_ref();
    let image_bytes = std::fs::read(images_path).map_err(|e| Error::io(images_path, e))?;
    let label_bytes = std::fs::read(labels_path).map_err(|e| Error::io(labels_path, e))?;
    mnist_table(&image_bytes, &label_bytes, subsample_n, seed)
}

pub(crate) fn mnist_table(
    image_bytes: &[u8],
    label_bytes: &[u8],
    subsample_n: Option<usize>,
    seed: u64,
) -> Result<FeatureTable> {
    let (n, rows, cols, pixels) = parse_idx_images(image_bytes)?;
    let labels = parse_idx_labels(label_bytes)?;
    if labels.len() != n {
        return Err(Error::Data(format!(
            "{n} images but {} labels",
            labels.len()
        )));
    }
    let d = rows * cols;
    let keep: Vec<usize> = match subsample_n {
        Some(k) if k < n => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mut idx = sample(&mut rng, n, k).into_vec();
            idx.sort_unstable();
            idx
        }
        _ => (0..n).collect(),
    };
    let x = Array2::from_shape_fn((keep.len(), d), |(i, j)| {
        f64::from(pixels[keep[i] * d + j]) / 255.0
    });
    let y = keep.iter().map(|&i| usize::from(labels[i])).collect();
    let names = (0..d)
        .map(|j| format!("px_{}_{}", j / cols, j % cols))
        .collect();
    FeatureTable::new(x, y, names, vec![], 10)
}

#[cfg(test)]
pub(crate) fn encode_idx(
    images: &[Vec<u8>],
    rows: usize,
    cols: usize,
    labels: &[u8],
) -> (Vec<u8>, Vec<u8>) {
    let mut img = Vec::new();
    img.extend(IDX_IMAGES_MAGIC.to_be_bytes());
    img.extend((images.len() as u32).to_be_bytes());
    img.extend((rows as u32).to_be_bytes());
    img.extend((cols as u32).to_be_bytes());
    for im in images {
        img.extend(im);
    }
    let mut lab = Vec::new();
    lab.extend(IDX_LABELS_MAGIC.to_be_bytes());
    lab.extend((labels.len() as u32).to_be_bytes());
    lab.extend(labels);
    (img, lab)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn scales_pixels_and_reads_labels() {
        let black = vec![0u8; 4];
        let white = vec![255u8, 0, 128, 255];
        let (img, lab) = encode_idx(&[black, white], 2, 2, &[3, 9]);
        let t = mnist_table(&img, &lab, None, 0).unwrap();
        assert_eq!((t.n_rows(), t.n_features(), t.n_classes()), (2, 4, 10));
        assert!(t.row(0).iter().all(|&v| v == 0.0));
        assert_eq!(t.row(1)[0], 1.0);
        assert_eq!(t.row(1)[2], 128.0 / 255.0);
        assert_eq!(t.labels(), &[3, 9]);
        assert!(t.forced_indices().is_empty());
    }

    #[test]
    fn rejects_bad_magic_and_truncation() {
        let (mut img, lab) = encode_idx(&[vec![1, 2, 3, 4]], 2, 2, &[1]);
        let short = &img[..img.len() - 1];
        assert!(mnist_table(short, &lab, None, 0)
            .unwrap_err()
            .to_string()
            .contains("truncated"));
        img[3] = 0x02;
        assert!(mnist_table(&img, &lab, None, 0)
            .unwrap_err()
            .to_string()
            .contains("magic"));
        assert!(parse_idx_labels(&lab[..6]).is_err());
    }

    #[test]
    fn subsample_is_seeded() {
        let images: Vec<Vec<u8>> = (0..20u8).map(|i| vec![i; 4]).collect();
        let labels: Vec<u8> = (0..20u8).map(|i| i % 10).collect();
        let (img, lab) = encode_idx(&images, 2, 2, &labels);
        let a = mnist_table(&img, &lab, Some(5), 7).unwrap();
        let b = mnist_table(&img, &lab, Some(5), 7).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.n_rows(), 5);
    }
}
