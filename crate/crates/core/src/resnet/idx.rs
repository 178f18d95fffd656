//! MNIST IDX files.
//!
//! Both files start with a big-endian `u32` magic number (`0x803` for
//! images, `0x801` for labels) and a `u32` item count; image files add `u32`
//! row and column counts. One unsigned byte per pixel or label follows.

use std::fs;
use std::path::Path;

use nalgebra::DMatrix;

use crate::error::{PfcError, Result};
use crate::features::FeatureSet;

pub const IMAGES_MAGIC: u32 = 0x0000_0803;
pub const LABELS_MAGIC: u32 = 0x0000_0801;
pub const MNIST_CLASSES: usize = 10;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IdxImages {
    pub count: usize,
    pub rows: usize,
    pub cols: usize,
    /// Row-major pixels, image after image.
    pub pixels: Vec<u8>,
}

impl IdxImages {
    pub fn image(&self, i: usize) -> &[u8] {
        let size = self.rows * self.cols;
        &self.pixels[i * size..(i + 1) * size]
    }
}

struct Reader<'a> {
    bytes: &'a [u8],
    origin: &'a str,
}

impl Reader<'_> {
    fn header(&self, words: usize, magic: u32) -> Result<Vec<usize>> {
        if self.bytes.len() < 4 * words {
            return Err(PfcError::format(
                self.origin,
                format!("truncated header: {} bytes, need {}", self.bytes.len(), 4 * words),
            ));
        }
        let w: Vec<u32> = self.bytes[..4 * words]
            .chunks_exact(4)
            .map(|c| u32::from_be_bytes([c[0], c[1], c[2], c[3]]))
            .collect();
        if w[0] != magic {
            return Err(PfcError::format(
                self.origin,
                format!("bad magic number {:#010x}, expected {magic:#010x}", w[0]),
            ));
        }
        Ok(w[1..].iter().map(|&v| v as usize).collect())
    }

    fn body(&self, offset: usize, len: Option<usize>) -> Result<&[u8]> {
        let available = self.bytes.len() - offset;
        match len {
            Some(len) if len == available => Ok(&self.bytes[offset..]),
            Some(len) if len > available => Err(PfcError::format(
                self.origin,
                format!("truncated: header promises {len} data bytes, file has {available}"),
            )),
            Some(len) => Err(PfcError::format(
                self.origin,
                format!("{} trailing bytes after {len} data bytes", available - len),
            )),
            None => Err(PfcError::format(self.origin, "header sizes overflow")),
        }
    }
}

fn images_named(bytes: &[u8], origin: &str) -> Result<IdxImages> {
    let r = Reader { bytes, origin };
    let h = r.header(4, IMAGES_MAGIC)?;
    let (count, rows, cols) = (h[0], h[1], h[2]);
    let len = count.checked_mul(rows).and_then(|v| v.checked_mul(cols));
    let pixels = r.body(16, len)?.to_vec();
    Ok(IdxImages { count, rows, cols, pixels })
}

fn labels_named(bytes: &[u8], origin: &str) -> Result<Vec<u8>> {
    let r = Reader { bytes, origin };
    let h = r.header(2, LABELS_MAGIC)?;
    Ok(r.body(8, Some(h[0]))?.to_vec())
}

pub fn parse_idx_images(bytes: &[u8]) -> Result<IdxImages> {
    images_named(bytes, "<idx images>")
}

pub fn parse_idx_labels(bytes: &[u8]) -> Result<Vec<u8>> {
    labels_named(bytes, "<idx labels>")
}

/// The first `per_class` images of each digit in file order, pixels scaled to
/// `[0, 1]`, as a `rows·cols × 10·per_class` feature set grouped by class.
pub fn balanced_subset(images: &IdxImages, labels: &[u8], per_class: usize, origin: &str) -> Result<FeatureSet> {
    if images.count != labels.len() {
        return Err(PfcError::format(
            origin,
            format!("{} images but {} labels", images.count, labels.len()),
        ));
    }
    if per_class == 0 {
        return Err(PfcError::Validation("per_class must be positive".into()));
    }
    let mut chosen: Vec<Vec<usize>> = vec![Vec::with_capacity(per_class); MNIST_CLASSES];
    for (i, &y) in labels.iter().enumerate() {
        let y = y as usize;
        if y >= MNIST_CLASSES {
            return Err(PfcError::format(origin, format!("label {y} at index {i} is not a digit")));
        }
        if chosen[y].len() < per_class {
            chosen[y].push(i);
        }
    }
    if let Some((class, got)) = chosen.iter().enumerate().find(|(_, c)| c.len() < per_class) {
        return Err(PfcError::InsufficientData {
            class,
            available: got.len(),
            required: per_class,
        });
    }
    let dim = images.rows * images.cols;
    if dim == 0 {
        return Err(PfcError::format(origin, "images have zero pixels"));
    }
    let order: Vec<usize> = chosen.into_iter().flatten().collect();
    let x = DMatrix::from_fn(dim, order.len(), |r, c| images.image(order[c])[r] as f64 / 255.0);
    FeatureSet::new(x, MNIST_CLASSES, per_class)
}

/// Reads an image/label file pair and returns the balanced subset with its
/// labels.
pub fn load_mnist_idx(images_path: &Path, labels_path: &Path, per_class: usize) -> Result<(FeatureSet, Vec<usize>)> {
    let image_name = images_path.display().to_string();
    let label_name = labels_path.display().to_string();
    let images = images_named(&fs::read(images_path)?, &image_name)?;
    let labels = labels_named(&fs::read(labels_path)?, &label_name)?;
    let fs = balanced_subset(&images, &labels, per_class, &label_name)?;
    let y = (0..fs.num_samples()).map(|j| fs.label(j)).collect();
    Ok((fs, y))
}
