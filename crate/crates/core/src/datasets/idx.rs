//! Reader for the big-endian IDX files used by MNIST.

use std::fs;
use std::path::Path;

use super::ImageSample;
use crate::error::{Error, Result};

pub const IDX_IMAGES_MAGIC: u32 = 0x0000_0803;
pub const IDX_LABELS_MAGIC: u32 = 0x0000_0801;

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl Cursor<'_> {
    fn u32(&mut self) -> Result<u32> {
        let word = self
            .bytes
            .get(self.pos..self.pos + 4)
            .ok_or_else(|| Error::Parse { line: 0, message: "truncated IDX header".into() })?;
        self.pos += 4;
        Ok(u32::from_be_bytes(word.try_into().expect("4 bytes")))
    }

    fn rest(&self, len: usize) -> Result<&[u8]> {
        self.bytes.get(self.pos..self.pos + len).ok_or_else(|| Error::Parse {
            line: 0,
            message: format!("IDX payload truncated: need {len} bytes"),
        })
    }
}

fn expect_magic(cursor: &mut Cursor<'_>, magic: u32) -> Result<()> {
    let found = cursor.u32()?;
    if found != magic {
        return Err(Error::Parse { line: 0, message: format!("bad IDX magic {found:#010x}, expected {magic:#010x}") });
    }
    Ok(())
}

/// Parses an IDX image file; pixel bytes are scaled to [0, 1].
/// Labels are left at 0 until paired with a label file.
pub fn parse_idx_images(bytes: &[u8]) -> Result<Vec<ImageSample>> {
    let mut cursor = Cursor { bytes, pos: 0 };
    expect_magic(&mut cursor, IDX_IMAGES_MAGIC)?;
    let count = cursor.u32()? as usize;
    let height = cursor.u32()? as usize;
    let width = cursor.u32()? as usize;
    let payload = cursor.rest(count * height * width)?;
    Ok(payload
        .chunks_exact(height * width)
        .map(|px| ImageSample {
            height,
            width,
            pixels: px.iter().map(|&p| f64::from(p) / 255.0).collect(),
            label: 0,
        })
        .collect())
}

pub fn parse_idx_labels(bytes: &[u8]) -> Result<Vec<u8>> {
    let mut cursor = Cursor { bytes, pos: 0 };
    expect_magic(&mut cursor, IDX_LABELS_MAGIC)?;
    let count = cursor.u32()? as usize;
    Ok(cursor.rest(count)?.to_vec())
}

pub fn read_idx_images(path: impl AsRef<Path>) -> Result<Vec<ImageSample>> {
    let path = path.as_ref();
    parse_idx_images(&fs::read(path).map_err(|e| Error::io(path, e))?)
}

pub fn read_idx_labels(path: impl AsRef<Path>) -> Result<Vec<u8>> {
    let path = path.as_ref();
    parse_idx_labels(&fs::read(path).map_err(|e| Error::io(path, e))?)
}

/// Reads an image file and its label file, keeping at most `limit` samples.
pub fn read_idx_pair(
    images: impl AsRef<Path>,
    labels: impl AsRef<Path>,
    limit: Option<usize>,
) -> Result<Vec<ImageSample>> {
    let mut samples = read_idx_images(images)?;
    let labels = read_idx_labels(labels)?;
    if labels.len() != samples.len() {
        return Err(Error::DimensionMismatch { expected: samples.len(), found: labels.len() });
    }
    for (sample, label) in samples.iter_mut().zip(labels) {
        sample.label = label;
    }
    if let Some(limit) = limit {
        samples.truncate(limit);
    }
    Ok(samples)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn header(magic: u32, dims: &[u32]) -> Vec<u8> {
        let mut out = magic.to_be_bytes().to_vec();
        for d in dims {
            out.extend_from_slice(&d.to_be_bytes());
        }
        out
    }

    #[test]
    fn parses_images_and_labels() {
        let mut bytes = header(IDX_IMAGES_MAGIC, &[2, 2, 2]);
        bytes.extend_from_slice(&[0, 255, 51, 0, 255, 255, 255, 255]);
        let images = parse_idx_images(&bytes).unwrap();
        assert_eq!(images.len(), 2);
        assert_eq!(images[0].pixels, vec![0.0, 1.0, 0.2, 0.0]);

        let mut labels = header(IDX_LABELS_MAGIC, &[2]);
        labels.extend_from_slice(&[7, 3]);
        assert_eq!(parse_idx_labels(&labels).unwrap(), vec![7, 3]);
    }

    #[test]
    fn rejects_wrong_magic_and_truncation() {
        let labels = header(IDX_LABELS_MAGIC, &[1]);
        assert!(parse_idx_images(&labels).is_err());
        let truncated = header(IDX_IMAGES_MAGIC, &[1, 28, 28]);
        assert!(parse_idx_images(&truncated).is_err());
    }
}
