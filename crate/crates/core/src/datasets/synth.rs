//! Deterministic synthetic stand-ins for gisette and MNIST.

use rand::Rng;
use rand_distr::StandardNormal;

use super::{DenseDataset, ImageSample};
use crate::error::{Error, Result};
use crate::rng::{stream, Domain};

/// Two unit-variance Gaussian clusters whose means are `margin` apart along a
/// random unit direction. Labels alternate 0, 1, 0, ... so classes are balanced.
pub fn synth_classification(n: usize, d: usize, margin: f64, seed: u64) -> Result<DenseDataset> {
    if n < 2 {
        return Err(Error::invalid(format!("need at least 2 rows, got {n}")));
    }
    if d == 0 {
        return Err(Error::invalid("need at least 1 feature"));
    }
    if !(margin >= 0.0 && margin.is_finite()) {
        return Err(Error::invalid(format!("margin must be finite and non-negative, got {margin}")));
    }
    let mut rng = stream(seed, Domain::Dataset, 0, 0);
    let mut direction: Vec<f64> = (0..d).map(|_| rng.sample(StandardNormal)).collect();
    let norm = direction.iter().map(|x| x * x).sum::<f64>().sqrt();
    direction.iter_mut().for_each(|x| *x /= norm);

    let mut features = Vec::with_capacity(n * d);
    let mut labels = Vec::with_capacity(n);
    for i in 0..n {
        let label = (i % 2) as u32;
        let shift = if label == 1 { margin / 2.0 } else { -margin / 2.0 };
        for u in &direction {
            let noise: f64 = rng.sample(StandardNormal);
            features.push(noise + shift * u);
        }
        labels.push(label);
    }
    DenseDataset::new(features, labels, d)
}

const FONT: [[&str; 7]; 10] = [
    ["01110", "10001", "10011", "10101", "11001", "10001", "01110"],
    ["00100", "01100", "00100", "00100", "00100", "00100", "01110"],
    ["01110", "10001", "00001", "00010", "00100", "01000", "11111"],
    ["11111", "00010", "00100", "00010", "00001", "10001", "01110"],
    ["00010", "00110", "01010", "10010", "11111", "00010", "00010"],
    ["11111", "10000", "11110", "00001", "00001", "10001", "01110"],
    ["00110", "01000", "10000", "11110", "10001", "10001", "01110"],
    ["11111", "00001", "00010", "00100", "01000", "01000", "01000"],
    ["01110", "10001", "10001", "01110", "10001", "10001", "01110"],
    ["01110", "10001", "10001", "01111", "00001", "00010", "01100"],
];

/// The noiseless `size`×`size` binary rendering of `digit` (5×7 font, nearest-neighbour scaled).
pub fn glyph_stencil(digit: u8, size: usize) -> Vec<f64> {
    let rows = &FONT[usize::from(digit)];
    let mut pixels = Vec::with_capacity(size * size);
    for r in 0..size {
        let font_row = rows[r * 7 / size].as_bytes();
        for c in 0..size {
            pixels.push(if font_row[c * 5 / size] == b'1' { 1.0 } else { 0.0 });
        }
    }
    pixels
}

/// `n_per_class` images of each digit, interleaved by class (0, 1, ..., 9, 0, ...).
///
/// Every pixel gets independent uniform noise in `[-noise, noise]`, clamped to [0, 1].
pub fn synth_glyphs(n_per_class: usize, size: usize, noise: f64, seed: u64) -> Result<Vec<ImageSample>> {
    if size < 8 {
        return Err(Error::invalid(format!("glyph size must be at least 8, got {size}")));
    }
    if !(0.0..=1.0).contains(&noise) {
        return Err(Error::invalid(format!("noise must lie in [0, 1], got {noise}")));
    }
    let stencils: Vec<Vec<f64>> = (0..10).map(|d| glyph_stencil(d, size)).collect();
    let mut rng = stream(seed, Domain::Dataset, 1, 0);
    let mut samples = Vec::with_capacity(n_per_class * 10);
    for i in 0..n_per_class * 10 {
        let label = (i % 10) as u8;
        let pixels = stencils[usize::from(label)]
            .iter()
            .map(|&p| {
                if noise > 0.0 {
                    (p + rng.random_range(-noise..=noise)).clamp(0.0, 1.0)
                } else {
                    p
                }
            })
            .collect();
        samples.push(ImageSample { height: size, width: size, pixels, label });
    }
    Ok(samples)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn classification_is_deterministic_and_balanced() {
        let a = synth_classification(101, 10, 4.0, 1).unwrap();
        let b = synth_classification(101, 10, 4.0, 1).unwrap();
        assert_eq!(a, b);
        let ones = a.labels().iter().filter(|&&l| l == 1).count() as i64;
        assert!((ones - (101 - ones)).abs() <= 1);
        assert_ne!(a, synth_classification(101, 10, 4.0, 2).unwrap());
    }

    #[test]
    fn classification_rejects_bad_arguments() {
        assert!(synth_classification(1, 3, 1.0, 0).is_err());
        assert!(synth_classification(10, 0, 1.0, 0).is_err());
        assert!(synth_classification(10, 3, -1.0, 0).is_err());
    }

    #[test]
    fn glyph_counts_and_labels() {
        let images = synth_glyphs(5, 28, 0.2, 3).unwrap();
        assert_eq!(images.len(), 50);
        for digit in 0..10u8 {
            assert_eq!(images.iter().filter(|im| im.label == digit).count(), 5);
        }
        assert!(images.iter().flat_map(|im| &im.pixels).all(|p| (0.0..=1.0).contains(p)));
    }

    #[test]
    fn noiseless_glyphs_of_one_class_are_identical() {
        let images = synth_glyphs(2, 12, 0.0, 9).unwrap();
        let threes: Vec<_> = images.iter().filter(|im| im.label == 3).collect();
        assert_eq!(threes[0].pixels, threes[1].pixels);
    }

    #[test]
    fn noiseless_glyphs_match_nearest_stencil() {
        let size = 16;
        let stencils: Vec<Vec<f64>> = (0..10).map(|d| glyph_stencil(d, size)).collect();
        let images = synth_glyphs(3, size, 0.0, 4).unwrap();
        let correct = images
            .iter()
            .filter(|im| {
                let nearest = (0..10)
                    .min_by(|&a, &b| {
                        let da: f64 = stencils[a].iter().zip(&im.pixels).map(|(s, p)| (s - p).powi(2)).sum();
                        let db: f64 = stencils[b].iter().zip(&im.pixels).map(|(s, p)| (s - p).powi(2)).sum();
                        da.total_cmp(&db)
                    })
                    .unwrap();
                nearest == usize::from(im.label)
            })
            .count();
        assert_eq!(correct, images.len());
    }

    #[test]
    fn glyph_arguments_validated() {
        assert!(synth_glyphs(1, 7, 0.0, 0).is_err());
        assert!(synth_glyphs(1, 8, 1.5, 0).is_err());
        assert!(synth_glyphs(1, 8, -0.1, 0).is_err());
    }
}
