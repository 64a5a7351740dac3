use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{Matrix, Shape};
use crate::error::{Error, Result};

/// One `k×k` kernel applied as a valid (unpadded, stride 1) cross-correlation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "ConvRepr", into = "ConvRepr")]
pub struct ConvolutionModel {
    kernel: Matrix,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ConvRepr {
    kernel_size: usize,
    parameters: Vec<f64>,
}

impl TryFrom<ConvRepr> for ConvolutionModel {
    type Error = Error;

    fn try_from(repr: ConvRepr) -> Result<Self> {
        ConvolutionModel::new(Matrix::new(repr.kernel_size, repr.kernel_size, repr.parameters)?)
    }
}

impl From<ConvolutionModel> for ConvRepr {
    fn from(model: ConvolutionModel) -> Self {
        ConvRepr { kernel_size: model.kernel.rows(), parameters: model.kernel.into_vec() }
    }
}

impl ConvolutionModel {
    pub fn new(kernel: Matrix) -> Result<Self> {
        let k = kernel.rows();
        if k != kernel.cols() || k.is_multiple_of(2) {
            return Err(Error::invalid(format!("kernel must be square with odd size, got {k}×{}", kernel.cols())));
        }
        Ok(ConvolutionModel { kernel })
    }

    /// Kernel entries uniform in ±1/k.
    pub fn random<R: Rng + ?Sized>(k: usize, rng: &mut R) -> Result<Self> {
        let bound = 1.0 / k as f64;
        let data = (0..k * k).map(|_| rng.random_range(-bound..bound)).collect();
        ConvolutionModel::new(Matrix::new(k, k, data)?)
    }

    pub fn kernel(&self) -> &Matrix {
        &self.kernel
    }

    pub fn kernel_size(&self) -> usize {
        self.kernel.rows()
    }

    pub fn parameter_count(&self) -> usize {
        self.kernel.data.len()
    }

    pub fn output_shape(&self, input: Shape) -> Result<Shape> {
        let k = self.kernel_size();
        match input {
            Shape::Matrix(h, w) if h >= k && w >= k => Ok(Shape::Matrix(h - k + 1, w - k + 1)),
            other => Err(Error::Shape(format!("{k}×{k} convolution cannot take a {other} input"))),
        }
    }

    pub fn forward(&self, image: &Matrix) -> Result<Matrix> {
        let k = self.kernel_size();
        let Shape::Matrix(oh, ow) = self.output_shape(Shape::Matrix(image.rows(), image.cols()))? else {
            unreachable!("convolution output is a matrix")
        };
        let mut out = Vec::with_capacity(oh * ow);
        for r in 0..oh {
            for c in 0..ow {
                let mut acc = 0.0;
                for i in 0..k {
                    let image_row = &image.row(r + i)[c..c + k];
                    acc += self.kernel.row(i).iter().zip(image_row).map(|(a, b)| a * b).sum::<f64>();
                }
                out.push(acc);
            }
        }
        Matrix::new(oh, ow, out)
    }

    pub(super) fn read_params(&mut self, params: &[f64]) {
        let n = self.kernel.data.len();
        self.kernel.data.copy_from_slice(&params[..n]);
    }
}

/// Non-overlapping `p×p` max pooling; remainder rows and columns are dropped.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DownSamplingModel {
    window: usize,
}

impl DownSamplingModel {
    pub fn new(window: usize) -> Result<Self> {
        if window == 0 {
            return Err(Error::invalid("pooling window must be at least 1"));
        }
        Ok(DownSamplingModel { window })
    }

    pub fn window(&self) -> usize {
        self.window
    }

    pub fn output_shape(&self, input: Shape) -> Result<Shape> {
        let p = self.window;
        match input {
            Shape::Matrix(h, w) if h >= p && w >= p => Ok(Shape::Matrix(h / p, w / p)),
            other => Err(Error::Shape(format!("{p}×{p} pooling cannot take a {other} input"))),
        }
    }

    pub fn forward(&self, image: &Matrix) -> Result<Matrix> {
        let p = self.window;
        let Shape::Matrix(oh, ow) = self.output_shape(Shape::Matrix(image.rows(), image.cols()))? else {
            unreachable!("pooling output is a matrix")
        };
        let mut out = Vec::with_capacity(oh * ow);
        for r in 0..oh {
            for c in 0..ow {
                let mut best = f64::NEG_INFINITY;
                for i in 0..p {
                    for &v in &image.row(r * p + i)[c * p..(c + 1) * p] {
                        best = best.max(v);
                    }
                }
                out.push(best);
            }
        }
        Matrix::new(oh, ow, out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn image(h: usize, w: usize) -> Matrix {
        Matrix::new(h, w, (0..h * w).map(|i| i as f64).collect()).unwrap()
    }

    #[test]
    fn delta_kernel_extracts_interior() {
        let mut kernel = Matrix::zeros(3, 3);
        kernel.data[4] = 1.0;
        let conv = ConvolutionModel::new(kernel).unwrap();
        let img = image(5, 5);
        let out = conv.forward(&img).unwrap();
        assert_eq!((out.rows(), out.cols()), (3, 3));
        for r in 0..3 {
            for c in 0..3 {
                assert_eq!(out.get(r, c), img.get(r + 1, c + 1));
            }
        }
    }

    #[test]
    fn ones_kernel_sums_window() {
        let conv = ConvolutionModel::new(Matrix::new(3, 3, vec![1.0; 9]).unwrap()).unwrap();
        let out = conv.forward(&Matrix::new(3, 3, vec![1.0; 9]).unwrap()).unwrap();
        assert_eq!(out.as_slice(), &[9.0]);
    }

    #[test]
    fn conv_shapes_and_errors() {
        let conv = ConvolutionModel::new(Matrix::zeros(3, 3)).unwrap();
        assert_eq!(conv.forward(&image(28, 28)).unwrap().rows(), 26);
        assert!(conv.forward(&image(2, 5)).is_err());
        assert!(ConvolutionModel::new(Matrix::zeros(2, 2)).is_err());
        assert!(ConvolutionModel::new(Matrix::zeros(3, 1)).is_err());
    }

    #[test]
    fn pooling_examples() {
        let pool = DownSamplingModel::new(2).unwrap();
        let out = pool.forward(&Matrix::from_rows(&[&[1.0, 2.0], &[3.0, 4.0]]).unwrap()).unwrap();
        assert_eq!(out.as_slice(), &[4.0]);

        let pool3 = DownSamplingModel::new(3).unwrap();
        let out = pool3.forward(&image(26, 26)).unwrap();
        assert_eq!((out.rows(), out.cols()), (8, 8));

        let constant = pool3.forward(&Matrix::new(9, 6, vec![2.5; 54]).unwrap()).unwrap();
        assert!(constant.as_slice().iter().all(|&v| v == 2.5));
        assert!(pool3.forward(&image(2, 9)).is_err());
    }

    proptest! {
        #[test]
        fn pooled_values_come_from_their_window(
            h in 2usize..12, w in 2usize..12, p in 1usize..4, seed in prop::collection::vec(-9.0f64..9.0, 144)
        ) {
            prop_assume!(h >= p && w >= p);
            let img = Matrix::new(h, w, seed[..h * w].to_vec()).unwrap();
            let out = DownSamplingModel::new(p).unwrap().forward(&img).unwrap();
            for r in 0..out.rows() {
                for c in 0..out.cols() {
                    let window: Vec<f64> = (0..p)
                        .flat_map(|i| img.row(r * p + i)[c * p..(c + 1) * p].to_vec())
                        .collect();
                    prop_assert!(window.contains(&out.get(r, c)));
                    prop_assert!(window.iter().all(|&v| v <= out.get(r, c)));
                }
            }
        }
    }
}
