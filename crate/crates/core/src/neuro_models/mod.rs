//! Models trained by the genetic engine.
//!
//! Every model flattens to a [`ParameterVector`] in a fixed canonical order
//! (layers in order, weights row-major then biases, stages in order) and can
//! be rebuilt from one. That flat vector is the genome the genetic operators
//! work on.

mod conv;
mod interconnected;
mod neural;
mod shapes;

use std::fmt;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use conv::{ConvolutionModel, DownSamplingModel};
pub use interconnected::InterconnectedModel;
pub use neural::{Activation, DenseLayer, NeuralModel};
pub use shapes::{layer_stack_shapes, LayerDescriptor, LayerShape};

pub type ParameterVector = Vec<f64>;

/// Dense row-major matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn new(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::DimensionMismatch { expected: rows * cols, found: data.len() });
        }
        Ok(Matrix { rows, cols, data })
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Matrix { rows, cols, data: vec![0.0; rows * cols] }
    }

    pub fn from_rows(rows: &[&[f64]]) -> Result<Self> {
        let cols = rows.first().map_or(0, |r| r.len());
        let mut data = Vec::with_capacity(rows.len() * cols);
        for r in rows {
            if r.len() != cols {
                return Err(Error::DimensionMismatch { expected: cols, found: r.len() });
            }
            data.extend_from_slice(r);
        }
        Matrix::new(rows.len(), cols, data)
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.data[r * self.cols + c]
    }

    pub fn row(&self, r: usize) -> &[f64] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.data
    }
}

/// Data flowing between model stages.
#[derive(Debug, Clone, PartialEq)]
pub enum Signal {
    Vector(Vec<f64>),
    Matrix(Matrix),
}

impl Signal {
    pub fn shape(&self) -> Shape {
        match self {
            Signal::Vector(v) => Shape::Vector(v.len()),
            Signal::Matrix(m) => Shape::Matrix(m.rows, m.cols),
        }
    }

    /// Row-major flattening; vectors pass through.
    pub fn flatten(self) -> Vec<f64> {
        match self {
            Signal::Vector(v) => v,
            Signal::Matrix(m) => m.data,
        }
    }

    pub fn as_slice(&self) -> &[f64] {
        match self {
            Signal::Vector(v) => v,
            Signal::Matrix(m) => &m.data,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "Vec<usize>", into = "Vec<usize>")]
pub enum Shape {
    Vector(usize),
    Matrix(usize, usize),
}

impl Shape {
    pub fn len(self) -> usize {
        match self {
            Shape::Vector(n) => n,
            Shape::Matrix(h, w) => h * w,
        }
    }

    pub fn is_empty(self) -> bool {
        self.len() == 0
    }
}

impl fmt::Display for Shape {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Shape::Vector(n) => write!(f, "{n}"),
            Shape::Matrix(h, w) => write!(f, "{h}×{w}"),
        }
    }
}

impl TryFrom<Vec<usize>> for Shape {
    type Error = String;

    fn try_from(dims: Vec<usize>) -> Result<Self, String> {
        match dims[..] {
            [n] => Ok(Shape::Vector(n)),
            [h, w] => Ok(Shape::Matrix(h, w)),
            _ => Err(format!("shape must have 1 or 2 dimensions, got {dims:?}")),
        }
    }
}

impl From<Shape> for Vec<usize> {
    fn from(shape: Shape) -> Self {
        match shape {
            Shape::Vector(n) => vec![n],
            Shape::Matrix(h, w) => vec![h, w],
        }
    }
}

/// Any trainable model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Model {
    Neural(NeuralModel),
    Convolution(ConvolutionModel),
    DownSampling(DownSamplingModel),
    Interconnected(InterconnectedModel),
}

impl Model {
    pub fn forward(&self, input: &Signal) -> Result<Signal> {
        match self {
            Model::Neural(m) => match input {
                Signal::Vector(v) => m.forward(v).map(Signal::Vector),
                Signal::Matrix(_) => Err(Error::Shape(format!(
                    "neural model expects a vector of {}, got {}",
                    m.input_len(),
                    input.shape()
                ))),
            },
            Model::Convolution(m) => m.forward(as_matrix(input)?).map(Signal::Matrix),
            Model::DownSampling(m) => m.forward(as_matrix(input)?).map(Signal::Matrix),
            Model::Interconnected(m) => m.forward(input),
        }
    }

    /// Output shape for `input`, or an error if the model cannot accept it.
    pub fn output_shape(&self, input: Shape) -> Result<Shape> {
        match self {
            Model::Neural(m) => m.output_shape(input),
            Model::Convolution(m) => m.output_shape(input),
            Model::DownSampling(m) => m.output_shape(input),
            Model::Interconnected(m) => m.output_shape(input),
        }
    }

    /// Whether this model consumes flat vectors (so a preceding matrix stage must be flattened).
    pub fn takes_vector(&self) -> bool {
        match self {
            Model::Neural(_) => true,
            Model::Interconnected(m) => matches!(m.input_shape(), Shape::Vector(_)),
            _ => false,
        }
    }

    pub fn parameter_count(&self) -> usize {
        match self {
            Model::Neural(m) => m.parameter_count(),
            Model::Convolution(m) => m.parameter_count(),
            Model::DownSampling(_) => 0,
            Model::Interconnected(m) => m.parameter_count(),
        }
    }

    pub fn get_params(&self) -> ParameterVector {
        let mut out = Vec::with_capacity(self.parameter_count());
        self.write_params(&mut out);
        out
    }

    pub(crate) fn write_params(&self, out: &mut Vec<f64>) {
        match self {
            Model::Neural(m) => m.write_params(out),
            Model::Convolution(m) => out.extend_from_slice(m.kernel().as_slice()),
            Model::DownSampling(_) => {}
            Model::Interconnected(m) => m.write_params(out),
        }
    }

    pub fn set_params(&mut self, params: &[f64]) -> Result<()> {
        if params.len() != self.parameter_count() {
            return Err(Error::DimensionMismatch { expected: self.parameter_count(), found: params.len() });
        }
        self.read_params(params);
        Ok(())
    }

    /// Copies parameters from the front of `params`; the length was checked by the caller.
    pub(crate) fn read_params(&mut self, params: &[f64]) {
        match self {
            Model::Neural(m) => m.read_params(params),
            Model::Convolution(m) => m.read_params(params),
            Model::DownSampling(_) => {}
            Model::Interconnected(m) => m.read_params(params),
        }
    }

    pub fn with_params(&self, params: &[f64]) -> Result<Model> {
        let mut model = self.clone();
        model.set_params(params)?;
        Ok(model)
    }

    /// A mutated copy, using the genetic engine's parameter-level mutation.
    pub fn mutate<R: Rng + ?Sized>(&self, rate: f64, size: f64, rng: &mut R) -> Model {
        let params = crate::genetic::mutate(&self.get_params(), rate, size, rng);
        self.with_params(&params).expect("mutation preserves length")
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }

    pub fn from_json(text: &str) -> Result<Model> {
        Ok(serde_json::from_str(text)?)
    }
}

fn as_matrix(input: &Signal) -> Result<&Matrix> {
    match input {
        Signal::Matrix(m) => Ok(m),
        Signal::Vector(v) => Err(Error::Shape(format!("expected a matrix, got a vector of {}", v.len()))),
    }
}

/// Index of the largest score; ties go to the lowest index.
pub fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate().skip(1) {
        if v > values[best] {
            best = i;
        }
    }
    best
}

/// Architecture without parameters, as written in experiment configs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum ModelSpec {
    Neural {
        layer_sizes: Vec<usize>,
        #[serde(default)]
        output_activation: Activation,
    },
    Convolution {
        kernel: usize,
    },
    DownSampling {
        window: usize,
    },
    Interconnected {
        input: Shape,
        stages: Vec<ModelSpec>,
    },
}

impl ModelSpec {
    /// Builds the model with randomly initialised parameters.
    pub fn build<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<Model> {
        Ok(match self {
            ModelSpec::Neural { layer_sizes, output_activation } => {
                Model::Neural(NeuralModel::random(layer_sizes, *output_activation, rng)?)
            }
            ModelSpec::Convolution { kernel } => Model::Convolution(ConvolutionModel::random(*kernel, rng)?),
            ModelSpec::DownSampling { window } => Model::DownSampling(DownSamplingModel::new(*window)?),
            ModelSpec::Interconnected { input, stages } => {
                let stages = stages.iter().map(|s| s.build(rng)).collect::<Result<Vec<_>>>()?;
                Model::Interconnected(InterconnectedModel::new(*input, stages)?)
            }
        })
    }

    /// Shape of the input this architecture expects.
    pub fn input_shape(&self) -> Option<Shape> {
        match self {
            ModelSpec::Neural { layer_sizes, .. } => layer_sizes.first().map(|&n| Shape::Vector(n)),
            ModelSpec::Interconnected { input, .. } => Some(*input),
            _ => None,
        }
    }
}
