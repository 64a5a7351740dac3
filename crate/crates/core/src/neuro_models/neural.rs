use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{Matrix, Shape};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Activation {
    /// Raw scores.
    #[default]
    Identity,
    Relu,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DenseLayer {
    /// `out × in`
    pub weights: Matrix,
    pub biases: Vec<f64>,
}

impl DenseLayer {
    fn affine(&self, input: &[f64]) -> Vec<f64> {
        (0..self.weights.rows())
            .map(|o| self.biases[o] + self.weights.row(o).iter().zip(input).map(|(w, x)| w * x).sum::<f64>())
            .collect()
    }
}

/// Fully connected network: ReLU on hidden layers, `output_activation` on the last.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "NeuralRepr", into = "NeuralRepr")]
pub struct NeuralModel {
    layer_sizes: Vec<usize>,
    layers: Vec<DenseLayer>,
    output_activation: Activation,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct NeuralRepr {
    layer_sizes: Vec<usize>,
    output_activation: Activation,
    parameters: Vec<f64>,
}

impl TryFrom<NeuralRepr> for NeuralModel {
    type Error = Error;

    fn try_from(repr: NeuralRepr) -> Result<Self> {
        let mut model = NeuralModel::zeros(&repr.layer_sizes, repr.output_activation)?;
        if repr.parameters.len() != model.parameter_count() {
            return Err(Error::DimensionMismatch { expected: model.parameter_count(), found: repr.parameters.len() });
        }
        model.read_params(&repr.parameters);
        Ok(model)
    }
}

impl From<NeuralModel> for NeuralRepr {
    fn from(model: NeuralModel) -> Self {
        let mut parameters = Vec::with_capacity(model.parameter_count());
        model.write_params(&mut parameters);
        NeuralRepr { layer_sizes: model.layer_sizes, output_activation: model.output_activation, parameters }
    }
}

impl NeuralModel {
    pub fn zeros(layer_sizes: &[usize], output_activation: Activation) -> Result<Self> {
        if layer_sizes.len() < 2 {
            return Err(Error::invalid("a neural model needs at least an input and an output size"));
        }
        if layer_sizes.contains(&0) {
            return Err(Error::invalid(format!("layer sizes must be positive, got {layer_sizes:?}")));
        }
        let layers = layer_sizes
            .windows(2)
            .map(|pair| DenseLayer { weights: Matrix::zeros(pair[1], pair[0]), biases: vec![0.0; pair[1]] })
            .collect();
        Ok(NeuralModel { layer_sizes: layer_sizes.to_vec(), layers, output_activation })
    }

    /// Weights uniform in ±1/√fan_in, zero biases.
    pub fn random<R: Rng + ?Sized>(layer_sizes: &[usize], output_activation: Activation, rng: &mut R) -> Result<Self> {
        let mut model = NeuralModel::zeros(layer_sizes, output_activation)?;
        for layer in &mut model.layers {
            let bound = 1.0 / (layer.weights.cols() as f64).sqrt();
            layer.weights.data.iter_mut().for_each(|w| *w = rng.random_range(-bound..bound));
        }
        Ok(model)
    }

    pub fn from_layers(layers: Vec<DenseLayer>, output_activation: Activation) -> Result<Self> {
        let first = layers.first().ok_or_else(|| Error::invalid("no layers"))?;
        let mut layer_sizes = vec![first.weights.cols()];
        for layer in &layers {
            if layer.weights.cols() != *layer_sizes.last().expect("nonempty") {
                return Err(Error::DimensionMismatch {
                    expected: *layer_sizes.last().expect("nonempty"),
                    found: layer.weights.cols(),
                });
            }
            if layer.biases.len() != layer.weights.rows() {
                return Err(Error::DimensionMismatch { expected: layer.weights.rows(), found: layer.biases.len() });
            }
            layer_sizes.push(layer.weights.rows());
        }
        Ok(NeuralModel { layer_sizes, layers, output_activation })
    }

    pub fn layer_sizes(&self) -> &[usize] {
        &self.layer_sizes
    }

    pub fn layers(&self) -> &[DenseLayer] {
        &self.layers
    }

    pub fn input_len(&self) -> usize {
        self.layer_sizes[0]
    }

    pub fn parameter_count(&self) -> usize {
        self.layer_sizes.windows(2).map(|p| p[1] * p[0] + p[1]).sum()
    }

    pub fn output_shape(&self, input: Shape) -> Result<Shape> {
        match input {
            Shape::Vector(n) if n == self.input_len() => Ok(Shape::Vector(*self.layer_sizes.last().expect("≥2 sizes"))),
            other => Err(Error::Shape(format!("neural model expects a vector of {}, got {other}", self.input_len()))),
        }
    }

    pub fn forward(&self, input: &[f64]) -> Result<Vec<f64>> {
        if input.len() != self.input_len() {
            return Err(Error::DimensionMismatch { expected: self.input_len(), found: input.len() });
        }
        Ok(self.forward_with_hidden(input).pop().expect("at least one layer"))
    }

    /// Activations of every layer, last entry is the output.
    pub fn forward_with_hidden(&self, input: &[f64]) -> Vec<Vec<f64>> {
        let mut activations: Vec<Vec<f64>> = Vec::with_capacity(self.layers.len());
        for (i, layer) in self.layers.iter().enumerate() {
            let previous = activations.last().map_or(input, Vec::as_slice);
            let mut a = layer.affine(previous);
            let last = i + 1 == self.layers.len();
            if !last || self.output_activation == Activation::Relu {
                a.iter_mut().for_each(|x| *x = x.max(0.0));
            }
            activations.push(a);
        }
        activations
    }

    pub(super) fn write_params(&self, out: &mut Vec<f64>) {
        for layer in &self.layers {
            out.extend_from_slice(layer.weights.as_slice());
            out.extend_from_slice(&layer.biases);
        }
    }

    pub(super) fn read_params(&mut self, mut params: &[f64]) {
        for layer in &mut self.layers {
            let (w, rest) = params.split_at(layer.weights.data.len());
            layer.weights.data.copy_from_slice(w);
            let (b, rest) = rest.split_at(layer.biases.len());
            layer.biases.copy_from_slice(b);
            params = rest;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::neuro_models::Model;
    use crate::rng::{stream, Domain};
    use proptest::prelude::*;
    use rand::Rng;

    #[test]
    fn identity_layer_applies_relu_on_hidden() {
        let hidden = DenseLayer { weights: Matrix::from_rows(&[&[1.0, 0.0], &[0.0, 1.0]]).unwrap(), biases: vec![0.0; 2] };
        let out = DenseLayer { weights: Matrix::from_rows(&[&[1.0, 1.0]]).unwrap(), biases: vec![0.0] };
        let model = NeuralModel::from_layers(vec![hidden, out], Activation::Identity).unwrap();
        let acts = model.forward_with_hidden(&[1.0, -1.0]);
        assert_eq!(acts[0], vec![1.0, 0.0]);
    }

    #[test]
    fn zero_weights_output_biases() {
        let mut model = NeuralModel::zeros(&[3, 2], Activation::Identity).unwrap();
        model.layers[0].biases = vec![-0.5, 2.0];
        assert_eq!(model.forward(&[9.0, 9.0, 9.0]).unwrap(), vec![-0.5, 2.0]);
    }

    #[test]
    fn mnist_sized_model() {
        let model = NeuralModel::random(&[784, 10], Activation::Identity, &mut stream(0, Domain::ModelInit, 0, 0)).unwrap();
        assert_eq!(model.parameter_count(), 784 * 10 + 10);
        let out = model.forward(&vec![0.5; 784]).unwrap();
        assert_eq!(out.len(), 10);
        assert!(out.iter().all(|x| x.is_finite()));
        assert!(model.forward(&[0.0; 783]).is_err());
    }

    #[test]
    fn degenerate_sizes_rejected() {
        assert!(NeuralModel::zeros(&[4], Activation::Identity).is_err());
        assert!(NeuralModel::zeros(&[4, 0, 2], Activation::Identity).is_err());
    }

    proptest! {
        #[test]
        fn hidden_activations_are_non_negative(seed in 0u64..500, x in prop::collection::vec(-5.0f64..5.0, 6)) {
            let model = NeuralModel::random(&[6, 5, 4, 3], Activation::Identity, &mut stream(seed, Domain::ModelInit, 0, 0)).unwrap();
            let acts = model.forward_with_hidden(&x);
            for hidden in &acts[..acts.len() - 1] {
                prop_assert!(hidden.iter().all(|&a| a >= 0.0));
            }
        }

        #[test]
        fn parameter_round_trip_is_forward_identical(seed in 0u64..500) {
            let mut rng = stream(seed, Domain::ModelInit, 1, 0);
            let model = Model::Neural(NeuralModel::random(&[8, 6, 3], Activation::Identity, &mut rng).unwrap());
            let rebuilt = model.with_params(&model.get_params()).unwrap();
            for _ in 0..100 {
                let x: Vec<f64> = (0..8).map(|_| rng.random_range(-2.0..2.0)).collect();
                let input = crate::neuro_models::Signal::Vector(x);
                prop_assert_eq!(model.forward(&input).unwrap(), rebuilt.forward(&input).unwrap());
            }
        }
    }
}
