use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::datasets::ImageSample;
use crate::error::{Error, Result};
use crate::neuro_models::{argmax, Matrix, Model, Shape, Signal};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum FitnessKind {
    /// `1 / (1 + mean L2 distance)` between output and expected vector.
    Distance,
    /// Fraction of pairs whose output argmax matches the expected class.
    Accuracy,
}

/// An input with its expected output vector.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainingPair {
    pub input: Signal,
    pub expected: Vec<f64>,
}

impl TrainingPair {
    /// One-hot pairs over 10 classes. `input` decides whether images are fed
    /// as matrices or flattened row-major into vectors.
    pub fn from_images(images: &[ImageSample], input: Shape) -> Result<Vec<TrainingPair>> {
        images
            .iter()
            .map(|im| {
                let signal = match input {
                    Shape::Matrix(h, w) if (h, w) == (im.height, im.width) => {
                        Signal::Matrix(Matrix::new(h, w, im.pixels.clone())?)
                    }
                    Shape::Vector(n) if n == im.pixels.len() => Signal::Vector(im.pixels.clone()),
                    other => {
                        return Err(Error::Shape(format!(
                            "model input {other} does not fit a {}×{} image",
                            im.height, im.width
                        )))
                    }
                };
                let mut expected = vec![0.0; 10];
                expected[usize::from(im.label)] = 1.0;
                Ok(TrainingPair { input: signal, expected })
            })
            .collect()
    }
}

fn output_for(model: &Model, pair: &TrainingPair) -> Result<Vec<f64>> {
    let output = model.forward(&pair.input)?.flatten();
    if output.len() != pair.expected.len() {
        return Err(Error::DimensionMismatch { expected: pair.expected.len(), found: output.len() });
    }
    Ok(output)
}

pub fn distance_fitness(model: &Model, data: &[TrainingPair]) -> Result<f64> {
    if data.is_empty() {
        return Err(Error::Empty("fitness data".into()));
    }
    let mut total = 0.0;
    for pair in data {
        let output = output_for(model, pair)?;
        total += output.iter().zip(&pair.expected).map(|(o, e)| (o - e).powi(2)).sum::<f64>().sqrt();
    }
    Ok(1.0 / (1.0 + total / data.len() as f64))
}

fn one_hot_class(expected: &[f64]) -> Result<usize> {
    let ones = expected.iter().filter(|&&v| v == 1.0).count();
    if ones != 1 || expected.iter().any(|&v| v != 0.0 && v != 1.0) {
        return Err(Error::invalid(format!("expected vector is not one-hot: {expected:?}")));
    }
    Ok(expected.iter().position(|&v| v == 1.0).expect("one entry is 1"))
}

pub fn accuracy_fitness(model: &Model, data: &[TrainingPair]) -> Result<f64> {
    if data.is_empty() {
        return Err(Error::Empty("fitness data".into()));
    }
    let mut correct = 0usize;
    for pair in data {
        let class = one_hot_class(&pair.expected)?;
        if argmax(&output_for(model, pair)?) == class {
            correct += 1;
        }
    }
    Ok(correct as f64 / data.len() as f64)
}

pub fn fitness(model: &Model, data: &[TrainingPair], kind: FitnessKind) -> Result<f64> {
    match kind {
        FitnessKind::Distance => distance_fitness(model, data),
        FitnessKind::Accuracy => accuracy_fitness(model, data),
    }
}

/// Scores models on a fixed-size thread pool. Scores come back in input order
/// and equal sequential evaluation, whatever the worker count.
pub struct Evaluator {
    pool: rayon::ThreadPool,
    workers: usize,
}

impl Evaluator {
    pub fn new(workers: usize) -> Result<Self> {
        if workers == 0 {
            return Err(Error::invalid("need at least one evaluation worker"));
        }
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(workers)
            .thread_name(|i| format!("fitness-{i}"))
            .build()
            .map_err(|e| Error::invalid(format!("cannot start {workers} evaluation threads: {e}")))?;
        Ok(Evaluator { pool, workers })
    }

    pub fn workers(&self) -> usize {
        self.workers
    }

    pub fn evaluate(&self, models: &[&Model], data: &[TrainingPair], kind: FitnessKind) -> Result<Vec<f64>> {
        self.pool.install(|| models.par_iter().map(|m| fitness(m, data, kind)).collect())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::neuro_models::{Activation, NeuralModel};

    /// Linear 3→3 model whose output equals its input.
    fn identity_model() -> Model {
        let mut params = vec![0.0; 12];
        for i in 0..3 {
            params[i * 3 + i] = 1.0;
        }
        Model::Neural(NeuralModel::zeros(&[3, 3], Activation::Identity).unwrap()).with_params(&params).unwrap()
    }

    fn pair(input: &[f64], expected: &[f64]) -> TrainingPair {
        TrainingPair { input: Signal::Vector(input.to_vec()), expected: expected.to_vec() }
    }

    #[test]
    fn perfect_model_scores_one() {
        let data = vec![pair(&[1.0, 0.0, 0.0], &[1.0, 0.0, 0.0]), pair(&[0.0, 0.0, 1.0], &[0.0, 0.0, 1.0])];
        assert_eq!(distance_fitness(&identity_model(), &data).unwrap(), 1.0);
        assert_eq!(accuracy_fitness(&identity_model(), &data).unwrap(), 1.0);
    }

    #[test]
    fn unit_distance_scores_half() {
        let data = vec![pair(&[0.0, 1.0, 0.0], &[1.0, 1.0, 0.0])];
        assert_eq!(distance_fitness(&identity_model(), &data).unwrap(), 0.5);
    }

    #[test]
    fn shrinking_errors_raises_fitness() {
        let target = [1.0, 0.0, 0.0];
        let mut last = 0.0;
        for step in (0..=10).rev() {
            let e = f64::from(step) * 0.3;
            let f = distance_fitness(&identity_model(), &[pair(&[1.0 + e, -e, e], &target)]).unwrap();
            assert!(f > last);
            last = f;
        }
    }

    #[test]
    fn constant_model_on_balanced_classes_is_one_tenth() {
        let model = Model::Neural(NeuralModel::zeros(&[2, 10], Activation::Identity).unwrap());
        let data: Vec<_> = (0..10)
            .map(|c| {
                let mut e = vec![0.0; 10];
                e[c] = 1.0;
                pair(&[0.5, 0.5], &e)
            })
            .collect();
        assert!((accuracy_fitness(&model, &data).unwrap() - 0.1).abs() < 1e-15);
    }

    #[test]
    fn half_correct_is_half() {
        let data = vec![pair(&[2.0, 0.0, 1.0], &[1.0, 0.0, 0.0]), pair(&[2.0, 0.0, 1.0], &[0.0, 0.0, 1.0])];
        assert_eq!(accuracy_fitness(&identity_model(), &data).unwrap(), 0.5);
    }

    #[test]
    fn fitness_errors() {
        let m = identity_model();
        assert!(distance_fitness(&m, &[]).is_err());
        assert!(accuracy_fitness(&m, &[pair(&[1.0, 0.0, 0.0], &[0.5, 0.5, 0.0])]).is_err());
        assert!(distance_fitness(&m, &[pair(&[1.0, 0.0, 0.0], &[1.0, 0.0])]).is_err());
    }

    #[test]
    fn parallel_scores_equal_sequential() {
        let mut rng = crate::rng::stream(3, crate::rng::Domain::ModelInit, 0, 0);
        let models: Vec<Model> = (0..13)
            .map(|_| Model::Neural(NeuralModel::random(&[3, 4, 3], Activation::Identity, &mut rng).unwrap()))
            .collect();
        let refs: Vec<&Model> = models.iter().collect();
        let data = vec![pair(&[1.0, -1.0, 0.5], &[0.0, 1.0, 0.0]), pair(&[0.2, 0.1, 0.9], &[1.0, 0.0, 0.0])];
        let sequential: Vec<f64> = models.iter().map(|m| distance_fitness(m, &data).unwrap()).collect();
        for workers in [1, 2, 4] {
            let parallel = Evaluator::new(workers).unwrap().evaluate(&refs, &data, FitnessKind::Distance).unwrap();
            assert_eq!(parallel, sequential);
        }
    }
}
