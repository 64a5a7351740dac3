use serde::{Deserialize, Serialize};

use super::{Model, Shape, Signal};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
struct Stage {
    model: Model,
    input: Shape,
    output: Shape,
    /// Flatten a matrix input row-major before this stage.
    flatten: bool,
}

/// Models chained in sequence. Shapes are checked once, at construction.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "InterconnectedRepr", into = "InterconnectedRepr")]
pub struct InterconnectedModel {
    input: Shape,
    stages: Vec<Stage>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct InterconnectedRepr {
    input: Shape,
    stages: Vec<Model>,
}

impl TryFrom<InterconnectedRepr> for InterconnectedModel {
    type Error = Error;

    fn try_from(repr: InterconnectedRepr) -> Result<Self> {
        InterconnectedModel::new(repr.input, repr.stages)
    }
}

impl From<InterconnectedModel> for InterconnectedRepr {
    fn from(model: InterconnectedModel) -> Self {
        InterconnectedRepr { input: model.input, stages: model.stages.into_iter().map(|s| s.model).collect() }
    }
}

impl InterconnectedModel {
    pub fn new(input: Shape, models: Vec<Model>) -> Result<Self> {
        if models.is_empty() {
            return Err(Error::invalid("an interconnected model needs at least one stage"));
        }
        let mut current = input;
        let mut stages = Vec::with_capacity(models.len());
        for (i, model) in models.into_iter().enumerate() {
            let flatten = model.takes_vector() && matches!(current, Shape::Matrix(..));
            let stage_input = if flatten { Shape::Vector(current.len()) } else { current };
            let output = model
                .output_shape(stage_input)
                .map_err(|e| Error::Stage { stage: i, message: e.to_string() })?;
            stages.push(Stage { model, input: stage_input, output, flatten });
            current = output;
        }
        Ok(InterconnectedModel { input, stages })
    }

    pub fn input_shape(&self) -> Shape {
        self.input
    }

    pub fn output(&self) -> Shape {
        self.stages.last().expect("at least one stage").output
    }

    /// Declared `(input, output)` shape of every stage.
    pub fn stage_shapes(&self) -> Vec<(Shape, Shape)> {
        self.stages.iter().map(|s| (s.input, s.output)).collect()
    }

    pub fn stages(&self) -> impl Iterator<Item = &Model> {
        self.stages.iter().map(|s| &s.model)
    }

    pub fn output_shape(&self, input: Shape) -> Result<Shape> {
        if input != self.input {
            return Err(Error::Stage { stage: 0, message: format!("expected input {}, got {input}", self.input) });
        }
        Ok(self.output())
    }

    pub fn parameter_count(&self) -> usize {
        self.stages.iter().map(|s| s.model.parameter_count()).sum()
    }

    pub(super) fn write_params(&self, out: &mut Vec<f64>) {
        for stage in &self.stages {
            stage.model.write_params(out);
        }
    }

    pub(super) fn read_params(&mut self, mut params: &[f64]) {
        for stage in &mut self.stages {
            let n = stage.model.parameter_count();
            stage.model.read_params(&params[..n]);
            params = &params[n..];
        }
    }

    pub fn forward(&self, input: &Signal) -> Result<Signal> {
        if input.shape() != self.input {
            return Err(Error::Stage { stage: 0, message: format!("expected input {}, got {}", self.input, input.shape()) });
        }
        let mut signal = input.clone();
        for (i, stage) in self.stages.iter().enumerate() {
            if stage.flatten {
                signal = Signal::Vector(signal.flatten());
            }
            signal = stage.model.forward(&signal).map_err(|e| Error::Stage { stage: i, message: e.to_string() })?;
        }
        Ok(signal)
    }
}
