//! Shape arithmetic for padded, multi-channel layer stacks.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "layer", rename_all = "snake_case", deny_unknown_fields)]
pub enum LayerDescriptor {
    Conv { kernel: usize, channels: usize, padding: usize },
    Pool { window: usize },
    Fc { out: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LayerShape {
    Spatial { height: usize, width: usize, channels: usize },
    Flat(usize),
}

impl LayerShape {
    pub fn spatial(height: usize, width: usize, channels: usize) -> Self {
        LayerShape::Spatial { height, width, channels }
    }
}

impl fmt::Display for LayerShape {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            LayerShape::Spatial { height, width, channels } => write!(f, "{height}×{width}×{channels}"),
            LayerShape::Flat(n) => write!(f, "{n}"),
        }
    }
}

/// Output shape after each layer of `stack` applied to `input`.
pub fn layer_stack_shapes(input: LayerShape, stack: &[LayerDescriptor]) -> Result<Vec<LayerShape>> {
    let mut current = input;
    let mut shapes = Vec::with_capacity(stack.len());
    for (i, layer) in stack.iter().enumerate() {
        let fail = |message: String| Error::Stage { stage: i, message };
        current = match (*layer, current) {
            (LayerDescriptor::Conv { kernel, channels, padding }, LayerShape::Spatial { height, width, .. }) => {
                let axis = |n: usize| (n + 2 * padding).checked_sub(kernel).map(|v| v + 1);
                match (axis(height), axis(width)) {
                    (Some(h), Some(w)) if channels > 0 => LayerShape::spatial(h, w, channels),
                    _ => return Err(fail(format!("{kernel}×{kernel} conv (padding {padding}) on {current}"))),
                }
            }
            (LayerDescriptor::Pool { window }, LayerShape::Spatial { height, width, channels }) => {
                if window == 0 || height / window == 0 || width / window == 0 {
                    return Err(fail(format!("{window}×{window} pooling on {current}")));
                }
                LayerShape::spatial(height / window, width / window, channels)
            }
            (LayerDescriptor::Fc { out }, _) if out > 0 => LayerShape::Flat(out),
            (layer, shape) => return Err(fail(format!("{layer:?} cannot follow {shape}"))),
        };
        shapes.push(current);
    }
    Ok(shapes)
}
