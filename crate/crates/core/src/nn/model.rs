use serde::{Deserialize, Serialize};

use super::layer::{self, LayerKind, LayerSpec, LstmWeights};
use super::tensor::Tensor;
use crate::error::{Error, Result};
use crate::rng::fnv1a64;

/// A layer description together with its weight tensors.
#[derive(Debug, Clone, PartialEq)]
pub struct Layer {
    spec: LayerSpec,
    weights: Vec<Tensor>,
}

impl Layer {
    /// Checks the tensor count and shapes against `spec` and rejects
    /// non-finite weights.
    pub fn new(spec: LayerSpec, weights: Vec<Tensor>) -> Result<Self> {
        spec.validate()?;
        let expected = spec.weight_shapes();
        if expected.len() != weights.len() {
            return Err(Error::ModelValidation(format!(
                "{} expects {} weight tensors, got {}",
                spec.descriptor(),
                expected.len(),
                weights.len()
            )));
        }
        for (i, (shape, t)) in expected.iter().zip(&weights).enumerate() {
            if t.shape() != shape.as_slice() {
                return Err(Error::ModelValidation(format!(
                    "{} weight {i}: expected shape {shape:?}, got {:?}",
                    spec.descriptor(),
                    t.shape()
                )));
            }
            if !t.is_finite() {
                return Err(Error::ModelValidation(format!(
                    "{} weight {i} contains non-finite values",
                    spec.descriptor()
                )));
            }
        }
        Ok(Self { spec, weights })
    }

    pub fn spec(&self) -> &LayerSpec {
        &self.spec
    }

    pub fn weights(&self) -> &[Tensor] {
        &self.weights
    }

    fn eval(&self, input: &Tensor) -> Result<Tensor> {
        match self.spec {
            LayerSpec::Dense { activation, .. } => {
                layer::dense(input, &self.weights[0], self.weights[1].data(), activation)
            }
            LayerSpec::Conv2D {
                stride,
                padding,
                activation,
                ..
            } => layer::conv2d(
                input,
                &self.weights[0],
                self.weights[1].data(),
                stride,
                padding,
                activation,
            ),
            LayerSpec::Flatten => input.clone().reshape(vec![input.len()]),
            LayerSpec::Lstm { timesteps, .. } => layer::lstm_forward(
                LstmWeights {
                    input_kernel: &self.weights[0],
                    recurrent_kernel: &self.weights[1],
                    bias: self.weights[2].data(),
                },
                timesteps,
                input,
            ),
        }
    }
}

/// One layer's raw output from a forward pass.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LayerOutput {
    pub kind: LayerKind,
    pub output: Tensor,
}

/// Every layer's output for one input, in layer order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ActivationTrace {
    pub fingerprint: u64,
    pub layers: Vec<LayerOutput>,
}

impl ActivationTrace {
    /// Total coverage neurons represented by this trace.
    pub fn neuron_count(&self) -> usize {
        self.layers
            .iter()
            .map(|l| match l.kind {
                LayerKind::Flatten => 0,
                LayerKind::Lstm => l.output.len(),
                LayerKind::Dense | LayerKind::Conv2D => {
                    l.output.shape().last().copied().unwrap_or(0)
                }
            })
            .sum()
    }
}

/// Anything that maps an input tensor to a steering value and exposes its
/// internal activations.
pub trait Network: Sync {
    fn input_shape(&self) -> &[usize];

    /// Stable identity of the layer structure, used to guard set algebra.
    fn fingerprint(&self) -> u64;

    fn total_neurons(&self) -> usize;

    fn forward(&self, input: &Tensor) -> Result<(f32, ActivationTrace)>;
}

/// A validated feed-forward/recurrent model. Immutable once built.
#[derive(Debug, Clone, PartialEq)]
pub struct Model {
    name: String,
    input_shape: Vec<usize>,
    layers: Vec<Layer>,
    output_shapes: Vec<Vec<usize>>,
    fingerprint: u64,
}

impl Model {
    pub fn new(name: impl Into<String>, input_shape: Vec<usize>, layers: Vec<Layer>) -> Result<Self> {
        if input_shape.is_empty() || input_shape.contains(&0) {
            return Err(Error::ModelValidation(format!(
                "input shape {input_shape:?} must be non-empty with positive dims"
            )));
        }
        if layers.is_empty() {
            return Err(Error::ModelValidation("model has no layers".into()));
        }
        let mut shape = input_shape.clone();
        let mut output_shapes = Vec::with_capacity(layers.len());
        for (i, l) in layers.iter().enumerate() {
            shape = l.spec.output_shape(&shape).map_err(|e| {
                Error::ModelValidation(format!("layer {i} ({}): {e}", l.spec.descriptor()))
            })?;
            output_shapes.push(shape.clone());
        }
        let out: usize = shape.iter().product();
        if out != 1 {
            return Err(Error::ModelValidation(format!(
                "final layer must output one scalar, got shape {shape:?}"
            )));
        }
        let fingerprint = fnv1a64(structure_descriptor(&input_shape, &layers).as_bytes());
        Ok(Self {
            name: name.into(),
            input_shape,
            layers,
            output_shapes,
            fingerprint,
        })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn layers(&self) -> &[Layer] {
        &self.layers
    }

    pub fn output_shapes(&self) -> &[Vec<usize>] {
        &self.output_shapes
    }
}

fn structure_descriptor(input_shape: &[usize], layers: &[Layer]) -> String {
    let dims: Vec<String> = input_shape.iter().map(|d| d.to_string()).collect();
    let mut s = format!("in={}", dims.join("x"));
    for l in layers {
        s.push(';');
        s.push_str(&l.spec.descriptor());
    }
    s
}

impl Network for Model {
    fn input_shape(&self) -> &[usize] {
        &self.input_shape
    }

    fn fingerprint(&self) -> u64 {
        self.fingerprint
    }

    fn total_neurons(&self) -> usize {
        self.layers.iter().map(|l| l.spec.neuron_count()).sum()
    }

    fn forward(&self, input: &Tensor) -> Result<(f32, ActivationTrace)> {
        if input.shape() != self.input_shape.as_slice() {
            return Err(Error::Shape(format!(
                "model {} expects input {:?}, got {:?}",
                self.name,
                self.input_shape,
                input.shape()
            )));
        }
        let mut trace = Vec::with_capacity(self.layers.len());
        let mut current = input.clone();
        for l in &self.layers {
            current = l.eval(&current)?;
            trace.push(LayerOutput {
                kind: l.spec.kind(),
                output: current.clone(),
            });
        }
        let prediction = current.data()[0];
        Ok((
            prediction,
            ActivationTrace {
                fingerprint: self.fingerprint,
                layers: trace,
            },
        ))
    }
}
