//! Instrumented inference engine.
//!
//! Supports the layer kinds needed for simple steering CNNs and recurrent
//! models: Dense, Conv2D, Flatten and an unrolled LSTM. Every forward pass
//! returns an [`ActivationTrace`] holding each layer's raw output so that
//! neuron coverage can be computed without any external framework.

pub mod format;
pub mod generator;
pub mod layer;
pub mod model;
pub mod tensor;

pub use format::{load_model, save_model};
pub use layer::{conv2d, dense, lstm_forward, Activation, LayerKind, LayerSpec, LstmWeights, Padding};
pub use model::{ActivationTrace, Layer, LayerOutput, Model, Network};
pub use tensor::Tensor;
