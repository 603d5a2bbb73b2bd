//! Deterministic synthetic models.
//!
//! Weights are drawn from [`SplitMix64`] so the same seed always yields the
//! same model, byte for byte.

use super::layer::{Activation, LayerSpec, Padding};
use super::model::{Layer, Model};
use super::tensor::Tensor;
use crate::error::Result;
use crate::rng::SplitMix64;

/// Builds a model with Glorot-uniform kernels and small uniform biases.
pub fn random_model(
    name: &str,
    input_shape: Vec<usize>,
    specs: &[LayerSpec],
    seed: u64,
) -> Result<Model> {
    let mut rng = SplitMix64::new(seed);
    let mut layers = Vec::with_capacity(specs.len());
    for spec in specs {
        let weights = spec
            .weight_shapes()
            .into_iter()
            .map(|shape| {
                let n: usize = shape.iter().product();
                let limit = if shape.len() == 1 {
                    0.1
                } else {
                    glorot_limit(spec, &shape)
                };
                let data = (0..n).map(|_| rng.uniform(-limit, limit) as f32).collect();
                Tensor::new(shape, data)
            })
            .collect::<Result<Vec<_>>>()?;
        layers.push(Layer::new(*spec, weights)?);
    }
    Model::new(name, input_shape, layers)
}

fn glorot_limit(spec: &LayerSpec, shape: &[usize]) -> f64 {
    let (fan_in, fan_out) = match *spec {
        LayerSpec::Conv2D {
            kernel_h, kernel_w, ..
        } => {
            let area = kernel_h * kernel_w;
            (shape[1] * area, shape[0] * area)
        }
        _ => (shape[1], shape[0]),
    };
    (6.0 / (fan_in + fan_out) as f64).sqrt()
}

/// Two strided convolutions, a hidden dense layer and a `tanh` steering
/// head, for `[h, w, c]` inputs.
pub fn steering_cnn(name: &str, input_shape: [usize; 3], seed: u64) -> Result<Model> {
    let [h, w, c] = input_shape;
    let conv = |cin, cout| LayerSpec::Conv2D {
        in_channels: cin,
        out_channels: cout,
        kernel_h: 3,
        kernel_w: 3,
        stride: 2,
        padding: Padding::Valid,
        activation: Activation::Relu,
    };
    let out = |s: usize| (s - 3) / 2 + 1;
    let (h2, w2) = (out(out(h)), out(out(w)));
    let specs = [
        conv(c, 6),
        conv(6, 8),
        LayerSpec::Flatten,
        LayerSpec::Dense {
            in_units: h2 * w2 * 8,
            out_units: 16,
            activation: Activation::Relu,
        },
        LayerSpec::Dense {
            in_units: 16,
            out_units: 1,
            activation: Activation::Tanh,
        },
    ];
    random_model(name, input_shape.to_vec(), &specs, seed)
}

/// A convolution whose output rows feed an unrolled LSTM, then a dense
/// `tanh` head over the flattened hidden sequence.
pub fn steering_lstm(name: &str, input_shape: [usize; 3], hidden_units: usize, seed: u64) -> Result<Model> {
    let [h, w, c] = input_shape;
    let (h1, w1) = ((h - 3) / 2 + 1, (w - 3) / 2 + 1);
    let specs = [
        LayerSpec::Conv2D {
            in_channels: c,
            out_channels: 4,
            kernel_h: 3,
            kernel_w: 3,
            stride: 2,
            padding: Padding::Valid,
            activation: Activation::Relu,
        },
        LayerSpec::Lstm {
            input_dim: w1 * 4,
            hidden_units,
            timesteps: h1,
        },
        LayerSpec::Flatten,
        LayerSpec::Dense {
            in_units: h1 * hidden_units,
            out_units: 1,
            activation: Activation::Tanh,
        },
    ];
    random_model(name, input_shape.to_vec(), &specs, seed)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::{format, Network};

    #[test]
    fn same_seed_same_bytes() {
        let a = steering_cnn("m", [24, 32, 3], 11).unwrap();
        let b = steering_cnn("m", [24, 32, 3], 11).unwrap();
        let c = steering_cnn("m", [24, 32, 3], 12).unwrap();
        assert_eq!(format::encode(&a), format::encode(&b));
        assert_ne!(format::encode(&a), format::encode(&c));
    }

    #[test]
    fn presets_validate() {
        let cnn = steering_cnn("cnn", [24, 32, 3], 1).unwrap();
        assert_eq!(cnn.total_neurons(), 6 + 8 + 16 + 1);
        let lstm = steering_lstm("lstm", [24, 32, 3], 5, 1).unwrap();
        assert_eq!(lstm.total_neurons(), 4 + 5 * 11 + 1);
    }
}
