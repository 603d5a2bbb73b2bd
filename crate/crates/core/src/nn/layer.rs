//! Layer descriptions and the numeric kernels that evaluate them.
//!
//! Weight layouts (all row-major `f32`):
//!
//! | kind    | tensors, in order                                                    |
//! |---------|----------------------------------------------------------------------|
//! | Dense   | kernel `[out_units, in_units]`, bias `[out_units]`                    |
//! | Conv2D  | kernels `[out_channels, in_channels, kernel_h, kernel_w]`, bias `[out_channels]` |
//! | Flatten | none                                                                 |
//! | LSTM    | input kernel `[4·hidden, input_dim]`, recurrent kernel `[4·hidden, hidden]`, bias `[4·hidden]` |
//!
//! LSTM gate blocks are stacked as `[input, forget, candidate, output]`.
//!
//! Feature maps are laid out `[height, width, channels]`. Accumulation is
//! carried out in `f64` and rounded to `f32` once per output value.

use std::fmt;

use serde::{Deserialize, Serialize};

use super::tensor::Tensor;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Activation {
    Linear,
    Relu,
    Tanh,
    Sigmoid,
}

impl Activation {
    pub fn apply(self, x: f64) -> f64 {
        match self {
            Activation::Linear => x,
            Activation::Relu => x.max(0.0),
            Activation::Tanh => x.tanh(),
            Activation::Sigmoid => sigmoid(x),
        }
    }

    pub(crate) fn code(self) -> u32 {
        match self {
            Activation::Linear => 0,
            Activation::Relu => 1,
            Activation::Tanh => 2,
            Activation::Sigmoid => 3,
        }
    }

    pub(crate) fn from_code(code: u32) -> Option<Self> {
        Some(match code {
            0 => Activation::Linear,
            1 => Activation::Relu,
            2 => Activation::Tanh,
            3 => Activation::Sigmoid,
            _ => return None,
        })
    }
}

impl fmt::Display for Activation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Activation::Linear => "linear",
            Activation::Relu => "relu",
            Activation::Tanh => "tanh",
            Activation::Sigmoid => "sigmoid",
        };
        f.write_str(s)
    }
}

pub(crate) fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Padding {
    Valid,
    /// Zero padding, `floor(total / 2)` before and the remainder after.
    Same,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LayerKind {
    Dense,
    Conv2D,
    Flatten,
    Lstm,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum LayerSpec {
    /// Fully connected layer applied along the last axis of its input.
    Dense {
        in_units: usize,
        out_units: usize,
        activation: Activation,
    },
    #[serde(rename = "conv2d")]
    Conv2D {
        in_channels: usize,
        out_channels: usize,
        kernel_h: usize,
        kernel_w: usize,
        stride: usize,
        padding: Padding,
        activation: Activation,
    },
    Flatten,
    /// Unrolled LSTM. The input is read row-major as `timesteps` rows of
    /// `input_dim` values; the output is the full hidden-state sequence.
    Lstm {
        input_dim: usize,
        hidden_units: usize,
        timesteps: usize,
    },
}

impl LayerSpec {
    pub fn kind(&self) -> LayerKind {
        match self {
            LayerSpec::Dense { .. } => LayerKind::Dense,
            LayerSpec::Conv2D { .. } => LayerKind::Conv2D,
            LayerSpec::Flatten => LayerKind::Flatten,
            LayerSpec::Lstm { .. } => LayerKind::Lstm,
        }
    }

    /// Number of coverage neurons this layer contributes.
    pub fn neuron_count(&self) -> usize {
        match *self {
            LayerSpec::Dense { out_units, .. } => out_units,
            LayerSpec::Conv2D { out_channels, .. } => out_channels,
            LayerSpec::Flatten => 0,
            LayerSpec::Lstm {
                hidden_units,
                timesteps,
                ..
            } => hidden_units * timesteps,
        }
    }

    /// Expected shapes of the weight tensors, in storage order.
    pub fn weight_shapes(&self) -> Vec<Vec<usize>> {
        match *self {
            LayerSpec::Dense {
                in_units,
                out_units,
                ..
            } => vec![vec![out_units, in_units], vec![out_units]],
            LayerSpec::Conv2D {
                in_channels,
                out_channels,
                kernel_h,
                kernel_w,
                ..
            } => vec![
                vec![out_channels, in_channels, kernel_h, kernel_w],
                vec![out_channels],
            ],
            LayerSpec::Flatten => vec![],
            LayerSpec::Lstm {
                input_dim,
                hidden_units,
                ..
            } => vec![
                vec![4 * hidden_units, input_dim],
                vec![4 * hidden_units, hidden_units],
                vec![4 * hidden_units],
            ],
        }
    }

    /// Checks the spec's own parameters (positive sizes, stride, ...).
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: &str| Err(Error::ModelValidation(format!("{self:?}: {msg}")));
        match *self {
            LayerSpec::Dense {
                in_units,
                out_units,
                ..
            } => {
                if in_units == 0 || out_units == 0 {
                    return bad("units must be positive");
                }
            }
            LayerSpec::Conv2D {
                in_channels,
                out_channels,
                kernel_h,
                kernel_w,
                stride,
                ..
            } => {
                if in_channels == 0 || out_channels == 0 {
                    return bad("channels must be positive");
                }
                if kernel_h == 0 || kernel_w == 0 {
                    return bad("kernel dims must be positive");
                }
                if stride == 0 {
                    return bad("stride must be positive");
                }
            }
            LayerSpec::Flatten => {}
            LayerSpec::Lstm {
                input_dim,
                hidden_units,
                timesteps,
            } => {
                if input_dim == 0 || hidden_units == 0 {
                    return bad("dimensions must be positive");
                }
                if timesteps == 0 {
                    return bad("timesteps must be at least 1");
                }
            }
        }
        Ok(())
    }

    /// Output shape for a given input shape, or `Shape` if incompatible.
    pub fn output_shape(&self, input: &[usize]) -> Result<Vec<usize>> {
        match *self {
            LayerSpec::Dense {
                in_units,
                out_units,
                ..
            } => match input.last() {
                Some(&last) if last == in_units => {
                    let mut out = input.to_vec();
                    *out.last_mut().unwrap() = out_units;
                    Ok(out)
                }
                _ => Err(Error::Shape(format!(
                    "dense layer expects last dim {in_units}, got input {input:?}"
                ))),
            },
            LayerSpec::Conv2D {
                in_channels,
                out_channels,
                kernel_h,
                kernel_w,
                stride,
                padding,
                ..
            } => {
                if input.len() != 3 || input[2] != in_channels {
                    return Err(Error::Shape(format!(
                        "conv2d expects [h, w, {in_channels}], got {input:?}"
                    )));
                }
                let geom = ConvGeometry::new(
                    input[0], input[1], kernel_h, kernel_w, stride, padding,
                )?;
                Ok(vec![geom.out_h, geom.out_w, out_channels])
            }
            LayerSpec::Flatten => Ok(vec![input.iter().product()]),
            LayerSpec::Lstm {
                input_dim,
                hidden_units,
                timesteps,
            } => {
                let n: usize = input.iter().product();
                if n != timesteps * input_dim {
                    return Err(Error::Shape(format!(
                        "lstm expects {timesteps}x{input_dim} values, got input {input:?}"
                    )));
                }
                Ok(vec![timesteps, hidden_units])
            }
        }
    }

    /// Canonical text used for model fingerprints.
    pub(crate) fn descriptor(&self) -> String {
        match *self {
            LayerSpec::Dense {
                in_units,
                out_units,
                activation,
            } => format!("dense({in_units},{out_units},{activation})"),
            LayerSpec::Conv2D {
                in_channels,
                out_channels,
                kernel_h,
                kernel_w,
                stride,
                padding,
                activation,
            } => format!(
                "conv2d({in_channels},{out_channels},{kernel_h},{kernel_w},{stride},{},{activation})",
                match padding {
                    Padding::Valid => "valid",
                    Padding::Same => "same",
                }
            ),
            LayerSpec::Flatten => "flatten".to_string(),
            LayerSpec::Lstm {
                input_dim,
                hidden_units,
                timesteps,
            } => format!("lstm({input_dim},{hidden_units},{timesteps})"),
        }
    }
}

/// Spatial bookkeeping for one convolution.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ConvGeometry {
    pub out_h: usize,
    pub out_w: usize,
    pub pad_top: usize,
    pub pad_left: usize,
}

impl ConvGeometry {
    pub fn new(
        in_h: usize,
        in_w: usize,
        kernel_h: usize,
        kernel_w: usize,
        stride: usize,
        padding: Padding,
    ) -> Result<Self> {
        if stride == 0 || kernel_h == 0 || kernel_w == 0 {
            return Err(Error::Shape("kernel and stride must be positive".into()));
        }
        let axis = |size: usize, k: usize| -> Result<(usize, usize)> {
            match padding {
                Padding::Valid => {
                    if k > size {
                        return Err(Error::Shape(format!(
                            "kernel {k} larger than input {size} under valid padding"
                        )));
                    }
                    Ok(((size - k) / stride + 1, 0))
                }
                Padding::Same => {
                    let out = size.div_ceil(stride);
                    let total = ((out - 1) * stride + k).saturating_sub(size);
                    Ok((out, total / 2))
                }
            }
        };
        let (out_h, pad_top) = axis(in_h, kernel_h)?;
        let (out_w, pad_left) = axis(in_w, kernel_w)?;
        Ok(Self {
            out_h,
            out_w,
            pad_top,
            pad_left,
        })
    }
}

/// 2-D convolution over an `[h, w, c_in]` input.
///
/// `kernels` is `[c_out, c_in, kh, kw]`; out-of-range taps read zero.
pub fn conv2d(
    input: &Tensor,
    kernels: &Tensor,
    bias: &[f32],
    stride: usize,
    padding: Padding,
    activation: Activation,
) -> Result<Tensor> {
    let &[in_h, in_w, c_in] = input.shape() else {
        return Err(Error::Shape(format!(
            "conv2d input must be [h, w, c], got {:?}",
            input.shape()
        )));
    };
    let &[c_out, k_in, kh, kw] = kernels.shape() else {
        return Err(Error::Shape(format!(
            "conv2d kernels must be [c_out, c_in, kh, kw], got {:?}",
            kernels.shape()
        )));
    };
    if k_in != c_in {
        return Err(Error::Shape(format!(
            "kernel expects {k_in} input channels, input has {c_in}"
        )));
    }
    if bias.len() != c_out {
        return Err(Error::Shape(format!(
            "bias has {} entries for {c_out} output channels",
            bias.len()
        )));
    }
    let geom = ConvGeometry::new(in_h, in_w, kh, kw, stride, padding)?;
    let x = input.data();
    let k = kernels.data();
    let mut out = Vec::with_capacity(geom.out_h * geom.out_w * c_out);
    for oy in 0..geom.out_h {
        for ox in 0..geom.out_w {
            for co in 0..c_out {
                let mut acc = bias[co] as f64;
                for ky in 0..kh {
                    let iy = (oy * stride + ky) as isize - geom.pad_top as isize;
                    if iy < 0 || iy >= in_h as isize {
                        continue;
                    }
                    for kx in 0..kw {
                        let ix = (ox * stride + kx) as isize - geom.pad_left as isize;
                        if ix < 0 || ix >= in_w as isize {
                            continue;
                        }
                        let base = (iy as usize * in_w + ix as usize) * c_in;
                        for ci in 0..c_in {
                            let w = k[((co * c_in + ci) * kh + ky) * kw + kx];
                            acc += x[base + ci] as f64 * w as f64;
                        }
                    }
                }
                out.push(activation.apply(acc) as f32);
            }
        }
    }
    Tensor::new(vec![geom.out_h, geom.out_w, c_out], out)
}

/// Fully connected layer applied along the last axis.
pub fn dense(
    input: &Tensor,
    kernel: &Tensor,
    bias: &[f32],
    activation: Activation,
) -> Result<Tensor> {
    let &[out_units, in_units] = kernel.shape() else {
        return Err(Error::Shape(format!(
            "dense kernel must be [out, in], got {:?}",
            kernel.shape()
        )));
    };
    if input.shape().last() != Some(&in_units) {
        return Err(Error::Shape(format!(
            "dense expects last dim {in_units}, got {:?}",
            input.shape()
        )));
    }
    if bias.len() != out_units {
        return Err(Error::Shape("dense bias length mismatch".into()));
    }
    let w = kernel.data();
    let rows = input.len() / in_units;
    let mut out = Vec::with_capacity(rows * out_units);
    for row in input.data().chunks_exact(in_units) {
        for (o, b) in bias.iter().enumerate() {
            let weights = &w[o * in_units..(o + 1) * in_units];
            let acc = row
                .iter()
                .zip(weights)
                .fold(*b as f64, |acc, (&xv, &wv)| acc + xv as f64 * wv as f64);
            out.push(activation.apply(acc) as f32);
        }
    }
    let mut shape = input.shape().to_vec();
    *shape.last_mut().unwrap() = out_units;
    Tensor::new(shape, out)
}

/// LSTM weights in `[input, forget, candidate, output]` block order.
#[derive(Debug, Clone, Copy)]
pub struct LstmWeights<'a> {
    /// `[4·hidden, input_dim]`
    pub input_kernel: &'a Tensor,
    /// `[4·hidden, hidden]`
    pub recurrent_kernel: &'a Tensor,
    /// `[4·hidden]`
    pub bias: &'a [f32],
}

/// Runs the recurrence over `timesteps` rows and returns every hidden state
/// as a `[timesteps, hidden]` tensor. Initial hidden and cell states are zero.
///
/// ```text
/// i = σ(W_i x + U_i h + b_i)    f = σ(W_f x + U_f h + b_f)
/// g = tanh(W_g x + U_g h + b_g) o = σ(W_o x + U_o h + b_o)
/// c' = f ⊙ c + i ⊙ g            h' = o ⊙ tanh(c')
/// ```
pub fn lstm_forward(weights: LstmWeights<'_>, timesteps: usize, inputs: &Tensor) -> Result<Tensor> {
    let &[gates, input_dim] = weights.input_kernel.shape() else {
        return Err(Error::Shape("lstm input kernel must be 2-D".into()));
    };
    if gates % 4 != 0 || gates == 0 {
        return Err(Error::Shape(format!(
            "lstm input kernel has {gates} rows, expected a positive multiple of 4"
        )));
    }
    let hidden = gates / 4;
    if weights.recurrent_kernel.shape() != [gates, hidden] {
        return Err(Error::Shape(format!(
            "lstm recurrent kernel must be [{gates}, {hidden}], got {:?}",
            weights.recurrent_kernel.shape()
        )));
    }
    if weights.bias.len() != gates {
        return Err(Error::Shape("lstm bias length mismatch".into()));
    }
    if timesteps == 0 || inputs.len() != timesteps * input_dim {
        return Err(Error::Shape(format!(
            "lstm expects {timesteps} rows of {input_dim} values, got {:?}",
            inputs.shape()
        )));
    }
    let w = weights.input_kernel.data();
    let u = weights.recurrent_kernel.data();
    let mut h = vec![0.0f64; hidden];
    let mut c = vec![0.0f64; hidden];
    let mut pre = vec![0.0f64; gates];
    let mut out = Vec::with_capacity(timesteps * hidden);
    for x in inputs.data().chunks_exact(input_dim) {
        for (g, p) in pre.iter_mut().enumerate() {
            let mut acc = weights.bias[g] as f64;
            for (j, &xv) in x.iter().enumerate() {
                acc += w[g * input_dim + j] as f64 * xv as f64;
            }
            for (j, &hv) in h.iter().enumerate() {
                acc += u[g * hidden + j] as f64 * hv;
            }
            *p = acc;
        }
        for j in 0..hidden {
            let i_gate = sigmoid(pre[j]);
            let f_gate = sigmoid(pre[hidden + j]);
            let cand = pre[2 * hidden + j].tanh();
            let o_gate = sigmoid(pre[3 * hidden + j]);
            c[j] = f_gate * c[j] + i_gate * cand;
            h[j] = o_gate * c[j].tanh();
        }
        out.extend(h.iter().map(|&v| v as f32));
    }
    Tensor::new(vec![timesteps, hidden], out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn three_by_three_over_five_by_five() {
        // 3x3 kernel over a 5x5 input with valid padding yields 3x3.
        let input = Tensor::zeros(vec![5, 5, 1]);
        let k = Tensor::zeros(vec![1, 1, 3, 3]);
        let out = conv2d(&input, &k, &[0.0], 1, Padding::Valid, Activation::Linear).unwrap();
        assert_eq!(out.shape(), &[3, 3, 1]);
    }

    #[test]
    fn identity_kernel_crops_valid_region() {
        let data: Vec<f32> = (0..25).map(|v| v as f32).collect();
        let input = Tensor::new(vec![5, 5, 1], data).unwrap();
        let mut k = vec![0.0; 9];
        k[4] = 1.0;
        let k = Tensor::new(vec![1, 1, 3, 3], k).unwrap();
        let out = conv2d(&input, &k, &[0.0], 1, Padding::Valid, Activation::Linear).unwrap();
        let expected: Vec<f32> = (1..4)
            .flat_map(|y| (1..4).map(move |x| (y * 5 + x) as f32))
            .collect();
        assert_eq!(out.data(), expected.as_slice());
    }

    #[test]
    fn kernel_larger_than_input_is_shape_error() {
        let input = Tensor::zeros(vec![2, 2, 1]);
        let k = Tensor::zeros(vec![1, 1, 3, 3]);
        assert!(matches!(
            conv2d(&input, &k, &[0.0], 1, Padding::Valid, Activation::Linear),
            Err(Error::Shape(_))
        ));
        // Same padding always fits.
        let out = conv2d(&input, &k, &[0.0], 1, Padding::Same, Activation::Linear).unwrap();
        assert_eq!(out.shape(), &[2, 2, 1]);
    }

    #[test]
    fn same_padding_splits_floor_left() {
        // 4 wide, kernel 4, stride 1: total pad 3 -> 1 before, 2 after.
        let g = ConvGeometry::new(4, 4, 4, 4, 1, Padding::Same).unwrap();
        assert_eq!((g.out_h, g.out_w, g.pad_top, g.pad_left), (4, 4, 1, 1));
        let g = ConvGeometry::new(7, 7, 3, 3, 2, Padding::Same).unwrap();
        assert_eq!((g.out_h, g.pad_top), (4, 1));
    }

    #[test]
    fn lstm_zero_weights_stay_at_zero() {
        let wi = Tensor::zeros(vec![8, 3]);
        let wr = Tensor::zeros(vec![8, 2]);
        let bias = vec![0.0; 8];
        let x = Tensor::new(vec![3, 3], vec![0.5, -1.0, 2.0, 1.0, 1.0, 1.0, -3.0, 0.0, 4.0]).unwrap();
        let out = lstm_forward(
            LstmWeights {
                input_kernel: &wi,
                recurrent_kernel: &wr,
                bias: &bias,
            },
            3,
            &x,
        )
        .unwrap();
        assert_eq!(out.shape(), &[3, 2]);
        assert!(out.data().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn lstm_rejects_wrong_row_count() {
        let wi = Tensor::zeros(vec![4, 2]);
        let wr = Tensor::zeros(vec![4, 1]);
        let bias = vec![0.0; 4];
        let x = Tensor::zeros(vec![3, 2]);
        let r = lstm_forward(
            LstmWeights {
                input_kernel: &wi,
                recurrent_kernel: &wr,
                bias: &bias,
            },
            2,
            &x,
        );
        assert!(matches!(r, Err(Error::Shape(_))));
    }

    #[test]
    fn dense_applies_along_last_axis() {
        let input = Tensor::new(vec![2, 2], vec![1.0, 2.0, 3.0, 4.0]).unwrap();
        let kernel = Tensor::new(vec![1, 2], vec![1.0, 1.0]).unwrap();
        let out = dense(&input, &kernel, &[0.5], Activation::Linear).unwrap();
        assert_eq!(out.shape(), &[2, 1]);
        assert_eq!(out.data(), &[3.5, 7.5]);
    }
}
