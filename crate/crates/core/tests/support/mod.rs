//! Naive reference evaluators. They share no code with the library: inputs
//! are unpacked into nested vectors, padding is materialized explicitly and
//! every gate of the LSTM is a separate matrix.

#![allow(dead_code)]

use steercov_core::imgproc::Image;
use steercov_core::nn::{Activation, Padding};

pub fn act(a: Activation, x: f64) -> f64 {
    match a {
        Activation::Linear => x,
        Activation::Relu => {
            if x > 0.0 {
                x
            } else {
                0.0
            }
        }
        Activation::Tanh => x.tanh(),
        Activation::Sigmoid => 1.0 / (1.0 + (-x).exp()),
    }
}

/// `input[y][x][c]`, `kernels[co][ci][ky][kx]`; returns `out[y][x][co]`.
pub fn conv2d(
    input: &[Vec<Vec<f64>>],
    kernels: &[Vec<Vec<Vec<f64>>>],
    bias: &[f64],
    stride: usize,
    padding: Padding,
    activation: Activation,
) -> Vec<Vec<Vec<f64>>> {
    let (h, w, cin) = (input.len(), input[0].len(), input[0][0].len());
    let (kh, kw) = (kernels[0][0].len(), kernels[0][0][0].len());
    let (pad_h, pad_w) = match padding {
        Padding::Valid => (0, 0),
        Padding::Same => {
            let need = |size: usize, k: usize| {
                let out = size.div_ceil(stride);
                ((out - 1) * stride + k).saturating_sub(size)
            };
            (need(h, kh), need(w, kw))
        }
    };
    let (top, left) = (pad_h / 2, pad_w / 2);
    let (ph, pw) = (h + pad_h, w + pad_w);
    let mut padded = vec![vec![vec![0.0; cin]; pw]; ph];
    for y in 0..h {
        for x in 0..w {
            padded[y + top][x + left] = input[y][x].clone();
        }
    }
    let oh = (ph - kh) / stride + 1;
    let ow = (pw - kw) / stride + 1;
    let mut out = vec![vec![vec![0.0; kernels.len()]; ow]; oh];
    for (oy, row) in out.iter_mut().enumerate() {
        for (ox, cell) in row.iter_mut().enumerate() {
            for (co, k) in kernels.iter().enumerate() {
                let mut s = bias[co];
                for (ci, kc) in k.iter().enumerate() {
                    for (ky, krow) in kc.iter().enumerate() {
                        for (kx, kv) in krow.iter().enumerate() {
                            s += padded[oy * stride + ky][ox * stride + kx][ci] * kv;
                        }
                    }
                }
                cell[co] = act(activation, s);
            }
        }
    }
    out
}

/// `kernel[o][i]`.
pub fn dense(x: &[f64], kernel: &[Vec<f64>], bias: &[f64], activation: Activation) -> Vec<f64> {
    kernel
        .iter()
        .zip(bias)
        .map(|(row, b)| act(activation, b + row.iter().zip(x).map(|(w, v)| w * v).sum::<f64>()))
        .collect()
}

/// One gate's weights.
pub struct Gate {
    pub w: Vec<Vec<f64>>,
    pub u: Vec<Vec<f64>>,
    pub b: Vec<f64>,
}

fn gate(g: &Gate, x: &[f64], h: &[f64], f: fn(f64) -> f64) -> Vec<f64> {
    (0..g.b.len())
        .map(|j| {
            let wx: f64 = g.w[j].iter().zip(x).map(|(a, b)| a * b).sum();
            let uh: f64 = g.u[j].iter().zip(h).map(|(a, b)| a * b).sum();
            f(wx + uh + g.b[j])
        })
        .collect()
}

fn sigmoid(v: f64) -> f64 {
    1.0 / (1.0 + (-v).exp())
}

/// Gates in order input, forget, candidate, output. Returns `h_t` per step.
pub fn lstm(gates: &[Gate; 4], xs: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let n = gates[0].b.len();
    let mut h = vec![0.0; n];
    let mut c = vec![0.0; n];
    let mut out = Vec::new();
    for x in xs {
        let i = gate(&gates[0], x, &h, sigmoid);
        let f = gate(&gates[1], x, &h, sigmoid);
        let g = gate(&gates[2], x, &h, f64::tanh);
        let o = gate(&gates[3], x, &h, sigmoid);
        for j in 0..n {
            c[j] = f[j] * c[j] + i[j] * g[j];
        }
        h = (0..n).map(|j| o[j] * c[j].tanh()).collect();
        out.push(h.clone());
    }
    out
}

/// Inverse-mapped bilinear warp of `src` by the forward matrix `m`, one
/// output pixel at a time, computed in `f64` without rounding.
pub fn warp_pixel(src: &Image, m: [[f64; 3]; 2], x: usize, y: usize, c: usize) -> f64 {
    let [[a, b, tx], [cc, d, ty]] = m;
    let det = a * d - b * cc;
    let (u, v) = (x as f64 - tx, y as f64 - ty);
    let sx = (d * u - b * v) / det;
    let sy = (-cc * u + a * v) / det;
    let read = |px: f64, py: f64| -> f64 {
        if px < 0.0 || py < 0.0 || px >= src.width() as f64 || py >= src.height() as f64 {
            0.0
        } else {
            src.get(py as usize, px as usize, c) as f64
        }
    };
    let (x0, y0) = (sx.floor(), sy.floor());
    let (fx, fy) = (sx - x0, sy - y0);
    read(x0, y0) * (1.0 - fx) * (1.0 - fy)
        + read(x0 + 1.0, y0) * fx * (1.0 - fy)
        + read(x0, y0 + 1.0) * (1.0 - fx) * fy
        + read(x0 + 1.0, y0 + 1.0) * fx * fy
}

/// `|got − want| ≤ tol·|want| + 1e-12`.
pub fn close(got: f64, want: f64, tol: f64) -> bool {
    (got - want).abs() <= tol * want.abs() + 1e-12
}

/// Dense 2 → 3 (relu), 3 → 2 (linear), 2 → 1 (tanh) with small integer-ish
/// weights, chosen so layer outputs can be worked out by hand.
pub fn three_layer_model() -> steercov_core::nn::Model {
    use steercov_core::nn::{Layer, LayerSpec, Model, Tensor};
    let layer = |in_units, out_units, activation, w: Vec<f32>, b: Vec<f32>| {
        Layer::new(
            LayerSpec::Dense {
                in_units,
                out_units,
                activation,
            },
            vec![
                Tensor::new(vec![out_units, in_units], w).unwrap(),
                Tensor::new(vec![out_units], b).unwrap(),
            ],
        )
        .unwrap()
    };
    Model::new(
        "hand",
        vec![2],
        vec![
            layer(2, 3, Activation::Relu, vec![1.0, 0.0, 0.0, 1.0, 1.0, 1.0], vec![0.0, 0.0, -2.0]),
            layer(3, 2, Activation::Linear, vec![1.0, -1.0, 0.0, 0.1, 0.0, 0.0], vec![0.0, 0.0]),
            layer(2, 1, Activation::Tanh, vec![1.0, 1.0], vec![0.0]),
        ],
    )
    .unwrap()
}
