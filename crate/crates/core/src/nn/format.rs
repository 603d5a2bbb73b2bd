//! The DTNN model container and its JSON sidecar.
//!
//! Binary layout, all integers little-endian:
//!
//! ```text
//! "DTNN"                       4 bytes magic
//! version                      u16 (= 1)
//! layer_count                  u16
//! input_rank                   u32
//! input_dims                   u32 × input_rank
//! name_len                     u32
//! name                         UTF-8, name_len bytes
//! per layer:
//!   kind                       u8   0 Dense, 1 Conv2D, 2 Flatten, 3 LSTM
//!   parameters                 u32 fields, fixed order per kind:
//!     Dense    in_units, out_units, activation
//!     Conv2D   in_channels, out_channels, kernel_h, kernel_w, stride, padding, activation
//!     Flatten  (none)
//!     LSTM     input_dim, hidden_units, timesteps
//!   weight tensors             per tensor: u64 count, then count × f32, row-major
//! ```
//!
//! Activation codes: 0 linear, 1 relu, 2 tanh, 3 sigmoid. Padding codes:
//! 0 valid, 1 same. The number and shapes of weight tensors are implied by
//! the layer kind (see [`LayerSpec::weight_shapes`]). Trailing bytes are
//! rejected, so `encode(decode(bytes)) == bytes` for every accepted file.
//!
//! The JSON sidecar carries the same content:
//!
//! ```json
//! {"name": "m", "input_shape": [2],
//!  "layers": [{"kind": "dense", "in_units": 2, "out_units": 1,
//!              "activation": "linear", "weights": [[1.0, 1.0], [0.0]]}]}
//! ```

use std::path::Path;

use serde::{Deserialize, Serialize};

use super::layer::{Activation, LayerSpec, Padding};
use super::model::{Layer, Model};
use super::tensor::Tensor;
use crate::error::{Error, Result};
use crate::nn::Network;

pub const MAGIC: &[u8; 4] = b"DTNN";
pub const VERSION: u16 = 1;

const TAG_DENSE: u8 = 0;
const TAG_CONV2D: u8 = 1;
const TAG_FLATTEN: u8 = 2;
const TAG_LSTM: u8 = 3;

/// Loads a model from either container flavour, sniffing the first bytes.
pub fn load_model(path: impl AsRef<Path>) -> Result<Model> {
    let bytes = std::fs::read(path)?;
    if bytes.starts_with(MAGIC) {
        decode(&bytes)
    } else if bytes
        .iter()
        .find(|b| !b.is_ascii_whitespace())
        .is_some_and(|&b| b == b'{')
    {
        let text = std::str::from_utf8(&bytes)
            .map_err(|e| Error::Format(format!("sidecar is not UTF-8: {e}")))?;
        from_json(text)
    } else {
        Err(Error::Format("missing DTNN magic".into()))
    }
}

/// Writes the binary container.
pub fn save_model(model: &Model, path: impl AsRef<Path>) -> Result<()> {
    std::fs::write(path, encode(model))?;
    Ok(())
}

pub fn encode(model: &Model) -> Vec<u8> {
    let mut out = Vec::new();
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.extend_from_slice(&(model.layers().len() as u16).to_le_bytes());
    let shape = model.input_shape();
    put_u32(&mut out, shape.len());
    for &d in shape {
        put_u32(&mut out, d);
    }
    put_u32(&mut out, model.name().len());
    out.extend_from_slice(model.name().as_bytes());
    for layer in model.layers() {
        match *layer.spec() {
            LayerSpec::Dense {
                in_units,
                out_units,
                activation,
            } => {
                out.push(TAG_DENSE);
                put_u32(&mut out, in_units);
                put_u32(&mut out, out_units);
                put_u32(&mut out, activation.code() as usize);
            }
            LayerSpec::Conv2D {
                in_channels,
                out_channels,
                kernel_h,
                kernel_w,
                stride,
                padding,
                activation,
            } => {
                out.push(TAG_CONV2D);
                for v in [in_channels, out_channels, kernel_h, kernel_w, stride] {
                    put_u32(&mut out, v);
                }
                put_u32(&mut out, padding_code(padding) as usize);
                put_u32(&mut out, activation.code() as usize);
            }
            LayerSpec::Flatten => out.push(TAG_FLATTEN),
            LayerSpec::Lstm {
                input_dim,
                hidden_units,
                timesteps,
            } => {
                out.push(TAG_LSTM);
                for v in [input_dim, hidden_units, timesteps] {
                    put_u32(&mut out, v);
                }
            }
        }
        for t in layer.weights() {
            out.extend_from_slice(&(t.len() as u64).to_le_bytes());
            for v in t.data() {
                out.extend_from_slice(&v.to_le_bytes());
            }
        }
    }
    out
}

fn put_u32(out: &mut Vec<u8>, v: usize) {
    let v = u32::try_from(v).expect("dimension exceeds u32");
    out.extend_from_slice(&v.to_le_bytes());
}

fn padding_code(p: Padding) -> u32 {
    match p {
        Padding::Valid => 0,
        Padding::Same => 1,
    }
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self
            .pos
            .checked_add(n)
            .filter(|&e| e <= self.bytes.len())
            .ok_or_else(|| Error::Format(format!("truncated at byte {}", self.pos)))?;
        let s = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }

    fn u16(&mut self) -> Result<u16> {
        Ok(u16::from_le_bytes(self.take(2)?.try_into().unwrap()))
    }

    fn u32(&mut self) -> Result<usize> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()) as usize)
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn f32_array(&mut self) -> Result<Vec<f32>> {
        let count = self.u64()?;
        let count = usize::try_from(count).map_err(|_| Error::Format("tensor too large".into()))?;
        let bytes = self.take(
            count
                .checked_mul(4)
                .ok_or_else(|| Error::Format("tensor too large".into()))?,
        )?;
        Ok(bytes
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
            .collect())
    }
}

pub fn decode(bytes: &[u8]) -> Result<Model> {
    let mut r = Reader { bytes, pos: 0 };
    if r.take(4)? != MAGIC {
        return Err(Error::Format("missing DTNN magic".into()));
    }
    let version = r.u16()?;
    if version != VERSION {
        return Err(Error::Format(format!("unsupported version {version}")));
    }
    let layer_count = r.u16()? as usize;
    let rank = r.u32()?;
    if rank > 8 {
        return Err(Error::Format(format!("implausible input rank {rank}")));
    }
    let input_shape = (0..rank).map(|_| r.u32()).collect::<Result<Vec<_>>>()?;
    let name_len = r.u32()?;
    let name = std::str::from_utf8(r.take(name_len)?)
        .map_err(|e| Error::Format(format!("model name is not UTF-8: {e}")))?
        .to_string();

    let mut layers = Vec::with_capacity(layer_count);
    for i in 0..layer_count {
        let tag = r.u8()?;
        let spec = match tag {
            TAG_DENSE => LayerSpec::Dense {
                in_units: r.u32()?,
                out_units: r.u32()?,
                activation: activation(r.u32()?)?,
            },
            TAG_CONV2D => LayerSpec::Conv2D {
                in_channels: r.u32()?,
                out_channels: r.u32()?,
                kernel_h: r.u32()?,
                kernel_w: r.u32()?,
                stride: r.u32()?,
                padding: match r.u32()? {
                    0 => Padding::Valid,
                    1 => Padding::Same,
                    p => return Err(Error::Format(format!("unknown padding code {p}"))),
                },
                activation: activation(r.u32()?)?,
            },
            TAG_FLATTEN => LayerSpec::Flatten,
            TAG_LSTM => LayerSpec::Lstm {
                input_dim: r.u32()?,
                hidden_units: r.u32()?,
                timesteps: r.u32()?,
            },
            t => return Err(Error::Format(format!("layer {i}: unknown kind tag {t}"))),
        };
        let shapes = spec.weight_shapes();
        let mut weights = Vec::with_capacity(shapes.len());
        for shape in shapes {
            let data = r.f32_array()?;
            let tensor = Tensor::new(shape, data).map_err(|e| {
                Error::ModelValidation(format!("layer {i} ({}): {e}", spec.descriptor()))
            })?;
            weights.push(tensor);
        }
        layers.push(Layer::new(spec, weights)?);
    }
    if r.pos != bytes.len() {
        return Err(Error::Format(format!(
            "{} trailing bytes after last layer",
            bytes.len() - r.pos
        )));
    }
    Model::new(name, input_shape, layers)
}

fn activation(code: usize) -> Result<Activation> {
    u32::try_from(code)
        .ok()
        .and_then(Activation::from_code)
        .ok_or_else(|| Error::Format(format!("unknown activation code {code}")))
}

#[derive(Serialize, Deserialize)]
struct ModelJson {
    name: String,
    input_shape: Vec<usize>,
    layers: Vec<LayerJson>,
}

#[derive(Serialize, Deserialize)]
struct LayerJson {
    #[serde(flatten)]
    spec: LayerSpec,
    #[serde(default)]
    weights: Vec<Vec<f32>>,
}

pub fn from_json(text: &str) -> Result<Model> {
    let parsed: ModelJson =
        serde_json::from_str(text).map_err(|e| Error::Format(format!("sidecar: {e}")))?;
    let mut layers = Vec::with_capacity(parsed.layers.len());
    for (i, l) in parsed.layers.into_iter().enumerate() {
        let shapes = l.spec.weight_shapes();
        if shapes.len() != l.weights.len() {
            return Err(Error::ModelValidation(format!(
                "layer {i}: expected {} weight arrays, got {}",
                shapes.len(),
                l.weights.len()
            )));
        }
        let weights = shapes
            .into_iter()
            .zip(l.weights)
            .map(|(s, w)| {
                Tensor::new(s, w).map_err(|e| Error::ModelValidation(format!("layer {i}: {e}")))
            })
            .collect::<Result<Vec<_>>>()?;
        layers.push(Layer::new(l.spec, weights)?);
    }
    Model::new(parsed.name, parsed.input_shape, layers)
}

pub fn to_json(model: &Model) -> String {
    let doc = ModelJson {
        name: model.name().to_string(),
        input_shape: model.input_shape().to_vec(),
        layers: model
            .layers()
            .iter()
            .map(|l| LayerJson {
                spec: *l.spec(),
                weights: l.weights().iter().map(|t| t.data().to_vec()).collect(),
            })
            .collect(),
    };
    serde_json::to_string_pretty(&doc).expect("model serializes")
}
