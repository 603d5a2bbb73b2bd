//! Neuron coverage.
//!
//! Each layer's output is first reduced to one scalar per neuron:
//!
//! - Dense: the unit's output (averaged over leading positions when the
//!   layer is applied to a feature map),
//! - Conv2D: the mean of the channel's feature map,
//! - LSTM: the hidden value of each unit at each unrolled timestep.
//!
//! The reductions of a layer (of one timestep, for LSTM) are min-max scaled
//! to `[0, 1]` and a neuron counts as activated when its scaled value is
//! strictly greater than the threshold. A layer whose reductions are all
//! equal activates nothing.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nn::{ActivationTrace, LayerKind, Network};

/// Stable identity of one coverage neuron.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct NeuronId {
    pub layer: u32,
    pub unit: u32,
    /// Unrolled timestep, LSTM layers only.
    pub timestep: Option<u32>,
}

impl NeuronId {
    pub fn new(layer: usize, unit: usize) -> Self {
        Self {
            layer: layer as u32,
            unit: unit as u32,
            timestep: None,
        }
    }

    pub fn unrolled(layer: usize, unit: usize, timestep: usize) -> Self {
        Self {
            layer: layer as u32,
            unit: unit as u32,
            timestep: Some(timestep as u32),
        }
    }
}

// Serialized as `[layer, unit, timestep|null]`.
impl Serialize for NeuronId {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        (self.layer, self.unit, self.timestep).serialize(s)
    }
}

impl<'de> Deserialize<'de> for NeuronId {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let (layer, unit, timestep) = <(u32, u32, Option<u32>)>::deserialize(d)?;
        Ok(Self {
            layer,
            unit,
            timestep,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ActivationThreshold(f64);

impl ActivationThreshold {
    pub const DEFAULT: f64 = 0.2;

    pub fn new(value: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&value) {
            return Err(Error::Param(format!(
                "activation threshold {value} outside [0, 1]"
            )));
        }
        Ok(Self(value))
    }

    pub fn value(self) -> f64 {
        self.0
    }
}

impl Default for ActivationThreshold {
    fn default() -> Self {
        Self(Self::DEFAULT)
    }
}

/// The set of neurons activated by some collection of inputs.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CoverageMap {
    #[serde(with = "hex_u64")]
    pub fingerprint: u64,
    pub total: usize,
    pub activated: BTreeSet<NeuronId>,
}

impl CoverageMap {
    pub fn empty(fingerprint: u64, total: usize) -> Self {
        Self {
            fingerprint,
            total,
            activated: BTreeSet::new(),
        }
    }

    pub fn for_network<N: Network + ?Sized>(net: &N) -> Self {
        Self::empty(net.fingerprint(), net.total_neurons())
    }

    pub fn len(&self) -> usize {
        self.activated.len()
    }

    pub fn is_empty(&self) -> bool {
        self.activated.is_empty()
    }

    fn check_same_model(&self, other: &Self) -> Result<()> {
        if self.fingerprint != other.fingerprint || self.total != other.total {
            return Err(Error::ModelMismatch {
                left: self.fingerprint,
                right: other.fingerprint,
            });
        }
        Ok(())
    }
}

mod hex_u64 {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &u64, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&format!("{v:016x}"))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<u64, D::Error> {
        let s = String::deserialize(d)?;
        u64::from_str_radix(&s, 16).map_err(serde::de::Error::custom)
    }
}

/// Min-max scales `values` into `[0, 1]`; a flat vector scales to all zeros.
pub fn min_max_scale(values: &[f64]) -> Vec<f64> {
    let (lo, hi) = values
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| {
            (lo.min(v), hi.max(v))
        });
    if values.is_empty() || hi <= lo {
        return vec![0.0; values.len()];
    }
    values.iter().map(|&v| (v - lo) / (hi - lo)).collect()
}

/// Indices whose min-max scaled value exceeds `threshold`.
pub fn activated_units(reductions: &[f64], threshold: ActivationThreshold) -> Vec<usize> {
    min_max_scale(reductions)
        .into_iter()
        .enumerate()
        .filter(|&(_, s)| s > threshold.value())
        .map(|(i, _)| i)
        .collect()
}

/// Per-neuron scalar reductions of one channel-last output: the mean over
/// every position for each entry of the last axis.
fn channel_means(shape: &[usize], data: &[f32]) -> Vec<f64> {
    let channels = shape.last().copied().unwrap_or(0);
    if channels == 0 {
        return Vec::new();
    }
    let positions = data.len() / channels;
    let mut sums = vec![0.0f64; channels];
    for row in data.chunks_exact(channels) {
        for (s, &v) in sums.iter_mut().zip(row) {
            *s += v as f64;
        }
    }
    sums.into_iter().map(|s| s / positions as f64).collect()
}

pub fn activated_set(trace: &ActivationTrace, threshold: ActivationThreshold) -> CoverageMap {
    let mut map = CoverageMap::empty(trace.fingerprint, trace.neuron_count());
    for (li, layer) in trace.layers.iter().enumerate() {
        let out = &layer.output;
        match layer.kind {
            LayerKind::Flatten => {}
            LayerKind::Dense | LayerKind::Conv2D => {
                let reductions = channel_means(out.shape(), out.data());
                for unit in activated_units(&reductions, threshold) {
                    map.activated.insert(NeuronId::new(li, unit));
                }
            }
            LayerKind::Lstm => {
                let hidden = out.shape().last().copied().unwrap_or(0);
                if hidden == 0 {
                    continue;
                }
                for (t, row) in out.data().chunks_exact(hidden).enumerate() {
                    let reductions: Vec<f64> = row.iter().map(|&v| v as f64).collect();
                    for unit in activated_units(&reductions, threshold) {
                        map.activated.insert(NeuronId::unrolled(li, unit, t));
                    }
                }
            }
        }
    }
    map
}

/// `|activated| / total`.
pub fn neuron_coverage(cov: &CoverageMap) -> Result<f64> {
    if cov.total == 0 {
        return Err(Error::EmptyModel);
    }
    Ok(cov.activated.len() as f64 / cov.total as f64)
}

/// `1 − |a ∩ b| / |a ∪ b|`, and 0 when both sets are empty.
pub fn jaccard_distance(a: &CoverageMap, b: &CoverageMap) -> Result<f64> {
    a.check_same_model(b)?;
    Ok(jaccard_of_sets(&a.activated, &b.activated))
}

pub(crate) fn jaccard_of_sets(a: &BTreeSet<NeuronId>, b: &BTreeSet<NeuronId>) -> f64 {
    let inter = a.intersection(b).count();
    let union = a.len() + b.len() - inter;
    if union == 0 {
        0.0
    } else {
        1.0 - inter as f64 / union as f64
    }
}

pub fn merge(a: &CoverageMap, b: &CoverageMap) -> Result<CoverageMap> {
    a.check_same_model(b)?;
    Ok(CoverageMap {
        fingerprint: a.fingerprint,
        total: a.total,
        activated: a.activated.union(&b.activated).copied().collect(),
    })
}

/// Merges `b` into `a` in place; returns how many neurons were new.
pub fn merge_into(a: &mut CoverageMap, b: &CoverageMap) -> Result<usize> {
    a.check_same_model(b)?;
    let before = a.activated.len();
    a.activated.extend(b.activated.iter().copied());
    Ok(a.activated.len() - before)
}
