//! Greedy, coverage-guided combination of image transformations.
//!
//! Seeds are pushed onto a stack in order and popped last-in first-out. For
//! each popped image the search repeatedly draws a pair of transformations
//! `(T1, T2)` with random parameters and keeps `T2(T1(image))` when it
//! activates at least one neuron not yet covered. `T1` comes from a FIFO
//! queue of previously successful kinds when the queue is non-empty. Both
//! kinds of an accepted pair are enqueued and the new image is pushed onto
//! the stack. The popped image remains the base for its whole try-loop,
//! which ends once more than `max_failed_tries` attempts have failed.
//!
//! Coverage is global: one cumulative map shared across all seeds, starting
//! from the union of the seeds' own activations.
//!
//! Random draws per attempt, in order, all from one [`SplitMix64`] seeded by
//! `rng_seed`: the `T1` kind index (only when the queue is empty), the `T1`
//! parameter index, the `T2` kind index, the `T2` parameter index.

use std::collections::{BTreeMap, VecDeque};

use serde::{Deserialize, Serialize};

use crate::coverage::{activated_set, merge, ActivationThreshold, CoverageMap};
use crate::error::{Error, Result};
use crate::imgproc::{apply, default_grid, Image, TransformKind, TransformSpec};
use crate::nn::{ActivationTrace, Network};
use crate::rng::SplitMix64;

/// One transformation kind with the parameter instances it may draw from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransformGrid {
    pub kind: TransformKind,
    pub params: Vec<TransformSpec>,
}

impl TransformGrid {
    pub fn default_for(kind: TransformKind) -> Self {
        Self {
            kind,
            params: default_grid(kind),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchConfig {
    pub transformations: Vec<TransformGrid>,
    pub max_failed_tries: usize,
    pub rng_seed: u64,
    pub threshold: ActivationThreshold,
}

impl SearchConfig {
    pub const DEFAULT_MAX_FAILED_TRIES: usize = 25;

    /// The seven simple kinds over their default grids.
    pub fn new(rng_seed: u64) -> Self {
        Self {
            transformations: TransformKind::SIMPLE
                .iter()
                .map(|&k| TransformGrid::default_for(k))
                .collect(),
            max_failed_tries: Self::DEFAULT_MAX_FAILED_TRIES,
            rng_seed,
            threshold: ActivationThreshold::default(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.max_failed_tries == 0 {
            return Err(Error::Param("max_failed_tries must be ≥ 1".into()));
        }
        if self.transformations.is_empty() {
            return Err(Error::Param("no transformation kind enabled".into()));
        }
        for g in &self.transformations {
            if g.params.is_empty() {
                return Err(Error::Param(format!("{} has an empty parameter grid", g.kind)));
            }
            for p in &g.params {
                if p.kind() != g.kind {
                    return Err(Error::Param(format!("{p} listed under {}", g.kind)));
                }
                p.validate()?;
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Seed {
    pub id: String,
    pub image: Image,
}

impl Seed {
    pub fn new(id: impl Into<String>, image: Image) -> Self {
        Self {
            id: id.into(),
            image,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AuditEntry {
    /// Name of the image the attempt transformed: a seed id or a generated name.
    pub base: String,
    pub seed_id: String,
    /// Failed tries on this base before the attempt.
    pub failed_before: usize,
    pub t1: TransformSpec,
    pub t1_from_queue: bool,
    pub t2: TransformSpec,
    pub accepted: bool,
    pub new_neurons: usize,
    pub covered_after: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GeneratedImage {
    /// `<seed_id>_<k>`, with `k` counting from 1 per seed.
    pub name: String,
    pub seed_id: String,
    /// Transformations to apply to the seed, in order.
    pub provenance: Vec<TransformSpec>,
    pub image: Image,
    pub prediction: f32,
    pub new_neurons: usize,
    pub covered_after: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SearchResult {
    pub generated: Vec<GeneratedImage>,
    /// Coverage before the first attempt: the initial map plus every seed.
    pub start_coverage: CoverageMap,
    pub final_coverage: CoverageMap,
    pub audit: Vec<AuditEntry>,
}

/// Forward pass of one image; returns the prediction and its activated set.
pub fn evaluate<N: Network + ?Sized>(
    net: &N,
    img: &Image,
    threshold: ActivationThreshold,
) -> Result<(f32, CoverageMap)> {
    let input = img.to_tensor(net.input_shape())?;
    let (pred, trace) = net.forward(&input)?;
    Ok((pred, activated_set(&trace, threshold)))
}

/// Whether `candidate` adds neurons to `current`, and the union either way.
pub fn cov_inc(
    current: &CoverageMap,
    candidate: &ActivationTrace,
    threshold: ActivationThreshold,
) -> Result<(bool, CoverageMap)> {
    let merged = merge(current, &activated_set(candidate, threshold))?;
    Ok((merged.len() > current.len(), merged))
}

pub fn guided_search<N: Network + ?Sized>(
    net: &N,
    seeds: &[Seed],
    cfg: &SearchConfig,
) -> Result<SearchResult> {
    guided_search_from(net, seeds, cfg, CoverageMap::for_network(net))
}

/// Runs the search with `initial` already counted as covered.
pub fn guided_search_from<N: Network + ?Sized>(
    net: &N,
    seeds: &[Seed],
    cfg: &SearchConfig,
    initial: CoverageMap,
) -> Result<SearchResult> {
    cfg.validate()?;
    let mut coverage = CoverageMap::for_network(net);
    crate::coverage::merge_into(&mut coverage, &initial)?;
    let input_len: usize = net.input_shape().iter().product();
    for s in seeds {
        if s.image.data().len() != input_len {
            return Err(Error::Shape(format!(
                "seed {} is {}x{}x{}, model input is {:?}",
                s.id,
                s.image.height(),
                s.image.width(),
                s.image.channels(),
                net.input_shape()
            )));
        }
    }
    for s in seeds {
        let (_, map) = evaluate(net, &s.image, cfg.threshold)?;
        crate::coverage::merge_into(&mut coverage, &map)?;
    }
    let start_coverage = coverage.clone();

    struct Entry {
        name: String,
        seed_id: String,
        provenance: Vec<TransformSpec>,
        image: Image,
    }
    let mut stack: Vec<Entry> = seeds
        .iter()
        .map(|s| Entry {
            name: s.id.clone(),
            seed_id: s.id.clone(),
            provenance: Vec::new(),
            image: s.image.clone(),
        })
        .collect();

    let grids = &cfg.transformations;
    let mut rng = SplitMix64::new(cfg.rng_seed);
    let mut queue: VecDeque<usize> = VecDeque::new();
    let mut per_seed: BTreeMap<String, usize> = BTreeMap::new();
    let mut generated = Vec::new();
    let mut audit = Vec::new();

    while let Some(base) = stack.pop() {
        let mut failed = 0;
        while failed <= cfg.max_failed_tries {
            let (k1, from_queue) = match queue.pop_front() {
                Some(k) => (k, true),
                None => (rng.below(grids.len()), false),
            };
            let p1 = grids[k1].params[rng.below(grids[k1].params.len())];
            let k2 = rng.below(grids.len());
            let p2 = grids[k2].params[rng.below(grids[k2].params.len())];

            let image = apply(&apply(&base.image, &p1)?, &p2)?;
            let (prediction, map) = evaluate(net, &image, cfg.threshold)?;
            let new_neurons = crate::coverage::merge_into(&mut coverage, &map)?;
            let accepted = new_neurons > 0;
            audit.push(AuditEntry {
                base: base.name.clone(),
                seed_id: base.seed_id.clone(),
                failed_before: failed,
                t1: p1,
                t1_from_queue: from_queue,
                t2: p2,
                accepted,
                new_neurons,
                covered_after: coverage.len(),
            });
            if accepted {
                queue.push_back(k1);
                queue.push_back(k2);
                let k = per_seed.entry(base.seed_id.clone()).or_default();
                *k += 1;
                let mut provenance = base.provenance.clone();
                provenance.extend([p1, p2]);
                let name = format!("{}_{}", base.seed_id, k);
                generated.push(GeneratedImage {
                    name: name.clone(),
                    seed_id: base.seed_id.clone(),
                    provenance: provenance.clone(),
                    image: image.clone(),
                    prediction,
                    new_neurons,
                    covered_after: coverage.len(),
                });
                stack.push(Entry {
                    name,
                    seed_id: base.seed_id.clone(),
                    provenance,
                    image,
                });
            } else {
                failed += 1;
            }
        }
    }

    Ok(SearchResult {
        generated,
        start_coverage,
        final_coverage: coverage,
        audit,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::imgproc::apply_chain;
    use crate::nn::{LayerKind, LayerOutput, Tensor};

    /// Four dense "neurons" whose outputs depend only on the mean pixel:
    /// neuron `i` fires once the mean exceeds `i / 4`.
    struct Staircase;

    impl Network for Staircase {
        fn input_shape(&self) -> &[usize] {
            &[4, 4, 1]
        }
        fn fingerprint(&self) -> u64 {
            7
        }
        fn total_neurons(&self) -> usize {
            5
        }
        fn forward(&self, input: &Tensor) -> Result<(f32, ActivationTrace)> {
            let m = input.data().iter().sum::<f32>() / input.len() as f32;
            // A fixed zero at unit 0 pins the layer minimum; unit i + 1 scales to
            // its step value relative to the top unit.
            let mut out = vec![0.0f32, 1.0];
            for i in 1..4 {
                out.push(if m > i as f32 / 4.0 { 1.0 } else { 0.0 });
            }
            Ok((
                m,
                ActivationTrace {
                    fingerprint: 7,
                    layers: vec![LayerOutput {
                        kind: LayerKind::Dense,
                        output: Tensor::from_vec(out),
                    }],
                },
            ))
        }
    }

    /// Always activates the same single neuron.
    struct Constant;

    impl Network for Constant {
        fn input_shape(&self) -> &[usize] {
            &[4, 4, 1]
        }
        fn fingerprint(&self) -> u64 {
            9
        }
        fn total_neurons(&self) -> usize {
            2
        }
        fn forward(&self, _: &Tensor) -> Result<(f32, ActivationTrace)> {
            Ok((
                0.0,
                ActivationTrace {
                    fingerprint: 9,
                    layers: vec![LayerOutput {
                        kind: LayerKind::Dense,
                        output: Tensor::from_vec(vec![0.0, 1.0]),
                    }],
                },
            ))
        }
    }

    fn seed(id: &str, v: u8) -> Seed {
        Seed::new(id, Image::filled(4, 4, 1, v).unwrap())
    }

    fn cfg(max_failed_tries: usize) -> SearchConfig {
        SearchConfig {
            max_failed_tries,
            ..SearchConfig::new(42)
        }
    }

    #[test]
    fn empty_seeds_give_empty_result() {
        let r = guided_search(&Staircase, &[], &cfg(3)).unwrap();
        assert!(r.generated.is_empty());
        assert!(r.audit.is_empty());
        assert!(r.final_coverage.is_empty());
    }

    #[test]
    fn stuck_model_audits_two_failures() {
        let r = guided_search(&Constant, &[seed("s", 10)], &cfg(1)).unwrap();
        assert!(r.generated.is_empty());
        assert_eq!(r.audit.len(), 2);
        assert!(r.audit.iter().all(|a| !a.accepted && !a.t1_from_queue));
        assert_eq!(r.audit[0].failed_before, 0);
        assert_eq!(r.audit[1].failed_before, 1);
    }

    #[test]
    fn shape_mismatch() {
        let bad = Seed::new("x", Image::filled(3, 3, 1, 0).unwrap());
        assert!(matches!(
            guided_search(&Staircase, &[bad], &cfg(1)),
            Err(Error::Shape(_))
        ));
    }

    #[test]
    fn config_validation() {
        assert!(cfg(0).validate().is_err());
        let mut c = cfg(1);
        c.transformations.clear();
        assert!(c.validate().is_err());
    }

    #[test]
    fn accepted_images_replay_and_grow_coverage() {
        let seeds = [seed("a", 20), seed("b", 40)];
        let r = guided_search(&Staircase, &seeds, &cfg(10)).unwrap();
        assert!(r.final_coverage.len() >= r.start_coverage.len());
        let mut last = r.start_coverage.len();
        for g in &r.generated {
            let s = seeds.iter().find(|s| s.id == g.seed_id).unwrap();
            assert_eq!(apply_chain(&s.image, &g.provenance).unwrap(), g.image);
            assert!(g.new_neurons > 0);
            assert_eq!(g.covered_after, last + g.new_neurons);
            last = g.covered_after;
        }
        assert_eq!(last, r.final_coverage.len());
    }

    #[test]
    fn reproducible() {
        let seeds = [seed("a", 20), seed("b", 90)];
        let a = guided_search(&Staircase, &seeds, &cfg(5)).unwrap();
        let b = guided_search(&Staircase, &seeds, &cfg(5)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn cov_inc_is_idempotent() {
        let (_, trace) = Staircase
            .forward(&Image::filled(4, 4, 1, 200).unwrap().to_tensor(&[4, 4, 1]).unwrap())
            .unwrap();
        let start = CoverageMap::empty(7, 5);
        let t = ActivationThreshold::default();
        let (inc, merged) = cov_inc(&start, &trace, t).unwrap();
        assert!(inc);
        let (again, merged2) = cov_inc(&merged, &trace, t).unwrap();
        assert!(!again);
        assert_eq!(merged, merged2);
        assert!(matches!(
            cov_inc(&CoverageMap::empty(8, 5), &trace, t),
            Err(Error::ModelMismatch { .. })
        ));
    }
}
