//! Experiment drivers. Each returns a serializable report section.

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::Serialize;

use steercov_core::coverage::{
    jaccard_distance, merge_into, neuron_coverage, ActivationThreshold, CoverageMap,
};
use steercov_core::imgproc::{apply, dedup_specs, Image, TransformKind, TransformSpec};
use steercov_core::nn::Network;
use steercov_core::oracle::{
    check_metamorphic, check_variants, count_errors, filter_transform, mse, sweep, ErrorTable,
    LabeledItem, LabeledSet, PairPredictions, SweepTable, Variant, ViolationRecord,
};
use steercov_core::search::{evaluate, guided_search_from, SearchResult, Seed};
use steercov_core::stats::{cohens_d, rank_sum_test, spearman, EffectLabel, TestOutcome};
use steercov_core::Error as CoreError;

use crate::config::RunConfig;
use crate::dataset::Frame;
use crate::error::{HarnessError, Result};

pub const GUIDED_GROUP: &str = "guided";

/// One statistical result, or why it could not be computed.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum StatCell {
    Ok {
        statistic: f64,
        #[serde(skip_serializing_if = "Option::is_none")]
        p_value: Option<f64>,
        #[serde(skip_serializing_if = "Option::is_none")]
        effect: Option<EffectLabel>,
        marker: String,
    },
    Inconclusive {
        reason: String,
    },
    Skipped {
        reason: String,
    },
}

impl StatCell {
    fn from_outcome(r: steercov_core::Result<TestOutcome>) -> Result<Self> {
        match r {
            Ok(o) => Ok(StatCell::Ok {
                marker: o.significance_marker().to_string(),
                statistic: o.statistic,
                p_value: o.p_value,
                effect: o.effect_label,
            }),
            Err(CoreError::DegenerateSample(reason)) => Ok(StatCell::Inconclusive { reason }),
            Err(e) => Err(e.into()),
        }
    }

    pub fn statistic(&self) -> Option<f64> {
        match self {
            StatCell::Ok { statistic, .. } => Some(*statistic),
            _ => None,
        }
    }
}

/// Prediction and activated set of every image, in order.
pub fn evaluate_all<N: Network + ?Sized>(
    net: &N,
    images: &[&Image],
    threshold: ActivationThreshold,
) -> Result<Vec<(f32, CoverageMap)>> {
    images
        .par_iter()
        .map(|img| evaluate(net, img, threshold))
        .collect::<steercov_core::Result<Vec<_>>>()
        .map_err(Into::into)
}

fn union<'a, N: Network + ?Sized>(
    net: &N,
    maps: impl IntoIterator<Item = &'a CoverageMap>,
) -> Result<CoverageMap> {
    let mut acc = CoverageMap::for_network(net);
    for m in maps {
        merge_into(&mut acc, m)?;
    }
    Ok(acc)
}

fn ratio(map: &CoverageMap) -> Result<f64> {
    Ok(neuron_coverage(map)?)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FramePoint {
    pub frame_id: String,
    pub coverage: f64,
    pub prediction: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CoverageSection {
    pub frames: usize,
    pub total_neurons: usize,
    pub points: Vec<FramePoint>,
    /// Coverage against steering prediction.
    pub spearman: StatCell,
    /// Frames with a positive prediction (left turns).
    pub left: usize,
    /// Frames with a negative prediction (right turns).
    pub right: usize,
    /// Frames predicting exactly zero, left out of the direction test.
    pub straight: usize,
    /// Coverage of left against right frames.
    pub rank_sum: StatCell,
    pub cohens_d: StatCell,
}

/// Per-frame coverage versus steering output, and coverage by direction.
pub fn run_coverage_correlation<N: Network + ?Sized>(
    net: &N,
    frames: &[Frame],
    threshold: ActivationThreshold,
) -> Result<CoverageSection> {
    if frames.len() < 3 {
        return Err(CoreError::Input(format!(
            "coverage correlation needs at least 3 frames, got {}",
            frames.len()
        ))
        .into());
    }
    let images: Vec<&Image> = frames.iter().map(|f| &f.image).collect();
    let evals = evaluate_all(net, &images, threshold)?;
    let points = frames
        .iter()
        .zip(&evals)
        .map(|(f, (pred, map))| {
            Ok(FramePoint {
                frame_id: f.id.clone(),
                coverage: ratio(map)?,
                prediction: *pred as f64,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let cov: Vec<f64> = points.iter().map(|p| p.coverage).collect();
    let pred: Vec<f64> = points.iter().map(|p| p.prediction).collect();
    let rho = StatCell::from_outcome(spearman(&cov, &pred))?;

    let left: Vec<f64> = points.iter().filter(|p| p.prediction > 0.0).map(|p| p.coverage).collect();
    let right: Vec<f64> = points.iter().filter(|p| p.prediction < 0.0).map(|p| p.coverage).collect();
    let straight = points.len() - left.len() - right.len();
    let (rank_sum, d) = if left.is_empty() || right.is_empty() {
        let reason = format!(
            "single group: {} left, {} right predictions",
            left.len(),
            right.len()
        );
        (
            StatCell::Skipped {
                reason: reason.clone(),
            },
            StatCell::Skipped { reason },
        )
    } else {
        let d = if left.len() < 2 || right.len() < 2 {
            StatCell::Skipped {
                reason: "effect size needs two frames per direction".into(),
            }
        } else {
            StatCell::from_outcome(cohens_d(&left, &right))?
        };
        (StatCell::from_outcome(rank_sum_test(&left, &right))?, d)
    };
    Ok(CoverageSection {
        frames: frames.len(),
        total_neurons: net.total_neurons(),
        points,
        spearman: rho,
        left: left.len(),
        right: right.len(),
        straight,
        rank_sum,
        cohens_d: d,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct KindStudy {
    pub parameters: usize,
    /// Neurons activated by this kind's images across all seeds.
    pub covered: usize,
    pub coverage: f64,
    /// `(N_T − N_O) / N_O` averaged over seeds with `N_O > 0`.
    pub mean_increase: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SeedCurve {
    pub seed_id: String,
    pub seed_coverage: f64,
    /// Coverage of `T1`, `T1 ∪ T2`, … in kind order.
    pub cumulative: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StudySection {
    pub seeds: usize,
    pub kinds: Vec<TransformKind>,
    pub images_per_seed: usize,
    pub total_neurons: usize,
    pub seed_covered: usize,
    pub per_kind: BTreeMap<TransformKind, KindStudy>,
    /// Mean over seeds of the Jaccard distance between two kinds' activated
    /// sets, indexed like `kinds`.
    pub jaccard: Vec<Vec<f64>>,
    pub curves: Vec<SeedCurve>,
    /// Seeds plus every transformed image.
    pub cumulative_covered: usize,
    pub cumulative_coverage: f64,
}

/// The parameter lists the study applies: each simple kind's grid with
/// exact duplicates dropped.
pub fn study_grids(cfg: &RunConfig) -> Vec<(TransformKind, Vec<TransformSpec>)> {
    TransformKind::SIMPLE
        .iter()
        .map(|&k| (k, dedup_specs(cfg.grid(k))))
        .collect()
}

struct SeedStudy {
    seed: CoverageMap,
    per_kind: Vec<CoverageMap>,
}

fn study_seed<N: Network + ?Sized>(
    net: &N,
    frame: &Frame,
    grids: &[(TransformKind, Vec<TransformSpec>)],
    threshold: ActivationThreshold,
) -> Result<SeedStudy> {
    let (_, seed) = evaluate(net, &frame.image, threshold)?;
    let per_kind = grids
        .iter()
        .map(|(_, specs)| {
            let mut acc = CoverageMap::for_network(net);
            for spec in specs {
                let img = apply(&frame.image, spec)?;
                let (_, m) = evaluate(net, &img, threshold)?;
                merge_into(&mut acc, &m)?;
            }
            Ok(acc)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(SeedStudy { seed, per_kind })
}

/// Applies every simple kind over its grid to each seed. Returns the
/// section and the union of seeds and transformed images.
pub fn run_transform_study<N: Network + ?Sized>(
    net: &N,
    seeds: &[Frame],
    cfg: &RunConfig,
) -> Result<(StudySection, CoverageMap)> {
    if seeds.is_empty() {
        return Err(CoreError::Input("transform study needs at least one seed".into()).into());
    }
    let threshold = cfg.threshold();
    let grids = study_grids(cfg);
    let studies = seeds
        .par_iter()
        .map(|f| study_seed(net, f, &grids, threshold))
        .collect::<Result<Vec<_>>>()?;

    let k = grids.len();
    let mut jaccard = vec![vec![0.0; k]; k];
    let mut curves = Vec::with_capacity(seeds.len());
    for (frame, s) in seeds.iter().zip(&studies) {
        for (row, a) in jaccard.iter_mut().zip(&s.per_kind) {
            for (cell, b) in row.iter_mut().zip(&s.per_kind) {
                *cell += jaccard_distance(a, b)?;
            }
        }
        let mut acc = CoverageMap::for_network(net);
        let mut cumulative = Vec::with_capacity(k);
        for m in &s.per_kind {
            merge_into(&mut acc, m)?;
            cumulative.push(ratio(&acc)?);
        }
        curves.push(SeedCurve {
            seed_id: frame.id.clone(),
            seed_coverage: ratio(&s.seed)?,
            cumulative,
        });
    }
    for row in &mut jaccard {
        for v in row.iter_mut() {
            *v /= seeds.len() as f64;
        }
    }

    let mut per_kind = BTreeMap::new();
    for (i, (kind, specs)) in grids.iter().enumerate() {
        let covered = union(net, studies.iter().map(|s| &s.per_kind[i]))?;
        let increases: Vec<f64> = studies
            .iter()
            .filter(|s| !s.seed.is_empty())
            .map(|s| {
                let n_o = s.seed.len() as f64;
                (s.per_kind[i].len() as f64 - n_o) / n_o
            })
            .collect();
        per_kind.insert(
            *kind,
            KindStudy {
                parameters: specs.len(),
                covered: covered.len(),
                coverage: ratio(&covered)?,
                mean_increase: (!increases.is_empty())
                    .then(|| increases.iter().sum::<f64>() / increases.len() as f64),
            },
        );
    }
    let seed_union = union(net, studies.iter().map(|s| &s.seed))?;
    let mut cumulative = seed_union.clone();
    for s in &studies {
        for m in &s.per_kind {
            merge_into(&mut cumulative, m)?;
        }
    }
    Ok((
        StudySection {
            seeds: seeds.len(),
            kinds: grids.iter().map(|(k, _)| *k).collect(),
            images_per_seed: grids.iter().map(|(_, g)| g.len()).sum(),
            total_neurons: net.total_neurons(),
            seed_covered: seed_union.len(),
            per_kind,
            jaccard,
            curves,
            cumulative_covered: cumulative.len(),
            cumulative_coverage: ratio(&cumulative)?,
        },
        cumulative,
    ))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GuidedSection {
    pub seeds: usize,
    pub total_neurons: usize,
    pub baseline_covered: usize,
    pub cumulative_covered: usize,
    pub guided_covered: usize,
    pub baseline_coverage: f64,
    pub cumulative_coverage: f64,
    pub guided_coverage: f64,
    /// Percent increase of guided over baseline coverage.
    pub guided_vs_baseline_pct: Option<f64>,
    pub guided_vs_cumulative_pct: Option<f64>,
    pub generated: usize,
    pub attempts: usize,
}

pub struct GuidedRun {
    pub section: GuidedSection,
    pub result: SearchResult,
}

fn pct(from: usize, to: usize) -> Option<f64> {
    (from > 0).then(|| 100.0 * (to as f64 - from as f64) / from as f64)
}

pub fn seeds_of(frames: &[Frame]) -> Vec<Seed> {
    frames
        .iter()
        .map(|f| Seed::new(f.id.clone(), f.image.clone()))
        .collect()
}

/// Baseline, cumulative single-transformation and guided coverage. The
/// guided search starts from the cumulative coverage, so it only accepts
/// images that reach neurons the single transformations missed.
pub fn run_guided<N: Network + ?Sized>(net: &N, seeds: &[Frame], cfg: &RunConfig) -> Result<GuidedRun> {
    let (_, cumulative) = run_transform_study(net, seeds, cfg)?;
    let images: Vec<&Image> = seeds.iter().map(|f| &f.image).collect();
    let evals = evaluate_all(net, &images, cfg.threshold())?;
    let baseline = union(net, evals.iter().map(|(_, m)| m))?;
    let result = guided_search_from(net, &seeds_of(seeds), &cfg.search_config(), cumulative.clone())?;
    let guided = &result.final_coverage;
    if !(baseline.activated.is_subset(&cumulative.activated)
        && cumulative.activated.is_subset(&guided.activated))
    {
        return Err(HarnessError::Invariant(format!(
            "coverage ordering broken: baseline {}, cumulative {}, guided {}",
            baseline.len(),
            cumulative.len(),
            guided.len()
        )));
    }
    let section = GuidedSection {
        seeds: seeds.len(),
        total_neurons: net.total_neurons(),
        baseline_covered: baseline.len(),
        cumulative_covered: cumulative.len(),
        guided_covered: guided.len(),
        baseline_coverage: ratio(&baseline)?,
        cumulative_coverage: ratio(&cumulative)?,
        guided_coverage: ratio(guided)?,
        guided_vs_baseline_pct: pct(baseline.len(), guided.len()),
        guided_vs_cumulative_pct: pct(cumulative.len(), guided.len()),
        generated: result.generated.len(),
        attempts: result.audit.len(),
    };
    Ok(GuidedRun { section, result })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PairSummary {
    pub transformation: TransformSpec,
    pub mse: f64,
    pub passes_gate: bool,
    pub violations: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OracleSection {
    pub model: String,
    pub frames: usize,
    pub mse_orig: f64,
    pub lambda: f64,
    pub epsilon: f64,
    pub pairs: Vec<PairSummary>,
    /// Unique erroneous behaviours at the configured λ and ε.
    pub errors: ErrorTable,
    pub simple_errors: usize,
    pub composite_errors: BTreeMap<String, usize>,
    pub sweep: SweepTable,
    /// `[λ index, ε index]` of the configured cell within the sweep.
    pub default_cell: Option<[usize; 2]>,
    pub guided_images: usize,
}

pub struct OracleRun {
    pub section: OracleSection,
    pub violations: Vec<ViolationRecord>,
}

fn predict_all<N: Network + ?Sized>(net: &N, images: &[Image], t: ActivationThreshold) -> Result<Vec<f64>> {
    let refs: Vec<&Image> = images.iter().collect();
    Ok(evaluate_all(net, &refs, t)?
        .into_iter()
        .map(|(p, _)| p as f64)
        .collect())
}

fn transformed_predictions<N: Network + ?Sized>(
    net: &N,
    frames: &[Frame],
    spec: &TransformSpec,
    t: ActivationThreshold,
) -> Result<Vec<f64>> {
    let images = frames
        .par_iter()
        .map(|f| apply(&f.image, spec))
        .collect::<steercov_core::Result<Vec<_>>>()?;
    predict_all(net, &images, t)
}

/// Baseline error, gated simple transformations, ungated fog, rain and
/// guided images, and the λ × ε sweep.
pub fn run_oracle<N: Network + ?Sized>(
    net: &N,
    model_name: &str,
    frames: &[Frame],
    cfg: &RunConfig,
) -> Result<OracleRun> {
    let t = cfg.threshold();
    let oc = cfg.oracle();
    let originals: Vec<Image> = frames.iter().map(|f| f.image.clone()).collect();
    let preds = predict_all(net, &originals, t)?;
    let baseline = LabeledSet::new(
        frames
            .iter()
            .zip(&preds)
            .map(|(f, &p)| LabeledItem {
                id: f.id.clone(),
                label: f.label,
                prediction: p,
            })
            .collect(),
    )?;
    let mse_orig = baseline.mse_orig();
    let labels = baseline.labels();

    let mut simple = Vec::new();
    for (_, specs) in study_grids(cfg) {
        for spec in specs {
            let predictions = transformed_predictions(net, frames, &spec, t)?;
            simple.push(PairPredictions { spec, predictions });
        }
    }

    let mut composite: Vec<(String, Vec<Variant>)> = Vec::new();
    for kind in [TransformKind::Fog, TransformKind::Rain] {
        let mut variants = Vec::new();
        for spec in dedup_specs(cfg.grid(kind)) {
            let predictions = transformed_predictions(net, frames, &spec, t)?;
            variants.extend(predictions.into_iter().enumerate().map(|(item, prediction)| Variant {
                item,
                prediction,
                provenance: vec![spec],
            }));
        }
        composite.push((kind.name().to_string(), variants));
    }

    let seeds = &frames[..cfg.max_seeds.min(frames.len())];
    let guided = run_guided(net, seeds, cfg)?;
    let index: BTreeMap<&str, usize> = frames.iter().enumerate().map(|(i, f)| (f.id.as_str(), i)).collect();
    let guided_variants: Vec<Variant> = guided
        .result
        .generated
        .iter()
        .map(|g| Variant {
            item: index[g.seed_id.as_str()],
            prediction: g.prediction as f64,
            provenance: g.provenance.clone(),
        })
        .collect();
    composite.push((GUIDED_GROUP.to_string(), guided_variants));

    let mut violations = Vec::new();
    let mut pairs = Vec::with_capacity(simple.len());
    for p in &simple {
        let pair_mse = mse(&p.predictions, &labels)?;
        let passes_gate = filter_transform(pair_mse, mse_orig, oc.epsilon);
        let found = check_metamorphic(
            &baseline,
            &p.predictions,
            &[p.spec],
            oc.lambda,
            model_name,
            p.spec.kind().name(),
        )?;
        pairs.push(PairSummary {
            transformation: p.spec,
            mse: pair_mse,
            passes_gate,
            violations: found.len(),
        });
        if passes_gate {
            violations.extend(found);
        }
    }
    let simple_errors = count_errors(&violations).total();
    let mut composite_errors = BTreeMap::new();
    for (group, variants) in &composite {
        let found = check_variants(&baseline, variants, oc.lambda, model_name, group)?;
        composite_errors.insert(group.clone(), count_errors(&found).total());
        violations.extend(found);
    }
    let errors = count_errors(&violations);

    let table = sweep(&baseline, &simple, &composite, &cfg.sweep_lambdas, &cfg.sweep_epsilons)?;
    if !(table.lambda_monotone() && table.epsilon_monotone()) {
        return Err(HarnessError::Invariant("λ × ε sweep is not monotone".into()));
    }
    let default_cell = cfg
        .sweep_lambdas
        .iter()
        .position(|&l| l == oc.lambda)
        .zip(cfg.sweep_epsilons.iter().position(|&e| e == oc.epsilon))
        .map(|(a, b)| [a, b]);

    Ok(OracleRun {
        section: OracleSection {
            model: model_name.to_string(),
            frames: frames.len(),
            mse_orig,
            lambda: oc.lambda,
            epsilon: oc.epsilon,
            pairs,
            errors,
            simple_errors,
            composite_errors,
            sweep: table,
            default_cell,
            guided_images: guided.result.generated.len(),
        },
        violations,
    })
}
