//! Metamorphic test oracle for steering predictions.
//!
//! A transformed input `t` of item `i` satisfies the relaxed relation when
//! `(θ̂ᵢ − θₜ)² ≤ λ · MSE_orig`, where `MSE_orig` is the mean squared error of
//! the model on the untransformed set. Simple transformation/parameter pairs
//! only count toward reported errors when their own MSE stays within `ε` of
//! `MSE_orig`; composite transformations are never gated.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::imgproc::TransformSpec;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OracleConfig {
    pub lambda: f64,
    pub epsilon: f64,
}

impl OracleConfig {
    pub const DEFAULT_LAMBDA: f64 = 5.0;
    pub const DEFAULT_EPSILON: f64 = 0.03;

    pub fn new(lambda: f64, epsilon: f64) -> Result<Self> {
        if !(lambda >= 0.0 && lambda.is_finite()) {
            return Err(Error::Param(format!("lambda {lambda} must be finite and ≥ 0")));
        }
        if !(epsilon >= 0.0 && epsilon.is_finite()) {
            return Err(Error::Param(format!("epsilon {epsilon} must be finite and ≥ 0")));
        }
        Ok(Self { lambda, epsilon })
    }
}

impl Default for OracleConfig {
    fn default() -> Self {
        Self {
            lambda: Self::DEFAULT_LAMBDA,
            epsilon: Self::DEFAULT_EPSILON,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabeledItem {
    pub id: String,
    /// Manual label `θ̂`, scaled to `[-1, 1]`.
    pub label: f64,
    /// Model output `θ_o` on the original image.
    pub prediction: f64,
}

/// Original images with their labels and baseline predictions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabeledSet {
    items: Vec<LabeledItem>,
}

impl LabeledSet {
    pub fn new(items: Vec<LabeledItem>) -> Result<Self> {
        if items.is_empty() {
            return Err(Error::Input("labeled set is empty".into()));
        }
        for it in &items {
            for (what, v) in [("label", it.label), ("prediction", it.prediction)] {
                if !(-1.0..=1.0).contains(&v) {
                    return Err(Error::Input(format!(
                        "item {}: {what} {v} outside [-1, 1]",
                        it.id
                    )));
                }
            }
        }
        Ok(Self { items })
    }

    pub fn items(&self) -> &[LabeledItem] {
        &self.items
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn labels(&self) -> Vec<f64> {
        self.items.iter().map(|i| i.label).collect()
    }

    pub fn predictions(&self) -> Vec<f64> {
        self.items.iter().map(|i| i.prediction).collect()
    }

    /// MSE of the baseline predictions over the whole set.
    pub fn mse_orig(&self) -> f64 {
        mse(&self.predictions(), &self.labels()).expect("non-empty and aligned")
    }
}

/// One erroneous behaviour: a transformed input breaking the relation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ViolationRecord {
    pub model: String,
    /// Transformation kind, or a composite group such as `guided`.
    pub group: String,
    pub image_id: String,
    pub provenance: Vec<TransformSpec>,
    pub label: f64,
    pub original: f64,
    pub transformed: f64,
    pub squared_error: f64,
    pub threshold: f64,
}

/// A transformed variant of one baseline item.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Variant {
    /// Index into the baseline set.
    pub item: usize,
    pub prediction: f64,
    pub provenance: Vec<TransformSpec>,
}

pub fn mse(predictions: &[f64], labels: &[f64]) -> Result<f64> {
    if predictions.len() != labels.len() {
        return Err(Error::Input(format!(
            "{} predictions for {} labels",
            predictions.len(),
            labels.len()
        )));
    }
    if predictions.is_empty() {
        return Err(Error::Input("mse of an empty set".into()));
    }
    let sum: f64 = predictions
        .iter()
        .zip(labels)
        .map(|(p, l)| (l - p) * (l - p))
        .sum();
    Ok(sum / predictions.len() as f64)
}

/// `(label − transformed)² ≤ λ · mse_orig`.
pub fn relation_holds(label: f64, transformed: f64, lambda: f64, mse_orig: f64) -> bool {
    let d = label - transformed;
    d * d <= lambda * mse_orig
}

/// `|mse_trans − mse_orig| ≤ ε`.
pub fn filter_transform(mse_trans: f64, mse_orig: f64, epsilon: f64) -> bool {
    (mse_trans - mse_orig).abs() <= epsilon
}

/// Checks predictions aligned one-to-one with `baseline` that all come from
/// the same transformation chain.
pub fn check_metamorphic(
    baseline: &LabeledSet,
    transformed: &[f64],
    provenance: &[TransformSpec],
    lambda: f64,
    model: &str,
    group: &str,
) -> Result<Vec<ViolationRecord>> {
    if transformed.len() != baseline.len() {
        return Err(Error::Input(format!(
            "{} transformed predictions for {} baseline items",
            transformed.len(),
            baseline.len()
        )));
    }
    let variants: Vec<Variant> = transformed
        .iter()
        .enumerate()
        .map(|(item, &prediction)| Variant {
            item,
            prediction,
            provenance: provenance.to_vec(),
        })
        .collect();
    check_variants(baseline, &variants, lambda, model, group)
}

/// Checks arbitrary variants, each tied to a baseline item.
pub fn check_variants(
    baseline: &LabeledSet,
    variants: &[Variant],
    lambda: f64,
    model: &str,
    group: &str,
) -> Result<Vec<ViolationRecord>> {
    let mse_orig = baseline.mse_orig();
    let threshold = lambda * mse_orig;
    let mut out = Vec::new();
    for v in variants {
        let item = baseline.items.get(v.item).ok_or_else(|| {
            Error::Input(format!(
                "variant refers to item {} of {}",
                v.item,
                baseline.len()
            ))
        })?;
        if !relation_holds(item.label, v.prediction, lambda, mse_orig) {
            let d = item.label - v.prediction;
            out.push(ViolationRecord {
                model: model.to_string(),
                group: group.to_string(),
                image_id: item.id.clone(),
                provenance: v.provenance.clone(),
                label: item.label,
                original: item.prediction,
                transformed: v.prediction,
                squared_error: d * d,
                threshold,
            });
        }
    }
    Ok(out)
}

/// Unique erroneous behaviours per transformation group (rows) and model
/// (columns), keyed by `(model, group, image id)`.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ErrorTable {
    pub counts: BTreeMap<String, BTreeMap<String, usize>>,
}

impl ErrorTable {
    pub fn get(&self, group: &str, model: &str) -> usize {
        self.counts
            .get(group)
            .and_then(|row| row.get(model))
            .copied()
            .unwrap_or(0)
    }

    pub fn total(&self) -> usize {
        self.counts.values().flat_map(|r| r.values()).sum()
    }

    pub fn models(&self) -> BTreeSet<String> {
        self.counts.values().flat_map(|r| r.keys().cloned()).collect()
    }
}

pub fn count_errors(violations: &[ViolationRecord]) -> ErrorTable {
    let unique: BTreeSet<(&str, &str, &str)> = violations
        .iter()
        .map(|v| (v.model.as_str(), v.group.as_str(), v.image_id.as_str()))
        .collect();
    let mut table = ErrorTable::default();
    for (model, group, _) in unique {
        *table
            .counts
            .entry(group.to_string())
            .or_default()
            .entry(model.to_string())
            .or_default() += 1;
    }
    table
}

/// Predictions of one simple transformation/parameter pair over the whole
/// baseline set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairPredictions {
    pub spec: TransformSpec,
    pub predictions: Vec<f64>,
}

/// Error counts over a grid of λ (rows) and ε (columns) for gated simple
/// pairs, plus one ungated column per composite group.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepTable {
    pub lambdas: Vec<f64>,
    pub epsilons: Vec<f64>,
    pub mse_orig: f64,
    /// `simple[λ index][ε index]`.
    pub simple: Vec<Vec<usize>>,
    /// Group name to per-λ counts.
    pub composite: BTreeMap<String, Vec<usize>>,
}

impl SweepTable {
    /// Every simple column non-increasing as λ grows.
    pub fn lambda_monotone(&self) -> bool {
        let simple_ok = (0..self.epsilons.len()).all(|e| {
            self.simple.windows(2).all(|w| w[1][e] <= w[0][e])
        });
        let composite_ok = self
            .composite
            .values()
            .all(|col| col.windows(2).all(|w| w[1] <= w[0]));
        simple_ok && composite_ok
    }

    /// Every row non-decreasing as ε grows.
    pub fn epsilon_monotone(&self) -> bool {
        self.simple
            .iter()
            .all(|row| row.windows(2).all(|w| w[0] <= w[1]))
    }
}

/// Builds the λ × ε table. Each cell counts unique `(group, image id)`
/// violations among pairs passing the ε gate; composite columns ignore ε.
pub fn sweep(
    baseline: &LabeledSet,
    simple: &[PairPredictions],
    composite: &[(String, Vec<Variant>)],
    lambdas: &[f64],
    epsilons: &[f64],
) -> Result<SweepTable> {
    let mse_orig = baseline.mse_orig();
    let labels = baseline.labels();
    let pair_mse = simple
        .iter()
        .map(|p| mse(&p.predictions, &labels))
        .collect::<Result<Vec<_>>>()?;
    let mut table = Vec::with_capacity(lambdas.len());
    for &lambda in lambdas {
        let per_pair = simple
            .iter()
            .map(|p| {
                let kind = p.spec.kind().name();
                check_metamorphic(baseline, &p.predictions, &[p.spec], lambda, "", kind)
            })
            .collect::<Result<Vec<_>>>()?;
        let row = epsilons
            .iter()
            .map(|&eps| {
                let unique: BTreeSet<(String, String)> = per_pair
                    .iter()
                    .zip(&pair_mse)
                    .filter(|(_, &m)| filter_transform(m, mse_orig, eps))
                    .flat_map(|(vs, _)| vs.iter().map(|v| (v.group.clone(), v.image_id.clone())))
                    .collect();
                unique.len()
            })
            .collect();
        table.push(row);
    }
    let mut comp = BTreeMap::new();
    for (group, variants) in composite {
        let col = lambdas
            .iter()
            .map(|&lambda| {
                let vs = check_variants(baseline, variants, lambda, "", group)?;
                Ok(count_errors(&vs).total())
            })
            .collect::<Result<Vec<_>>>()?;
        comp.insert(group.clone(), col);
    }
    Ok(SweepTable {
        lambdas: lambdas.to_vec(),
        epsilons: epsilons.to_vec(),
        mse_orig,
        simple: table,
        composite: comp,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn set(rows: &[(f64, f64)]) -> LabeledSet {
        LabeledSet::new(
            rows.iter()
                .enumerate()
                .map(|(i, &(label, prediction))| LabeledItem {
                    id: format!("f{i}"),
                    label,
                    prediction,
                })
                .collect(),
        )
        .unwrap()
    }

    #[test]
    fn mse_examples() {
        assert_eq!(mse(&[0.1, 0.2], &[0.1, 0.2]).unwrap(), 0.0);
        assert_eq!(mse(&[0.5], &[0.0]).unwrap(), 0.25);
        let m = mse(&[0.1, -0.3], &[0.0, 0.1]).unwrap();
        assert!((m - 0.085).abs() < 1e-15);
        assert!(matches!(mse(&[], &[]), Err(Error::Input(_))));
        assert!(matches!(mse(&[0.1], &[0.1, 0.2]), Err(Error::Input(_))));
    }

    #[test]
    fn published_deviation_is_a_violation() {
        // MSE_orig 0.035, one transformed item with squared error 0.41.
        assert!(!relation_holds(0.0, 0.41f64.sqrt(), 5.0, 0.035));
        assert!(relation_holds(0.0, 0.175f64.sqrt() - 1e-12, 5.0, 0.035));
    }

    #[test]
    fn equality_is_not_a_violation() {
        assert!(relation_holds(0.5, 0.0, 1.0, 0.25));
        assert!(filter_transform(0.1, 0.1, 0.0));
        assert!(!filter_transform(0.10, 0.06, 0.03));
    }

    #[test]
    fn unchanged_predictions_under_large_lambda() {
        let base = set(&[(0.1, 0.0), (-0.2, 0.1), (0.4, 0.4)]);
        let preds = base.predictions();
        // λ ≥ n · max_i e_i / Σ e_j guarantees no violation.
        let errs: Vec<f64> = base.items().iter().map(|i| (i.label - i.prediction).powi(2)).collect();
        let lambda = 3.0 * errs.iter().cloned().fold(0.0, f64::max) / errs.iter().sum::<f64>();
        let v = check_metamorphic(&base, &preds, &[], lambda, "m", "g").unwrap();
        assert!(v.is_empty());
    }

    #[test]
    fn zero_baseline_mse_flags_any_change() {
        let base = set(&[(0.1, 0.1), (0.2, 0.2)]);
        let v = check_metamorphic(&base, &[0.1, 0.2001], &[], 1e6, "m", "g").unwrap();
        assert_eq!(v.len(), 1);
        assert_eq!(v[0].image_id, "f1");
        assert!(v[0].squared_error > v[0].threshold);
    }

    #[test]
    fn misaligned_inputs() {
        let base = set(&[(0.1, 0.1)]);
        assert!(check_metamorphic(&base, &[0.1, 0.2], &[], 5.0, "m", "g").is_err());
        let bad = Variant {
            item: 4,
            prediction: 0.0,
            provenance: vec![],
        };
        assert!(check_variants(&base, &[bad], 5.0, "m", "g").is_err());
    }

    #[test]
    fn labels_must_be_scaled() {
        assert!(LabeledSet::new(vec![LabeledItem {
            id: "x".into(),
            label: 1.5,
            prediction: 0.0
        }])
        .is_err());
        assert!(LabeledSet::new(vec![]).is_err());
    }

    #[test]
    fn dedup_by_model_group_image() {
        let rec = |model: &str, group: &str, id: &str| ViolationRecord {
            model: model.into(),
            group: group.into(),
            image_id: id.into(),
            provenance: vec![],
            label: 0.0,
            original: 0.0,
            transformed: 1.0,
            squared_error: 1.0,
            threshold: 0.1,
        };
        assert_eq!(count_errors(&[]).total(), 0);
        let t = count_errors(&[
            rec("cnn", "rain", "a"),
            rec("cnn", "rain", "a"),
            rec("cnn", "rain", "b"),
            rec("lstm", "rain", "a"),
            rec("cnn", "fog", "a"),
        ]);
        assert_eq!(t.get("rain", "cnn"), 2);
        assert_eq!(t.get("rain", "lstm"), 1);
        assert_eq!(t.get("fog", "cnn"), 1);
        assert_eq!(t.get("fog", "lstm"), 0);
        assert_eq!(t.total(), 4);
    }
}
