//! Nonparametric statistics: Spearman rank correlation, the Wilcoxon
//! rank-sum (Mann–Whitney U) test and Cohen's d.

use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal, StudentsT};

use crate::error::{Error, Result};

/// p-values below this are reported with the `***` marker.
pub const SIGNIFICANCE_FLOOR: f64 = 2.2e-16;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EffectLabel {
    Negligible,
    Small,
    Medium,
    Large,
}

impl EffectLabel {
    /// Conventional cutoffs on `|d|`: 0.2, 0.5, 0.8.
    pub fn from_d(d: f64) -> Self {
        let d = d.abs();
        if d < 0.2 {
            EffectLabel::Negligible
        } else if d < 0.5 {
            EffectLabel::Small
        } else if d < 0.8 {
            EffectLabel::Medium
        } else {
            EffectLabel::Large
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestOutcome {
    pub statistic: f64,
    pub p_value: Option<f64>,
    pub effect_label: Option<EffectLabel>,
}

impl TestOutcome {
    /// `"***"` when `p < 2.2e-16`, empty otherwise.
    pub fn significance_marker(&self) -> &'static str {
        match self.p_value {
            Some(p) if p < SIGNIFICANCE_FLOOR => "***",
            _ => "",
        }
    }
}

fn check_finite(xs: &[f64], what: &str) -> Result<()> {
    if xs.iter().any(|v| !v.is_finite()) {
        return Err(Error::Input(format!("{what} contains non-finite values")));
    }
    Ok(())
}

/// 1-based ranks with ties sharing their average rank.
pub fn average_ranks(xs: &[f64]) -> Vec<f64> {
    let mut idx: Vec<usize> = (0..xs.len()).collect();
    idx.sort_by(|&a, &b| xs[a].total_cmp(&xs[b]));
    let mut ranks = vec![0.0; xs.len()];
    let mut i = 0;
    while i < idx.len() {
        let mut j = i;
        while j + 1 < idx.len() && xs[idx[j + 1]] == xs[idx[i]] {
            j += 1;
        }
        let avg = (i + j) as f64 / 2.0 + 1.0;
        for &k in &idx[i..=j] {
            ranks[k] = avg;
        }
        i = j + 1;
    }
    ranks
}

fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Unbiased sample variance.
fn variance(xs: &[f64]) -> f64 {
    let m = mean(xs);
    xs.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / (xs.len() as f64 - 1.0)
}

/// Spearman's ρ (Pearson correlation of average ranks) with a two-sided
/// p-value from `t = ρ·√((n − 2) / (1 − ρ²))` on `n − 2` degrees of freedom.
pub fn spearman(x: &[f64], y: &[f64]) -> Result<TestOutcome> {
    if x.len() != y.len() {
        return Err(Error::Input(format!(
            "spearman needs equal lengths, got {} and {}",
            x.len(),
            y.len()
        )));
    }
    if x.len() < 3 {
        return Err(Error::Input(format!(
            "spearman needs at least 3 pairs, got {}",
            x.len()
        )));
    }
    check_finite(x, "x")?;
    check_finite(y, "y")?;
    let rx = average_ranks(x);
    let ry = average_ranks(y);
    let (mx, my) = (mean(&rx), mean(&ry));
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in rx.iter().zip(&ry) {
        let (da, db) = (a - mx, b - my);
        sxy += da * db;
        sxx += da * da;
        syy += db * db;
    }
    if sxx == 0.0 || syy == 0.0 {
        return Err(Error::DegenerateSample(
            "spearman: a sample has zero rank variance".into(),
        ));
    }
    let rho = (sxy / (sxx * syy).sqrt()).clamp(-1.0, 1.0);
    let n = x.len() as f64;
    let p = if rho.abs() >= 1.0 {
        0.0
    } else {
        let df = n - 2.0;
        let t = rho * (df / (1.0 - rho * rho)).sqrt();
        let dist = StudentsT::new(0.0, 1.0, df).expect("df > 0");
        (2.0 * dist.cdf(-t.abs())).clamp(0.0, 1.0)
    };
    Ok(TestOutcome {
        statistic: rho,
        p_value: Some(p),
        effect_label: None,
    })
}

/// `U` for sample `a`: the number of pairs with `a_i > b_j`, ties counting ½.
pub fn mann_whitney_u(a: &[f64], b: &[f64]) -> f64 {
    let mut joined = a.to_vec();
    joined.extend_from_slice(b);
    let ranks = average_ranks(&joined);
    let na = a.len() as f64;
    let rank_sum: f64 = ranks[..a.len()].iter().sum();
    rank_sum - na * (na + 1.0) / 2.0
}

/// Two-sided Wilcoxon rank-sum test. The statistic is `U` for `a`; the
/// p-value uses the tie-corrected normal approximation with a 0.5
/// continuity correction.
pub fn rank_sum_test(a: &[f64], b: &[f64]) -> Result<TestOutcome> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::Input("rank-sum test needs two non-empty groups".into()));
    }
    check_finite(a, "a")?;
    check_finite(b, "b")?;
    let u = mann_whitney_u(a, b);
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let n = na + nb;

    let mut joined = a.to_vec();
    joined.extend_from_slice(b);
    joined.sort_by(f64::total_cmp);
    let mut tie_term = 0.0;
    let mut i = 0;
    while i < joined.len() {
        let mut j = i;
        while j + 1 < joined.len() && joined[j + 1] == joined[i] {
            j += 1;
        }
        let t = (j - i + 1) as f64;
        tie_term += t * t * t - t;
        i = j + 1;
    }
    let mu = na * nb / 2.0;
    let var = if n > 1.0 {
        na * nb / 12.0 * ((n + 1.0) - tie_term / (n * (n - 1.0)))
    } else {
        0.0
    };
    let p = if var <= 0.0 {
        1.0
    } else {
        let z = ((u - mu).abs() - 0.5).max(0.0) / var.sqrt();
        let normal = Normal::standard();
        (2.0 * normal.cdf(-z)).clamp(0.0, 1.0)
    };
    Ok(TestOutcome {
        statistic: u,
        p_value: Some(p),
        effect_label: None,
    })
}

/// `(mean(a) − mean(b)) / s_pooled` with
/// `s_pooled² = ((n_a − 1)s_a² + (n_b − 1)s_b²) / (n_a + n_b − 2)`.
pub fn cohens_d(a: &[f64], b: &[f64]) -> Result<TestOutcome> {
    if a.len() < 2 || b.len() < 2 {
        return Err(Error::Input("cohen's d needs at least 2 values per group".into()));
    }
    check_finite(a, "a")?;
    check_finite(b, "b")?;
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let pooled = (((na - 1.0) * variance(a) + (nb - 1.0) * variance(b)) / (na + nb - 2.0)).sqrt();
    if pooled.is_nan() || pooled <= 0.0 {
        return Err(Error::DegenerateSample(
            "cohen's d: pooled standard deviation is zero".into(),
        ));
    }
    let d = (mean(a) - mean(b)) / pooled;
    Ok(TestOutcome {
        statistic: d,
        p_value: None,
        effect_label: Some(EffectLabel::from_d(d)),
    })
}
