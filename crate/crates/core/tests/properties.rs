mod support;

use proptest::prelude::*;

use steercov_core::coverage::{
    activated_set, activated_units, jaccard_distance, merge, neuron_coverage, ActivationThreshold,
    CoverageMap, NeuronId,
};
use steercov_core::imgproc::{apply, default_grid, Image, TransformKind, TransformSpec};
use steercov_core::nn::{dense, Activation, ActivationTrace, LayerKind, LayerOutput, Tensor};
use steercov_core::stats::{cohens_d, mann_whitney_u, rank_sum_test, spearman};

fn trace(layers: Vec<Vec<f32>>) -> ActivationTrace {
    ActivationTrace {
        fingerprint: 3,
        layers: layers
            .into_iter()
            .map(|v| LayerOutput {
                kind: LayerKind::Dense,
                output: Tensor::from_vec(v),
            })
            .collect(),
    }
}

fn coverage_map(total: usize) -> impl Strategy<Value = CoverageMap> {
    prop::collection::btree_set(0..total as u32, 0..=total).prop_map(move |units| CoverageMap {
        fingerprint: 3,
        total,
        activated: units.into_iter().map(|u| NeuronId::new(0, u as usize)).collect(),
    })
}

fn image() -> impl Strategy<Value = Image> {
    (1usize..10, 1usize..10, prop_oneof![Just(1usize), Just(3usize)]).prop_flat_map(|(h, w, c)| {
        prop::collection::vec(any::<u8>(), h * w * c)
            .prop_map(move |data| Image::new(h, w, c, data).unwrap())
    })
}

fn samples(len: std::ops::Range<usize>) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-100i32..100, len).prop_map(|v| v.into_iter().map(f64::from).collect())
}

proptest! {
    #[test]
    fn threshold_monotone(values in prop::collection::vec(-5.0f64..5.0, 1..20), a in 0.0f64..=1.0, b in 0.0f64..=1.0) {
        let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
        let at_lo = activated_units(&values, ActivationThreshold::new(lo).unwrap());
        let at_hi = activated_units(&values, ActivationThreshold::new(hi).unwrap());
        prop_assert!(at_hi.iter().all(|u| at_lo.contains(u)));
    }

    #[test]
    fn positive_affine_rescaling_keeps_activations(values in prop::collection::vec(-5.0f32..5.0, 1..16), scale in 0.5f32..4.0, shift in -3.0f32..3.0) {
        let t = ActivationThreshold::default();
        let base = activated_set(&trace(vec![values.clone()]), t);
        let moved: Vec<f32> = values.iter().map(|v| v * scale + shift).collect();
        let moved = activated_set(&trace(vec![moved]), t);
        // Rounding can move values sitting exactly on the threshold.
        prop_assume!(values.iter().all(|v| {
            let (lo, hi) = values.iter().fold((f32::MAX, f32::MIN), |(a, b), x| (a.min(*x), b.max(*x)));
            hi == lo || (((v - lo) / (hi - lo)) as f64 - 0.2).abs() > 1e-4
        }));
        prop_assert_eq!(base, moved);
    }

    #[test]
    fn merge_is_monotone(a in coverage_map(12), b in coverage_map(12)) {
        let m = merge(&a, &b).unwrap();
        prop_assert!(a.activated.is_subset(&m.activated));
        prop_assert!(b.activated.is_subset(&m.activated));
        prop_assert!(neuron_coverage(&m).unwrap() >= neuron_coverage(&a).unwrap());
        prop_assert_eq!(&merge(&m, &b).unwrap(), &m);
        prop_assert_eq!(m, merge(&b, &a).unwrap());
    }

    #[test]
    fn jaccard_is_a_metric(a in coverage_map(10), b in coverage_map(10), c in coverage_map(10)) {
        let d = |x: &CoverageMap, y: &CoverageMap| jaccard_distance(x, y).unwrap();
        prop_assert_eq!(d(&a, &a), 0.0);
        prop_assert_eq!(d(&a, &b), d(&b, &a));
        prop_assert!((0.0..=1.0).contains(&d(&a, &b)));
        prop_assert!(d(&a, &c) <= d(&a, &b) + d(&b, &c) + 1e-12);
    }

    #[test]
    fn linear_dense_is_linear(x in prop::collection::vec(-2.0f32..2.0, 4), k in prop::collection::vec(-2.0f32..2.0, 12), alpha in -3.0f32..3.0) {
        let kt = Tensor::new(vec![3, 4], k).unwrap();
        let zero = [0.0f32; 3];
        let y = dense(&Tensor::from_vec(x.clone()), &kt, &zero, Activation::Linear).unwrap();
        let scaled: Vec<f32> = x.iter().map(|v| v * alpha).collect();
        let ys = dense(&Tensor::from_vec(scaled), &kt, &zero, Activation::Linear).unwrap();
        for (a, b) in y.data().iter().zip(ys.data()) {
            prop_assert!((a * alpha - b).abs() <= 1e-4 * (1.0 + b.abs()));
        }
    }

    #[test]
    fn transforms_are_pure_and_shape_preserving(img in image(), kind in 0usize..9, step in 0usize..10) {
        let kind = TransformKind::ALL[kind];
        let grid = default_grid(kind);
        let spec = grid[step % grid.len()];
        let before = img.clone();
        let a = apply(&img, &spec).unwrap();
        let b = apply(&img, &spec).unwrap();
        prop_assert_eq!(&img, &before);
        prop_assert_eq!(&a, &b);
        prop_assert_eq!((a.height(), a.width(), a.channels()), (img.height(), img.width(), img.channels()));
    }

    #[test]
    fn identity_parameters_are_no_ops(img in image(), kind in 0usize..9) {
        let spec = TransformSpec::identity(TransformKind::ALL[kind]);
        prop_assert_eq!(apply(&img, &spec).unwrap(), img);
    }

    #[test]
    fn spearman_symmetric_and_rank_invariant(x in samples(3..30), y in samples(3..30)) {
        let n = x.len().min(y.len());
        let (x, y) = (&x[..n], &y[..n]);
        if let (Ok(a), Ok(b)) = (spearman(x, y), spearman(y, x)) {
            prop_assert!((a.statistic - b.statistic).abs() < 1e-12);
            let cubed: Vec<f64> = x.iter().map(|v| v * v * v + 7.0).collect();
            let c = spearman(&cubed, y).unwrap();
            prop_assert!((a.statistic - c.statistic).abs() < 1e-12);
            let p = a.p_value.unwrap();
            prop_assert!((0.0..=1.0).contains(&p));
        }
    }

    #[test]
    fn rank_sum_shift_invariant(a in samples(1..20), b in samples(1..20), shift in -50i32..50) {
        let s = f64::from(shift);
        let r = rank_sum_test(&a, &b).unwrap();
        let a2: Vec<f64> = a.iter().map(|v| v + s).collect();
        let b2: Vec<f64> = b.iter().map(|v| v + s).collect();
        let r2 = rank_sum_test(&a2, &b2).unwrap();
        prop_assert_eq!(r.statistic, r2.statistic);
        prop_assert_eq!(r.p_value, r2.p_value);
        prop_assert!((0.0..=1.0).contains(&r.p_value.unwrap()));
    }

    #[test]
    fn u_counts_pairs(a in samples(1..9), b in samples(1..9)) {
        let brute: f64 = a.iter()
            .flat_map(|x| b.iter().map(move |y| if x > y { 1.0 } else if x == y { 0.5 } else { 0.0 }))
            .sum();
        prop_assert_eq!(mann_whitney_u(&a, &b), brute);
    }

    #[test]
    fn cohens_d_antisymmetric_and_scale_free(a in samples(2..15), b in samples(2..15), k in 1u32..20) {
        if let Ok(d) = cohens_d(&a, &b) {
            let back = cohens_d(&b, &a).unwrap();
            prop_assert!((d.statistic + back.statistic).abs() < 1e-12);
            let f = f64::from(k) / 3.0;
            let sa: Vec<f64> = a.iter().map(|v| v * f).collect();
            let sb: Vec<f64> = b.iter().map(|v| v * f).collect();
            let scaled = cohens_d(&sa, &sb).unwrap();
            prop_assert!((d.statistic - scaled.statistic).abs() < 1e-9 * (1.0 + d.statistic.abs()));
        }
    }
}
