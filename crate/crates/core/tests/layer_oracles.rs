mod support;

use steercov_core::coverage::{
    activated_set, jaccard_distance, merge, neuron_coverage, ActivationThreshold, NeuronId,
};
use steercov_core::nn::{
    conv2d, dense, generator, lstm_forward, Activation, LstmWeights, Network, Padding, Tensor,
};
use steercov_core::rng::SplitMix64;

const ACTS: [Activation; 4] = [
    Activation::Linear,
    Activation::Relu,
    Activation::Tanh,
    Activation::Sigmoid,
];

fn vals(rng: &mut SplitMix64, n: usize) -> Vec<f32> {
    (0..n).map(|_| rng.uniform(-1.0, 1.0) as f32).collect()
}

#[test]
fn conv_matches_reference() {
    let mut rng = SplitMix64::new(11);
    for case in 0..100 {
        let (h, w) = (1 + rng.below(7), 1 + rng.below(7));
        let (cin, cout) = (1 + rng.below(3), 1 + rng.below(3));
        let (kh, kw) = (1 + rng.below(h.min(4)), 1 + rng.below(w.min(4)));
        let stride = 1 + rng.below(3);
        let padding = if rng.below(2) == 0 { Padding::Valid } else { Padding::Same };
        let act = ACTS[rng.below(4)];
        let x = vals(&mut rng, h * w * cin);
        let k = vals(&mut rng, cout * cin * kh * kw);
        let b = vals(&mut rng, cout);

        let got = conv2d(
            &Tensor::new(vec![h, w, cin], x.clone()).unwrap(),
            &Tensor::new(vec![cout, cin, kh, kw], k.clone()).unwrap(),
            &b,
            stride,
            padding,
            act,
        )
        .unwrap();

        let xin: Vec<Vec<Vec<f64>>> = (0..h)
            .map(|y| (0..w).map(|xx| (0..cin).map(|c| x[(y * w + xx) * cin + c] as f64).collect()).collect())
            .collect();
        let kern: Vec<Vec<Vec<Vec<f64>>>> = (0..cout)
            .map(|co| {
                (0..cin)
                    .map(|ci| {
                        (0..kh)
                            .map(|ky| (0..kw).map(|kx| k[((co * cin + ci) * kh + ky) * kw + kx] as f64).collect())
                            .collect()
                    })
                    .collect()
            })
            .collect();
        let bias: Vec<f64> = b.iter().map(|&v| v as f64).collect();
        let want = support::conv2d(&xin, &kern, &bias, stride, padding, act);
        let flat: Vec<f64> = want.iter().flatten().flatten().copied().collect();
        assert_eq!(got.shape(), &[want.len(), want[0].len(), cout], "case {case}");
        for (g, e) in got.data().iter().zip(&flat) {
            assert!(support::close(*g as f64, *e, 1e-6), "case {case}: {g} vs {e}");
        }
    }
}

#[test]
fn dense_matches_reference() {
    let mut rng = SplitMix64::new(12);
    for _ in 0..100 {
        let (n_in, n_out) = (1 + rng.below(12), 1 + rng.below(6));
        let act = ACTS[rng.below(4)];
        let x = vals(&mut rng, n_in);
        let k = vals(&mut rng, n_out * n_in);
        let b = vals(&mut rng, n_out);
        let got = dense(
            &Tensor::from_vec(x.clone()),
            &Tensor::new(vec![n_out, n_in], k.clone()).unwrap(),
            &b,
            act,
        )
        .unwrap();
        let kern: Vec<Vec<f64>> = k.chunks(n_in).map(|r| r.iter().map(|&v| v as f64).collect()).collect();
        let xs: Vec<f64> = x.iter().map(|&v| v as f64).collect();
        let bs: Vec<f64> = b.iter().map(|&v| v as f64).collect();
        let want = support::dense(&xs, &kern, &bs, act);
        for (g, e) in got.data().iter().zip(&want) {
            assert!(support::close(*g as f64, *e, 1e-6));
        }
    }
}

#[test]
fn lstm_matches_reference() {
    let mut rng = SplitMix64::new(13);
    for _ in 0..100 {
        let (t, d, hdim) = (1 + rng.below(5), 1 + rng.below(4), 1 + rng.below(4));
        let wk = vals(&mut rng, 4 * hdim * d);
        let uk = vals(&mut rng, 4 * hdim * hdim);
        let b = vals(&mut rng, 4 * hdim);
        let x = vals(&mut rng, t * d);
        let wt = Tensor::new(vec![4 * hdim, d], wk.clone()).unwrap();
        let ut = Tensor::new(vec![4 * hdim, hdim], uk.clone()).unwrap();
        let got = lstm_forward(
            LstmWeights {
                input_kernel: &wt,
                recurrent_kernel: &ut,
                bias: &b,
            },
            t,
            &Tensor::new(vec![t, d], x.clone()).unwrap(),
        )
        .unwrap();
        let rows = |m: &[f32], cols: usize, g: usize| -> Vec<Vec<f64>> {
            (0..hdim)
                .map(|j| (0..cols).map(|c| m[(g * hdim + j) * cols + c] as f64).collect())
                .collect()
        };
        let gates = [0, 1, 2, 3].map(|g| support::Gate {
            w: rows(&wk, d, g),
            u: rows(&uk, hdim, g),
            b: (0..hdim).map(|j| b[g * hdim + j] as f64).collect(),
        });
        let xs: Vec<Vec<f64>> = x.chunks(d).map(|r| r.iter().map(|&v| v as f64).collect()).collect();
        let want: Vec<f64> = support::lstm(&gates, &xs).into_iter().flatten().collect();
        assert_eq!(got.shape(), &[t, hdim]);
        for (g, e) in got.data().iter().zip(&want) {
            assert!(support::close(*g as f64, *e, 1e-6));
        }
    }
}

#[test]
fn hand_computed_coverage() {
    let m = support::three_layer_model();
    let t = ActivationThreshold::default();
    let run = |x: [f32; 2]| {
        let (_, trace) = m.forward(&Tensor::from_vec(x.to_vec())).unwrap();
        activated_set(&trace, t)
    };
    let a = run([1.0, 0.5]);
    let zero = run([0.0, 0.0]);
    let c = run([0.1, 1.0]);
    assert_eq!(m.total_neurons(), 6);
    assert_eq!(
        a.activated.iter().copied().collect::<Vec<_>>(),
        vec![NeuronId::new(0, 0), NeuronId::new(0, 1), NeuronId::new(1, 0)]
    );
    assert_eq!(neuron_coverage(&a).unwrap(), 0.5);
    assert!(zero.is_empty());
    assert_eq!(
        c.activated.iter().copied().collect::<Vec<_>>(),
        vec![NeuronId::new(0, 1), NeuronId::new(1, 1)]
    );
    assert_eq!(neuron_coverage(&merge(&a, &c).unwrap()).unwrap(), 4.0 / 6.0);
    assert_eq!(jaccard_distance(&a, &c).unwrap(), 0.75);
}

#[test]
fn generated_models_run_end_to_end() {
    let cnn = generator::steering_cnn("cnn", [24, 32, 3], 5).unwrap();
    let lstm = generator::steering_lstm("lstm", [24, 32, 3], 5, 5).unwrap();
    let x = Tensor::new(vec![24, 32, 3], vec![0.5; 24 * 32 * 3]).unwrap();
    for net in [&cnn, &lstm] {
        let (y, trace) = net.forward(&x).unwrap();
        assert!((-1.0..=1.0).contains(&y));
        assert_eq!(trace.neuron_count(), net.total_neurons());
    }
}
