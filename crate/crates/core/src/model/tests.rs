use std::collections::BTreeSet;

use proptest::prelude::*;

use super::*;
use crate::linalg::RngStream;

fn random_tensor(rng: &mut RngStream, shape: &[usize]) -> Tensor {
    let n = shape.iter().product();
    Tensor::new(shape.to_vec(), (0..n).map(|_| rng.uniform_range(-1.0, 1.0)).collect()).unwrap()
}

fn one_hot(labels: &[usize], classes: usize) -> Tensor {
    let mut t = Tensor::zeros(&[labels.len(), classes]);
    for (r, &l) in labels.iter().enumerate() {
        t.data_mut()[r * classes + l] = 1.0;
    }
    t
}

fn tanh_softmax(sizes: &[usize], seed: u64) -> Network {
    let mut rng = RngStream::new(seed, 0);
    let mut acts = vec![Activation::Tanh; sizes.len() - 2];
    acts.push(Activation::Softmax);
    Network::mlp(sizes, &acts, LossKind::CrossEntropy, &mut rng).unwrap()
}

/// Central differences of the uncounted loss, one coordinate at a time.
fn finite_difference(net: &Network, x: &Tensor, y: &Tensor, eps: f64) -> Vec<f64> {
    let base = net.flat_params();
    let mut probe = net.clone();
    (0..base.len())
        .map(|i| {
            let mut p = base.clone();
            p[i] = base[i] + eps;
            probe.set_flat_params(&p).unwrap();
            let up = probe.loss_eval(x, y).unwrap();
            p[i] = base[i] - eps;
            probe.set_flat_params(&p).unwrap();
            let down = probe.loss_eval(x, y).unwrap();
            (up - down) / (2.0 * eps)
        })
        .collect()
}

fn flatten(net: &Network, grads: &Gradients) -> Vec<f64> {
    net.param_ids()
        .iter()
        .flat_map(|id| grads[id].data().to_vec())
        .collect()
}

fn assert_gradcheck(net: &mut Network, x: &Tensor, y: &Tensor) {
    net.forward(x).unwrap();
    let grads = net.backward_full(y).unwrap();
    let analytic = flatten(net, &grads);
    let numeric = finite_difference(net, x, y, 1e-5);
    let mut worst = 0.0f64;
    for (i, (a, n)) in analytic.iter().zip(&numeric).enumerate() {
        let err = (a - n).abs() / (1.0 + a.abs());
        assert!(err <= 1e-5, "coordinate {i}: analytic {a} vs numeric {n}");
        worst = worst.max(err);
    }
    let report = gradient_check(net, x, y, 1e-5).unwrap();
    assert_eq!(report.coordinates, analytic.len());
    assert!(report.passed);
    assert!((report.max_rel_error - worst).abs() <= 1e-15);
}

#[test]
fn zero_net_gives_zero_preactivations() {
    let mut rng = RngStream::new(0, 0);
    let mut layer = Layer::dense(3, 2, true, Activation::Identity, &mut rng);
    layer.weight_mut().data_mut().fill(0.0);
    layer.bias_mut().unwrap().data_mut().fill(0.0);
    let mut net = Network::new(vec![layer], LossKind::MeanSquaredError).unwrap();
    let out = net.forward(&random_tensor(&mut rng, &[4, 3])).unwrap();
    assert!(out.data().iter().all(|&v| v == 0.0));
}

#[test]
fn identity_net_passes_input_through() {
    let mut rng = RngStream::new(0, 0);
    let mut layer = Layer::dense(3, 3, true, Activation::Identity, &mut rng);
    *layer.weight_mut() = Tensor::identity(3);
    layer.bias_mut().unwrap().data_mut().fill(0.0);
    let mut net = Network::new(vec![layer], LossKind::MeanSquaredError).unwrap();
    let x = random_tensor(&mut rng, &[5, 3]);
    assert_eq!(net.forward(&x).unwrap(), x);
}

#[test]
fn forward_matches_straight_line_evaluator() {
    let mut net = tanh_softmax(&[4, 6, 3], 11);
    let mut rng = RngStream::new(12, 0);
    let x = random_tensor(&mut rng, &[7, 4]);
    let out = net.forward(&x).unwrap();

    let (w0, b0) = (net.layers()[0].weight(), net.layers()[0].bias().unwrap());
    let (w1, b1) = (net.layers()[1].weight(), net.layers()[1].bias().unwrap());
    for s in 0..7 {
        let xs = x.row(s);
        let hidden: Vec<f64> = (0..6)
            .map(|j| {
                let mut z = b0.data()[j];
                for i in 0..4 {
                    z += w0.get(j, i) * xs[i];
                }
                z.tanh()
            })
            .collect();
        let logits: Vec<f64> = (0..3)
            .map(|c| {
                let mut z = b1.data()[c];
                for j in 0..6 {
                    z += w1.get(c, j) * hidden[j];
                }
                z
            })
            .collect();
        let norm: f64 = logits.iter().map(|z| z.exp()).sum();
        for c in 0..3 {
            let expected = logits[c].exp() / norm;
            assert!((out.get(s, c) - expected).abs() <= 1e-12, "sample {s} class {c}");
        }
    }
}

#[test]
fn forward_rejects_wrong_width() {
    let mut net = tanh_softmax(&[4, 6, 3], 1);
    assert!(matches!(net.forward(&Tensor::zeros(&[2, 5])), Err(crate::Error::Shape(_))));
}

#[test]
fn backward_without_forward_is_state_error() {
    let mut net = tanh_softmax(&[4, 6, 3], 1);
    let err = net.backward_full(&Tensor::zeros(&[2, 3])).unwrap_err();
    assert!(matches!(err, crate::Error::State(_)));
}

#[test]
fn gradcheck_2_16_3() {
    let mut net = tanh_softmax(&[2, 16, 3], 5);
    let mut rng = RngStream::new(6, 0);
    let x = random_tensor(&mut rng, &[8, 2]);
    let y = one_hot(&[0, 1, 2, 0, 1, 2, 2, 1], 3);
    assert_gradcheck(&mut net, &x, &y);
}

#[test]
fn gradcheck_relu_mse() {
    let mut rng = RngStream::new(7, 0);
    let net = Network::mlp(
        &[3, 5, 4, 2],
        &[Activation::Relu, Activation::Tanh, Activation::Identity],
        LossKind::MeanSquaredError,
        &mut rng,
    );
    let mut net = net.unwrap();
    let x = random_tensor(&mut rng, &[6, 3]);
    let y = random_tensor(&mut rng, &[6, 2]);
    assert_gradcheck(&mut net, &x, &y);
}

#[test]
fn gradcheck_conv() {
    let mut rng = RngStream::new(8, 0);
    let c0 = Layer::conv(2, 3, 5, 5, 3, true, Activation::Tanh, &mut rng).unwrap();
    let c1 = Layer::conv(3, 2, 3, 3, 2, true, Activation::Relu, &mut rng).unwrap();
    let fc = Layer::dense(c1.output_dim(), 3, true, Activation::Softmax, &mut rng);
    let mut net = Network::new(vec![c0, c1, fc], LossKind::CrossEntropy).unwrap();
    let x = random_tensor(&mut rng, &[4, 50]);
    let y = one_hot(&[0, 2, 1, 1], 3);
    assert_gradcheck(&mut net, &x, &y);
}

#[test]
fn conv_matches_direct_convolution() {
    let mut rng = RngStream::new(9, 0);
    let layer = Layer::conv(2, 1, 4, 4, 3, false, Activation::Identity, &mut rng).unwrap();
    let w = layer.weight().clone();
    let mut net = Network::new(vec![layer], LossKind::MeanSquaredError).unwrap();
    let x = random_tensor(&mut rng, &[1, 32]);
    let out = net.forward(&x).unwrap();
    for oy in 0..2 {
        for ox in 0..2 {
            let mut z = 0.0;
            for c in 0..2 {
                for ky in 0..3 {
                    for kx in 0..3 {
                        z += w.get(0, c * 9 + ky * 3 + kx) * x.data()[c * 16 + (oy + ky) * 4 + ox + kx];
                    }
                }
            }
            assert!((out.get(0, oy * 2 + ox) - z).abs() < 1e-12);
        }
    }
}

#[test]
fn critical_point_has_zero_gradient() {
    // f(w) = ½(w·1 − 2)², minimized at w = 2
    let mut rng = RngStream::new(0, 0);
    let mut layer = Layer::dense(1, 1, false, Activation::Identity, &mut rng);
    layer.weight_mut().data_mut()[0] = 2.0;
    let mut net = Network::new(vec![layer], LossKind::MeanSquaredError).unwrap();
    net.forward(&Tensor::filled(&[1, 1], 1.0)).unwrap();
    let g = net.backward_full(&Tensor::filled(&[1, 1], 2.0)).unwrap();
    assert_eq!(g[&ParamId::weight(0)].data(), &[0.0]);
}

#[test]
fn mse_linear_closed_form() {
    let mut rng = RngStream::new(3, 0);
    let mut net = Network::new(
        vec![Layer::dense(3, 2, true, Activation::Identity, &mut rng)],
        LossKind::MeanSquaredError,
    )
    .unwrap();
    let x = Tensor::from_rows(&[vec![0.5, -1.0, 2.0]]).unwrap();
    let y = Tensor::from_rows(&[vec![1.0, -0.5]]).unwrap();
    net.forward(&x).unwrap();
    let g = net.backward_full(&y).unwrap();
    let (w, b) = (net.layers()[0].weight(), net.layers()[0].bias().unwrap());
    for r in 0..2 {
        let resid = (0..3).map(|c| w.get(r, c) * x.data()[c]).sum::<f64>() + b.data()[r] - y.data()[r];
        for c in 0..3 {
            assert!((g[&ParamId::weight(0)].get(r, c) - resid * x.data()[c]).abs() < 1e-14);
        }
        assert!((g[&ParamId::bias(0)].data()[r] - resid).abs() < 1e-14);
    }
}

#[test]
fn truncated_last_layer_of_four() {
    let mut net = tanh_softmax(&[3, 5, 5, 5, 2], 21);
    let mut rng = RngStream::new(22, 0);
    let x = random_tensor(&mut rng, &[6, 3]);
    let y = one_hot(&[0, 1, 1, 0, 1, 0], 2);

    net.forward(&x).unwrap();
    let before = net.counters.backward_layer_visits;
    let full = net.backward_full(&y).unwrap();
    assert_eq!(net.counters.backward_layer_visits - before, 4);

    net.forward(&x).unwrap();
    let before = net.counters.backward_layer_visits;
    let part = net.backward_truncated(&y, &BTreeSet::from([3])).unwrap();
    assert_eq!(net.counters.backward_layer_visits - before, 1);
    assert_eq!(part.len(), 2);
    for (id, g) in &part {
        assert_eq!(id.layer, 3);
        assert_eq!(g, &full[id], "{id} differs");
    }
}

#[test]
fn truncated_all_layers_equals_full() {
    let mut net = tanh_softmax(&[3, 4, 2], 2);
    let x = random_tensor(&mut RngStream::new(1, 0), &[3, 3]);
    let y = one_hot(&[0, 1, 1], 2);
    net.forward(&x).unwrap();
    let full = net.backward_full(&y).unwrap();
    let all = net.backward_truncated(&y, &BTreeSet::from([0, 1])).unwrap();
    assert_eq!(full, all);
}

#[test]
fn truncated_empty_set() {
    let mut net = tanh_softmax(&[3, 4, 2], 2);
    let x = random_tensor(&mut RngStream::new(1, 0), &[3, 3]);
    net.forward(&x).unwrap();
    let before = net.counters.backward_layer_visits;
    let g = net.backward_truncated(&one_hot(&[0, 1, 1], 2), &BTreeSet::new()).unwrap();
    assert!(g.is_empty());
    assert_eq!(net.counters.backward_layer_visits, before);
}

#[test]
fn truncated_rejects_non_suffix() {
    let mut net = tanh_softmax(&[3, 4, 4, 2], 2);
    let x = random_tensor(&mut RngStream::new(1, 0), &[3, 3]);
    net.forward(&x).unwrap();
    let y = one_hot(&[0, 1, 1], 2);
    for bad in [BTreeSet::from([0]), BTreeSet::from([0, 2]), BTreeSet::from([1]), BTreeSet::from([5])] {
        let err = net.backward_truncated(&y, &bad).unwrap_err();
        assert!(matches!(err, crate::Error::Contract(_)), "{bad:?}");
    }
}

#[test]
fn forward_counts_one_visit_per_layer() {
    let mut net = tanh_softmax(&[3, 4, 4, 2], 2);
    let x = random_tensor(&mut RngStream::new(1, 0), &[3, 3]);
    net.forward(&x).unwrap();
    net.forward(&x).unwrap();
    assert_eq!(net.counters.forward_layer_visits, 6);
    assert!(net.counters.flops > 0);
    let before = net.counters;
    net.predict(&x).unwrap();
    assert_eq!(net.counters, before);
}

#[test]
fn cross_entropy_limits() {
    let perfect = one_hot(&[1, 0], 3);
    assert!(LossKind::CrossEntropy.value(&perfect, &perfect).unwrap() <= 1e-9);
    let uniform = Tensor::filled(&[2, 4], 0.25);
    let v = LossKind::CrossEntropy.value(&uniform, &one_hot(&[3, 0], 4)).unwrap();
    assert!((v - 4f64.ln()).abs() < 1e-12);
    // a hard zero is clamped to the floor instead of producing infinity
    let wrong = one_hot(&[0], 2);
    let v = LossKind::CrossEntropy.value(&wrong, &one_hot(&[1], 2)).unwrap();
    assert!((v + PROB_FLOOR.ln()).abs() < 1e-9);
}

#[test]
fn mse_zero_net_on_unit_targets() {
    let zeros = Tensor::zeros(&[5, 2]);
    let ones = Tensor::filled(&[5, 2], 1.0);
    assert_eq!(LossKind::MeanSquaredError.value(&zeros, &ones).unwrap(), 1.0);
}

#[test]
fn composition_is_validated() {
    let mut rng = RngStream::new(0, 0);
    let a = Layer::dense(3, 4, true, Activation::Tanh, &mut rng);
    let b = Layer::dense(5, 2, true, Activation::Softmax, &mut rng);
    assert!(Network::new(vec![a.clone(), b], LossKind::CrossEntropy).is_err());
    let soft = Layer::dense(3, 4, true, Activation::Softmax, &mut rng);
    let out = Layer::dense(4, 2, true, Activation::Softmax, &mut rng);
    assert!(Network::new(vec![soft, out.clone()], LossKind::CrossEntropy).is_err());
    assert!(Network::new(vec![a.clone(), out], LossKind::MeanSquaredError).is_err());
    let lin = Layer::dense(4, 2, true, Activation::Identity, &mut rng);
    assert!(Network::new(vec![a, lin], LossKind::CrossEntropy).is_err());
}

#[test]
fn registry_lists_each_block_once() {
    let mut rng = RngStream::new(0, 0);
    let layers = vec![
        Layer::dense(3, 4, false, Activation::Tanh, &mut rng),
        Layer::dense(4, 2, true, Activation::Softmax, &mut rng),
    ];
    let net = Network::new(layers, LossKind::CrossEntropy).unwrap();
    assert_eq!(net.param_ids(), vec![ParamId::weight(0), ParamId::weight(1), ParamId::bias(1)]);
    assert_eq!(net.num_params(), 12 + 8 + 2);
}

#[test]
fn model_spec_builds_conv_stack() {
    let spec: ModelSpec = serde_json::from_str(
        r#"{"layers":[{"type":"conv","out_channels":4,"kernel":3,"activation":"relu"},
                      {"type":"dense","outputs":2,"activation":"softmax"}],
            "loss":"cross_entropy"}"#,
    )
    .unwrap();
    let net = spec.build(36, Some((1, 6, 6)), &mut RngStream::new(0, 0)).unwrap();
    assert_eq!(net.layers()[0].output_dim(), 4 * 16);
    assert!(spec.build(36, None, &mut RngStream::new(0, 0)).is_err());
}

#[test]
fn checkpoint_round_trip_is_lossless() {
    let mut net = tanh_softmax(&[3, 7, 2], 31);
    net.forward(&Tensor::filled(&[1, 3], 0.3)).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("net.json");
    Checkpoint::new(net.clone(), None, None).save(&path).unwrap();
    let back = Checkpoint::load(&path).unwrap();
    assert_eq!(back.network, net);
    assert_eq!(back.network.flat_params(), net.flat_params());
    assert_eq!(back.network.counters, net.counters);
}

#[test]
fn checkpoint_rejects_future_version() {
    let net = tanh_softmax(&[3, 7, 2], 31);
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("net.json");
    let mut ckpt = Checkpoint::new(net, None, None);
    ckpt.version = CHECKPOINT_VERSION + 1;
    ckpt.save(&path).unwrap();
    assert!(matches!(Checkpoint::load(&path), Err(crate::Error::Format { .. })));
}

#[test]
fn accuracy_counts_argmax_hits() {
    let out = Tensor::from_rows(&[vec![0.1, 0.9], vec![0.8, 0.2], vec![0.4, 0.6]]).unwrap();
    assert!((accuracy(&out, &[1, 0, 0]) - 2.0 / 3.0).abs() < 1e-15);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn gradients_match_finite_differences(seed in 0u64..10_000, hidden in 1usize..6, batch in 1usize..5) {
        let mut net = tanh_softmax(&[3, hidden, 3], seed);
        let mut rng = RngStream::new(seed, 1);
        let x = random_tensor(&mut rng, &[batch, 3]);
        let labels: Vec<usize> = (0..batch).map(|_| rng.below(3)).collect();
        assert_gradcheck(&mut net, &x, &one_hot(&labels, 3));
    }

    #[test]
    fn truncation_is_exact_on_every_suffix(seed in 0u64..10_000, first in 0usize..3) {
        let mut net = tanh_softmax(&[2, 4, 4, 3], seed);
        let mut rng = RngStream::new(seed, 1);
        let x = random_tensor(&mut rng, &[4, 2]);
        let y = one_hot(&[0, 1, 2, 0], 3);
        net.forward(&x).unwrap();
        let full = net.backward_full(&y).unwrap();
        net.forward(&x).unwrap();
        let before = net.counters.backward_layer_visits;
        let suffix: BTreeSet<usize> = (first..3).collect();
        let part = net.backward_truncated(&y, &suffix).unwrap();
        prop_assert_eq!(net.counters.backward_layer_visits - before, (3 - first) as u64);
        for (id, g) in &part {
            prop_assert_eq!(g, &full[id]);
        }
    }

    #[test]
    fn forward_is_deterministic(seed in 0u64..10_000) {
        let mut a = tanh_softmax(&[3, 5, 2], seed);
        let mut b = a.clone();
        let x = random_tensor(&mut RngStream::new(seed, 9), &[4, 3]);
        prop_assert_eq!(a.forward(&x).unwrap(), b.forward(&x).unwrap());
    }
}
