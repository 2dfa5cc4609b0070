//! Reference implementations used to check the engine. They rely only on
//! public forward passes and plain loops.

#![allow(dead_code)]

use adaptq::nn::{Activation, Mlp};
use ndarray::Array2;
use rand::Rng;

/// Central finite-difference gradient of `sum(forward(inputs) * probe)` with
/// respect to every parameter, in `Mlp::params` order.
pub fn fd_gradient(net: &Mlp, inputs: &Array2<f64>, probe: &Array2<f64>, eps: f64) -> Vec<f64> {
    let base = net.params();
    let mut work = net.clone();
    let objective = |n: &Mlp| -> f64 {
        let out = n.forward_batch(inputs.view()).expect("forward");
        (&out * probe).sum()
    };
    (0..base.len())
        .map(|i| {
            let mut p = base.clone();
            p[i] = base[i] + eps;
            work.set_params(&p).unwrap();
            let up = objective(&work);
            p[i] = base[i] - eps;
            work.set_params(&p).unwrap();
            let down = objective(&work);
            (up - down) / (2.0 * eps)
        })
        .collect()
}

/// `|a - b| / max(|a|, |b|, floor)`.
pub fn relative_error(a: f64, b: f64, floor: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(floor)
}

/// O(n^2) AUC: the share of (positive, negative) pairs ranked correctly,
/// ties counting one half.
pub fn brute_force_auc(scores: &[f64], positive: &[bool]) -> f64 {
    let mut twice_wins: u64 = 0;
    let mut pairs: u64 = 0;
    for (i, &si) in scores.iter().enumerate() {
        if !positive[i] {
            continue;
        }
        for (j, &sj) in scores.iter().enumerate() {
            if positive[j] {
                continue;
            }
            pairs += 1;
            twice_wins += if si > sj {
                2
            } else if si == sj {
                1
            } else {
                0
            };
        }
    }
    twice_wins as f64 / (2 * pairs) as f64
}

pub fn sigmoid(z: f64) -> f64 {
    1.0 / (1.0 + (-z).exp())
}

const ACTIVATIONS: [Activation; 5] = [
    Activation::Relu,
    Activation::Prelu,
    Activation::Sigmoid,
    Activation::Identity,
    Activation::Softmax,
];

/// Random small network with every parameter (biases and slopes included)
/// drawn uniformly from `[-1, 1)`. Softmax only appears as the last layer.
pub fn random_net<R: Rng>(rng: &mut R) -> Mlp {
    let depth = rng.gen_range(1..=3);
    let sizes: Vec<usize> = (0..=depth).map(|_| rng.gen_range(1..=6)).collect();
    let acts: Vec<Activation> = (0..depth)
        .map(|l| {
            let pool = if l + 1 == depth {
                &ACTIVATIONS[..]
            } else {
                &ACTIVATIONS[..4]
            };
            pool[rng.gen_range(0..pool.len())]
        })
        .collect();
    let mut net = Mlp::new(&sizes, &acts, rng).unwrap();
    let params: Vec<f64> = (0..net.param_count())
        .map(|_| rng.gen_range(-1.0..1.0))
        .collect();
    net.set_params(&params).unwrap();
    net
}

/// Largest relative error between backpropagated and finite-difference
/// gradients over `n_nets` random networks.
pub fn worst_gradient_error<R: Rng>(rng: &mut R, n_nets: usize) -> f64 {
    let mut worst: f64 = 0.0;
    for _ in 0..n_nets {
        let net = random_net(rng);
        let batch = rng.gen_range(1..=4);
        let inputs = Array2::from_shape_fn((batch, net.input_dim()), |_| rng.gen_range(-2.0..2.0));
        let probe = Array2::from_shape_fn((batch, net.output_dim()), |_| rng.gen_range(-1.0..1.0));
        let tape = net.forward_tape(inputs.view()).unwrap();
        let analytic = net.backward(&tape, probe.view()).unwrap().flatten(&net);
        let numeric = fd_gradient(&net, &inputs, &probe, 1e-6);
        for (a, n) in analytic.iter().zip(&numeric) {
            worst = worst.max(relative_error(*a, *n, 1e-6));
        }
    }
    worst
}
