mod common;

use common::{all_spaces, random_element};
use proptest::prelude::*;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use tvsnet::activations::mollify;
use tvsnet::network::{
    numerical_gradient, relative_gradient_error, GradientMode, Optimizer, Parallelism,
};
use tvsnet::numeric::linspace;
use tvsnet::quadrature::GridSpec;
use tvsnet::spaces::Atom;
use tvsnet::{
    Activation, CompactSampler, Element, Error, Functional, NetActivation, Neuron, ShallowNetwork, SpaceDescriptor,
    TrainConfig,
};

fn neuron(space: &tvsnet::Space, c: f64, rep: Vec<f64>, theta: f64) -> Neuron {
    Neuron {
        coeff: c,
        functional: Functional::new(space.clone(), rep).unwrap(),
        threshold: theta,
    }
}

fn line_data(f: impl Fn(f64) -> f64, count: usize) -> Vec<(Element, f64)> {
    let space = SpaceDescriptor::euclidean(1).unwrap();
    linspace(-1.0, 1.0, count)
        .into_iter()
        .map(|t| (Element::new(space.clone(), vec![t]).unwrap(), f(t)))
        .collect()
}

fn sup_error(net: &ShallowNetwork, f: impl Fn(f64) -> f64) -> f64 {
    let space = net.space().clone();
    linspace(-1.0, 1.0, 2001)
        .into_iter()
        .map(|t| {
            let x = Element::new(space.clone(), vec![t]).unwrap();
            (net.forward(&x).unwrap() - f(t)).abs()
        })
        .fold(0.0, f64::max)
}

#[test]
fn forward_examples() {
    let space = SpaceDescriptor::euclidean(1).unwrap();
    let x = Element::new(space.clone(), vec![3.0]).unwrap();
    let relu = ShallowNetwork::new(space.clone(), Activation::Relu, vec![neuron(&space, 1.0, vec![1.0], 1.0)]).unwrap();
    assert_eq!(relu.forward(&x).unwrap(), 2.0);
    let tanh = ShallowNetwork::new(space.clone(), Activation::Tanh, vec![neuron(&space, 2.0, vec![0.0], 0.0)]).unwrap();
    assert_eq!(tanh.forward(&x).unwrap(), 0.0);

    let mut rng = ChaCha8Rng::seed_from_u64(31);
    for s in all_spaces() {
        let f = Functional::random_normal(s.clone(), &mut rng);
        let pair = vec![
            Neuron {
                coeff: 0.7,
                functional: f.clone(),
                threshold: 0.2,
            },
            Neuron {
                coeff: -0.7,
                functional: f,
                threshold: 0.2,
            },
        ];
        let net = ShallowNetwork::new(s.clone(), Activation::Sigmoid, pair).unwrap();
        for _ in 0..20 {
            assert_eq!(net.forward(&random_element(&s, &mut rng, 1.0)).unwrap(), 0.0);
        }
    }
}

#[test]
fn forward_rejects_foreign_elements_and_overflow() {
    let a = SpaceDescriptor::euclidean(2).unwrap();
    let b = SpaceDescriptor::euclidean(3).unwrap();
    let net = ShallowNetwork::init(a.clone(), Activation::Tanh, 3, 1, 1.0).unwrap();
    assert_eq!(net.forward(&Element::zeros(b)).unwrap_err().reason_code(), "space_mismatch");
    let exp = ShallowNetwork::new(a.clone(), Activation::Exp, vec![neuron(&a, 1.0, vec![1e3, 0.0], 0.0)]).unwrap();
    let x = Element::new(a, vec![1.0, 0.0]).unwrap();
    assert_eq!(exp.forward(&x).unwrap_err().reason_code(), "activation_overflow");
}

#[test]
fn init_is_deterministic_and_shaped() {
    let space = SpaceDescriptor::matrix(2, 2).unwrap();
    let a = ShallowNetwork::init(space.clone(), Activation::Tanh, 5, 9, 0.5).unwrap();
    let b = ShallowNetwork::init(space.clone(), Activation::Tanh, 5, 9, 0.5).unwrap();
    assert_eq!(a, b);
    assert_eq!(a.width(), 5);
    assert!(a.neurons().iter().all(|n| n.functional.rep().len() == 4));
    assert!(a.params().iter().all(|v| v.abs() <= 0.5));
    let zero = ShallowNetwork::init(space.clone(), Activation::Sigmoid, 4, 9, 0.0).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(32);
    for _ in 0..10 {
        assert_eq!(zero.forward(&random_element(&space, &mut rng, 1.0)).unwrap(), 0.0);
    }
    assert!(ShallowNetwork::init(space, Activation::Tanh, 0, 9, 1.0).is_err());
}

#[test]
fn zero_residual_gives_zero_gradients() {
    let mut rng = ChaCha8Rng::seed_from_u64(33);
    for space in all_spaces() {
        let net = ShallowNetwork::init(space.clone(), Activation::Tanh, 4, 3, 0.5).unwrap();
        let batch: Vec<(Element, f64)> = (0..16)
            .map(|_| {
                let x = random_element(&space, &mut rng, 1.0);
                let y = net.forward(&x).unwrap();
                (x, y)
            })
            .collect();
        let g = net.gradients(&batch, GradientMode::Smooth).unwrap();
        assert_eq!(g.loss, 0.0);
        assert!(g.flatten().iter().all(|v| *v == 0.0));
    }
}

#[test]
fn linear_neuron_gradient_matches_hand_formula() {
    let space = SpaceDescriptor::euclidean(3).unwrap();
    let identity = Activation::poly(vec![0.0, 1.0]).unwrap();
    let net = ShallowNetwork::new(space.clone(), identity, vec![neuron(&space, 1.5, vec![0.2, -0.4, 1.0], 0.3)]).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(34);
    let batch: Vec<(Element, f64)> = (0..10)
        .map(|_| (random_element(&space, &mut rng, 1.0), rng.random_range(-1.0..1.0)))
        .collect();
    let f = &net.neurons()[0].functional;
    let expected: f64 = batch
        .iter()
        .map(|(x, y)| {
            let z = f.pair(x).unwrap() - 0.3;
            2.0 * (net.forward(x).unwrap() - y) * z
        })
        .sum::<f64>()
        / batch.len() as f64;
    let g = net.gradients(&batch, GradientMode::Smooth).unwrap();
    assert!((g.coeffs[0] - expected).abs() < 1e-14);
}

#[test]
fn analytic_gradients_match_central_differences() {
    let smooth = [Activation::Tanh, Activation::Sigmoid, Activation::Sin, Activation::Exp];
    for space in all_spaces() {
        let sampler = CompactSampler::new(space.clone(), 1.0, 35).unwrap();
        for config in 0..10u64 {
            let sigma = smooth[config as usize % smooth.len()].clone();
            let mut rng = ChaCha8Rng::seed_from_u64(100 + config);
            let mut net = ShallowNetwork::init(space.clone(), sigma, 3, config, 0.5).unwrap();
            if space.kind().tag() == "c_fun" {
                let grid = space.grid().unwrap().spec;
                let mut neurons = net.neurons().to_vec();
                for n in &mut neurons {
                    let atoms = vec![Atom {
                        location: rng.random_range(grid.a..=grid.b),
                        weight: rng.random_range(-1.0..1.0),
                    }];
                    n.functional = Functional::with_atoms(space.clone(), n.functional.rep().to_vec(), atoms).unwrap();
                }
                net = ShallowNetwork::new(space.clone(), net.activation().clone(), neurons).unwrap();
            }
            let batch: Vec<(Element, f64)> = sampler
                .fork(config)
                .sample(8)
                .into_iter()
                .map(|x| (x, rng.random_range(-1.0..1.0)))
                .collect();
            let analytic = net.gradients(&batch, GradientMode::Smooth).unwrap().flatten();
            let numeric = numerical_gradient(&net, &batch, 1e-6).unwrap();
            let scale = analytic.iter().fold(0.0f64, |m, v| m.max(v.abs()));
            let floor = 1e-3 * scale;
            for (i, (a, n)) in analytic.iter().zip(&numeric).enumerate() {
                let err = relative_gradient_error(*a, *n, floor);
                assert!(err < 1e-5, "{space} config {config} coord {i}: {a} vs {n}");
            }
        }
    }
}

#[test]
fn relu_requires_mollification_or_subgradients() {
    let space = SpaceDescriptor::euclidean(2).unwrap();
    let net = ShallowNetwork::init(space.clone(), Activation::Relu, 3, 1, 1.0).unwrap();
    let batch = vec![(Element::new(space.clone(), vec![0.3, -0.2]).unwrap(), 1.0)];
    let err = net.gradients(&batch, GradientMode::Smooth).unwrap_err();
    assert_eq!(err.reason_code(), "non_smooth_activation");
    assert!(net.gradients(&batch, GradientMode::Subgradient).is_ok());
    let soft = mollify(&Activation::Relu, 0.1, 256).unwrap();
    let smooth = ShallowNetwork::new(space, soft, net.neurons().to_vec()).unwrap();
    assert!(smooth.gradients(&batch, GradientMode::Smooth).is_ok());
}

#[test]
fn self_target_stays_optimal() {
    let space = SpaceDescriptor::lp_seq(2.0, 6, 1.0).unwrap();
    let net = ShallowNetwork::init(space.clone(), Activation::Tanh, 5, 2, 0.8).unwrap();
    let data: Vec<(Element, f64)> = CompactSampler::new(space, 1.0, 3)
        .unwrap()
        .sample(64)
        .into_iter()
        .map(|x| {
            let y = net.forward(&x).unwrap();
            (x, y)
        })
        .collect();
    let out = net.train(&data, &TrainConfig { iterations: 200, ..TrainConfig::default() }).unwrap();
    assert_eq!(out.losses.len(), 201);
    assert!(out.losses.iter().all(|l| *l < 1e-20));
}

#[test]
fn tanh_learns_a_linear_target() {
    let space = SpaceDescriptor::euclidean(2).unwrap();
    let mut sampler = CompactSampler::new(space.clone(), 0.5, 4).unwrap();
    let data: Vec<(Element, f64)> = sampler
        .sample(128)
        .into_iter()
        .map(|x| {
            let y = 0.8 * x.coeffs()[0] - 0.3 * x.coeffs()[1];
            (x, y)
        })
        .collect();
    let net = ShallowNetwork::init(space, Activation::Tanh, 8, 5, 0.5).unwrap();
    let cfg = TrainConfig {
        learning_rate: 0.1,
        iterations: 5000,
        ..TrainConfig::default()
    };
    let out = net.train(&data, &cfg).unwrap();
    let last = *out.losses.last().unwrap();
    assert!(last < 1e-3, "final mse {last}");
    assert!(out.losses.iter().all(|l| l.is_finite()));
}

#[test]
fn quadratic_activation_cannot_fit_a_cubic() {
    let square = Activation::poly(vec![0.0, 0.0, 1.0]).unwrap();
    let space = SpaceDescriptor::euclidean(1).unwrap();
    let data = line_data(|t| t * t * t, 201);
    let net = ShallowNetwork::init(space, square, 64, 6, 0.3).unwrap();
    let cfg = TrainConfig {
        learning_rate: 0.002,
        iterations: 3000,
        optimizer: Optimizer::Momentum { beta: 0.9 },
        ..TrainConfig::default()
    };
    let out = net.train(&data, &cfg).unwrap();
    let err = sup_error(&out.network, |t| t * t * t);
    assert!(err >= 0.24, "sup error {err}");
    let tail = &out.losses[out.losses.len() - 100..];
    assert!(tail[0] - tail[tail.len() - 1] < 1e-3 * tail[0].max(1e-12) + 1e-9);
}

#[test]
fn divergence_is_reported_with_trace() {
    let space = SpaceDescriptor::euclidean(1).unwrap();
    let data = line_data(|t| 10.0 * t, 32);
    let net = ShallowNetwork::init(space, Activation::poly(vec![0.0, 0.0, 1.0]).unwrap(), 4, 1, 1.0).unwrap();
    let cfg = TrainConfig {
        learning_rate: 5.0,
        iterations: 500,
        ..TrainConfig::default()
    };
    match net.train(&data, &cfg) {
        Err(Error::Divergence { trace, .. }) => assert!(!trace.is_empty()),
        other => panic!("expected divergence, got {other:?}"),
    }
}

#[test]
fn training_is_deterministic() {
    let space = SpaceDescriptor::lp_seq(2.0, 8, 1.0).unwrap();
    let data: Vec<(Element, f64)> = CompactSampler::new(space.clone(), 1.0, 7)
        .unwrap()
        .sample(50)
        .into_iter()
        .map(|x| {
            let y = (3.0 * x.coeffs()[0]).sin();
            (x, y)
        })
        .collect();
    let net = ShallowNetwork::init(space, Activation::Tanh, 6, 8, 0.5).unwrap();
    let cfg = TrainConfig {
        iterations: 100,
        batch_size: Some(16),
        seed: 3,
        optimizer: Optimizer::Momentum { beta: 0.5 },
        ..TrainConfig::default()
    };
    let a = net.train(&data, &cfg).unwrap();
    let b = net.train(&data, &cfg).unwrap();
    assert_eq!(a.losses, b.losses);
    assert_eq!(a.network, b.network);
    assert!(net.train(&data, &TrainConfig { learning_rate: 0.0, ..cfg.clone() }).is_err());
}

/// Best-of-3 final training loss on a fixed target for a given width.
fn best_loss(width: usize) -> f64 {
    let space = SpaceDescriptor::lp_seq(2.0, 8, 1.0).unwrap();
    let data: Vec<(Element, f64)> = CompactSampler::new(space.clone(), 1.0, 40)
        .unwrap()
        .sample(128)
        .into_iter()
        .map(|x| {
            let c = x.coeffs();
            let y = (2.0 * c[0] - c[1]).sin() * (1.0 + c[2]);
            (x, y)
        })
        .collect();
    (0..3)
        .map(|seed| {
            let net = ShallowNetwork::init(space.clone(), Activation::Tanh, width, seed, 0.5).unwrap();
            let cfg = TrainConfig {
                learning_rate: 0.02,
                iterations: 1500,
                optimizer: Optimizer::Momentum { beta: 0.9 },
                ..TrainConfig::default()
            };
            *net.train(&data, &cfg).unwrap().losses.last().unwrap()
        })
        .fold(f64::INFINITY, f64::min)
}

#[test]
fn wider_networks_train_no_worse() {
    let losses: Vec<f64> = [4, 16, 64].iter().map(|&r| best_loss(r)).collect();
    for pair in losses.windows(2) {
        assert!(pair[1] <= pair[0] * 1.05, "{losses:?}");
    }
}

#[test]
fn checkpoints_round_trip_bitwise() {
    let cfun = SpaceDescriptor::c_fun(GridSpec::with_nodes(0.0, 1.0, 2, 8)).unwrap();
    let f = Functional::with_atoms(
        cfun.clone(),
        vec![0.1; 16],
        vec![Atom {
            location: 0.3,
            weight: -0.25,
        }],
    )
    .unwrap();
    let mollified = NetActivation::Mollified(mollify(&Activation::Relu, 0.2, 64).unwrap());
    let nets = vec![
        ShallowNetwork::init(SpaceDescriptor::matrix(2, 3).unwrap(), Activation::Tanh, 4, 1, 1.0).unwrap(),
        ShallowNetwork::new(
            cfun.clone(),
            mollified,
            vec![Neuron {
                coeff: 1.0 / 3.0,
                functional: f,
                threshold: -0.1,
            }],
        )
        .unwrap(),
        ShallowNetwork::init(
            SpaceDescriptor::lp_fun(1.5, GridSpec::new(-1.0, 1.0)).unwrap(),
            Activation::poly(vec![0.1, -0.2, 0.3]).unwrap(),
            3,
            2,
            0.7,
        )
        .unwrap(),
    ];
    for net in nets {
        let json = net.to_json().unwrap();
        let back = ShallowNetwork::from_json(&json).unwrap();
        assert_eq!(back, net);
        assert_eq!(back.to_json().unwrap(), json);
    }
    assert!(ShallowNetwork::from_json("{\"version\":\"x\"}").is_err());
}

#[test]
fn parallel_batches_agree_with_serial() {
    let space = SpaceDescriptor::lp_fun(2.0, GridSpec::new(0.0, 1.0)).unwrap();
    let net = ShallowNetwork::init(space.clone(), Activation::Sigmoid, 32, 4, 1.0).unwrap();
    let xs = CompactSampler::new(space, 1.0, 5).unwrap().sample(300);
    let serial = net.forward_batch(&xs, Parallelism::Serial).unwrap();
    let parallel = net.forward_batch(&xs, Parallelism::Rayon).unwrap();
    for (a, b) in serial.iter().zip(&parallel) {
        assert!((a - b).abs() <= 1e-10);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn prop_output_homogeneity(seed in any::<u64>(), lambda in -10.0f64..10.0) {
        let space = SpaceDescriptor::lp_seq(2.0, 6, 1.0).unwrap();
        let net = ShallowNetwork::init(space.clone(), Activation::Tanh, 7, seed, 1.0).unwrap();
        let mut scaled = net.clone();
        scaled.scale_output(lambda);
        for x in CompactSampler::new(space, 1.0, seed).unwrap().sample(5) {
            let a = lambda * net.forward(&x).unwrap();
            let b = scaled.forward(&x).unwrap();
            let magnitude: f64 = net
                .neurons()
                .iter()
                .map(|n| (lambda * n.coeff * (n.functional.pair(&x).unwrap() - n.threshold).tanh()).abs())
                .sum();
            prop_assert!((a - b).abs() <= 1e-14 * magnitude);
        }
    }

    #[test]
    fn prop_permutation_invariance(seed in any::<u64>()) {
        let space = SpaceDescriptor::matrix(2, 2).unwrap();
        let net = ShallowNetwork::init(space.clone(), Activation::Sin, 9, seed, 1.0).unwrap();
        let mut order: Vec<usize> = (0..9).collect();
        order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
        let mut permuted = net.clone();
        permuted.permute(&order).unwrap();
        let magnitude: f64 = net.neurons().iter().map(|n| n.coeff.abs()).sum();
        for x in CompactSampler::new(space, 1.0, seed).unwrap().sample(5) {
            let a = net.forward(&x).unwrap();
            let b = permuted.forward(&x).unwrap();
            prop_assert!((a - b).abs() <= 1e-14 * magnitude.max(1.0));
        }
    }

    #[test]
    fn prop_param_round_trip(seed in any::<u64>(), width in 1usize..6) {
        let space = SpaceDescriptor::c0_seq(5, 1.0).unwrap();
        let net = ShallowNetwork::init(space, Activation::Sigmoid, width, seed, 2.0).unwrap();
        let mut copy = net.clone();
        copy.set_params(&net.params()).unwrap();
        prop_assert_eq!(copy, net.clone());
        prop_assert_eq!(net.param_count(), width * 7);
    }
}
