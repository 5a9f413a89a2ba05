mod common;

use common::{all_spaces, random_element, random_functional};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use tvsnet::quadrature::GridSpec;
use tvsnet::spaces::{holder_bound, Atom};
use tvsnet::{CompactSampler, Element, Error, Functional, SpaceDescriptor, SpaceKind};

const TRIALS: usize = 10_000;

#[test]
fn matrix_pairing_is_trace() {
    let space = SpaceDescriptor::matrix(2, 2).unwrap();
    let w = Functional::new(space.clone(), vec![1.0, 0.0, 0.0, 1.0]).unwrap();
    let x = Element::new(space, vec![1.0, 2.0, 3.0, 4.0]).unwrap();
    assert_eq!(w.pair(&x).unwrap(), 5.0);
}

#[test]
fn sequence_pairing_projects() {
    let space = SpaceDescriptor::lp_seq(2.0, 8, 1.0).unwrap();
    let mut a = vec![0.0; 8];
    a[0] = 1.0;
    let f = Functional::new(space.clone(), a).unwrap();
    let x = Element::new(space, vec![3.0, 0.4, -0.2, 0.1, 0.0, 0.0, 0.05, 0.0]).unwrap();
    assert_eq!(f.pair(&x).unwrap(), 3.0);
}

#[test]
fn function_pairing_integrates() {
    let space = SpaceDescriptor::lp_fun(2.0, GridSpec::new(0.0, 1.0)).unwrap();
    let one = Functional::new(space.clone(), vec![1.0; space.dim()]).unwrap();
    let x = Element::new(space.clone(), vec![1.0; space.dim()]).unwrap();
    assert!((one.pair(&x).unwrap() - 1.0).abs() < 1e-14);
    // t^5 integrates exactly under Gauss-Legendre
    let nodes = space.grid().unwrap().nodes.clone();
    let x5 = Element::new(space, nodes.iter().map(|t| t.powi(5)).collect()).unwrap();
    assert!((one.pair(&x5).unwrap() - 1.0 / 6.0).abs() < 1e-14);
}

#[test]
fn measure_atoms_snap_to_nodes() {
    let space = SpaceDescriptor::c_fun(GridSpec::with_nodes(0.0, 1.0, 1, 8)).unwrap();
    let nodes = space.grid().unwrap().nodes.clone();
    let x = Element::new(space.clone(), nodes.clone()).unwrap();
    let delta = Functional::with_atoms(
        space.clone(),
        vec![0.0; 8],
        vec![Atom {
            location: nodes[3] + 1e-3,
            weight: 2.0,
        }],
    )
    .unwrap();
    assert_eq!(delta.pair(&x).unwrap(), 2.0 * nodes[3]);
    let lebesgue = Functional::new(space.clone(), vec![1.0; 8]).unwrap();
    let both = Functional::combine(&delta, &lebesgue, 1.0, 1.0).unwrap();
    assert!((both.pair(&x).unwrap() - (2.0 * nodes[3] + 0.5)).abs() < 1e-14);
    let off_kind = SpaceDescriptor::lp_fun(2.0, GridSpec::new(0.0, 1.0)).unwrap();
    assert!(matches!(
        Functional::with_atoms(off_kind, vec![0.0; 64], vec![Atom { location: 0.5, weight: 1.0 }]),
        Err(Error::UnsupportedCombination(_))
    ));
}

#[test]
fn norms() {
    let seq = SpaceDescriptor::lp_seq(2.0, 4, 1.0).unwrap();
    assert_eq!(Element::new(seq, vec![3.0, 4.0, 0.0, 0.0]).unwrap().norm(), 5.0);
    let mat = SpaceDescriptor::matrix(2, 2).unwrap();
    let eye = Element::new(mat, vec![1.0, 0.0, 0.0, 1.0]).unwrap();
    assert!((eye.norm() - 2f64.sqrt()).abs() < 1e-15);
    let cf = SpaceDescriptor::c_fun(GridSpec::with_nodes(0.0, 1.0, 1, 4)).unwrap();
    assert_eq!(Element::new(cf, vec![0.5, -2.0, 1.0, 0.0]).unwrap().norm(), 2.0);
}

#[test]
fn mismatched_spaces_are_rejected() {
    let a = SpaceDescriptor::lp_seq(2.0, 4, 1.0).unwrap();
    let b = SpaceDescriptor::lp_seq(3.0, 4, 1.0).unwrap();
    let f = Functional::zero(a);
    let x = Element::zeros(b);
    let err = f.pair(&x).unwrap_err();
    assert_eq!(err.reason_code(), "space_mismatch");
}

#[test]
fn bilinearity_in_both_arguments() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for space in all_spaces() {
        let mut worst = 0.0f64;
        for _ in 0..TRIALS / 10 {
            let f = random_functional(&space, &mut rng);
            let g = random_functional(&space, &mut rng);
            let x = random_element(&space, &mut rng, 1.0);
            let y = random_element(&space, &mut rng, 1.0);
            let (a, b): (f64, f64) = (rng.random_range(-3.0..3.0), rng.random_range(-3.0..3.0));

            let fx = f.pair(&x).unwrap();
            let gx = g.pair(&x).unwrap();
            let fy = f.pair(&y).unwrap();
            let left = Functional::combine(&f, &g, a, b).unwrap().pair(&x).unwrap();
            let scale = a.abs() * fx.abs() + b.abs() * gx.abs() + 1e-300;
            worst = worst.max((left - (a * fx + b * gx)).abs() / scale);

            let right = f.pair(&x.combine(&y, a, b).unwrap()).unwrap();
            let scale = a.abs() * fx.abs() + b.abs() * fy.abs() + 1e-300;
            worst = worst.max((right - (a * fx + b * fy)).abs() / scale.max(f.dual_norm() * 1e-3));
        }
        assert!(worst <= 1e-12, "{space}: relative bilinearity error {worst:e}");
    }
}

#[test]
fn holder_inequality_has_no_violations() {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    for space in all_spaces() {
        let mut violations = 0;
        for trial in 0..TRIALS {
            let f = random_functional(&space, &mut rng);
            // mix scales so both slack and near-equality cases occur
            let x = if trial % 7 == 0 {
                let eff = f.effective_weights();
                Element::new(space.clone(), eff.iter().map(|v| v.signum() * v.abs().powf(0.5)).collect())
                    .unwrap()
            } else {
                let scale = rng.random_range(0.01..10.0);
                random_element(&space, &mut rng, scale)
            };
            let (lhs, rhs) = holder_bound(&f, &x).unwrap();
            if lhs > rhs * (1.0 + 1e-12) {
                violations += 1;
            }
        }
        assert_eq!(violations, 0, "{space}");
    }
}

#[test]
fn holder_equality_and_zero_cases() {
    let space = SpaceDescriptor::lp_seq(2.0, 5, 1.0).unwrap();
    let e1 = vec![1.0, 0.0, 0.0, 0.0, 0.0];
    let f = Functional::new(space.clone(), e1.clone()).unwrap();
    let x = Element::new(space.clone(), e1).unwrap();
    assert_eq!(holder_bound(&f, &x).unwrap(), (1.0, 1.0));
    assert_eq!(holder_bound(&f, &Element::zeros(space)).unwrap(), (0.0, 0.0));
}

#[test]
fn combine_cancels_and_scales() {
    let mut rng = ChaCha8Rng::seed_from_u64(13);
    for space in all_spaces() {
        let f = random_functional(&space, &mut rng);
        let x = random_element(&space, &mut rng, 1.0);
        let zero = Functional::combine(&f, &f, 1.0, -1.0).unwrap();
        assert_eq!(zero.pair(&x).unwrap(), 0.0, "{space}");
        let doubled = Functional::combine(&f, &Functional::zero(space.clone()), 2.0, 0.0).unwrap();
        assert_eq!(doubled.pair(&x).unwrap(), 2.0 * f.pair(&x).unwrap(), "{space}");
    }
}

#[test]
fn sphere_normalization_properties() {
    let mut rng = ChaCha8Rng::seed_from_u64(14);
    for space in all_spaces() {
        let basis = CompactSampler::new(space.clone(), 1.0, 5).unwrap().sample_sphere(64);
        let f = random_functional(&space, &mut rng);
        let (n, alpha) = f.normalize_to_sphere(&basis).unwrap();
        let max = basis.iter().map(|b| n.pair(b).unwrap().abs()).fold(0.0, f64::max);
        assert!((1.0 - 1e-12..=1.0).contains(&max), "{space}: {max}");
        assert!(alpha > 0.0);

        let (again, _) = n.normalize_to_sphere(&basis).unwrap();
        for (a, b) in again.rep().iter().zip(n.rep()) {
            assert!((a - b).abs() <= 1e-15 * b.abs().max(1e-300) + 1e-15 * max);
        }
        for c in [1e-3, 0.7, 5.0, 1e4] {
            let (scaled, _) = f.scaled(c).normalize_to_sphere(&basis).unwrap();
            for (a, b) in scaled.rep().iter().zip(n.rep()) {
                assert!((a - b).abs() <= 1e-12 * b.abs().max(1e-12), "{space}: c = {c}");
            }
        }
        let err = Functional::zero(space.clone()).normalize_to_sphere(&basis).unwrap_err();
        assert_eq!(err.reason_code(), "degenerate_functional");
    }
}

#[test]
fn sphere_normalization_halves_a_double() {
    let space = SpaceDescriptor::euclidean(2).unwrap();
    let basis = vec![
        Element::new(space.clone(), vec![1.0, 0.0]).unwrap(),
        Element::new(space.clone(), vec![0.0, 1.0]).unwrap(),
    ];
    let f = Functional::new(space, vec![2.0, -1.0]).unwrap();
    let (n, alpha) = f.normalize_to_sphere(&basis).unwrap();
    assert_eq!(alpha, 2.0);
    assert_eq!(n.rep(), &[1.0, -0.5]);
}

#[test]
fn samplers_are_deterministic_and_respect_envelopes() {
    for space in all_spaces() {
        let a = CompactSampler::new(space.clone(), 1.0, 7).unwrap().sample(3);
        let b = CompactSampler::new(space.clone(), 1.0, 7).unwrap().sample(3);
        assert_eq!(a, b);
        let sampler = CompactSampler::new(space.clone(), 1.0, 8).unwrap();
        for x in sampler.fork(9).sample(500) {
            assert!(sampler.contains(&x), "{space}");
            match space.kind() {
                SpaceKind::LpSeq { decay, .. } | SpaceKind::C0Seq { decay, .. } => {
                    for (n, v) in x.coeffs().iter().enumerate() {
                        assert!(v.abs() <= ((n + 1) as f64).powf(-decay));
                    }
                }
                SpaceKind::Euclidean { .. } | SpaceKind::Matrix { .. } => assert!(x.norm() <= 1.0),
                _ => assert!(x.norm() <= 1.0 || space.primal_exponent().is_finite()),
            }
        }
    }
}

#[test]
fn pairings_are_uniformly_bounded_over_samples() {
    let mut rng = ChaCha8Rng::seed_from_u64(15);
    for space in all_spaces() {
        let mut sampler = CompactSampler::new(space.clone(), 1.0, 16).unwrap();
        let xs = sampler.sample(2000);
        let f = random_functional(&space, &mut rng);
        let bound = sampler.support(&f).unwrap();
        let worst = xs.iter().map(|x| f.pair(x).unwrap().abs()).fold(0.0, f64::max);
        assert!(worst <= bound * (1.0 + 1e-12), "{space}: {worst} > {bound}");
        let radius_bound = xs.iter().map(|x| f.dual_norm() * x.norm()).fold(0.0, f64::max);
        assert!(worst <= radius_bound * (1.0 + 1e-12));
    }
}

#[test]
fn json_round_trips_bitwise() {
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    for space in all_spaces() {
        let f = random_functional(&space, &mut rng);
        let x = random_element(&space, &mut rng, 1.0);
        let fj = serde_json::to_string(&f).unwrap();
        let xj = serde_json::to_string(&x).unwrap();
        let f2: Functional = serde_json::from_str(&fj).unwrap();
        let x2: Element = serde_json::from_str(&xj).unwrap();
        assert_eq!(f, f2);
        assert_eq!(x, x2);
        assert_eq!(serde_json::to_string(&f2).unwrap(), fj);
    }
    let bad = r#"{"kind":"lp_seq","params":{"p":0.5,"len":4,"decay":1.0}}"#;
    assert!(serde_json::from_str::<SpaceDescriptor>(bad).is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn prop_sequence_bilinearity(
        a in prop::collection::vec(-10.0f64..10.0, 8),
        b in prop::collection::vec(-10.0f64..10.0, 8),
        x in prop::collection::vec(-1.0f64..1.0, 8),
        alpha in -5.0f64..5.0,
        beta in -5.0f64..5.0,
    ) {
        let space = SpaceDescriptor::lp_seq(2.0, 8, 1.0).unwrap();
        let f = Functional::new(space.clone(), a).unwrap();
        let g = Functional::new(space.clone(), b).unwrap();
        let x = Element::new(space, x).unwrap();
        let lhs = Functional::combine(&f, &g, alpha, beta).unwrap().pair(&x).unwrap();
        let (fx, gx) = (f.pair(&x).unwrap(), g.pair(&x).unwrap());
        let scale = 1.0 + alpha.abs() * f.dual_norm() * x.norm() + beta.abs() * g.dual_norm() * x.norm();
        prop_assert!((lhs - (alpha * fx + beta * gx)).abs() <= 1e-12 * scale);
    }

    #[test]
    fn prop_holder_lp(
        p in 1.01f64..6.0,
        a in prop::collection::vec(-10.0f64..10.0, 6),
        x in prop::collection::vec(-1.0f64..1.0, 6),
    ) {
        let space = SpaceDescriptor::lp_seq(p, 6, 1.0).unwrap();
        let f = Functional::new(space.clone(), a).unwrap();
        let x = Element::new(space, x).unwrap();
        let (lhs, rhs) = holder_bound(&f, &x).unwrap();
        prop_assert!(lhs <= rhs * (1.0 + 1e-12));
    }

    #[test]
    fn prop_normalize_scale_invariant(
        a in prop::collection::vec(-10.0f64..10.0, 4),
        c in 1e-3f64..1e3,
    ) {
        prop_assume!(a.iter().any(|v| v.abs() > 1e-3));
        let space = SpaceDescriptor::matrix(2, 2).unwrap();
        let basis = CompactSampler::new(space.clone(), 1.0, 3).unwrap().sample_sphere(16);
        let f = Functional::new(space, a).unwrap();
        let (n1, _) = f.normalize_to_sphere(&basis).unwrap();
        let (n2, _) = f.scaled(c).normalize_to_sphere(&basis).unwrap();
        for (u, v) in n1.rep().iter().zip(n2.rep()) {
            prop_assert!((u - v).abs() <= 1e-12 * u.abs().max(1e-9));
        }
    }

    #[test]
    fn prop_sampler_envelope(seed in any::<u64>(), decay in 0.25f64..3.0) {
        let space = SpaceDescriptor::lp_seq(2.0, 12, decay).unwrap();
        let mut sampler = CompactSampler::new(space, 1.5, seed).unwrap();
        for x in sampler.sample(8) {
            for (n, v) in x.coeffs().iter().enumerate() {
                prop_assert!(v.abs() <= 1.5 * ((n + 1) as f64).powf(-decay));
            }
        }
    }
}
