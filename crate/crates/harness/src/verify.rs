//! Named property suites with fixed seeds.

use std::fmt;
use std::str::FromStr;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use tvsnet::activations::{detect_polynomial, mollify};
use tvsnet::constructive::{approximate, exp_dictionary_fit_with, monomial_network_swept, ConstructOptions, FitOptions, OneDOptions};
use tvsnet::network::{numerical_gradient, relative_gradient_error, GradientMode, Optimizer};
use tvsnet::numeric::linspace;
use tvsnet::spaces::{holder_bound, Atom};
use tvsnet::{
    Activation, CompactSampler, Element, Error, Functional, NetActivation, ShallowNetwork, Space, SpaceDescriptor,
    TrainConfig,
};

use crate::catalog::reference_spaces;
use crate::error::HarnessError;
use crate::oracle::minimal_monic_sup;

pub const PAIRING_TRIALS: usize = 10_000;
pub const ALGEBRA_TRIALS: usize = 1_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Suite {
    Pairings,
    Gradients,
    Mollify,
    Monomials,
    Algebra,
    NegativeControl,
}

impl Suite {
    pub const ALL: [Suite; 6] = [
        Suite::Pairings,
        Suite::Gradients,
        Suite::Mollify,
        Suite::Monomials,
        Suite::Algebra,
        Suite::NegativeControl,
    ];

    pub fn id(&self) -> &'static str {
        match self {
            Suite::Pairings => "pairings",
            Suite::Gradients => "gradients",
            Suite::Mollify => "mollify",
            Suite::Monomials => "monomials",
            Suite::Algebra => "algebra",
            Suite::NegativeControl => "negative-control",
        }
    }
}

impl fmt::Display for Suite {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.id())
    }
}

impl FromStr for Suite {
    type Err = HarnessError;

    fn from_str(s: &str) -> Result<Self, HarnessError> {
        Suite::ALL.into_iter().find(|x| x.id() == s).ok_or_else(|| HarnessError::Usage {
            path: "suite".into(),
            message: format!(
                "unknown suite {s:?} (expected one of {})",
                Suite::ALL.map(|x| x.id()).join(", ")
            ),
        })
    }
}

/// One measured quantity against its bound.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub observed: f64,
    pub bound: f64,
    pub relation: String,
}

impl Check {
    fn at_most(name: impl Into<String>, observed: f64, bound: f64) -> Self {
        Check {
            name: name.into(),
            passed: observed <= bound,
            observed,
            bound,
            relation: "<=".into(),
        }
    }

    fn at_least(name: impl Into<String>, observed: f64, bound: f64) -> Self {
        Check {
            name: name.into(),
            passed: observed >= bound,
            observed,
            bound,
            relation: ">=".into(),
        }
    }

    fn holds(name: impl Into<String>, ok: bool) -> Self {
        Check {
            name: name.into(),
            passed: ok,
            observed: if ok { 1.0 } else { 0.0 },
            bound: 1.0,
            relation: "==".into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SuiteReport {
    pub version: String,
    pub suite: Suite,
    pub passed: bool,
    pub checks: Vec<Check>,
    pub runtime_ms: f64,
}

impl SuiteReport {
    pub fn human(&self) -> String {
        let mut out = String::new();
        for c in &self.checks {
            out.push_str(&format!(
                "{} {}: {:.3e} {} {:.3e}\n",
                if c.passed { "pass" } else { "FAIL" },
                c.name,
                c.observed,
                c.relation,
                c.bound
            ));
        }
        out.push_str(&format!(
            "suite {}: {} ({} checks, {:.1} s)\n",
            self.suite,
            if self.passed { "PASS" } else { "FAIL" },
            self.checks.len(),
            self.runtime_ms / 1e3
        ));
        out
    }
}

pub fn verify(suite: Suite) -> SuiteReport {
    let start = Instant::now();
    let checks = match suite {
        Suite::Pairings => pairings(),
        Suite::Gradients => gradients(),
        Suite::Mollify => mollification(),
        Suite::Monomials => monomials(),
        Suite::Algebra => algebra(),
        Suite::NegativeControl => negative_control(),
    };
    SuiteReport {
        version: crate::version_tag(),
        suite,
        passed: !checks.is_empty() && checks.iter().all(|c| c.passed),
        checks,
        runtime_ms: start.elapsed().as_secs_f64() * 1e3,
    }
}

pub fn random_element<R: Rng>(space: &Space, rng: &mut R, scale: f64) -> Element {
    let coeffs = (0..space.dim())
        .map(|_| scale * rng.sample::<f64, _>(StandardNormal))
        .collect();
    Element::new(space.clone(), coeffs).expect("finite coefficients")
}

/// Normal dual coordinates; measures on `c_fun` also get three point masses.
pub fn random_functional<R: Rng>(space: &Space, rng: &mut R) -> Functional {
    let rep: Vec<f64> = (0..space.dim()).map(|_| rng.sample(StandardNormal)).collect();
    match space.grid() {
        Some(grid) if space.kind().tag() == "c_fun" => {
            let atoms = (0..3)
                .map(|_| Atom {
                    location: rng.random_range(grid.spec.a..=grid.spec.b),
                    weight: rng.sample(StandardNormal),
                })
                .collect();
            Functional::with_atoms(space.clone(), rep, atoms).expect("atoms inside the grid")
        }
        _ => Functional::new(space.clone(), rep).expect("finite coefficients"),
    }
}

fn pairings() -> Vec<Check> {
    let mut checks = Vec::new();
    let mut rng = ChaCha8Rng::seed_from_u64(0x5041_4952);
    for space in reference_spaces() {
        let mut worst = 0.0f64;
        let mut violations = 0usize;
        for trial in 0..PAIRING_TRIALS {
            let f = random_functional(&space, &mut rng);
            let g = random_functional(&space, &mut rng);
            let x = random_element(&space, &mut rng, 1.0);
            let y = random_element(&space, &mut rng, 1.0);
            let a: f64 = rng.random_range(-3.0..3.0);
            let b: f64 = rng.random_range(-3.0..3.0);
            let (fx, gx, fy) = (f.pair(&x).unwrap(), g.pair(&x).unwrap(), f.pair(&y).unwrap());

            let left = Functional::combine(&f, &g, a, b).unwrap().pair(&x).unwrap();
            let scale = a.abs() * fx.abs() + b.abs() * gx.abs() + 1e-300;
            worst = worst.max((left - (a * fx + b * gx)).abs() / scale);
            let right = f.pair(&x.combine(&y, a, b).unwrap()).unwrap();
            let scale = a.abs() * fx.abs() + b.abs() * fy.abs() + 1e-300;
            worst = worst.max((right - (a * fx + b * fy)).abs() / scale.max(f.dual_norm() * 1e-3));

            let probe = if trial % 7 == 0 {
                let eff = f.effective_weights();
                Element::new(space.clone(), eff.iter().map(|v| v.signum() * v.abs().sqrt()).collect()).unwrap()
            } else {
                let s = rng.random_range(0.01..10.0);
                random_element(&space, &mut rng, s)
            };
            let (lhs, rhs) = holder_bound(&f, &probe).unwrap();
            if lhs > rhs * (1.0 + 1e-12) {
                violations += 1;
            }
        }
        checks.push(Check::at_most(format!("bilinearity {space}"), worst, 1e-12));
        checks.push(Check::at_most(format!("holder violations {space}"), violations as f64, 0.0));
    }
    checks
}

fn gradients() -> Vec<Check> {
    let smooth = [Activation::Tanh, Activation::Sigmoid, Activation::Sin, Activation::Exp];
    let mut checks = Vec::new();
    for space in reference_spaces() {
        let sampler = CompactSampler::new(space.clone(), 1.0, 35).unwrap();
        let mut worst = 0.0f64;
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
            let floor = 1e-3 * analytic.iter().fold(0.0f64, |m, v| m.max(v.abs()));
            for (a, n) in analytic.iter().zip(&numeric) {
                worst = worst.max(relative_gradient_error(*a, *n, floor));
            }
        }
        checks.push(Check::at_most(format!("gradient relative error {space}"), worst, 1e-5));
    }
    checks
}

fn mollification() -> Vec<Check> {
    let catalog = [
        Activation::Relu,
        Activation::Tanh,
        Activation::Sigmoid,
        Activation::Exp,
        Activation::Sin,
        Activation::poly(vec![0.5, -1.0, 0.25]).unwrap(),
        Activation::table(vec![-3.0, -1.0, 0.0, 2.0, 4.0], vec![0.0, 0.5, -0.5, 1.0, 1.0]).unwrap(),
    ];
    let grid = linspace(-3.0, 3.0, 601);
    let mut checks = Vec::new();
    for sigma in &catalog {
        let coarse = mollify(sigma, 0.25, 8192).unwrap();
        let fine = mollify(sigma, 0.25, 4 * 8192).unwrap();
        let worst = grid
            .iter()
            .map(|&t| (coarse.value(t) - fine.value(t)).abs())
            .fold(0.0, f64::max);
        checks.push(Check::at_most(format!("node sum vs 4x quadrature {}", sigma.id()), worst, 1e-8));
    }
    let dense = linspace(-2.0, 2.0, 4001);
    let deviation = |delta: f64| {
        let m = mollify(&Activation::Relu, delta, 4096).unwrap();
        dense.iter().map(|&t| (m.value(t) - t.max(0.0)).abs()).fold(0.0, f64::max)
    };
    let deltas = [0.4, 0.2, 0.1, 0.05];
    let devs: Vec<f64> = deltas.iter().map(|&d| deviation(d)).collect();
    for (i, pair) in devs.windows(2).enumerate() {
        let ratio = pair[1] / pair[0];
        let name = format!("relu deviation ratio delta {} -> {}", deltas[i], deltas[i + 1]);
        checks.push(Check::at_least(format!("{name} (low)"), ratio, 0.4));
        checks.push(Check::at_most(format!("{name} (high)"), ratio, 0.6));
    }
    checks
}

fn monomials() -> Vec<Check> {
    let opts = OneDOptions::default();
    let mut checks = Vec::new();
    for sigma in [Activation::Exp, Activation::Tanh, Activation::Sigmoid] {
        for k in 0..=4 {
            let bound = if k == 0 { 1e-12 } else { 1e-2 };
            let name = format!("{} t^{k} sup error", sigma.id());
            match monomial_network_swept(&NetActivation::Plain(sigma.clone()), k, (-1.0, 1.0), &opts) {
                Ok(fit) => checks.push(Check::at_most(name, fit.error, bound)),
                Err(_) => checks.push(Check::holds(name, false)),
            }
        }
    }
    checks
}

fn algebra() -> Vec<Check> {
    let mut rng = ChaCha8Rng::seed_from_u64(0x414c_4745);
    let spaces = reference_spaces();
    let per_space = ALGEBRA_TRIALS / spaces.len();
    let mut worst = 0.0f64;
    for space in &spaces {
        let xs = CompactSampler::new(space.clone(), 1.0, 27).unwrap().sample(per_space);
        for (i, x) in xs.iter().enumerate() {
            let r1 = random_functional(space, &mut rng).scaled(1.0 / (1 + i % 3) as f64);
            let r2 = random_functional(space, &mut rng);
            let product = r1.pair(x).unwrap().exp() * r2.pair(x).unwrap().exp();
            let sum = Functional::combine(&r1, &r2, 1.0, 1.0).unwrap().pair(x).unwrap().exp();
            worst = worst.max((product - sum).abs() / sum);
        }
    }
    let mut checks = vec![Check::at_most("product identity relative error", worst, 1e-12)];

    for space in [
        SpaceDescriptor::lp_seq(2.0, 16, 1.0).unwrap(),
        SpaceDescriptor::matrix(3, 4).unwrap(),
        SpaceDescriptor::c_fun(tvsnet::quadrature::GridSpec::new(0.0, 1.0)).unwrap(),
    ] {
        let sampler = CompactSampler::new(space.clone(), 1.0, 3).unwrap();
        let mut r = random_functional(&space, &mut rng);
        r = r.scaled(2.0 / sampler.support(&r).unwrap());
        let target = r.clone();
        let g = move |x: &Element| target.pair(x).unwrap().exp();
        let opts = FitOptions {
            train_size: 1024,
            validation_size: 1024,
            extra: vec![r],
            ..FitOptions::default()
        };
        let name = format!("in-span dictionary residual {space}");
        match exp_dictionary_fit_with(&g, &sampler, 8, 0.0, 1, &opts) {
            Ok(model) => checks.push(Check::at_most(name, model.stage1_error, 1e-10)),
            Err(_) => checks.push(Check::holds(name, false)),
        }
    }
    checks
}

/// Sup error over `[-1, 1]` of a width-64 `t^2` network trained on `t^3`.
pub fn quadratic_plateau() -> f64 {
    let square = Activation::poly(vec![0.0, 0.0, 1.0]).unwrap();
    let space = SpaceDescriptor::euclidean(1).unwrap();
    let point = |t: f64| Element::new(space.clone(), vec![t]).unwrap();
    let data: Vec<(Element, f64)> = linspace(-1.0, 1.0, 201).into_iter().map(|t| (point(t), t * t * t)).collect();
    let net = ShallowNetwork::init(space.clone(), square, 64, 6, 0.3).unwrap();
    let cfg = TrainConfig {
        learning_rate: 0.002,
        iterations: 3000,
        optimizer: Optimizer::Momentum { beta: 0.9 },
        ..TrainConfig::default()
    };
    match net.train(&data, &cfg) {
        Ok(out) => linspace(-1.0, 1.0, 2001)
            .into_iter()
            .map(|t| (out.network.forward(&point(t)).unwrap() - t * t * t).abs())
            .fold(0.0, f64::max),
        Err(_) => f64::NAN,
    }
}

fn negative_control() -> Vec<Check> {
    let square = Activation::poly(vec![0.0, 0.0, 1.0]).unwrap();
    let detected = detect_polynomial(&square, 12, (-4.0, 4.0));
    let mut checks = vec![Check::holds("t^2 detected as degree 2", detected == Some(2))];
    for sigma in [Activation::Tanh, Activation::Sigmoid, Activation::Exp, Activation::Sin, Activation::Relu] {
        checks.push(Check::holds(
            format!("{} not flagged", sigma.id()),
            detect_polynomial(&sigma, 12, (-4.0, 4.0)).is_none(),
        ));
    }
    let sampler = CompactSampler::new(SpaceDescriptor::euclidean(1).unwrap(), 1.0, 1).unwrap();
    let refused = matches!(
        approximate(&|x: &Element| x.coeffs()[0].powi(3), &sampler, &square, 0.1, &ConstructOptions::default()),
        Err(Error::InadmissibleActivation { degree: 2, .. })
    );
    checks.push(Check::holds("construction refuses t^2", refused));
    let oracle = minimal_monic_sup(3);
    checks.push(Check::at_most("oracle minimal monic cubic |E - 1/4|", (oracle - 0.25).abs(), 1e-12));
    let plateau = quadratic_plateau();
    checks.push(Check::at_least("width-64 t^2 network vs t^3 sup error", plateau, oracle - 0.01));
    checks
}
