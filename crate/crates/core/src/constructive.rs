//! Constructive approximation over an input space.
//!
//! The pipeline runs in four stages:
//!
//! 1. divided differences in the outer weight turn `σ` into networks for the
//!    monomials `t^k`, and sums of those give polynomials;
//! 2. non-smooth activations are mollified first, so the differences make sense;
//! 3. a target `g` on a sampled compact set is fitted by a ridge least-squares
//!    combination `sum_i a_i exp(α_i r_i(x))` of random functionals;
//! 4. each `a_i exp(α_i t)` is replaced on the hull of `r_i` by a one-dimensional
//!    network, and substituting `t = r_i(x)` gives the final shallow network.
//!
//! The error budget `ε` is split as `ε/2` for the fit and `ε/(2n)` per term, and
//! every stage error is measured rather than assumed.

use std::collections::BTreeMap;
use std::time::Instant;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::activations::{
    default_step, detect_polynomial, deriv_est, find_nonvanishing_theta_with, mollify, roundoff_floor, Activation,
    ThetaSearch, ThresholdSet,
};
use crate::chebyshev::ChebyshevSeries;
use crate::error::{Error, Result};
use crate::network::{NetActivation, Neuron, Parallelism, ShallowNetwork, TrainConfig};
use crate::numeric::{affine_substitute, binomial, derive_seed, linspace, pairwise_sum};
use crate::spaces::{CompactSampler, Element, Functional, SpaceDescriptor};

/// One term `c σ(w t - θ)` of a one-dimensional network.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OneDTerm {
    pub coeff: f64,
    pub weight: f64,
    pub threshold: f64,
}

/// `sum_j c_j σ(w_j t - θ_j)`, meant to be used on `interval`.
#[derive(Debug, Clone, PartialEq)]
pub struct OneDNetwork {
    pub terms: Vec<OneDTerm>,
    pub activation: NetActivation,
    pub interval: (f64, f64),
}

impl OneDNetwork {
    pub fn empty(activation: NetActivation, interval: (f64, f64)) -> Self {
        OneDNetwork {
            terms: Vec::new(),
            activation,
            interval,
        }
    }

    pub fn width(&self) -> usize {
        self.terms.len()
    }

    pub fn eval(&self, t: f64) -> f64 {
        let v: Vec<f64> = self
            .terms
            .iter()
            .map(|term| term.coeff * self.activation.value(term.weight * t - term.threshold))
            .collect();
        pairwise_sum(&v)
    }

    /// Maximum of `|net(t) - f(t)|` over `points` evenly spaced points of the interval.
    pub fn sup_error(&self, f: impl Fn(f64) -> f64, points: usize) -> f64 {
        let (a, b) = self.interval;
        linspace(a, b, points)
            .into_iter()
            .map(|t| (self.eval(t) - f(t)).abs())
            .fold(0.0, f64::max)
    }

    /// Re-expresses a network in `u` as a network in `t = m + s u`.
    fn in_original_variable(mut self, m: f64, s: f64, interval: (f64, f64)) -> Self {
        for term in &mut self.terms {
            let w = term.weight / s;
            term.threshold += w * m;
            term.weight = w;
        }
        self.interval = interval;
        self
    }

    fn check_thresholds(&self, thresholds: &ThresholdSet) -> Result<()> {
        if thresholds.is_real_line() {
            return Ok(());
        }
        for term in &self.terms {
            thresholds.check(term.threshold)?;
        }
        Ok(())
    }

    /// Network on the input space obtained by substituting `t = f(x)`.
    pub fn compose_with(&self, f: &Functional) -> Vec<Neuron> {
        self.terms
            .iter()
            .map(|term| Neuron {
                coeff: term.coeff,
                functional: f.scaled(term.weight),
                threshold: term.threshold,
            })
            .collect()
    }
}

/// Settings shared by the one-dimensional constructions.
#[derive(Debug, Clone, PartialEq)]
pub struct OneDOptions {
    pub thresholds: ThresholdSet,
    pub theta_search: ThetaSearch,
    /// Candidate divided-difference steps; the best measured one is kept.
    pub steps: Vec<f64>,
    /// Points of the dense grid used for every sup-error measurement.
    pub grid_points: usize,
    pub max_degree: usize,
    /// Train a small network when the Chebyshev route misses its budget.
    pub training_fallback: bool,
    pub fallback_width: usize,
    pub fallback_iterations: usize,
    pub fallback_seed: u64,
}

impl Default for OneDOptions {
    fn default() -> Self {
        OneDOptions {
            thresholds: ThresholdSet::real(),
            theta_search: ThetaSearch::default(),
            steps: log_steps(1.0, 1e-6, 4),
            grid_points: 2001,
            max_degree: 16,
            training_fallback: true,
            fallback_width: 16,
            fallback_iterations: 3000,
            fallback_seed: 0,
        }
    }
}

/// Logarithmic grid from `hi` down to `lo` with `per_decade` points per decade.
pub fn log_steps(hi: f64, lo: f64, per_decade: usize) -> Vec<f64> {
    let decades = (hi / lo).log10();
    let count = (decades * per_decade as f64).round() as usize + 1;
    linspace(hi.log10(), lo.log10(), count)
        .into_iter()
        .map(|e| 10f64.powf(e))
        .collect()
}

/// A monomial network together with how it was chosen.
#[derive(Debug, Clone, PartialEq)]
pub struct MonomialFit {
    pub order: usize,
    pub theta: f64,
    pub step: f64,
    pub estimate: f64,
    pub network: OneDNetwork,
    /// Sup error against `t^k` on the network's interval.
    pub error: f64,
}

/// The `(k+1)`-term divided-difference network
/// `sum_j (-1)^j C(k,j) σ((k/2 - j) h t - θ_k) / (h^k σ̂^(k)(-θ_k))`,
/// where `σ̂^(k)` is the central difference at the same step.
pub fn monomial_network(
    sigma: &NetActivation,
    order: usize,
    theta: f64,
    step: f64,
    interval: (f64, f64),
) -> Result<OneDNetwork> {
    monomial_network_with(sigma, order, theta, step, interval, ThetaSearch::default().significance)
}

fn monomial_network_with(
    sigma: &NetActivation,
    order: usize,
    theta: f64,
    step: f64,
    interval: (f64, f64),
    significance: f64,
) -> Result<OneDNetwork> {
    if !(step.is_finite() && step > 0.0) {
        return Err(Error::invalid(format!("difference step {step} must be positive")));
    }
    let estimate = deriv_est(sigma, order, -theta, step);
    let floor = significance * roundoff_floor(sigma, order, -theta, step);
    if !estimate.is_finite() || estimate.abs() <= floor {
        return Err(Error::LikelyPolynomial {
            order,
            best_estimate: estimate.abs(),
            threshold: floor,
        });
    }
    let half = order as f64 / 2.0;
    let denom = step.powi(order as i32) * estimate;
    let terms = (0..=order)
        .map(|j| {
            let sign = if j % 2 == 0 { 1.0 } else { -1.0 };
            OneDTerm {
                coeff: sign * binomial(order, j) / denom,
                weight: (half - j as f64) * step,
                threshold: theta,
            }
        })
        .collect();
    Ok(OneDNetwork {
        terms,
        activation: sigma.clone(),
        interval,
    })
}

/// Picks `θ_k` by scanning Θ, then sweeps the step and keeps the network with
/// the smallest measured error against `t^k` on `interval`.
pub fn monomial_network_swept(
    sigma: &NetActivation,
    order: usize,
    interval: (f64, f64),
    opts: &OneDOptions,
) -> Result<MonomialFit> {
    let probe = default_step(order, opts.thresholds.scan_length(opts.theta_search.window).max(1e-3));
    let (theta, _) = find_nonvanishing_theta_with(sigma, order, &opts.thresholds, probe, opts.theta_search)?;
    let target = |t: f64| t.powi(order as i32);
    let mut best: Option<MonomialFit> = None;
    for &h in &opts.steps {
        let Ok(network) = monomial_network_with(sigma, order, theta, h, interval, opts.theta_search.significance)
        else {
            continue;
        };
        let error = network.sup_error(target, opts.grid_points);
        if !error.is_finite() {
            continue;
        }
        if best.as_ref().is_none_or(|b| error < b.error) {
            let estimate = deriv_est(sigma, order, -theta, h);
            best = Some(MonomialFit {
                order,
                theta,
                step: h,
                estimate,
                network,
                error,
            });
        }
        if order == 0 {
            break;
        }
    }
    best.ok_or(Error::LikelyPolynomial {
        order,
        best_estimate: 0.0,
        threshold: 0.0,
    })
}

/// Monomial networks on `[-1, 1]` for orders `0..=max_degree`, built once per
/// activation and reused across terms.
#[derive(Debug, Clone)]
pub struct MonomialBank {
    pub activation: NetActivation,
    pub fits: Vec<MonomialFit>,
}

impl MonomialBank {
    pub fn build(sigma: &NetActivation, opts: &OneDOptions) -> Result<Self> {
        let fits = (0..=opts.max_degree)
            .map(|k| monomial_network_swept(sigma, k, (-1.0, 1.0), opts))
            .collect::<Result<Vec<_>>>()?;
        Ok(MonomialBank {
            activation: sigma.clone(),
            fits,
        })
    }

    pub fn max_degree(&self) -> usize {
        self.fits.len() - 1
    }

    /// Network for `sum_k q_k u^k` on `u ∈ [-1, 1]`.
    fn unit_polynomial(&self, q: &[f64]) -> Result<OneDNetwork> {
        if q.len() > self.fits.len() {
            return Err(Error::invalid(format!(
                "degree {} exceeds the monomial bank (max {})",
                q.len() - 1,
                self.max_degree()
            )));
        }
        let mut net = OneDNetwork::empty(self.activation.clone(), (-1.0, 1.0));
        for (k, &c) in q.iter().enumerate() {
            if c == 0.0 {
                continue;
            }
            for term in &self.fits[k].network.terms {
                net.terms.push(OneDTerm {
                    coeff: c * term.coeff,
                    ..*term
                });
            }
        }
        Ok(net)
    }
}

/// Outcome of a one-dimensional construction with its measured error.
#[derive(Debug, Clone, PartialEq)]
pub struct OneDFit {
    pub network: OneDNetwork,
    pub error: f64,
    pub budget: f64,
    pub within_budget: bool,
    /// Polynomial degree used (0 for the exact and empty cases).
    pub degree: usize,
    pub route: Route,
}

/// How a one-dimensional target was realized.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Route {
    /// Zero coefficient, no neurons.
    Empty,
    /// `σ = exp`: one neuron is exact.
    Exact,
    /// Chebyshev polynomial realized through monomial networks.
    Chebyshev,
    /// Trained one-dimensional network.
    Trained,
}

fn affine(interval: (f64, f64)) -> Result<(f64, f64)> {
    let (a, b) = interval;
    if !(a.is_finite() && b.is_finite() && a < b) {
        return Err(Error::invalid(format!("interval [{a}, {b}] must be finite with a < b")));
    }
    Ok((0.5 * (a + b), 0.5 * (b - a)))
}

/// Network for the polynomial `coeffs` (ascending, in `t`) on `interval`, with
/// the measured error compared against `budget`.
pub fn poly_network(
    sigma: &NetActivation,
    coeffs: &[f64],
    interval: (f64, f64),
    budget: f64,
    opts: &OneDOptions,
) -> Result<OneDFit> {
    let degree = coeffs.iter().rposition(|&c| c != 0.0).map_or(0, |d| d);
    let opts = OneDOptions {
        max_degree: degree,
        ..opts.clone()
    };
    if coeffs.iter().all(|&c| c == 0.0) {
        return Ok(OneDFit {
            network: OneDNetwork::empty(sigma.clone(), interval),
            error: 0.0,
            budget,
            within_budget: true,
            degree: 0,
            route: Route::Empty,
        });
    }
    let bank = MonomialBank::build(sigma, &opts)?;
    poly_network_from_bank(&bank, coeffs, interval, budget, &opts)
}

fn poly_network_from_bank(
    bank: &MonomialBank,
    coeffs: &[f64],
    interval: (f64, f64),
    budget: f64,
    opts: &OneDOptions,
) -> Result<OneDFit> {
    let (m, s) = affine(interval)?;
    let len = coeffs.iter().rposition(|&c| c != 0.0).map_or(0, |d| d + 1);
    let q = affine_substitute(&coeffs[..len], m, s);
    let network = bank.unit_polynomial(&q)?.in_original_variable(m, s, interval);
    network.check_thresholds(&opts.thresholds)?;
    let error = network.sup_error(|t| crate::numeric::horner(coeffs, t), opts.grid_points);
    Ok(OneDFit {
        network,
        error,
        budget,
        within_budget: error <= budget,
        degree: len.saturating_sub(1),
        route: if len == 0 { Route::Empty } else { Route::Chebyshev },
    })
}

/// Network for `t ↦ a e^t` on `interval` within `budget`.
pub fn exp_1d_network(
    sigma: &NetActivation,
    scale: f64,
    interval: (f64, f64),
    budget: f64,
    opts: &OneDOptions,
) -> Result<OneDFit> {
    let bank = if is_exp(sigma) {
        None
    } else {
        Some(MonomialBank::build(sigma, opts)?)
    };
    scaled_exp_1d_network(sigma, bank.as_ref(), scale, 1.0, interval, budget, opts)
}

fn is_exp(sigma: &NetActivation) -> bool {
    matches!(sigma, NetActivation::Plain(Activation::Exp))
}

/// Network for `t ↦ a e^{α t}` on `interval` within `budget`.
///
/// Route A fits `a e^{α t}` by Chebyshev interpolation of increasing degree
/// and realizes the polynomial through the monomial bank; route B trains a
/// small network and is used only when route A misses the budget and does
/// worse.
pub fn scaled_exp_1d_network(
    sigma: &NetActivation,
    bank: Option<&MonomialBank>,
    scale: f64,
    rate: f64,
    interval: (f64, f64),
    budget: f64,
    opts: &OneDOptions,
) -> Result<OneDFit> {
    let (m, s) = affine(interval)?;
    let target = |t: f64| scale * (rate * t).exp();
    if scale == 0.0 {
        return Ok(OneDFit {
            network: OneDNetwork::empty(sigma.clone(), interval),
            error: 0.0,
            budget,
            within_budget: true,
            degree: 0,
            route: Route::Empty,
        });
    }
    if is_exp(sigma) {
        // a e^{α t} = a e^{θ} exp(α t - θ) for any admissible θ
        let theta = if opts.thresholds.contains(0.0) {
            0.0
        } else {
            let (lo, hi) = (opts.thresholds.lo, opts.thresholds.hi);
            if lo.is_finite() && hi.is_finite() {
                0.5 * (lo + hi)
            } else if lo.is_finite() {
                lo + 1.0
            } else {
                hi - 1.0
            }
        };
        let network = OneDNetwork {
            terms: vec![OneDTerm {
                coeff: scale * theta.exp(),
                weight: rate,
                threshold: theta,
            }],
            activation: sigma.clone(),
            interval,
        };
        let error = network.sup_error(target, opts.grid_points);
        return Ok(OneDFit {
            network,
            error,
            budget,
            within_budget: error <= budget,
            degree: 0,
            route: Route::Exact,
        });
    }
    let owned;
    let bank = match bank {
        Some(b) => b,
        None => {
            owned = MonomialBank::build(sigma, opts)?;
            &owned
        }
    };
    let unit = |u: f64| scale * (rate * (m + s * u)).exp();
    let check = linspace(-1.0, 1.0, opts.grid_points);
    let mut best: Option<OneDFit> = None;
    let mut first_threshold_error = None;
    for degree in 0..=bank.max_degree().min(opts.max_degree) {
        let cheb = ChebyshevSeries::fit(degree, unit);
        let fit_error = check.iter().map(|&u| (cheb.eval(u) - unit(u)).abs()).fold(0.0, f64::max);
        if fit_error > 0.5 * budget && degree < bank.max_degree().min(opts.max_degree) {
            continue;
        }
        let q = cheb.to_monomial();
        let network = bank.unit_polynomial(&q)?.in_original_variable(m, s, interval);
        if let Err(e) = network.check_thresholds(&opts.thresholds) {
            first_threshold_error.get_or_insert(e);
            continue;
        }
        let error = network.sup_error(target, opts.grid_points);
        let candidate = OneDFit {
            network,
            error,
            budget,
            within_budget: error <= budget,
            degree,
            route: Route::Chebyshev,
        };
        let done = candidate.within_budget;
        if best.as_ref().is_none_or(|b| candidate.error < b.error) {
            best = Some(candidate);
        }
        if done {
            break;
        }
    }
    if best.as_ref().is_none_or(|b| !b.within_budget) && opts.training_fallback {
        if let Ok(trained) = trained_exp_network(sigma, scale, rate, interval, budget, opts) {
            if best.as_ref().is_none_or(|b| trained.error < b.error) {
                best = Some(trained);
            }
        }
    }
    match (best, first_threshold_error) {
        (Some(b), _) => Ok(b),
        (None, Some(e)) => Err(e),
        (None, None) => Err(Error::invalid("no one-dimensional construction was possible")),
    }
}

fn trained_exp_network(
    sigma: &NetActivation,
    scale: f64,
    rate: f64,
    interval: (f64, f64),
    budget: f64,
    opts: &OneDOptions,
) -> Result<OneDFit> {
    let (m, s) = affine(interval)?;
    let line = SpaceDescriptor::euclidean(1)?;
    let norm = scale.abs() * (rate * m).exp();
    let data: Vec<(Element, f64)> = linspace(-1.0, 1.0, 257)
        .into_iter()
        .map(|u| {
            let y = scale * (rate * (m + s * u)).exp() / norm;
            Element::new(line.clone(), vec![u]).map(|x| (x, y))
        })
        .collect::<Result<_>>()?;
    let net = ShallowNetwork::init(line, sigma.clone(), opts.fallback_width, opts.fallback_seed, 1.0)?;
    let cfg = TrainConfig {
        learning_rate: 0.01,
        iterations: opts.fallback_iterations,
        seed: opts.fallback_seed,
        optimizer: crate::network::Optimizer::Momentum { beta: 0.9 },
        gradient_mode: crate::network::GradientMode::Subgradient,
        ..TrainConfig::default()
    };
    let trained = net.train(&data, &cfg)?.network;
    let unit = OneDNetwork {
        terms: trained
            .neurons()
            .iter()
            .map(|n| OneDTerm {
                coeff: n.coeff * norm,
                weight: n.functional.rep()[0],
                threshold: n.threshold,
            })
            .collect(),
        activation: sigma.clone(),
        interval: (-1.0, 1.0),
    };
    let network = unit.in_original_variable(m, s, interval);
    network.check_thresholds(&opts.thresholds)?;
    let error = network.sup_error(|t| scale * (rate * t).exp(), opts.grid_points);
    Ok(OneDFit {
        network,
        error,
        budget,
        within_budget: error <= budget,
        degree: 0,
        route: Route::Trained,
    })
}

/// One dictionary term `a exp(α r(x))`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExpTerm {
    pub coeff: f64,
    pub functional: Functional,
    /// Exponent rate `α`; 1 unless the functional was sphere-normalized.
    pub rate: f64,
}

impl ExpTerm {
    pub fn exponent(&self, x: &Element) -> Result<f64> {
        Ok(self.rate * self.functional.pair(x)?)
    }
}

/// Fitted exponential model `sum_i a_i exp(α_i r_i(x))`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExpModel {
    pub terms: Vec<ExpTerm>,
    /// Max absolute error on the held-out validation sample.
    pub stage1_error: f64,
    /// Max absolute error on the training sample.
    pub train_error: f64,
    /// Largest `|α_i r_i(x)|` over the validation sample.
    pub max_exponent: f64,
    /// `max_B |r_i|` per term when the dictionary was sphere-normalized.
    pub sphere_maxima: Option<Vec<f64>>,
    pub ridge: f64,
    pub seed: u64,
}

impl ExpModel {
    pub fn eval(&self, x: &Element) -> Result<f64> {
        let mut v = Vec::with_capacity(self.terms.len());
        for t in &self.terms {
            v.push(t.coeff * t.exponent(x)?.exp());
        }
        Ok(pairwise_sum(&v))
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }
}

/// Settings of the dictionary fit.
#[derive(Debug, Clone, PartialEq)]
pub struct FitOptions {
    pub train_size: usize,
    pub validation_size: usize,
    /// Largest allowed `|α_i r_i(x)|` on the training sample.
    pub exponent_cap: f64,
    /// Each random functional is rescaled so its training exponent range is
    /// `[-s, s]`-bounded with `s` uniform in this range (capped by `exponent_cap`).
    pub scale_range: (f64, f64),
    /// Include the zero functional, whose exponential is the constant 1.
    pub include_constant: bool,
    /// Functionals placed in the dictionary as given (after the constant).
    pub extra: Vec<Functional>,
    /// Normalize every random functional on this set first.
    pub sphere: Option<Vec<Element>>,
    /// Seed for the training and validation samples; `None` derives it from
    /// the sampler's seed.
    pub data_seed: Option<u64>,
    /// Number of worst validation points from which a coordinate ascent
    /// inside `K` looks for larger errors (0 keeps the plain sample maximum).
    pub sup_refinement: usize,
    pub refinement_passes: usize,
}

impl Default for FitOptions {
    fn default() -> Self {
        FitOptions {
            train_size: 8192,
            validation_size: 4096,
            exponent_cap: 6.0,
            scale_range: (0.5, 1.5),
            include_constant: true,
            extra: Vec::new(),
            sphere: None,
            data_seed: None,
            sup_refinement: 16,
            refinement_passes: 3,
        }
    }
}

/// Stream tags for seeds derived from a parent seed.
mod stream {
    pub const TRAIN: u64 = 1;
    pub const VALIDATION: u64 = 2;
    pub const FRESH: u64 = 3;
    pub const DICTIONARY: u64 = 4;
}

/// The `index`-th random dictionary functional: i.i.d. standard normal dual
/// coordinates from a seed derived from `(seed, index)`, plus its exponent
/// scale drawn from `scale_range`.
pub fn dictionary_draw(
    space: &crate::spaces::Space,
    seed: u64,
    index: usize,
    scale_range: (f64, f64),
) -> (Functional, f64) {
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(derive_seed(seed, stream::DICTIONARY), index as u64));
    let f = Functional::random_normal(space.clone(), &mut rng);
    let (lo, hi) = scale_range;
    let s = if hi > lo { rng.random_range(lo..hi) } else { lo };
    (f, s)
}

struct Data {
    train: Vec<Element>,
    train_y: Vec<f64>,
    validation: Vec<Element>,
    validation_y: Vec<f64>,
}

type Target<'a> = &'a (dyn Fn(&Element) -> f64 + Sync);

fn draw_data(g: Target, sampler: &CompactSampler, opts: &FitOptions) -> Result<Data> {
    let base = opts.data_seed.unwrap_or(sampler.seed());
    let train = sampler.fork(derive_seed(base, stream::TRAIN)).sample(opts.train_size);
    let validation = sampler
        .fork(derive_seed(base, stream::VALIDATION))
        .sample(opts.validation_size);
    let eval = |xs: &[Element]| -> Result<Vec<f64>> {
        xs.iter()
            .map(|x| {
                let y = g(x);
                if y.is_finite() {
                    Ok(y)
                } else {
                    Err(Error::non_finite("target value"))
                }
            })
            .collect()
    };
    Ok(Data {
        train_y: eval(&train)?,
        validation_y: eval(&validation)?,
        train,
        validation,
    })
}

fn max_abs_pair(f: &Functional, xs: &[Element]) -> f64 {
    xs.iter().map(|x| f.pair_unchecked(x.coeffs()).abs()).fold(0.0, f64::max)
}

fn build_dictionary(
    sampler: &CompactSampler,
    n: usize,
    seed: u64,
    opts: &FitOptions,
    train: &[Element],
) -> Result<(Vec<ExpTerm>, Option<Vec<f64>>)> {
    let space = sampler.space();
    let mut terms = Vec::with_capacity(n);
    let mut maxima = opts.sphere.as_ref().map(|_| Vec::with_capacity(n));
    if opts.include_constant && terms.len() < n {
        terms.push(ExpTerm {
            coeff: 0.0,
            functional: Functional::zero(space.clone()),
            rate: 0.0,
        });
        if let Some(m) = maxima.as_mut() {
            m.push(0.0);
        }
    }
    for f in &opts.extra {
        if terms.len() >= n {
            break;
        }
        space.ensure_same(f.space())?;
        terms.push(ExpTerm {
            coeff: 0.0,
            functional: f.clone(),
            rate: 1.0,
        });
        if let Some(m) = maxima.as_mut() {
            m.push(f64::NAN);
        }
    }
    let mut index = 0usize;
    while terms.len() < n {
        let (raw, s) = dictionary_draw(space, seed, index, opts.scale_range);
        index += 1;
        let s = s.min(opts.exponent_cap);
        let (functional, sphere_max) = match &opts.sphere {
            None => (raw, None),
            Some(basis) => match raw.normalize_to_sphere(basis) {
                Ok((v, _)) => {
                    let m = max_abs_pair(&v, basis);
                    (v, Some(m))
                }
                Err(Error::DegenerateFunctional) => continue,
                Err(e) => return Err(e),
            },
        };
        let range = max_abs_pair(&functional, train);
        if range == 0.0 {
            continue;
        }
        let term = match sphere_max {
            None => ExpTerm {
                coeff: 0.0,
                functional: functional.scaled(s / range),
                rate: 1.0,
            },
            Some(m) => {
                if let Some(list) = maxima.as_mut() {
                    list.push(m);
                }
                ExpTerm {
                    coeff: 0.0,
                    functional,
                    rate: s / range,
                }
            }
        };
        terms.push(term);
    }
    Ok((terms, maxima))
}

/// Fits `g` by `sum_i a_i exp(α_i r_i(x))` with an `n`-term random dictionary
/// and default options.
pub fn exp_dictionary_fit(
    g: Target,
    sampler: &CompactSampler,
    n: usize,
    ridge: f64,
    seed: u64,
) -> Result<ExpModel> {
    exp_dictionary_fit_with(g, sampler, n, ridge, seed, &FitOptions::default())
}

pub fn exp_dictionary_fit_with(
    g: Target,
    sampler: &CompactSampler,
    n: usize,
    ridge: f64,
    seed: u64,
    opts: &FitOptions,
) -> Result<ExpModel> {
    let data = draw_data(g, sampler, opts)?;
    fit_on(g, &data, sampler, n, ridge, seed, opts)
}

fn fit_on(
    g: Target,
    data: &Data,
    sampler: &CompactSampler,
    n: usize,
    ridge: f64,
    seed: u64,
    opts: &FitOptions,
) -> Result<ExpModel> {
    if n == 0 {
        return Err(Error::invalid("dictionary size must be at least 1"));
    }
    if !(ridge.is_finite() && ridge >= 0.0) {
        return Err(Error::invalid(format!("ridge parameter {ridge} must be >= 0")));
    }
    if opts.train_size == 0 || opts.validation_size == 0 {
        return Err(Error::invalid("training and validation samples must be nonempty"));
    }
    let (mut terms, sphere_maxima) = build_dictionary(sampler, n, seed, opts, &data.train)?;
    let features = |xs: &[Element]| -> DMatrix<f64> {
        DMatrix::from_fn(xs.len(), terms.len(), |j, i| {
            let t = &terms[i];
            (t.rate * t.functional.pair_unchecked(xs[j].coeffs())).exp()
        })
    };
    let phi = features(&data.train);
    let y = DVector::from_column_slice(&data.train_y);
    let phi_t = phi.transpose();
    let mut gram = &phi_t * &phi;
    let mean_diag = gram.diagonal().mean();
    let shift = ridge * mean_diag;
    for i in 0..gram.nrows() {
        gram[(i, i)] += shift;
    }
    let ill = |gram: &DMatrix<f64>| {
        let eig = gram.clone().symmetric_eigenvalues();
        let hi = eig.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let lo = eig.iter().fold(f64::INFINITY, |m, v| m.min(v.abs()));
        Error::IllConditioned { condition: hi / lo }
    };
    let chol = gram.clone().cholesky().ok_or_else(|| ill(&gram))?;
    let mut a = chol.solve(&(&phi_t * &y));
    // Iterative refinement against the unregularized residual recovers most
    // of the accuracy the normal equations lose.
    for _ in 0..2 {
        let residual = &y - &phi * &a;
        let correction = chol.solve(&(&phi_t * &residual - shift * &a));
        a += correction;
    }
    if a.iter().any(|v| !v.is_finite()) {
        return Err(ill(&gram));
    }
    let predict = |phi: &DMatrix<f64>| phi * &a;
    let train_error = max_residual(&predict(&phi), &data.train_y);
    let phi_val = features(&data.validation);
    for (t, c) in terms.iter_mut().zip(a.iter()) {
        t.coeff = *c;
    }
    let val_pred = predict(&phi_val);
    let mut stage1_error = max_residual(&val_pred, &data.validation_y);
    let max_exponent = phi_val.iter().fold(0.0f64, |m, v| m.max(v.ln().abs()));
    if max_exponent > opts.exponent_cap * 1.5 {
        return Err(Error::invalid(format!(
            "dictionary exponents reach {max_exponent:.3}, beyond the cap {}",
            opts.exponent_cap
        )));
    }
    let mut model = ExpModel {
        terms,
        stage1_error,
        train_error,
        max_exponent,
        sphere_maxima,
        ridge,
        seed,
    };
    if opts.sup_refinement > 0 {
        let mut order: Vec<usize> = (0..data.validation.len()).collect();
        let err = |j: usize| (val_pred[j] - data.validation_y[j]).abs();
        order.sort_by(|&i, &j| err(j).total_cmp(&err(i)).then(i.cmp(&j)));
        let starts: Vec<&Element> = order
            .iter()
            .take(opts.sup_refinement)
            .map(|&j| &data.validation[j])
            .collect();
        let residual = |x: &Element| -> f64 { model.eval(x).map_or(f64::NAN, |v| g(x) - v) };
        stage1_error = stage1_error.max(refine_sup(&residual, sampler, &starts, opts.refinement_passes)?);
    }
    model.stage1_error = stage1_error;
    Ok(model)
}

/// Coordinate ascent of `|residual|` inside `K` from each start; returns the
/// largest value found.
fn refine_sup(
    residual: &(dyn Fn(&Element) -> f64 + Sync),
    sampler: &CompactSampler,
    starts: &[&Element],
    passes: usize,
) -> Result<f64> {
    let climb = |x: &&Element| -> Result<f64> {
        let mut u = sampler.latent(x)?;
        let score = |u: &[f64]| {
            let v = residual(&sampler.from_latent(u)).abs();
            if v.is_nan() {
                0.0
            } else {
                v
            }
        };
        let mut best = score(&u);
        for pass in 0..passes {
            for i in 0..u.len() {
                let (lo, hi) = sampler.latent_range(&u, i);
                let current = u[i];
                let candidates: Vec<f64> = if pass == 0 {
                    linspace(lo, hi, 9)
                } else {
                    let w = (hi - lo) / (8.0 * 4f64.powi(pass as i32 - 1));
                    [-1.0, -0.5, -0.25, 0.25, 0.5, 1.0]
                        .iter()
                        .map(|f| (current + f * w).clamp(lo, hi))
                        .collect()
                };
                let mut keep = current;
                for c in candidates {
                    u[i] = c;
                    let v = score(&u);
                    if v > best {
                        best = v;
                        keep = c;
                    }
                }
                u[i] = keep;
            }
        }
        Ok(best)
    };
    let found = starts.par_iter().map(climb).collect::<Result<Vec<f64>>>()?;
    Ok(found.into_iter().fold(0.0, f64::max))
}

fn max_residual(pred: &DVector<f64>, y: &[f64]) -> f64 {
    pred.iter().zip(y).map(|(p, y)| (p - y).abs()).fold(0.0, f64::max)
}

/// Seeds used by a construction.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReportSeeds {
    pub dictionary: u64,
    pub train: u64,
    pub validation: u64,
    pub fresh: u64,
}

/// Stage-1 error after each dictionary size tried.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GrowthStep {
    pub dict_size: usize,
    pub stage1_error: f64,
}

/// Audit trail of a construction.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConstructionReport {
    pub dict_size: usize,
    /// Padded hull `[lo, hi]` of `r_i(x)` over the training sample, per term.
    pub exp_ranges: Vec<[f64; 2]>,
    pub stage1_error: f64,
    pub stage2_errors: Vec<f64>,
    pub final_width: usize,
    /// `stage1_error + sum(stage2_errors)`.
    pub total_estimate: f64,
    /// Max error of the assembled network on a fresh sample.
    pub validation_error: f64,
    pub seeds: ReportSeeds,
    /// Wall-clock milliseconds per stage, only when timing was requested.
    pub timings_ms: Option<BTreeMap<String, f64>>,
    pub budget: f64,
    pub activation: String,
    pub stage1_budget_met: bool,
    pub stage2_budget_met: bool,
    pub degrees: Vec<usize>,
    pub routes: Vec<Route>,
    pub growth: Vec<GrowthStep>,
    pub sphere_maxima: Option<Vec<f64>>,
    pub validation_size: usize,
}

/// Settings of [`compose`] and [`approximate`].
#[derive(Debug, Clone, PartialEq)]
pub struct ConstructOptions {
    pub fit: FitOptions,
    pub one_d: OneDOptions,
    pub ridge: f64,
    /// Dictionary seed.
    pub seed: u64,
    /// First dictionary size; it doubles until the fit meets `ε/2` or the cap.
    pub dict_start: usize,
    pub dict_cap: usize,
    /// Relative padding of each exponent hull on both sides.
    pub hull_margin: f64,
    pub fresh_size: usize,
    /// Half-width and node count used to mollify non-smooth activations.
    pub mollifier: (f64, usize),
    /// Largest degree probed when checking that `σ` is not a polynomial.
    pub polynomial_probe: usize,
    pub parallel: bool,
    pub record_timings: bool,
}

impl Default for ConstructOptions {
    fn default() -> Self {
        ConstructOptions {
            fit: FitOptions::default(),
            one_d: OneDOptions::default(),
            ridge: 1e-10,
            seed: 0,
            dict_start: 16,
            dict_cap: 2048,
            hull_margin: 0.1,
            fresh_size: 4096,
            mollifier: (0.25, 4096),
            polynomial_probe: 12,
            parallel: true,
            record_timings: false,
        }
    }
}

struct Timer {
    enabled: bool,
    map: BTreeMap<String, f64>,
    last: Instant,
}

impl Timer {
    fn new(enabled: bool) -> Self {
        Timer {
            enabled,
            map: BTreeMap::new(),
            last: Instant::now(),
        }
    }

    fn lap(&mut self, name: &str) {
        if self.enabled {
            let now = Instant::now();
            *self.map.entry(name.to_string()).or_insert(0.0) += (now - self.last).as_secs_f64() * 1e3;
            self.last = now;
        }
    }

    fn finish(self) -> Option<BTreeMap<String, f64>> {
        self.enabled.then_some(self.map)
    }
}

fn hull(term: &ExpTerm, xs: &[Element], sampler: &CompactSampler, margin: f64) -> Result<(f64, f64)> {
    let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
    for x in xs {
        let v = term.functional.pair_unchecked(x.coeffs());
        lo = lo.min(v);
        hi = hi.max(v);
    }
    if !(lo.is_finite() && hi.is_finite()) {
        return Err(Error::non_finite("exponent hull"));
    }
    let support = sampler.support(&term.functional)?;
    let pad = margin * (hi - lo);
    lo = (lo - pad).max(-support);
    hi = (hi + pad).min(support);
    if hi - lo <= 1e-12 * hi.abs().max(lo.abs()).max(1.0) {
        let mid = 0.5 * (lo + hi);
        let half = 1e-3 * mid.abs().max(1.0);
        lo = mid - half;
        hi = mid + half;
    }
    Ok((lo, hi))
}

/// Replaces every term of `model` by a one-dimensional network on its
/// exponent hull and assembles the shallow network; the assembled network is
/// then checked against `g` on a fresh sample of `K`.
pub fn compose(
    model: &ExpModel,
    sigma: &NetActivation,
    budget: f64,
    sampler: &CompactSampler,
    g: Target,
    opts: &ConstructOptions,
) -> Result<(ShallowNetwork, ConstructionReport)> {
    let mut timer = Timer::new(opts.record_timings);
    let report = compose_inner(model, sigma, budget, sampler, g, opts, &mut timer, Vec::new())?;
    Ok(report)
}

/// Trains route-B networks for the terms that miss their own budget, worst
/// excess first, until the summed stage-2 error fits `share`.
fn train_worst_terms(
    model: &ExpModel,
    sigma: &NetActivation,
    fits: &mut [((f64, f64), OneDFit)],
    share: f64,
    opts: &OneDOptions,
) {
    let mut order: Vec<usize> = (0..fits.len()).filter(|&i| !fits[i].1.within_budget).collect();
    order.sort_by(|&i, &j| {
        let excess = |k: usize| fits[k].1.error - fits[k].1.budget;
        excess(j).total_cmp(&excess(i)).then(i.cmp(&j))
    });
    for i in order {
        let total: f64 = fits.iter().map(|(_, f)| f.error).sum();
        if total <= share {
            break;
        }
        let term = &model.terms[i];
        let (range, fit) = &fits[i];
        if let Ok(trained) = trained_exp_network(sigma, term.coeff, term.rate, *range, fit.budget, opts) {
            if trained.error < fit.error {
                fits[i].1 = trained;
            }
        }
    }
}

#[allow(clippy::too_many_arguments)]
fn compose_inner(
    model: &ExpModel,
    sigma: &NetActivation,
    budget: f64,
    sampler: &CompactSampler,
    g: Target,
    opts: &ConstructOptions,
    timer: &mut Timer,
    growth: Vec<GrowthStep>,
) -> Result<(ShallowNetwork, ConstructionReport)> {
    if !(budget.is_finite() && budget > 0.0) {
        return Err(Error::invalid(format!("error budget {budget} must be positive")));
    }
    let base = opts.fit.data_seed.unwrap_or(sampler.seed());
    let seeds = ReportSeeds {
        dictionary: model.seed,
        train: derive_seed(base, stream::TRAIN),
        validation: derive_seed(base, stream::VALIDATION),
        fresh: derive_seed(base, stream::FRESH),
    };
    let hull_sample = sampler.fork(seeds.train).sample(opts.fit.train_size);
    let n = model.terms.len();
    let term_budget = budget / (2.0 * n as f64);
    let bank = if is_exp(sigma) || model.terms.iter().all(|t| t.coeff == 0.0) {
        None
    } else {
        Some(MonomialBank::build(sigma, &opts.one_d)?)
    };
    timer.lap("monomial_bank");
    let chebyshev_only = OneDOptions {
        training_fallback: false,
        ..opts.one_d.clone()
    };
    let build = |term: &ExpTerm| -> Result<((f64, f64), OneDFit)> {
        let range = hull(term, &hull_sample, sampler, opts.hull_margin)?;
        let fit = scaled_exp_1d_network(sigma, bank.as_ref(), term.coeff, term.rate, range, term_budget, &chebyshev_only)?;
        Ok((range, fit))
    };
    let mut fits: Vec<((f64, f64), OneDFit)> = if opts.parallel {
        model.terms.par_iter().map(build).collect::<Result<_>>()?
    } else {
        model.terms.iter().map(build).collect::<Result<_>>()?
    };
    timer.lap("stage2");
    if opts.one_d.training_fallback {
        train_worst_terms(model, sigma, &mut fits, 0.5 * budget, &opts.one_d);
        timer.lap("stage2_fallback");
    }
    let mut neurons = Vec::new();
    for (term, (_, fit)) in model.terms.iter().zip(&fits) {
        neurons.extend(fit.network.compose_with(&term.functional));
    }
    let network = ShallowNetwork::new(sampler.space().clone(), sigma.clone(), neurons)?;
    let fresh = sampler.fork(seeds.fresh).sample(opts.fresh_size);
    let parallelism = if opts.parallel {
        Parallelism::Rayon
    } else {
        Parallelism::Serial
    };
    let outputs = network.forward_batch(&fresh, parallelism)?;
    let validation_error = fresh
        .iter()
        .zip(&outputs)
        .map(|(x, y)| (g(x) - y).abs())
        .fold(0.0, f64::max);
    timer.lap("validation");
    let stage2_errors: Vec<f64> = fits.iter().map(|(_, f)| f.error).collect();
    let total_estimate = model.stage1_error + stage2_errors.iter().sum::<f64>();
    debug_assert!(total_estimate <= model.stage1_error + stage2_errors.iter().sum::<f64>());
    let report = ConstructionReport {
        dict_size: n,
        exp_ranges: fits.iter().map(|((lo, hi), _)| [*lo, *hi]).collect(),
        stage1_error: model.stage1_error,
        stage2_errors,
        final_width: network.width(),
        total_estimate,
        validation_error,
        seeds,
        timings_ms: None,
        budget,
        activation: sigma.id(),
        stage1_budget_met: model.stage1_error <= 0.5 * budget,
        stage2_budget_met: fits.iter().all(|(_, f)| f.within_budget),
        degrees: fits.iter().map(|(_, f)| f.degree).collect(),
        routes: fits.iter().map(|(_, f)| f.route).collect(),
        growth,
        sphere_maxima: model.sphere_maxima.clone(),
        validation_size: opts.fresh_size,
    };
    Ok((network, report))
}

/// Builds a shallow network approximating `g` on the sampled compact set
/// within `budget`, or a best-effort network with the misses flagged in the
/// report.
pub fn approximate(
    g: Target,
    sampler: &CompactSampler,
    sigma: &Activation,
    budget: f64,
    opts: &ConstructOptions,
) -> Result<(ShallowNetwork, ConstructionReport)> {
    if !(budget.is_finite() && budget > 0.0) {
        return Err(Error::invalid(format!("error budget {budget} must be positive")));
    }
    let mut timer = Timer::new(opts.record_timings);
    let window = opts.one_d.theta_search.window;
    if let Some(degree) = detect_polynomial(sigma, opts.polynomial_probe, (-window, window)) {
        return Err(Error::InadmissibleActivation {
            activation: sigma.id(),
            degree,
        });
    }
    let net_sigma: NetActivation = if sigma.is_smooth() {
        sigma.clone().into()
    } else {
        mollify(sigma, opts.mollifier.0, opts.mollifier.1)?.into()
    };
    timer.lap("admissibility");
    let data = draw_data(g, sampler, &opts.fit)?;
    timer.lap("sampling");
    let mut growth = Vec::new();
    let mut n = opts.dict_start.max(1);
    let model = loop {
        let model = fit_on(g, &data, sampler, n, opts.ridge, opts.seed, &opts.fit)?;
        growth.push(GrowthStep {
            dict_size: n,
            stage1_error: model.stage1_error,
        });
        if model.stage1_error <= 0.5 * budget || n >= opts.dict_cap {
            break model;
        }
        n = (2 * n).min(opts.dict_cap);
    };
    timer.lap("stage1");
    let (network, mut report) = compose_inner(&model, &net_sigma, budget, sampler, g, opts, &mut timer, growth)?;
    report.timings_ms = timer.finish();
    Ok((network, report))
}
