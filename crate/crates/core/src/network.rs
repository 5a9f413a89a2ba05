//! The shallow model `sum_i c_i σ(f_i(x) - θ_i)`: evaluation, analytic
//! gradients of the mean squared error, a small gradient-descent trainer and
//! JSON checkpoints.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::activations::{Activation, MollifiedActivation, DEFAULT_EXP_CAP};
use crate::error::{Error, Result};
use crate::numeric::pairwise_sum;
use crate::spaces::{Atom, Element, Functional, Space};

/// Activation used by a network: a catalog member or its mollified form.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NetActivation {
    Plain(Activation),
    Mollified(MollifiedActivation),
}

impl From<Activation> for NetActivation {
    fn from(a: Activation) -> Self {
        NetActivation::Plain(a)
    }
}

impl From<MollifiedActivation> for NetActivation {
    fn from(m: MollifiedActivation) -> Self {
        NetActivation::Mollified(m)
    }
}

impl NetActivation {
    pub fn id(&self) -> String {
        match self {
            NetActivation::Plain(a) => a.id(),
            NetActivation::Mollified(m) => format!("mollified({}, {})", m.base().id(), m.delta()),
        }
    }

    pub fn base(&self) -> &Activation {
        match self {
            NetActivation::Plain(a) => a,
            NetActivation::Mollified(m) => m.base(),
        }
    }

    pub fn is_smooth(&self) -> bool {
        match self {
            NetActivation::Plain(a) => a.is_smooth(),
            NetActivation::Mollified(_) => true,
        }
    }

    pub fn value(&self, t: f64) -> f64 {
        match self {
            NetActivation::Plain(a) => a.value(t),
            NetActivation::Mollified(m) => m.value(t),
        }
    }

    /// Checked evaluation with the default exponent cap.
    pub fn eval(&self, t: f64) -> Result<f64> {
        match self {
            NetActivation::Plain(a) => a.eval(t),
            NetActivation::Mollified(m) => {
                let reach = t + m.delta();
                if matches!(m.base(), Activation::Exp) && reach > DEFAULT_EXP_CAP {
                    return Err(Error::ActivationOverflow {
                        argument: reach,
                        cap: DEFAULT_EXP_CAP,
                    });
                }
                let v = m.value(t);
                if v.is_finite() {
                    Ok(v)
                } else {
                    Err(Error::non_finite(format!("{} at {t}", self.id())))
                }
            }
        }
    }

    /// Derivative, falling back to the subgradient convention when
    /// `mode` allows it.
    pub fn derivative(&self, t: f64, mode: GradientMode) -> Result<f64> {
        match self {
            NetActivation::Mollified(m) => Ok(m.derivative(t)),
            NetActivation::Plain(a) => match (a.derivative(t), mode) {
                (Some(d), _) => Ok(d),
                (None, GradientMode::Subgradient) => Ok(a.subgradient(t)),
                (None, GradientMode::Smooth) => Err(Error::NonSmoothActivation(a.id())),
            },
        }
    }
}

impl crate::activations::Univariate for NetActivation {
    fn value(&self, t: f64) -> f64 {
        NetActivation::value(self, t)
    }
}

/// How to differentiate through a non-smooth activation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GradientMode {
    /// Refuse activations without a classical derivative.
    #[default]
    Smooth,
    /// Use `σ'(0) := 0` for relu and left slopes for tables.
    Subgradient,
}

/// One hidden unit `c σ(f(x) - θ)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Neuron {
    pub coeff: f64,
    pub functional: Functional,
    pub threshold: f64,
}

/// Whether batch evaluation may use the rayon pool.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Parallelism {
    #[default]
    Serial,
    Rayon,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ShallowNetwork {
    space: Space,
    activation: NetActivation,
    neurons: Vec<Neuron>,
}

/// Gradients of the mean squared error, laid out like the parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub loss: f64,
    pub coeffs: Vec<f64>,
    pub thresholds: Vec<f64>,
    pub functionals: Vec<Vec<f64>>,
}

impl Gradients {
    /// Flattened in the order of [`ShallowNetwork::params`].
    pub fn flatten(&self) -> Vec<f64> {
        let mut out = Vec::new();
        for i in 0..self.coeffs.len() {
            out.push(self.coeffs[i]);
            out.push(self.thresholds[i]);
            out.extend_from_slice(&self.functionals[i]);
        }
        out
    }
}

impl ShallowNetwork {
    /// An empty network (evaluating to zero) is allowed; it arises when every
    /// term of a construction has a zero coefficient.
    pub fn new(space: Space, activation: impl Into<NetActivation>, neurons: Vec<Neuron>) -> Result<Self> {
        for (i, n) in neurons.iter().enumerate() {
            space.ensure_same(n.functional.space())?;
            if !n.coeff.is_finite() || !n.threshold.is_finite() {
                return Err(Error::non_finite(format!("parameters of neuron {i}")));
            }
        }
        Ok(ShallowNetwork {
            space,
            activation: activation.into(),
            neurons,
        })
    }

    /// `r` neurons with every coefficient, threshold and dual coordinate drawn
    /// uniformly from `[-scale, scale]`.
    pub fn init(
        space: Space,
        activation: impl Into<NetActivation>,
        width: usize,
        seed: u64,
        scale: f64,
    ) -> Result<Self> {
        if width == 0 {
            return Err(Error::invalid("network width must be at least 1"));
        }
        if !(scale.is_finite() && scale >= 0.0) {
            return Err(Error::invalid(format!("init scale {scale} must be finite and >= 0")));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let draw = |rng: &mut ChaCha8Rng| {
            if scale == 0.0 {
                0.0
            } else {
                rng.random_range(-scale..=scale)
            }
        };
        let mut neurons = Vec::with_capacity(width);
        for _ in 0..width {
            let coeff = draw(&mut rng);
            let threshold = draw(&mut rng);
            let rep = (0..space.dim()).map(|_| draw(&mut rng)).collect();
            neurons.push(Neuron {
                coeff,
                functional: Functional::new(space.clone(), rep)?,
                threshold,
            });
        }
        ShallowNetwork::new(space, activation, neurons)
    }

    pub fn space(&self) -> &Space {
        &self.space
    }

    pub fn activation(&self) -> &NetActivation {
        &self.activation
    }

    pub fn neurons(&self) -> &[Neuron] {
        &self.neurons
    }

    pub fn width(&self) -> usize {
        self.neurons.len()
    }

    /// Output with every coefficient multiplied by `lambda`.
    pub fn scale_output(&mut self, lambda: f64) {
        for n in &mut self.neurons {
            n.coeff *= lambda;
        }
    }

    pub fn permute(&mut self, order: &[usize]) -> Result<()> {
        let mut seen = vec![false; self.neurons.len()];
        if order.len() != seen.len() || order.iter().any(|&i| i >= seen.len() || std::mem::replace(&mut seen[i], true)) {
            return Err(Error::invalid("not a permutation of the neurons"));
        }
        self.neurons = order.iter().map(|&i| self.neurons[i].clone()).collect();
        Ok(())
    }

    /// Largest `|c_i|`, `|θ_i|` and dual coordinate, for reporting.
    pub fn parameter_magnitudes(&self) -> (f64, f64, f64) {
        let mut m = (0.0f64, 0.0f64, 0.0f64);
        for n in &self.neurons {
            m.0 = m.0.max(n.coeff.abs());
            m.1 = m.1.max(n.threshold.abs());
            m.2 = n.functional.params().iter().fold(m.2, |a, v| a.max(v.abs()));
        }
        m
    }

    /// `sum_i c_i σ(f_i(x) - θ_i)`, summed pairwise in neuron order.
    pub fn forward(&self, x: &Element) -> Result<f64> {
        self.space.ensure_same(x.space())?;
        self.forward_coeffs(x.coeffs())
    }

    fn forward_coeffs(&self, x: &[f64]) -> Result<f64> {
        let mut terms = Vec::with_capacity(self.neurons.len());
        for n in &self.neurons {
            let z = n.functional.pair_unchecked(x) - n.threshold;
            terms.push(n.coeff * self.activation.eval(z)?);
        }
        let out = pairwise_sum(&terms);
        if out.is_finite() {
            Ok(out)
        } else {
            Err(Error::non_finite("network output"))
        }
    }

    /// Outputs for a batch; the per-point results do not depend on the
    /// parallelism setting.
    pub fn forward_batch(&self, xs: &[Element], parallelism: Parallelism) -> Result<Vec<f64>> {
        for x in xs {
            self.space.ensure_same(x.space())?;
        }
        match parallelism {
            Parallelism::Serial => xs.iter().map(|x| self.forward_coeffs(x.coeffs())).collect(),
            Parallelism::Rayon => xs.par_iter().map(|x| self.forward_coeffs(x.coeffs())).collect(),
        }
    }

    /// Mean squared error over `(x, y)` pairs.
    pub fn loss(&self, batch: &[(Element, f64)]) -> Result<f64> {
        if batch.is_empty() {
            return Err(Error::invalid("empty batch"));
        }
        let mut sq = Vec::with_capacity(batch.len());
        for (x, y) in batch {
            let r = self.forward(x)? - y;
            sq.push(r * r);
        }
        Ok(pairwise_sum(&sq) / batch.len() as f64)
    }

    /// Flat parameters: per neuron `c, θ`, then the functional's parameters.
    pub fn params(&self) -> Vec<f64> {
        let mut out = Vec::new();
        for n in &self.neurons {
            out.push(n.coeff);
            out.push(n.threshold);
            out.extend(n.functional.params());
        }
        out
    }

    pub fn param_count(&self) -> usize {
        self.neurons.iter().map(|n| 2 + n.functional.param_count()).sum()
    }

    pub fn set_params(&mut self, params: &[f64]) -> Result<()> {
        if params.len() != self.param_count() {
            return Err(Error::invalid(format!(
                "expected {} parameters, got {}",
                self.param_count(),
                params.len()
            )));
        }
        if params.iter().any(|v| !v.is_finite()) {
            return Err(Error::non_finite("network parameters"));
        }
        let mut at = 0;
        for n in &mut self.neurons {
            let k = n.functional.param_count();
            n.coeff = params[at];
            n.threshold = params[at + 1];
            n.functional.set_params(&params[at + 2..at + 2 + k])?;
            at += 2 + k;
        }
        Ok(())
    }

    /// Exact gradients of the mean squared error.
    pub fn gradients(&self, batch: &[(Element, f64)], mode: GradientMode) -> Result<Gradients> {
        if batch.is_empty() {
            return Err(Error::invalid("empty batch"));
        }
        if mode == GradientMode::Smooth && !self.activation.is_smooth() {
            return Err(Error::NonSmoothActivation(self.activation.id()));
        }
        let r = self.neurons.len();
        let scale = 2.0 / batch.len() as f64;
        let mut g = Gradients {
            loss: 0.0,
            coeffs: vec![0.0; r],
            thresholds: vec![0.0; r],
            functionals: self
                .neurons
                .iter()
                .map(|n| vec![0.0; n.functional.param_count()])
                .collect(),
        };
        let mut sq = Vec::with_capacity(batch.len());
        let mut z = vec![0.0; r];
        let mut s = vec![0.0; r];
        for (x, y) in batch {
            self.space.ensure_same(x.space())?;
            let mut terms = Vec::with_capacity(r);
            for (i, n) in self.neurons.iter().enumerate() {
                z[i] = n.functional.pair_unchecked(x.coeffs()) - n.threshold;
                s[i] = self.activation.eval(z[i])?;
                terms.push(n.coeff * s[i]);
            }
            let residual = pairwise_sum(&terms) - y;
            sq.push(residual * residual);
            let e = scale * residual;
            for (i, n) in self.neurons.iter().enumerate() {
                g.coeffs[i] += e * s[i];
                let d = e * n.coeff * self.activation.derivative(z[i], mode)?;
                g.thresholds[i] -= d;
                let dp = n.functional.pair_gradient(x)?;
                for (acc, v) in g.functionals[i].iter_mut().zip(dp) {
                    *acc += d * v;
                }
            }
        }
        g.loss = pairwise_sum(&sq) / batch.len() as f64;
        if !g.loss.is_finite() {
            return Err(Error::non_finite("loss"));
        }
        Ok(g)
    }

    /// Runs the configured optimizer and returns the trained network with the
    /// loss recorded before every update plus the final loss.
    pub fn train(&self, data: &[(Element, f64)], cfg: &TrainConfig) -> Result<TrainOutcome> {
        cfg.validate()?;
        if data.is_empty() {
            return Err(Error::invalid("empty training set"));
        }
        let mut net = self.clone();
        let mut params = net.params();
        let mut velocity = vec![0.0; params.len()];
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        let mut order: Vec<usize> = (0..data.len()).collect();
        let batch_size = cfg.batch_size.unwrap_or(data.len()).clamp(1, data.len());
        let mut cursor = data.len();
        let mut trace = Vec::with_capacity(cfg.iterations + 1);
        for iteration in 0..cfg.iterations {
            let batch: Vec<(Element, f64)> = if batch_size == data.len() {
                data.to_vec()
            } else {
                if cursor + batch_size > data.len() {
                    order.shuffle(&mut rng);
                    cursor = 0;
                }
                let b = order[cursor..cursor + batch_size]
                    .iter()
                    .map(|&i| data[i].clone())
                    .collect();
                cursor += batch_size;
                b
            };
            let g = match net.gradients(&batch, cfg.gradient_mode) {
                Ok(g) => g,
                Err(Error::NonFinite { .. }) | Err(Error::ActivationOverflow { .. }) => {
                    return Err(Error::Divergence {
                        iteration,
                        loss: f64::INFINITY,
                        trace,
                    })
                }
                Err(e) => return Err(e),
            };
            if g.loss > cfg.divergence_threshold {
                return Err(Error::Divergence {
                    iteration,
                    loss: g.loss,
                    trace,
                });
            }
            trace.push(g.loss);
            let grad = g.flatten();
            match cfg.optimizer {
                Optimizer::GradientDescent => {
                    for (p, d) in params.iter_mut().zip(&grad) {
                        *p -= cfg.learning_rate * d;
                    }
                }
                Optimizer::Momentum { beta } => {
                    for ((p, v), d) in params.iter_mut().zip(&mut velocity).zip(&grad) {
                        *v = beta * *v + d;
                        *p -= cfg.learning_rate * *v;
                    }
                }
            }
            if params.iter().any(|v| !v.is_finite()) {
                return Err(Error::Divergence {
                    iteration,
                    loss: f64::INFINITY,
                    trace,
                });
            }
            net.set_params(&params)?;
        }
        let final_loss = net.loss(data)?;
        if !final_loss.is_finite() || final_loss > cfg.divergence_threshold {
            return Err(Error::Divergence {
                iteration: cfg.iterations,
                loss: final_loss,
                trace,
            });
        }
        trace.push(final_loss);
        Ok(TrainOutcome { network: net, losses: trace })
    }

    pub fn to_checkpoint(&self) -> Checkpoint {
        let atoms: Vec<Vec<Atom>> = self.neurons.iter().map(|n| n.functional.atoms().to_vec()).collect();
        Checkpoint {
            version: crate::VERSION.to_string(),
            space: self.space.clone(),
            activation: self.activation.clone(),
            coeffs: self.neurons.iter().map(|n| n.coeff).collect(),
            thresholds: self.neurons.iter().map(|n| n.threshold).collect(),
            functionals: self.neurons.iter().map(|n| n.functional.rep().to_vec()).collect(),
            atoms: if atoms.iter().all(Vec::is_empty) { Vec::new() } else { atoms },
        }
    }

    pub fn from_checkpoint(c: Checkpoint) -> Result<Self> {
        let r = c.coeffs.len();
        if c.thresholds.len() != r || c.functionals.len() != r || !(c.atoms.is_empty() || c.atoms.len() == r) {
            return Err(Error::Serialization("checkpoint arrays have inconsistent lengths".into()));
        }
        let mut neurons = Vec::with_capacity(r);
        for i in 0..r {
            let atoms = c.atoms.get(i).cloned().unwrap_or_default();
            neurons.push(Neuron {
                coeff: c.coeffs[i],
                functional: Functional::with_atoms(c.space.clone(), c.functionals[i].clone(), atoms)?,
                threshold: c.thresholds[i],
            });
        }
        ShallowNetwork::new(c.space, c.activation, neurons)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(&self.to_checkpoint())?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let c: Checkpoint = serde_json::from_str(text)?;
        Self::from_checkpoint(c)
    }
}

/// Serialized network: space descriptor, activation and flat per-neuron arrays.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub version: String,
    pub space: Space,
    pub activation: NetActivation,
    pub coeffs: Vec<f64>,
    pub thresholds: Vec<f64>,
    pub functionals: Vec<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub atoms: Vec<Vec<Atom>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Optimizer {
    GradientDescent,
    Momentum { beta: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub iterations: usize,
    /// `None` trains full-batch; otherwise batches come from seeded shuffles.
    pub batch_size: Option<usize>,
    pub seed: u64,
    pub optimizer: Optimizer,
    pub gradient_mode: GradientMode,
    pub divergence_threshold: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            learning_rate: 0.05,
            iterations: 1000,
            batch_size: None,
            seed: 0,
            optimizer: Optimizer::GradientDescent,
            gradient_mode: GradientMode::Smooth,
            divergence_threshold: 1e12,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate.is_finite() && self.learning_rate > 0.0) {
            return Err(Error::invalid("learning rate must be positive"));
        }
        if self.iterations == 0 {
            return Err(Error::invalid("iteration budget must be at least 1"));
        }
        if self.batch_size == Some(0) {
            return Err(Error::invalid("batch size must be at least 1"));
        }
        if let Optimizer::Momentum { beta } = self.optimizer {
            if !(0.0..1.0).contains(&beta) {
                return Err(Error::invalid("momentum must lie in [0, 1)"));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub network: ShallowNetwork,
    /// Loss before each update, then the final loss.
    pub losses: Vec<f64>,
}

/// Central-difference gradient of the loss with step `step * max(1, |p|)`.
pub fn numerical_gradient(net: &ShallowNetwork, batch: &[(Element, f64)], step: f64) -> Result<Vec<f64>> {
    let base = net.params();
    let mut probe = net.clone();
    let mut out = Vec::with_capacity(base.len());
    let mut p = base.clone();
    for i in 0..base.len() {
        let h = step * base[i].abs().max(1.0);
        p[i] = base[i] + h;
        probe.set_params(&p)?;
        let up = probe.loss(batch)?;
        p[i] = base[i] - h;
        probe.set_params(&p)?;
        let down = probe.loss(batch)?;
        p[i] = base[i];
        out.push((up - down) / (2.0 * h));
    }
    Ok(out)
}

/// Relative discrepancy `|a - n| / max(|a|, |n|, floor)`.
pub fn relative_gradient_error(analytic: f64, numeric: f64, floor: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(floor)
}

/// Draws a uniform element of `[-scale, scale]` for every coordinate; handy
/// for building test batches.
pub fn uniform_vector<R: Rng + ?Sized>(rng: &mut R, len: usize, scale: f64) -> Vec<f64> {
    (0..len).map(|_| rng.random_range(-scale..=scale)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spaces::SpaceDescriptor;

    fn line() -> Space {
        SpaceDescriptor::euclidean(1).unwrap()
    }

    fn neuron(space: &Space, c: f64, w: Vec<f64>, theta: f64) -> Neuron {
        Neuron {
            coeff: c,
            functional: Functional::new(space.clone(), w).unwrap(),
            threshold: theta,
        }
    }

    #[test]
    fn forward_examples() {
        let s = line();
        let x = Element::new(s.clone(), vec![3.0]).unwrap();
        let net = ShallowNetwork::new(s.clone(), Activation::Relu, vec![neuron(&s, 1.0, vec![1.0], 1.0)]).unwrap();
        assert_eq!(net.forward(&x).unwrap(), 2.0);
        let net = ShallowNetwork::new(s.clone(), Activation::Tanh, vec![neuron(&s, 2.0, vec![0.0], 0.0)]).unwrap();
        assert_eq!(net.forward(&x).unwrap(), 0.0);
        let net = ShallowNetwork::new(
            s.clone(),
            Activation::Tanh,
            vec![neuron(&s, 0.7, vec![0.3], 0.1), neuron(&s, -0.7, vec![0.3], 0.1)],
        )
        .unwrap();
        assert_eq!(net.forward(&x).unwrap(), 0.0);
    }

    #[test]
    fn linear_model_gradient_matches_hand_formula() {
        let s = line();
        let id = Activation::poly(vec![0.0, 1.0]).unwrap();
        let net = ShallowNetwork::new(s.clone(), id, vec![neuron(&s, 1.5, vec![0.5], 0.0)]).unwrap();
        let batch: Vec<(Element, f64)> = [(1.0, 0.0), (2.0, 1.0), (-1.0, 0.5)]
            .iter()
            .map(|&(x, y)| (Element::new(s.clone(), vec![x]).unwrap(), y))
            .collect();
        let g = net.gradients(&batch, GradientMode::Smooth).unwrap();
        let mut hand = 0.0;
        for (x, y) in &batch {
            let p = 0.5 * x.coeffs()[0];
            hand += 2.0 * (1.5 * p - y) * p;
        }
        hand /= 3.0;
        assert!((g.coeffs[0] - hand).abs() < 1e-15);
    }

    #[test]
    fn zero_residual_has_zero_gradient() {
        let s = SpaceDescriptor::matrix(2, 2).unwrap();
        let net = ShallowNetwork::init(s.clone(), Activation::Tanh, 3, 1, 0.5).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let batch: Vec<(Element, f64)> = (0..5)
            .map(|_| {
                let x = Element::new(s.clone(), uniform_vector(&mut rng, 4, 1.0)).unwrap();
                let y = net.forward(&x).unwrap();
                (x, y)
            })
            .collect();
        let g = net.gradients(&batch, GradientMode::Smooth).unwrap();
        assert!(g.flatten().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn relu_requires_explicit_subgradients() {
        let s = line();
        let net = ShallowNetwork::init(s.clone(), Activation::Relu, 2, 0, 1.0).unwrap();
        let batch = vec![(Element::new(s, vec![0.5]).unwrap(), 1.0)];
        assert!(matches!(
            net.gradients(&batch, GradientMode::Smooth),
            Err(Error::NonSmoothActivation(_))
        ));
        assert!(net.gradients(&batch, GradientMode::Subgradient).is_ok());
    }

    #[test]
    fn init_shapes_and_determinism() {
        let s = SpaceDescriptor::matrix(2, 2).unwrap();
        let a = ShallowNetwork::init(s.clone(), Activation::Tanh, 5, 9, 1.0).unwrap();
        let b = ShallowNetwork::init(s.clone(), Activation::Tanh, 5, 9, 1.0).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.width(), 5);
        assert!(a.neurons().iter().all(|n| n.functional.rep().len() == 4));
        let z = ShallowNetwork::init(s.clone(), Activation::Tanh, 5, 9, 0.0).unwrap();
        let x = Element::new(s, vec![1.0, 2.0, 3.0, 4.0]).unwrap();
        assert_eq!(z.forward(&x).unwrap(), 0.0);
        assert!(ShallowNetwork::init(line(), Activation::Tanh, 0, 0, 1.0).is_err());
    }

    #[test]
    fn checkpoint_round_trip_is_bitwise() {
        let s = SpaceDescriptor::lp_seq(2.0, 5, 1.0).unwrap();
        let net = ShallowNetwork::init(s, Activation::Sigmoid, 4, 3, 0.9).unwrap();
        let text = net.to_json().unwrap();
        let back = ShallowNetwork::from_json(&text).unwrap();
        assert_eq!(back.params(), net.params());
        assert_eq!(back.to_json().unwrap(), text);
        let m = crate::activations::mollify(&Activation::Relu, 0.1, 16).unwrap();
        let net = ShallowNetwork::init(line(), m, 2, 3, 0.9).unwrap();
        assert_eq!(ShallowNetwork::from_json(&net.to_json().unwrap()).unwrap(), net);
    }

    #[test]
    fn parallel_batch_matches_serial_bitwise() {
        let s = SpaceDescriptor::euclidean(3).unwrap();
        let net = ShallowNetwork::init(s.clone(), Activation::Tanh, 17, 4, 1.0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let xs: Vec<Element> = (0..200)
            .map(|_| Element::new(s.clone(), uniform_vector(&mut rng, 3, 1.0)).unwrap())
            .collect();
        let a = net.forward_batch(&xs, Parallelism::Serial).unwrap();
        let b = net.forward_batch(&xs, Parallelism::Rayon).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn training_is_deterministic_and_reports_divergence() {
        let s = line();
        let data: Vec<(Element, f64)> = (0..20)
            .map(|i| {
                let t = -1.0 + i as f64 / 10.0;
                (Element::new(s.clone(), vec![t]).unwrap(), 0.5 * t)
            })
            .collect();
        let net = ShallowNetwork::init(s.clone(), Activation::Tanh, 4, 1, 0.5).unwrap();
        let cfg = TrainConfig {
            iterations: 50,
            batch_size: Some(7),
            seed: 3,
            ..TrainConfig::default()
        };
        let a = net.train(&data, &cfg).unwrap();
        let b = net.train(&data, &cfg).unwrap();
        assert_eq!(a.losses, b.losses);
        assert_eq!(a.network, b.network);
        assert_eq!(a.losses.len(), 51);
        let wild = TrainConfig {
            learning_rate: 1e3,
            iterations: 200,
            ..TrainConfig::default()
        };
        let sq = Activation::poly(vec![0.0, 0.0, 1.0]).unwrap();
        let net = ShallowNetwork::init(s, sq, 4, 1, 1.0).unwrap();
        assert!(matches!(net.train(&data, &wild), Err(Error::Divergence { .. })));
    }
}
