//! Target catalog. Every target is assembled from the space's own pairing,
//! so all of them are continuous on the compact set.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use tvsnet::{Activation, CompactSampler, Element, Functional, ShallowNetwork, Space};

use crate::error::HarnessError;

pub const CATALOG: [&str; 6] = [
    "constant",
    "coordinate",
    "sin_of_functional",
    "exp_of_functional",
    "product_of_two_functionals",
    "network_self_target",
];

fn one() -> f64 {
    1.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "id", rename_all = "snake_case", deny_unknown_fields)]
pub enum TargetSpec {
    Constant {
        value: f64,
    },
    /// The `index`-th stored coefficient of `x`.
    Coordinate {
        index: usize,
    },
    /// `sin(frequency * r(x))` with `sup_K |r| = 1`.
    SinOfFunctional {
        seed: u64,
        #[serde(default = "one")]
        frequency: f64,
    },
    /// `exp(rate * r(x))` with `sup_K |r| = 1`.
    ExpOfFunctional {
        seed: u64,
        #[serde(default = "one")]
        rate: f64,
    },
    /// `r1(x) * r2(x)`, both normalized to `sup_K |r| = 1`.
    ProductOfTwoFunctionals {
        seed: u64,
    },
    /// A randomly initialized network of the given width.
    NetworkSelfTarget {
        seed: u64,
        width: usize,
        #[serde(default)]
        activation: Option<String>,
        #[serde(default = "one")]
        scale: f64,
    },
    Sum {
        terms: Vec<TargetSpec>,
        #[serde(default)]
        weights: Option<Vec<f64>>,
    },
    Product {
        factors: Vec<TargetSpec>,
    },
}

/// A target ready for evaluation.
#[derive(Debug, Clone)]
pub enum Target {
    Constant(f64),
    Coordinate(usize),
    Sin(Functional, f64),
    Exp(Functional, f64),
    Product2(Functional, Functional),
    Network(ShallowNetwork),
    Sum(Vec<(f64, Target)>),
    Product(Vec<Target>),
}

fn usage(path: &str, message: impl Into<String>) -> HarnessError {
    HarnessError::Usage {
        path: path.into(),
        message: message.into(),
    }
}

impl TargetSpec {
    pub fn id(&self) -> &'static str {
        match self {
            TargetSpec::Constant { .. } => "constant",
            TargetSpec::Coordinate { .. } => "coordinate",
            TargetSpec::SinOfFunctional { .. } => "sin_of_functional",
            TargetSpec::ExpOfFunctional { .. } => "exp_of_functional",
            TargetSpec::ProductOfTwoFunctionals { .. } => "product_of_two_functionals",
            TargetSpec::NetworkSelfTarget { .. } => "network_self_target",
            TargetSpec::Sum { .. } => "sum",
            TargetSpec::Product { .. } => "product",
        }
    }

    pub fn validate(&self, space: &Space, path: &str) -> Result<(), HarnessError> {
        let finite = |v: f64, field: &str| {
            if v.is_finite() {
                Ok(())
            } else {
                Err(usage(&format!("{path}.{field}"), "must be finite"))
            }
        };
        match self {
            TargetSpec::Constant { value } => finite(*value, "value"),
            TargetSpec::Coordinate { index } => {
                if *index < space.dim() {
                    Ok(())
                } else {
                    Err(usage(&format!("{path}.index"), format!("index {index} >= dimension {}", space.dim())))
                }
            }
            TargetSpec::SinOfFunctional { frequency, .. } => finite(*frequency, "frequency"),
            TargetSpec::ExpOfFunctional { rate, .. } => {
                finite(*rate, "rate")?;
                if rate.abs() > 50.0 {
                    return Err(usage(&format!("{path}.rate"), "|rate| must be at most 50"));
                }
                Ok(())
            }
            TargetSpec::ProductOfTwoFunctionals { .. } => Ok(()),
            TargetSpec::NetworkSelfTarget {
                width,
                activation,
                scale,
                ..
            } => {
                if *width == 0 {
                    return Err(usage(&format!("{path}.width"), "must be at least 1"));
                }
                finite(*scale, "scale")?;
                if let Some(a) = activation {
                    a.parse::<Activation>()
                        .map_err(|e| usage(&format!("{path}.activation"), e.to_string()))?;
                }
                Ok(())
            }
            TargetSpec::Sum { terms, weights } => {
                if terms.is_empty() {
                    return Err(usage(&format!("{path}.terms"), "needs at least one term"));
                }
                if let Some(w) = weights {
                    if w.len() != terms.len() {
                        return Err(usage(&format!("{path}.weights"), "one weight per term"));
                    }
                    if w.iter().any(|v| !v.is_finite()) {
                        return Err(usage(&format!("{path}.weights"), "weights must be finite"));
                    }
                }
                for (i, t) in terms.iter().enumerate() {
                    t.validate(space, &format!("{path}.terms[{i}]"))?;
                }
                Ok(())
            }
            TargetSpec::Product { factors } => {
                if factors.is_empty() {
                    return Err(usage(&format!("{path}.factors"), "needs at least one factor"));
                }
                for (i, t) in factors.iter().enumerate() {
                    t.validate(space, &format!("{path}.factors[{i}]"))?;
                }
                Ok(())
            }
        }
    }

    /// `fallback` is the activation used by a self-target that names none.
    pub fn build(&self, sampler: &CompactSampler, fallback: &Activation) -> Result<Target, HarnessError> {
        let space = sampler.space();
        let unit = |seed: u64, stream: u64| -> Result<Functional, HarnessError> {
            let mut rng = ChaCha8Rng::seed_from_u64(tvsnet::numeric::derive_seed(seed, stream));
            let r = Functional::random_normal(space.clone(), &mut rng);
            let s = sampler.support(&r)?;
            Ok(r.scaled(1.0 / s))
        };
        Ok(match self {
            TargetSpec::Constant { value } => Target::Constant(*value),
            TargetSpec::Coordinate { index } => Target::Coordinate(*index),
            TargetSpec::SinOfFunctional { seed, frequency } => Target::Sin(unit(*seed, 0)?, *frequency),
            TargetSpec::ExpOfFunctional { seed, rate } => Target::Exp(unit(*seed, 0)?, *rate),
            TargetSpec::ProductOfTwoFunctionals { seed } => Target::Product2(unit(*seed, 0)?, unit(*seed, 1)?),
            TargetSpec::NetworkSelfTarget {
                seed,
                width,
                activation,
                scale,
            } => {
                let sigma = match activation {
                    Some(a) => a.parse()?,
                    None => fallback.clone(),
                };
                Target::Network(ShallowNetwork::init(space.clone(), sigma, *width, *seed, *scale)?)
            }
            TargetSpec::Sum { terms, weights } => Target::Sum(
                terms
                    .iter()
                    .enumerate()
                    .map(|(i, t)| Ok((weights.as_ref().map_or(1.0, |w| w[i]), t.build(sampler, fallback)?)))
                    .collect::<Result<_, HarnessError>>()?,
            ),
            TargetSpec::Product { factors } => Target::Product(
                factors
                    .iter()
                    .map(|t| t.build(sampler, fallback))
                    .collect::<Result<_, _>>()?,
            ),
        })
    }
}

impl Target {
    pub fn eval(&self, x: &Element) -> tvsnet::Result<f64> {
        Ok(match self {
            Target::Constant(v) => *v,
            Target::Coordinate(i) => x.coeffs()[*i],
            Target::Sin(r, freq) => (freq * r.pair(x)?).sin(),
            Target::Exp(r, rate) => (rate * r.pair(x)?).exp(),
            Target::Product2(a, b) => a.pair(x)? * b.pair(x)?,
            Target::Network(net) => net.forward(x)?,
            Target::Sum(terms) => {
                let mut acc = 0.0;
                for (w, t) in terms {
                    acc += w * t.eval(x)?;
                }
                acc
            }
            Target::Product(factors) => {
                let mut acc = 1.0;
                for t in factors {
                    acc *= t.eval(x)?;
                }
                acc
            }
        })
    }

    /// Evaluation that maps errors to NaN, for callers that check finiteness.
    pub fn value(&self, x: &Element) -> f64 {
        self.eval(x).unwrap_or(f64::NAN)
    }
}
