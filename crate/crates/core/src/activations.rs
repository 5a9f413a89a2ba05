//! Activation functions and the one-dimensional calculus the constructive
//! pipeline needs: central-difference derivative estimates, mollification
//! into a finite sum of shifted activations, polynomial detection and the
//! search for thresholds where a derivative is significantly non-zero.

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numeric::{binomial, horner, linspace};
use crate::quadrature::gauss_legendre;

/// Arguments above this make `exp` report an overflow instead of returning a
/// huge value.
pub const DEFAULT_EXP_CAP: f64 = 700.0;

/// Anything that can be evaluated pointwise as a real function of one variable.
pub trait Univariate: Send + Sync {
    fn value(&self, t: f64) -> f64;
}

impl<F: Fn(f64) -> f64 + Send + Sync> Univariate for F {
    fn value(&self, t: f64) -> f64 {
        self(t)
    }
}

/// The activation catalog.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", try_from = "RawActivation")]
pub enum Activation {
    Relu,
    Tanh,
    Sigmoid,
    Exp,
    Sin,
    /// Ascending coefficients, evaluated by Horner's rule.
    Poly { coeffs: Vec<f64> },
    /// Piecewise-linear interpolation of samples, constant outside the range.
    Table { xs: Vec<f64>, ys: Vec<f64> },
}

#[derive(Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
enum RawActivation {
    Relu,
    Tanh,
    Sigmoid,
    Exp,
    Sin,
    Poly { coeffs: Vec<f64> },
    Table { xs: Vec<f64>, ys: Vec<f64> },
}

impl TryFrom<RawActivation> for Activation {
    type Error = Error;
    fn try_from(raw: RawActivation) -> Result<Self> {
        Ok(match raw {
            RawActivation::Relu => Activation::Relu,
            RawActivation::Tanh => Activation::Tanh,
            RawActivation::Sigmoid => Activation::Sigmoid,
            RawActivation::Exp => Activation::Exp,
            RawActivation::Sin => Activation::Sin,
            RawActivation::Poly { coeffs } => Activation::poly(coeffs)?,
            RawActivation::Table { xs, ys } => Activation::table(xs, ys)?,
        })
    }
}

impl Activation {
    pub fn poly(coeffs: Vec<f64>) -> Result<Self> {
        if coeffs.iter().any(|c| !c.is_finite()) {
            return Err(Error::non_finite("polynomial coefficients"));
        }
        Ok(Activation::Poly { coeffs })
    }

    pub fn table(xs: Vec<f64>, ys: Vec<f64>) -> Result<Self> {
        if xs.len() < 2 || xs.len() != ys.len() {
            return Err(Error::invalid(
                "a table activation needs at least two (t, y) samples",
            ));
        }
        if xs.iter().chain(&ys).any(|v| !v.is_finite()) {
            return Err(Error::non_finite("table samples"));
        }
        if xs.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::invalid("table abscissae must be strictly increasing"));
        }
        Ok(Activation::Table { xs, ys })
    }

    /// Reads a two-column table (`t,y` or whitespace separated, `#` comments).
    pub fn table_from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::invalid(format!("cannot read table {}: {e}", path.display())))?;
        let mut xs = Vec::new();
        let mut ys = Vec::new();
        for (lineno, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let fields: Vec<&str> = line
                .split(|c: char| c == ',' || c.is_whitespace())
                .filter(|s| !s.is_empty())
                .collect();
            let parse = |s: &str| {
                s.parse::<f64>().map_err(|_| {
                    Error::invalid(format!("{}:{}: bad number {s:?}", path.display(), lineno + 1))
                })
            };
            if fields.len() != 2 {
                return Err(Error::invalid(format!(
                    "{}:{}: expected two columns",
                    path.display(),
                    lineno + 1
                )));
            }
            xs.push(parse(fields[0])?);
            ys.push(parse(fields[1])?);
        }
        Activation::table(xs, ys)
    }

    /// Stable CLI identifier.
    pub fn id(&self) -> String {
        match self {
            Activation::Relu => "relu".into(),
            Activation::Tanh => "tanh".into(),
            Activation::Sigmoid => "sigmoid".into(),
            Activation::Exp => "exp".into(),
            Activation::Sin => "sin".into(),
            Activation::Poly { coeffs } => {
                let parts: Vec<String> = coeffs.iter().map(|c| c.to_string()).collect();
                format!("poly:{}", parts.join(","))
            }
            Activation::Table { xs, .. } => format!("table[{} samples]", xs.len()),
        }
    }

    /// True for the catalog members with a classical derivative everywhere.
    pub fn is_smooth(&self) -> bool {
        !matches!(self, Activation::Relu | Activation::Table { .. })
    }

    /// Raw evaluation (no overflow checks).
    pub fn value(&self, t: f64) -> f64 {
        match self {
            Activation::Relu => t.max(0.0),
            Activation::Tanh => t.tanh(),
            Activation::Sigmoid => {
                if t >= 0.0 {
                    1.0 / (1.0 + (-t).exp())
                } else {
                    let e = t.exp();
                    e / (1.0 + e)
                }
            }
            Activation::Exp => t.exp(),
            Activation::Sin => t.sin(),
            Activation::Poly { coeffs } => horner(coeffs, t),
            Activation::Table { xs, ys } => interpolate(xs, ys, t),
        }
    }

    /// Checked evaluation: `exp` above the exponent cap and non-finite
    /// results are errors.
    pub fn eval(&self, t: f64) -> Result<f64> {
        self.eval_with_cap(t, DEFAULT_EXP_CAP)
    }

    pub fn eval_with_cap(&self, t: f64, cap: f64) -> Result<f64> {
        if !t.is_finite() {
            return Err(Error::non_finite("activation argument"));
        }
        if matches!(self, Activation::Exp) && t > cap {
            return Err(Error::ActivationOverflow { argument: t, cap });
        }
        let v = self.value(t);
        if v.is_finite() {
            Ok(v)
        } else {
            Err(Error::non_finite(format!("{} at {t}", self.id())))
        }
    }

    /// Analytic derivative; `None` where the activation is not differentiable
    /// in the classical sense (relu, tables).
    pub fn derivative(&self, t: f64) -> Option<f64> {
        match self {
            Activation::Relu | Activation::Table { .. } => None,
            _ => Some(self.subgradient(t)),
        }
    }

    /// Derivative where it exists; relu uses `σ'(0) := 0` and tables use the
    /// slope of the segment to the left of a node.
    pub fn subgradient(&self, t: f64) -> f64 {
        match self {
            Activation::Relu => {
                if t > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::Tanh => {
                let th = t.tanh();
                1.0 - th * th
            }
            Activation::Sigmoid => {
                let s = self.value(t);
                s * (1.0 - s)
            }
            Activation::Exp => t.exp(),
            Activation::Sin => t.cos(),
            Activation::Poly { coeffs } => {
                let d: Vec<f64> = coeffs
                    .iter()
                    .enumerate()
                    .skip(1)
                    .map(|(k, c)| k as f64 * c)
                    .collect();
                horner(&d, t)
            }
            Activation::Table { xs, ys } => {
                if t <= xs[0] || t > xs[xs.len() - 1] {
                    return 0.0;
                }
                let i = xs.partition_point(|&x| x < t);
                (ys[i] - ys[i - 1]) / (xs[i] - xs[i - 1])
            }
        }
    }
}

fn interpolate(xs: &[f64], ys: &[f64], t: f64) -> f64 {
    let n = xs.len();
    if t <= xs[0] {
        return ys[0];
    }
    if t >= xs[n - 1] {
        return ys[n - 1];
    }
    let i = xs.partition_point(|&x| x <= t);
    let (x0, x1, y0, y1) = (xs[i - 1], xs[i], ys[i - 1], ys[i]);
    y0 + (y1 - y0) * (t - x0) / (x1 - x0)
}

impl Univariate for Activation {
    fn value(&self, t: f64) -> f64 {
        Activation::value(self, t)
    }
}

impl fmt::Display for Activation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.id())
    }
}

impl FromStr for Activation {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        match s {
            "relu" => return Ok(Activation::Relu),
            "tanh" => return Ok(Activation::Tanh),
            "sigmoid" => return Ok(Activation::Sigmoid),
            "exp" => return Ok(Activation::Exp),
            "sin" => return Ok(Activation::Sin),
            _ => {}
        }
        if let Some(list) = s.strip_prefix("poly:") {
            let coeffs = list
                .split(',')
                .map(|c| {
                    c.trim()
                        .parse::<f64>()
                        .map_err(|_| Error::invalid(format!("bad polynomial coefficient {c:?}")))
                })
                .collect::<Result<Vec<_>>>()?;
            return Activation::poly(coeffs);
        }
        if let Some(path) = s.strip_prefix("table:") {
            return Activation::table_from_file(Path::new(path));
        }
        Err(Error::invalid(format!(
            "unknown activation {s:?} (expected relu, tanh, sigmoid, exp, sin, poly:c0,c1,..., table:path)"
        )))
    }
}

/// The catalog identifiers accepted by [`Activation::from_str`].
pub const CATALOG_IDS: [&str; 7] = ["relu", "tanh", "sigmoid", "exp", "sin", "poly:c0,c1,...", "table:path"];

/// k-th central difference quotient
/// `sum_j (-1)^j C(k,j) σ(t + (k/2 - j) h) / h^k`.
pub fn deriv_est<F: Univariate + ?Sized>(sigma: &F, order: usize, t: f64, h: f64) -> f64 {
    let half = order as f64 / 2.0;
    let mut acc = 0.0;
    for j in 0..=order {
        let sign = if j % 2 == 0 { 1.0 } else { -1.0 };
        acc += sign * binomial(order, j) * sigma.value(t + (half - j as f64) * h);
    }
    acc / h.powi(order as i32)
}

/// Size of the rounding noise in [`deriv_est`] at this step:
/// `eps * sum_j C(k,j) |σ(t_j)| / h^k`.
pub fn roundoff_floor<F: Univariate + ?Sized>(sigma: &F, order: usize, t: f64, h: f64) -> f64 {
    let half = order as f64 / 2.0;
    let mut acc = 0.0;
    for j in 0..=order {
        acc += binomial(order, j) * sigma.value(t + (half - j as f64) * h).abs();
    }
    f64::EPSILON * acc / h.powi(order as i32)
}

/// Default step `eps^{1/(k+2)} * scale`.
pub fn default_step(order: usize, scale: f64) -> f64 {
    f64::EPSILON.powf(1.0 / (order as f64 + 2.0)) * scale
}

/// One node of a mollified activation: `σ(t - shift)` weighted by `weight`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MollifierNode {
    pub shift: f64,
    pub weight: f64,
}

/// `(σ * φ_δ)(t)` realized as the finite sum `sum_j ω_j σ(t - y_j)`, which is
/// itself a network in σ.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "MollifierSpec", into = "MollifierSpec")]
pub struct MollifiedActivation {
    base: Activation,
    delta: f64,
    nodes: Vec<MollifierNode>,
    /// For a relu base: running sums of `ω_j` and `ω_j y_j` over the sorted
    /// shifts, so that the node sum is `t W(t) - Y(t)`.
    ramp: Option<Vec<(f64, f64)>>,
}

#[derive(Serialize, Deserialize)]
struct MollifierSpec {
    base: Activation,
    delta: f64,
    node_count: usize,
}

impl TryFrom<MollifierSpec> for MollifiedActivation {
    type Error = Error;
    fn try_from(spec: MollifierSpec) -> Result<Self> {
        mollify(&spec.base, spec.delta, spec.node_count)
    }
}

impl From<MollifiedActivation> for MollifierSpec {
    fn from(m: MollifiedActivation) -> Self {
        MollifierSpec {
            base: m.base,
            delta: m.delta,
            node_count: m.nodes.len(),
        }
    }
}

/// Standard bump `exp(-1/(1-u^2))` on `(-1, 1)`, unnormalized.
pub fn bump(u: f64) -> f64 {
    if u.abs() < 1.0 {
        (-1.0 / (1.0 - u * u)).exp()
    } else {
        0.0
    }
}

/// Smallest node count accepted by [`mollify`].
pub const MIN_MOLLIFIER_NODES: usize = 8;

/// Mollifies `sigma` with the bump of half-width `delta`, discretized by an
/// `nodes`-point Gauss-Legendre rule on `(-δ, δ)`; weights are normalized to
/// sum to one.
pub fn mollify(sigma: &Activation, delta: f64, nodes: usize) -> Result<MollifiedActivation> {
    if !(delta.is_finite() && delta > 0.0) {
        return Err(Error::invalid(format!("mollifier width {delta} must be positive")));
    }
    if nodes < MIN_MOLLIFIER_NODES {
        return Err(Error::invalid(format!(
            "mollifier needs at least {MIN_MOLLIFIER_NODES} nodes, got {nodes}"
        )));
    }
    let (u, w) = gauss_legendre(nodes);
    let raw: Vec<(f64, f64)> = u
        .iter()
        .zip(&w)
        .map(|(&u, &w)| (delta * u, w * bump(u)))
        .filter(|&(_, w)| w > 0.0)
        .collect();
    let total: f64 = raw.iter().map(|(_, w)| w).sum();
    let mut nodes: Vec<MollifierNode> = raw
        .into_iter()
        .map(|(shift, w)| MollifierNode {
            shift,
            weight: w / total,
        })
        .collect();
    nodes.sort_by(|a, b| a.shift.total_cmp(&b.shift));
    let ramp = matches!(sigma, Activation::Relu).then(|| {
        let (mut w, mut y) = (0.0, 0.0);
        nodes
            .iter()
            .map(|n| {
                w += n.weight;
                y += n.weight * n.shift;
                (w, y)
            })
            .collect()
    });
    Ok(MollifiedActivation {
        base: sigma.clone(),
        delta,
        nodes,
        ramp,
    })
}

impl MollifiedActivation {
    pub fn base(&self) -> &Activation {
        &self.base
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    pub fn nodes(&self) -> &[MollifierNode] {
        &self.nodes
    }

    pub fn weight_sum(&self) -> f64 {
        self.nodes.iter().map(|n| n.weight).sum()
    }

    pub fn value(&self, t: f64) -> f64 {
        if let Some(ramp) = &self.ramp {
            return match self.active_count(t) {
                0 => 0.0,
                n => {
                    let (w, y) = ramp[n - 1];
                    t * w - y
                }
            };
        }
        self.nodes
            .iter()
            .map(|n| n.weight * self.base.value(t - n.shift))
            .sum()
    }

    /// Derivative of the node sum; exact almost everywhere even for a
    /// piecewise-linear base.
    pub fn derivative(&self, t: f64) -> f64 {
        if let Some(ramp) = &self.ramp {
            return match self.active_count(t) {
                0 => 0.0,
                n => ramp[n - 1].0,
            };
        }
        self.nodes
            .iter()
            .map(|n| n.weight * self.base.subgradient(t - n.shift))
            .sum()
    }
}

impl MollifiedActivation {
    /// Number of nodes with `y_j < t`.
    fn active_count(&self, t: f64) -> usize {
        self.nodes.partition_point(|n| n.shift < t)
    }
}

impl Univariate for MollifiedActivation {
    fn value(&self, t: f64) -> f64 {
        MollifiedActivation::value(self, t)
    }
}

/// Tolerance and probing used by [`detect_polynomial`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PolynomialProbe {
    /// Differences count as vanishing below `tolerance * max|σ|` on the interval.
    pub tolerance: f64,
    /// Starting points per window size.
    pub probes: usize,
}

impl Default for PolynomialProbe {
    fn default() -> Self {
        PolynomialProbe {
            tolerance: 1e-7,
            probes: 9,
        }
    }
}

/// Smallest `m < k_max` such that all `(m+1)`-th differences of `sigma`
/// vanish on `[a, b]`, or `None` if `sigma` passes as non-polynomial.
pub fn detect_polynomial<F: Univariate + ?Sized>(
    sigma: &F,
    k_max: usize,
    interval: (f64, f64),
) -> Option<usize> {
    detect_polynomial_with(sigma, k_max, interval, PolynomialProbe::default())
}

pub fn detect_polynomial_with<F: Univariate + ?Sized>(
    sigma: &F,
    k_max: usize,
    interval: (f64, f64),
    probe: PolynomialProbe,
) -> Option<usize> {
    let (a, b) = interval;
    let scale = linspace(a, b, 257)
        .into_iter()
        .map(|t| sigma.value(t).abs())
        .fold(0.0, f64::max);
    let limit = probe.tolerance * scale;
    for m in 0..k_max {
        let order = m + 1;
        let mut largest = 0.0f64;
        // non-dyadic fractions keep kinks off symmetric stencil positions
        for fraction in [0.95, 0.61, 0.29] {
            let h = fraction * (b - a) / order as f64;
            let span = order as f64 * h;
            for start in linspace(a, b - span, probe.probes) {
                let mut acc = 0.0;
                for j in 0..=order {
                    let sign = if (order - j) % 2 == 0 { 1.0 } else { -1.0 };
                    acc += sign * binomial(order, j) * sigma.value(start + j as f64 * h);
                }
                largest = largest.max(acc.abs());
            }
        }
        if largest <= limit {
            return Some(m);
        }
    }
    None
}

/// An open interval of admissible thresholds; `(-inf, inf)` by default.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ThresholdSet {
    pub lo: f64,
    pub hi: f64,
}

impl Default for ThresholdSet {
    fn default() -> Self {
        Self::real()
    }
}

impl ThresholdSet {
    pub fn real() -> Self {
        ThresholdSet {
            lo: f64::NEG_INFINITY,
            hi: f64::INFINITY,
        }
    }

    pub fn new(lo: f64, hi: f64) -> Result<Self> {
        if lo.is_nan() || hi.is_nan() || lo >= hi {
            return Err(Error::invalid(format!("threshold interval ({lo}, {hi}) is empty")));
        }
        Ok(ThresholdSet { lo, hi })
    }

    pub fn is_real_line(&self) -> bool {
        self.lo == f64::NEG_INFINITY && self.hi == f64::INFINITY
    }

    pub fn contains(&self, theta: f64) -> bool {
        self.lo < theta && theta < self.hi
    }

    pub fn check(&self, theta: f64) -> Result<()> {
        if self.contains(theta) {
            Ok(())
        } else {
            Err(Error::ThresholdOutOfRange {
                threshold: theta,
                lo: self.lo,
                hi: self.hi,
            })
        }
    }

    /// Length of the scanned range for a given window.
    pub fn scan_length(&self, window: f64) -> f64 {
        let (lo, hi) = self.scan_range(window);
        hi - lo
    }

    /// Closed scan range inside the open interval, limited to `[-window, window]`.
    fn scan_range(&self, window: f64) -> (f64, f64) {
        let inset = |v: f64| 1e-9 * v.abs().max(1.0);
        let lo = if self.lo.is_finite() {
            self.lo + inset(self.lo)
        } else {
            -window
        };
        let hi = if self.hi.is_finite() {
            self.hi - inset(self.hi)
        } else {
            window
        };
        (lo.max(-window).min(hi), hi.min(window).max(lo))
    }
}

/// Scan settings for [`find_nonvanishing_theta`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ThetaSearch {
    /// Half-width of the scanned window when Θ is unbounded.
    pub window: f64,
    pub points: usize,
    /// Required ratio of `|estimate|` to the rounding floor.
    pub significance: f64,
}

impl Default for ThetaSearch {
    fn default() -> Self {
        ThetaSearch {
            window: 4.0,
            points: 801,
            significance: 1e3,
        }
    }
}

/// Threshold `θ` in Θ maximizing `|σ^(k)(-θ)|` (estimated at step `h`), with
/// the estimate.
pub fn find_nonvanishing_theta<F: Univariate + ?Sized>(
    sigma: &F,
    order: usize,
    thresholds: &ThresholdSet,
    h: f64,
) -> Result<(f64, f64)> {
    find_nonvanishing_theta_with(sigma, order, thresholds, h, ThetaSearch::default())
}

pub fn find_nonvanishing_theta_with<F: Univariate + ?Sized>(
    sigma: &F,
    order: usize,
    thresholds: &ThresholdSet,
    h: f64,
    search: ThetaSearch,
) -> Result<(f64, f64)> {
    if !(h.is_finite() && h > 0.0) {
        return Err(Error::invalid(format!("difference step {h} must be positive")));
    }
    let (lo, hi) = thresholds.scan_range(search.window);
    let mut best: Option<(f64, f64, f64)> = None;
    for theta in linspace(lo, hi, search.points.max(1)) {
        let est = deriv_est(sigma, order, -theta, h);
        if !est.is_finite() {
            continue;
        }
        if best.is_none_or(|(_, e, _)| est.abs() > e.abs()) {
            best = Some((theta, est, roundoff_floor(sigma, order, -theta, h)));
        }
    }
    let (theta, est, floor) = best.ok_or_else(|| Error::non_finite("derivative scan"))?;
    let threshold = search.significance * floor;
    if est.abs() > threshold {
        Ok((theta, est))
    } else {
        Err(Error::LikelyPolynomial {
            order,
            best_estimate: est.abs(),
            threshold,
        })
    }
}
