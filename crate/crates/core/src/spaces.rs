//! Input spaces, their elements, and continuous linear functionals in dual
//! representation.
//!
//! Every space is discretized to a finite coefficient vector:
//!
//! | kind        | element coefficients          | dual representation                  | pairing                                  |
//! |-------------|-------------------------------|--------------------------------------|------------------------------------------|
//! | `euclidean` | `d` coordinates               | weight vector                        | dot product                              |
//! | `matrix`    | `n*m` entries, row-major      | matrix `W`, row-major                | `trace(W^T X)`                           |
//! | `lp_seq`    | first `N` terms               | first `N` terms of an `l_q` sequence | `sum a_n x_n`                            |
//! | `c0_seq`    | first `N` terms               | first `N` terms of an `l_1` sequence | `sum a_n x_n`                            |
//! | `lp_fun`    | samples at quadrature nodes   | `L_q` density samples                | `sum w_j g(t_j) f(t_j)`                  |
//! | `c_fun`     | samples at quadrature nodes   | density samples plus point atoms     | `sum xi_k f(x_k) + sum w_j rho(t_j) f(t_j)` |
//!
//! Atoms of a `c_fun` measure are snapped to the nearest grid node when paired.
//!
//! Compact sets are modelled by [`CompactSampler`]: norm balls for the
//! finite-dimensional kinds, coordinate envelopes `|x_n| <= rho n^{-s}` for
//! sequences, and a cosine envelope (bounded by `rho` in sup norm) for grid
//! functions.

use std::fmt;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numeric::{max_abs, scaled_p_norm};
use crate::quadrature::{GridSpec, QuadratureGrid};

/// Kind tag and discretization parameters of an input space.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "params", rename_all = "snake_case")]
pub enum SpaceKind {
    Euclidean { dim: usize },
    Matrix { rows: usize, cols: usize },
    LpSeq { p: f64, len: usize, decay: f64 },
    C0Seq { len: usize, decay: f64 },
    LpFun { p: f64, grid: GridSpec },
    CFun { grid: GridSpec },
}

impl SpaceKind {
    pub fn tag(&self) -> &'static str {
        match self {
            SpaceKind::Euclidean { .. } => "euclidean",
            SpaceKind::Matrix { .. } => "matrix",
            SpaceKind::LpSeq { .. } => "lp_seq",
            SpaceKind::C0Seq { .. } => "c0_seq",
            SpaceKind::LpFun { .. } => "lp_fun",
            SpaceKind::CFun { .. } => "c_fun",
        }
    }

    fn validate(&self) -> Result<()> {
        let check_p = |p: f64| {
            if p.is_finite() && p >= 1.0 {
                Ok(())
            } else {
                Err(Error::invalid(format!("exponent p = {p} must be finite and >= 1")))
            }
        };
        let check_decay = |s: f64| {
            if s.is_finite() && s > 0.0 {
                Ok(())
            } else {
                Err(Error::invalid(format!("decay s = {s} must be positive")))
            }
        };
        let check_len = |n: usize, what: &str| {
            if n >= 1 {
                Ok(())
            } else {
                Err(Error::invalid(format!("{what} must be at least 1")))
            }
        };
        match *self {
            SpaceKind::Euclidean { dim } => check_len(dim, "dimension"),
            SpaceKind::Matrix { rows, cols } => {
                check_len(rows, "row count")?;
                check_len(cols, "column count")
            }
            SpaceKind::LpSeq { p, len, decay } => {
                check_p(p)?;
                check_len(len, "truncation length")?;
                check_decay(decay)
            }
            SpaceKind::C0Seq { len, decay } => {
                check_len(len, "truncation length")?;
                check_decay(decay)
            }
            SpaceKind::LpFun { p, grid } => {
                check_p(p)?;
                grid.validate()
            }
            SpaceKind::CFun { grid } => grid.validate(),
        }
    }
}

/// A validated space together with its materialized quadrature grid.
///
/// Shared behind an [`Arc`] (see [`Space`]); serializes as its [`SpaceKind`].
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(try_from = "SpaceKind", into = "SpaceKind")]
pub struct SpaceDescriptor {
    kind: SpaceKind,
    grid: Option<QuadratureGrid>,
}

pub type Space = Arc<SpaceDescriptor>;

impl PartialEq for SpaceDescriptor {
    fn eq(&self, other: &Self) -> bool {
        self.kind == other.kind
    }
}

impl TryFrom<SpaceKind> for SpaceDescriptor {
    type Error = Error;

    fn try_from(kind: SpaceKind) -> Result<Self> {
        kind.validate()?;
        let grid = match &kind {
            SpaceKind::LpFun { grid, .. } | SpaceKind::CFun { grid } => {
                Some(QuadratureGrid::build(*grid)?)
            }
            _ => None,
        };
        Ok(SpaceDescriptor { kind, grid })
    }
}

impl From<SpaceDescriptor> for SpaceKind {
    fn from(d: SpaceDescriptor) -> Self {
        d.kind
    }
}

impl fmt::Display for SpaceDescriptor {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.kind {
            SpaceKind::Euclidean { dim } => write!(f, "euclidean({dim})"),
            SpaceKind::Matrix { rows, cols } => write!(f, "matrix({rows}x{cols})"),
            SpaceKind::LpSeq { p, len, decay } => write!(f, "lp_seq(p={p}, N={len}, s={decay})"),
            SpaceKind::C0Seq { len, decay } => write!(f, "c0_seq(N={len}, s={decay})"),
            SpaceKind::LpFun { p, grid } => {
                write!(f, "lp_fun(p={p}, [{}, {}], {} nodes)", grid.a, grid.b, grid.len())
            }
            SpaceKind::CFun { grid } => {
                write!(f, "c_fun([{}, {}], {} nodes)", grid.a, grid.b, grid.len())
            }
        }
    }
}

impl SpaceDescriptor {
    pub fn new(kind: SpaceKind) -> Result<Space> {
        Ok(Arc::new(SpaceDescriptor::try_from(kind)?))
    }

    pub fn euclidean(dim: usize) -> Result<Space> {
        Self::new(SpaceKind::Euclidean { dim })
    }

    pub fn matrix(rows: usize, cols: usize) -> Result<Space> {
        Self::new(SpaceKind::Matrix { rows, cols })
    }

    pub fn lp_seq(p: f64, len: usize, decay: f64) -> Result<Space> {
        Self::new(SpaceKind::LpSeq { p, len, decay })
    }

    pub fn c0_seq(len: usize, decay: f64) -> Result<Space> {
        Self::new(SpaceKind::C0Seq { len, decay })
    }

    pub fn lp_fun(p: f64, grid: GridSpec) -> Result<Space> {
        Self::new(SpaceKind::LpFun { p, grid })
    }

    pub fn c_fun(grid: GridSpec) -> Result<Space> {
        Self::new(SpaceKind::CFun { grid })
    }

    pub fn kind(&self) -> &SpaceKind {
        &self.kind
    }

    pub fn grid(&self) -> Option<&QuadratureGrid> {
        self.grid.as_ref()
    }

    /// Length of element coefficient vectors (and of dual representations).
    pub fn dim(&self) -> usize {
        match &self.kind {
            SpaceKind::Euclidean { dim } => *dim,
            SpaceKind::Matrix { rows, cols } => rows * cols,
            SpaceKind::LpSeq { len, .. } | SpaceKind::C0Seq { len, .. } => *len,
            SpaceKind::LpFun { grid, .. } | SpaceKind::CFun { grid } => grid.len(),
        }
    }

    /// Exponent of the element norm; `inf` for the sup-norm kinds.
    pub fn primal_exponent(&self) -> f64 {
        match &self.kind {
            SpaceKind::Euclidean { .. } | SpaceKind::Matrix { .. } => 2.0,
            SpaceKind::LpSeq { p, .. } | SpaceKind::LpFun { p, .. } => *p,
            SpaceKind::C0Seq { .. } | SpaceKind::CFun { .. } => f64::INFINITY,
        }
    }

    /// Hölder conjugate `q = p/(p-1)`: `inf` for `p = 1`, `1` for sup-norm kinds.
    pub fn dual_exponent(&self) -> f64 {
        let p = self.primal_exponent();
        if p.is_infinite() {
            1.0
        } else if p == 1.0 {
            f64::INFINITY
        } else {
            p / (p - 1.0)
        }
    }

    fn quadrature_weights(&self) -> Option<&[f64]> {
        self.grid.as_ref().map(|g| g.weights.as_slice())
    }

    pub(crate) fn ensure_same(&self, other: &SpaceDescriptor) -> Result<()> {
        if self == other {
            Ok(())
        } else {
            Err(Error::SpaceMismatch {
                expected: self.to_string(),
                found: other.to_string(),
            })
        }
    }

    /// Norm of a coefficient vector of this space.
    fn norm_of(&self, coeffs: &[f64]) -> f64 {
        match &self.kind {
            SpaceKind::Euclidean { .. } | SpaceKind::Matrix { .. } => {
                scaled_p_norm(coeffs, None, 2.0)
            }
            SpaceKind::LpSeq { p, .. } => scaled_p_norm(coeffs, None, *p),
            SpaceKind::LpFun { p, .. } => scaled_p_norm(coeffs, self.quadrature_weights(), *p),
            SpaceKind::C0Seq { .. } | SpaceKind::CFun { .. } => max_abs(coeffs),
        }
    }
}

fn check_finite(values: &[f64], context: &str) -> Result<()> {
    if values.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(Error::non_finite(context))
    }
}

/// A point of an input space, stored as its coefficient vector.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawElement")]
pub struct Element {
    space: Space,
    coeffs: Vec<f64>,
}

#[derive(Deserialize)]
struct RawElement {
    space: Space,
    coeffs: Vec<f64>,
}

impl TryFrom<RawElement> for Element {
    type Error = Error;
    fn try_from(raw: RawElement) -> Result<Self> {
        Element::new(raw.space, raw.coeffs)
    }
}

impl Element {
    pub fn new(space: Space, coeffs: Vec<f64>) -> Result<Self> {
        if coeffs.len() != space.dim() {
            return Err(Error::invalid(format!(
                "element of {space} needs {} coefficients, got {}",
                space.dim(),
                coeffs.len()
            )));
        }
        check_finite(&coeffs, "element coefficients")?;
        Ok(Element { space, coeffs })
    }

    pub fn zeros(space: Space) -> Self {
        let coeffs = vec![0.0; space.dim()];
        Element { space, coeffs }
    }

    pub fn space(&self) -> &Space {
        &self.space
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    /// Space norm: Frobenius / l_p / quadrature L_p / sup over the grid.
    pub fn norm(&self) -> f64 {
        self.space.norm_of(&self.coeffs)
    }

    /// `alpha * self + beta * other`.
    pub fn combine(&self, other: &Element, alpha: f64, beta: f64) -> Result<Element> {
        self.space.ensure_same(&other.space)?;
        let coeffs: Vec<f64> = self
            .coeffs
            .iter()
            .zip(&other.coeffs)
            .map(|(a, b)| alpha * a + beta * b)
            .collect();
        Element::new(self.space.clone(), coeffs)
    }

    pub fn scaled(&self, c: f64) -> Result<Element> {
        Element::new(self.space.clone(), self.coeffs.iter().map(|v| c * v).collect())
    }
}

/// A point mass `weight * delta(location)` of a `c_fun` measure.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Atom {
    pub location: f64,
    pub weight: f64,
}

/// A continuous linear functional in dual representation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawFunctional")]
pub struct Functional {
    space: Space,
    rep: Vec<f64>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    atoms: Vec<Atom>,
}

#[derive(Deserialize)]
struct RawFunctional {
    space: Space,
    rep: Vec<f64>,
    #[serde(default)]
    atoms: Vec<Atom>,
}

impl TryFrom<RawFunctional> for Functional {
    type Error = Error;
    fn try_from(raw: RawFunctional) -> Result<Self> {
        Functional::with_atoms(raw.space, raw.rep, raw.atoms)
    }
}

impl Functional {
    pub fn new(space: Space, rep: Vec<f64>) -> Result<Self> {
        Self::with_atoms(space, rep, Vec::new())
    }

    /// Measure functional on `c_fun`: density samples plus point atoms.
    pub fn with_atoms(space: Space, rep: Vec<f64>, atoms: Vec<Atom>) -> Result<Self> {
        if rep.len() != space.dim() {
            return Err(Error::invalid(format!(
                "functional on {space} needs {} dual coordinates, got {}",
                space.dim(),
                rep.len()
            )));
        }
        if !atoms.is_empty() && !matches!(space.kind(), SpaceKind::CFun { .. }) {
            return Err(Error::UnsupportedCombination(format!(
                "point atoms are only defined for c_fun measures, not {space}"
            )));
        }
        check_finite(&rep, "dual representation")?;
        if atoms
            .iter()
            .any(|a| !a.location.is_finite() || !a.weight.is_finite())
        {
            return Err(Error::non_finite("measure atoms"));
        }
        Ok(Functional { space, rep, atoms })
    }

    pub fn zero(space: Space) -> Self {
        let rep = vec![0.0; space.dim()];
        Functional {
            space,
            rep,
            atoms: Vec::new(),
        }
    }

    /// Dual coordinates drawn i.i.d. standard normal (no atoms).
    pub fn random_normal<R: Rng + ?Sized>(space: Space, rng: &mut R) -> Self {
        let rep = (0..space.dim()).map(|_| rng.sample(StandardNormal)).collect();
        Functional {
            space,
            rep,
            atoms: Vec::new(),
        }
    }

    pub fn space(&self) -> &Space {
        &self.space
    }

    pub fn rep(&self) -> &[f64] {
        &self.rep
    }

    pub fn atoms(&self) -> &[Atom] {
        &self.atoms
    }

    /// `f(x)`.
    pub fn pair(&self, x: &Element) -> Result<f64> {
        self.space.ensure_same(&x.space)?;
        let value = self.pair_unchecked(&x.coeffs);
        if value.is_finite() {
            Ok(value)
        } else {
            Err(Error::non_finite("pairing"))
        }
    }

    pub(crate) fn pair_unchecked(&self, x: &[f64]) -> f64 {
        match self.space.quadrature_weights() {
            None => self.rep.iter().zip(x).map(|(a, b)| a * b).sum(),
            Some(w) => {
                let mut acc: f64 = self
                    .rep
                    .iter()
                    .zip(x)
                    .zip(w)
                    .map(|((g, f), w)| w * g * f)
                    .sum();
                if let Some(grid) = self.space.grid() {
                    for atom in &self.atoms {
                        acc += atom.weight * x[grid.nearest_node(atom.location)];
                    }
                }
                acc
            }
        }
    }

    /// Vector `v` with `pair(f, x) = v . x.coeffs` (atoms folded onto their nodes).
    pub fn effective_weights(&self) -> Vec<f64> {
        let mut v = match self.space.quadrature_weights() {
            None => self.rep.clone(),
            Some(w) => self.rep.iter().zip(w).map(|(g, w)| g * w).collect(),
        };
        if let Some(grid) = self.space.grid() {
            for atom in &self.atoms {
                v[grid.nearest_node(atom.location)] += atom.weight;
            }
        }
        v
    }

    /// Dual norm `||f||_q`; total variation for `c_fun` measures.
    pub fn dual_norm(&self) -> f64 {
        let q = self.space.dual_exponent();
        match self.space.kind() {
            SpaceKind::Euclidean { .. } | SpaceKind::Matrix { .. } => {
                scaled_p_norm(&self.rep, None, 2.0)
            }
            SpaceKind::LpSeq { .. } | SpaceKind::C0Seq { .. } => scaled_p_norm(&self.rep, None, q),
            SpaceKind::LpFun { .. } => {
                if q.is_infinite() {
                    max_abs(&self.rep)
                } else {
                    scaled_p_norm(&self.rep, self.space.quadrature_weights(), q)
                }
            }
            SpaceKind::CFun { .. } => {
                let density: f64 = self
                    .rep
                    .iter()
                    .zip(self.space.quadrature_weights().unwrap_or(&[]))
                    .map(|(g, w)| w * g.abs())
                    .sum();
                density + self.atoms.iter().map(|a| a.weight.abs()).sum::<f64>()
            }
        }
    }

    /// `alpha * f1 + beta * f2`. Atoms at the same location are merged and
    /// atoms whose weight cancels to zero are dropped.
    pub fn combine(f1: &Functional, f2: &Functional, alpha: f64, beta: f64) -> Result<Functional> {
        f1.space.ensure_same(&f2.space)?;
        let rep = f1
            .rep
            .iter()
            .zip(&f2.rep)
            .map(|(a, b)| alpha * a + beta * b)
            .collect();
        let mut atoms: Vec<Atom> = Vec::with_capacity(f1.atoms.len() + f2.atoms.len());
        let scaled = f1
            .atoms
            .iter()
            .map(|a| (a.location, alpha * a.weight))
            .chain(f2.atoms.iter().map(|a| (a.location, beta * a.weight)));
        for (location, weight) in scaled {
            match atoms.iter_mut().find(|a| a.location == location) {
                Some(existing) => existing.weight += weight,
                None => atoms.push(Atom { location, weight }),
            }
        }
        atoms.retain(|a| a.weight != 0.0);
        Functional::with_atoms(f1.space.clone(), rep, atoms)
    }

    pub fn scaled(&self, c: f64) -> Functional {
        Functional {
            space: self.space.clone(),
            rep: self.rep.iter().map(|v| c * v).collect(),
            atoms: self
                .atoms
                .iter()
                .map(|a| Atom {
                    location: a.location,
                    weight: c * a.weight,
                })
                .collect(),
        }
    }

    fn divided(&self, c: f64) -> Functional {
        Functional {
            space: self.space.clone(),
            rep: self.rep.iter().map(|v| v / c).collect(),
            atoms: self
                .atoms
                .iter()
                .map(|a| Atom {
                    location: a.location,
                    weight: a.weight / c,
                })
                .collect(),
        }
    }

    /// Number of trainable coordinates: dual representation then atom weights.
    pub fn param_count(&self) -> usize {
        self.rep.len() + self.atoms.len()
    }

    pub fn params(&self) -> Vec<f64> {
        self.rep
            .iter()
            .copied()
            .chain(self.atoms.iter().map(|a| a.weight))
            .collect()
    }

    pub fn set_params(&mut self, params: &[f64]) -> Result<()> {
        if params.len() != self.param_count() {
            return Err(Error::invalid("parameter count mismatch"));
        }
        check_finite(params, "functional parameters")?;
        let (rep, weights) = params.split_at(self.rep.len());
        self.rep.copy_from_slice(rep);
        for (atom, &w) in self.atoms.iter_mut().zip(weights) {
            atom.weight = w;
        }
        Ok(())
    }

    /// Gradient of `pair(f, x)` with respect to [`Functional::params`].
    pub fn pair_gradient(&self, x: &Element) -> Result<Vec<f64>> {
        self.space.ensure_same(&x.space)?;
        let mut g = match self.space.quadrature_weights() {
            None => x.coeffs.clone(),
            Some(w) => x.coeffs.iter().zip(w).map(|(f, w)| f * w).collect(),
        };
        if let Some(grid) = self.space.grid() {
            g.extend(
                self.atoms
                    .iter()
                    .map(|a| x.coeffs[grid.nearest_node(a.location)]),
            );
        }
        Ok(g)
    }

    /// Rescales `f` so that `max_{b in B} |f(b)| = 1`; also returns the scale
    /// `alpha` that was divided out.
    pub fn normalize_to_sphere(&self, basis: &[Element]) -> Result<(Functional, f64)> {
        let alpha = max_abs_pairing(self, basis)?;
        if alpha == 0.0 || !alpha.is_finite() {
            return Err(Error::DegenerateFunctional);
        }
        let mut normalized = self.divided(alpha);
        // Division can land one ulp above 1; pull it back inside.
        for _ in 0..4 {
            let m = max_abs_pairing(&normalized, basis)?;
            if m <= 1.0 {
                break;
            }
            normalized = normalized.divided(m * (1.0 + f64::EPSILON));
        }
        Ok((normalized, alpha))
    }
}

fn max_abs_pairing(f: &Functional, xs: &[Element]) -> Result<f64> {
    let mut best = 0.0f64;
    for x in xs {
        best = best.max(f.pair(x)?.abs());
    }
    Ok(best)
}

/// `|f(x)|` and `||f||_q ||x||_p`; the caller checks `lhs <= rhs (1 + 1e-12)`.
pub fn holder_bound(f: &Functional, x: &Element) -> Result<(f64, f64)> {
    let lhs = f.pair(x)?.abs();
    let dual = f.dual_norm();
    if !dual.is_finite() {
        return Err(Error::UnsupportedCombination(format!(
            "dual representation on {} has unbounded dual norm",
            f.space
        )));
    }
    Ok((lhs, dual * x.norm()))
}

/// Default number of cosine modes in the grid-function envelope.
pub const DEFAULT_FUNCTION_MODES: usize = 8;

/// Seeded sampler over the artifact's compact set `K` in a space.
///
/// Owns its RNG; use [`CompactSampler::fork`] to hand an independent,
/// seeded copy to another thread.
#[derive(Debug, Clone)]
pub struct CompactSampler {
    space: Space,
    radius: f64,
    seed: u64,
    modes: usize,
    rng: ChaCha8Rng,
}

impl CompactSampler {
    pub fn new(space: Space, radius: f64, seed: u64) -> Result<Self> {
        if !(radius.is_finite() && radius > 0.0) {
            return Err(Error::invalid(format!("sampler radius {radius} must be positive")));
        }
        Ok(CompactSampler {
            space,
            radius,
            seed,
            modes: DEFAULT_FUNCTION_MODES,
            rng: ChaCha8Rng::seed_from_u64(seed),
        })
    }

    /// Number of cosine modes used for grid-function samples.
    pub fn with_modes(mut self, modes: usize) -> Result<Self> {
        if modes == 0 {
            return Err(Error::invalid("at least one cosine mode is required"));
        }
        self.modes = modes;
        Ok(self)
    }

    pub fn space(&self) -> &Space {
        &self.space
    }

    pub fn radius(&self) -> f64 {
        self.radius
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Fresh sampler over the same set with a new seed.
    pub fn fork(&self, seed: u64) -> Self {
        CompactSampler {
            space: self.space.clone(),
            radius: self.radius,
            seed,
            modes: self.modes,
            rng: ChaCha8Rng::seed_from_u64(seed),
        }
    }

    pub fn sample(&mut self, count: usize) -> Vec<Element> {
        (0..count).map(|_| self.sample_one()).collect()
    }

    fn sample_one(&mut self) -> Element {
        let dim = self.space.dim();
        let coeffs = match self.space.kind().clone() {
            SpaceKind::Euclidean { .. } | SpaceKind::Matrix { .. } => self.sample_ball(dim),
            SpaceKind::LpSeq { decay, .. } | SpaceKind::C0Seq { decay, .. } => (0..dim)
                .map(|n| {
                    let bound = self.envelope(n, decay);
                    bound * self.rng.random_range(-1.0..=1.0)
                })
                .collect(),
            SpaceKind::LpFun { .. } | SpaceKind::CFun { .. } => {
                let u: Vec<f64> = (0..self.modes)
                    .map(|_| self.rng.random_range(-1.0..=1.0))
                    .collect();
                let basis = self.cosine_basis();
                let scale = self.function_scale();
                (0..dim)
                    .map(|j| {
                        scale
                            * basis
                                .iter()
                                .zip(&u)
                                .map(|(row, u)| u * row[j])
                                .sum::<f64>()
                    })
                    .collect()
            }
        };
        Element {
            space: self.space.clone(),
            coeffs,
        }
    }

    fn sample_ball(&mut self, dim: usize) -> Vec<f64> {
        let mut v: Vec<f64> = (0..dim).map(|_| self.rng.sample(StandardNormal)).collect();
        let norm = scaled_p_norm(&v, None, 2.0);
        let radial: f64 = self.rng.random::<f64>().powf(1.0 / dim as f64);
        if norm > 0.0 {
            let s = self.radius * radial / norm;
            v.iter_mut().for_each(|x| *x *= s);
        }
        let out_norm = scaled_p_norm(&v, None, 2.0);
        if out_norm > self.radius {
            let s = self.radius / out_norm * (1.0 - f64::EPSILON);
            v.iter_mut().for_each(|x| *x *= s);
        }
        v
    }

    /// Coordinate bound `rho * n^{-s}` (1-based `n`).
    pub fn envelope(&self, index: usize, decay: f64) -> f64 {
        self.radius * ((index + 1) as f64).powf(-decay)
    }

    /// Mode `k` of the cosine envelope, weighted by `(k+1)^{-2}`, at each node.
    fn cosine_basis(&self) -> Vec<Vec<f64>> {
        let grid = self.space.grid().expect("function spaces carry a grid");
        let (a, b) = (grid.spec.a, grid.spec.b);
        (0..self.modes)
            .map(|k| {
                let amp = ((k + 1) as f64).powi(-2);
                grid.nodes
                    .iter()
                    .map(|t| amp * (k as f64 * std::f64::consts::PI * (t - a) / (b - a)).cos())
                    .collect()
            })
            .collect()
    }

    fn function_scale(&self) -> f64 {
        let total: f64 = (0..self.modes).map(|k| ((k + 1) as f64).powi(-2)).sum();
        self.radius / total * (1.0 - 1e-14)
    }

    /// True if `x` satisfies the envelope / ball constraint of this set.
    pub fn contains(&self, x: &Element) -> bool {
        if self.space != x.space {
            return false;
        }
        match self.space.kind() {
            SpaceKind::Euclidean { .. } | SpaceKind::Matrix { .. } => x.norm() <= self.radius,
            SpaceKind::LpSeq { decay, .. } | SpaceKind::C0Seq { decay, .. } => x
                .coeffs
                .iter()
                .enumerate()
                .all(|(n, v)| v.abs() <= self.envelope(n, *decay)),
            SpaceKind::LpFun { .. } | SpaceKind::CFun { .. } => max_abs(&x.coeffs) <= self.radius,
        }
    }

    /// Exact `sup_{x in K} |f(x)|` (the support function of the set).
    pub fn support(&self, f: &Functional) -> Result<f64> {
        self.space.ensure_same(&f.space)?;
        let v = f.effective_weights();
        let value = match self.space.kind() {
            SpaceKind::Euclidean { .. } | SpaceKind::Matrix { .. } => {
                self.radius * scaled_p_norm(&v, None, 2.0)
            }
            SpaceKind::LpSeq { decay, .. } | SpaceKind::C0Seq { decay, .. } => v
                .iter()
                .enumerate()
                .map(|(n, a)| a.abs() * self.envelope(n, *decay))
                .sum(),
            SpaceKind::LpFun { .. } | SpaceKind::CFun { .. } => {
                let scale = self.function_scale();
                self.cosine_basis()
                    .iter()
                    .map(|row| row.iter().zip(&v).map(|(c, w)| c * w).sum::<f64>().abs())
                    .sum::<f64>()
                    * scale
            }
        };
        Ok(value)
    }

    /// Coordinates in which `K` is easy to move around: the coefficients
    /// themselves for balls and sequence envelopes, the cosine-mode amplitudes
    /// for grid functions.
    pub fn latent(&self, x: &Element) -> Result<Vec<f64>> {
        self.space.ensure_same(&x.space)?;
        match self.space.kind() {
            SpaceKind::LpFun { .. } | SpaceKind::CFun { .. } => {
                let basis = self.cosine_basis();
                let scale = self.function_scale();
                let b = DMatrix::from_fn(x.coeffs.len(), basis.len(), |j, k| scale * basis[k][j]);
                let rhs = b.tr_mul(&DVector::from_column_slice(&x.coeffs));
                let u = (b.tr_mul(&b))
                    .cholesky()
                    .map(|c| c.solve(&rhs))
                    .ok_or_else(|| Error::invalid("cosine modes are not independent on this grid"))?;
                Ok(u.iter().map(|v| v.clamp(-1.0, 1.0)).collect())
            }
            _ => Ok(x.coeffs.clone()),
        }
    }

    /// Inverse of [`CompactSampler::latent`].
    pub fn from_latent(&self, u: &[f64]) -> Element {
        let coeffs = match self.space.kind() {
            SpaceKind::LpFun { .. } | SpaceKind::CFun { .. } => {
                let basis = self.cosine_basis();
                let scale = self.function_scale();
                (0..self.space.dim())
                    .map(|j| scale * basis.iter().zip(u).map(|(row, u)| u * row[j]).sum::<f64>())
                    .collect()
            }
            _ => u.to_vec(),
        };
        Element {
            space: self.space.clone(),
            coeffs,
        }
    }

    /// Feasible range of latent coordinate `i` with the others held fixed.
    pub fn latent_range(&self, u: &[f64], i: usize) -> (f64, f64) {
        match self.space.kind() {
            SpaceKind::Euclidean { .. } | SpaceKind::Matrix { .. } => {
                let rest: f64 = u
                    .iter()
                    .enumerate()
                    .filter(|&(j, _)| j != i)
                    .map(|(_, v)| v * v)
                    .sum();
                let r = (self.radius * self.radius - rest).max(0.0).sqrt() * (1.0 - 1e-12);
                (-r, r)
            }
            SpaceKind::LpSeq { decay, .. } | SpaceKind::C0Seq { decay, .. } => {
                let b = self.envelope(i, *decay);
                (-b, b)
            }
            SpaceKind::LpFun { .. } | SpaceKind::CFun { .. } => (-1.0, 1.0),
        }
    }

    /// Samples of `K` rescaled onto the sphere `||x|| = radius`.
    pub fn sample_sphere(&mut self, count: usize) -> Vec<Element> {
        let mut out = Vec::with_capacity(count);
        while out.len() < count {
            let x = self.sample_one();
            let n = x.norm();
            if n > 0.0 {
                let s = self.radius / n;
                out.push(Element {
                    space: x.space,
                    coeffs: x.coeffs.iter().map(|v| v * s).collect(),
                });
            }
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn seq2() -> Space {
        SpaceDescriptor::lp_seq(2.0, 6, 1.0).unwrap()
    }

    #[test]
    fn matrix_pairing_is_trace() {
        let s = SpaceDescriptor::matrix(2, 2).unwrap();
        let w = Functional::new(s.clone(), vec![1.0, 0.0, 0.0, 1.0]).unwrap();
        let x = Element::new(s, vec![1.0, 2.0, 3.0, 4.0]).unwrap();
        assert_eq!(w.pair(&x).unwrap(), 5.0);
    }

    #[test]
    fn sequence_pairing_projects_coordinates() {
        let s = seq2();
        let mut a = vec![0.0; 6];
        a[0] = 1.0;
        let f = Functional::new(s.clone(), a).unwrap();
        let x = Element::new(s, vec![3.0, 0.7, -0.2, 0.1, 0.05, 0.01]).unwrap();
        assert_eq!(f.pair(&x).unwrap(), 3.0);
    }

    #[test]
    fn function_pairing_integrates() {
        let s = SpaceDescriptor::lp_fun(2.0, GridSpec::new(0.0, 1.0)).unwrap();
        let g = Functional::new(s.clone(), vec![1.0; 64]).unwrap();
        let f = Element::new(s, vec![1.0; 64]).unwrap();
        assert!((g.pair(&f).unwrap() - 1.0).abs() < 1e-14);
    }

    #[test]
    fn measure_pairing_combines_atoms_and_density() {
        let s = SpaceDescriptor::c_fun(GridSpec::with_nodes(0.0, 1.0, 2, 8)).unwrap();
        let grid = s.grid().unwrap().clone();
        let coeffs: Vec<f64> = grid.nodes.iter().map(|t| t * t).collect();
        let x = Element::new(s.clone(), coeffs).unwrap();
        let atom = Atom {
            location: grid.nodes[5] + 1e-4,
            weight: 2.0,
        };
        let f = Functional::with_atoms(s, vec![1.0; 16], vec![atom]).unwrap();
        let expected = 2.0 * grid.nodes[5].powi(2) + grid.integrate(|t| t * t);
        assert!((f.pair(&x).unwrap() - expected).abs() < 1e-14);
    }

    #[test]
    fn norms_per_kind() {
        let x = Element::new(seq2(), vec![3.0, 4.0, 0.0, 0.0, 0.0, 0.0]).unwrap();
        assert!((x.norm() - 5.0).abs() < 1e-15);
        let m = SpaceDescriptor::matrix(2, 2).unwrap();
        let id = Element::new(m, vec![1.0, 0.0, 0.0, 1.0]).unwrap();
        assert!((id.norm() - 2f64.sqrt()).abs() < 1e-15);
        let c = SpaceDescriptor::c_fun(GridSpec::with_nodes(0.0, 1.0, 1, 4)).unwrap();
        let f = Element::new(c, vec![0.5, -2.0, 1.0, 0.0]).unwrap();
        assert_eq!(f.norm(), 2.0);
    }

    #[test]
    fn holder_equality_and_zero_element() {
        let s = seq2();
        let mut e1 = vec![0.0; 6];
        e1[0] = 1.0;
        let f = Functional::new(s.clone(), e1.clone()).unwrap();
        let x = Element::new(s.clone(), e1).unwrap();
        assert_eq!(holder_bound(&f, &x).unwrap(), (1.0, 1.0));
        assert_eq!(holder_bound(&f, &Element::zeros(s)).unwrap(), (0.0, 0.0));
    }

    #[test]
    fn space_mismatch_is_reported() {
        let f = Functional::zero(seq2());
        let x = Element::zeros(SpaceDescriptor::euclidean(6).unwrap());
        assert!(matches!(f.pair(&x), Err(Error::SpaceMismatch { .. })));
        assert!(Functional::combine(&f, &Functional::zero(SpaceDescriptor::euclidean(6).unwrap()), 1.0, 1.0).is_err());
    }

    #[test]
    fn invalid_descriptors_and_lengths() {
        assert!(SpaceDescriptor::lp_seq(0.5, 4, 1.0).is_err());
        assert!(SpaceDescriptor::lp_seq(2.0, 0, 1.0).is_err());
        assert!(SpaceDescriptor::c0_seq(4, 0.0).is_err());
        assert!(Element::new(seq2(), vec![1.0; 3]).is_err());
        assert!(Element::new(seq2(), vec![f64::NAN; 6]).is_err());
        let atoms = vec![Atom {
            location: 0.0,
            weight: 1.0,
        }];
        assert!(Functional::with_atoms(seq2(), vec![0.0; 6], atoms).is_err());
    }

    #[test]
    fn dual_exponents() {
        assert_eq!(seq2().dual_exponent(), 2.0);
        assert_eq!(SpaceDescriptor::lp_seq(1.0, 3, 1.0).unwrap().dual_exponent(), f64::INFINITY);
        assert_eq!(SpaceDescriptor::c0_seq(3, 1.0).unwrap().dual_exponent(), 1.0);
        assert!((SpaceDescriptor::lp_seq(3.0, 3, 1.0).unwrap().dual_exponent() - 1.5).abs() < 1e-15);
    }

    #[test]
    fn combine_cancels_and_scales() {
        let s = seq2();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let f = Functional::random_normal(s.clone(), &mut rng);
        let x = CompactSampler::new(s, 1.0, 1).unwrap().sample(1).pop().unwrap();
        let zero = Functional::combine(&f, &f, 1.0, -1.0).unwrap();
        assert_eq!(zero.pair(&x).unwrap(), 0.0);
        let double = Functional::combine(&f, &Functional::zero(f.space().clone()), 2.0, 0.0).unwrap();
        assert_eq!(double.pair(&x).unwrap(), 2.0 * f.pair(&x).unwrap());
    }

    #[test]
    fn sphere_normalization() {
        let s = seq2();
        let basis = CompactSampler::new(s.clone(), 1.0, 5).unwrap().sample(16);
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let f = Functional::random_normal(s.clone(), &mut rng);
        let (g, alpha) = f.normalize_to_sphere(&basis).unwrap();
        let m = max_abs_pairing(&g, &basis).unwrap();
        assert!((1.0 - 1e-12..=1.0).contains(&m));
        let doubled = f.scaled(2.0 / alpha);
        let (h, a2) = doubled.normalize_to_sphere(&basis).unwrap();
        assert!((a2 - 2.0).abs() < 1e-14);
        for (x, y) in h.rep().iter().zip(g.rep()) {
            assert!((x - y).abs() < 1e-12);
        }
        let (again, a3) = g.normalize_to_sphere(&basis).unwrap();
        assert!((a3 - 1.0).abs() < 1e-15);
        for (x, y) in again.rep().iter().zip(g.rep()) {
            assert!((x - y).abs() <= 1e-15 * y.abs().max(1.0));
        }
        assert!(matches!(
            Functional::zero(s).normalize_to_sphere(&basis),
            Err(Error::DegenerateFunctional)
        ));
    }

    #[test]
    fn sampler_is_deterministic_and_respects_envelopes() {
        let s = seq2();
        let a = CompactSampler::new(s.clone(), 1.0, 7).unwrap().sample(3);
        let b = CompactSampler::new(s.clone(), 1.0, 7).unwrap().sample(3);
        assert_eq!(a, b);
        for x in CompactSampler::new(s, 1.0, 9).unwrap().sample(500) {
            for (n, v) in x.coeffs().iter().enumerate() {
                assert!(v.abs() <= 1.0 / (n + 1) as f64);
            }
        }
        let m = SpaceDescriptor::matrix(3, 2).unwrap();
        for x in CompactSampler::new(m, 1.0, 2).unwrap().sample(500) {
            assert!(x.norm() <= 1.0);
        }
        let c = SpaceDescriptor::c_fun(GridSpec::new(-1.0, 2.0)).unwrap();
        let sampler = CompactSampler::new(c, 0.5, 4).unwrap();
        for x in sampler.clone().sample(200) {
            assert!(sampler.contains(&x));
            assert!(x.norm() <= 0.5);
        }
    }

    #[test]
    fn support_bounds_samples_and_is_nearly_attained() {
        let s = seq2();
        let sampler = CompactSampler::new(s.clone(), 1.0, 1).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let f = Functional::random_normal(s, &mut rng);
        let sup = sampler.support(&f).unwrap();
        let xs = sampler.clone().sample(4000);
        let observed = max_abs_pairing(&f, &xs).unwrap();
        assert!(observed <= sup * (1.0 + 1e-12));
        assert!(observed > 0.5 * sup);
    }

    #[test]
    fn json_shape_is_kind_params_coeffs() {
        let x = Element::new(SpaceDescriptor::euclidean(2).unwrap(), vec![0.1, -2.5]).unwrap();
        let text = serde_json::to_string(&x).unwrap();
        assert_eq!(
            text,
            r#"{"space":{"kind":"euclidean","params":{"dim":2}},"coeffs":[0.1,-2.5]}"#
        );
        let back: Element = serde_json::from_str(&text).unwrap();
        assert_eq!(back, x);
        let bad = r#"{"space":{"kind":"euclidean","params":{"dim":3}},"coeffs":[0.1,-2.5]}"#;
        assert!(serde_json::from_str::<Element>(bad).is_err());
    }
}
