//! Gauss-Legendre rules and composite quadrature grids.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Nodes and weights of the `n`-point Gauss-Legendre rule on `[-1, 1]`,
/// nodes in ascending order.
///
/// Nodes are found by Newton iteration on the three-term recurrence starting
/// from the Tricomi asymptotic guesses; this stays accurate well past
/// `n = 10^4`.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 1, "Gauss-Legendre rule needs at least one node");
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    let nf = n as f64;
    let half = n.div_ceil(2);
    let rec = Recurrence::new(n);
    // nodes are refined in lockstep batches so the recurrences interleave
    for start in (0..half).step_by(LANES) {
        let count = LANES.min(half - start);
        let mut x = [0.0; LANES];
        for (lane, v) in x.iter_mut().enumerate().take(count) {
            // (start + lane)-th largest root
            let theta = std::f64::consts::PI * ((start + lane) as f64 + 0.75) / (nf + 0.5);
            *v = (1.0 - (nf - 1.0) / (8.0 * nf * nf * nf)) * theta.cos();
        }
        for _ in 0..20 {
            let (p, d) = rec.eval(x);
            let mut done = true;
            for lane in 0..count {
                let dx = p[lane] / d[lane];
                x[lane] -= dx;
                done &= dx.abs() <= 1e-15;
            }
            if done {
                break;
            }
        }
        let (_, dp) = rec.eval(x);
        for lane in 0..count {
            let i = start + lane;
            let w = 2.0 / ((1.0 - x[lane] * x[lane]) * dp[lane] * dp[lane]);
            nodes[n - 1 - i] = x[lane];
            weights[n - 1 - i] = w;
            nodes[i] = -x[lane];
            weights[i] = w;
        }
    }
    if n % 2 == 1 {
        nodes[n / 2] = 0.0;
    }
    (nodes, weights)
}

const LANES: usize = 8;

/// `P_k = a_k x P_{k-1} - b_k P_{k-2}` with the coefficients tabulated.
struct Recurrence {
    n: usize,
    ab: Vec<(f64, f64)>,
}

impl Recurrence {
    fn new(n: usize) -> Self {
        let ab = (2..=n)
            .map(|k| {
                let kf = k as f64;
                ((2.0 * kf - 1.0) / kf, (kf - 1.0) / kf)
            })
            .collect();
        Recurrence { n, ab }
    }

    /// `(P_n(x), P_n'(x))` for every lane.
    fn eval(&self, x: [f64; LANES]) -> ([f64; LANES], [f64; LANES]) {
        let mut p0 = [1.0; LANES];
        let mut p1 = x;
        for &(a, b) in &self.ab {
            for l in 0..LANES {
                let p2 = a * x[l] * p1[l] - b * p0[l];
                p0[l] = p1[l];
                p1[l] = p2;
            }
        }
        let mut d = [0.0; LANES];
        for l in 0..LANES {
            d[l] = self.n as f64 * (x[l] * p1[l] - p0[l]) / (x[l] * x[l] - 1.0);
        }
        (p1, d)
    }
}

/// Parameters of a composite Gauss-Legendre grid on `[a, b]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub a: f64,
    pub b: f64,
    /// Number of equal panels.
    pub panels: usize,
    /// Gauss-Legendre points per panel.
    pub order: usize,
}

impl GridSpec {
    /// 64 nodes on `[a, b]`: four panels of 16-point rules.
    pub fn new(a: f64, b: f64) -> Self {
        GridSpec {
            a,
            b,
            panels: 4,
            order: 16,
        }
    }

    pub fn with_nodes(a: f64, b: f64, panels: usize, order: usize) -> Self {
        GridSpec {
            a,
            b,
            panels,
            order,
        }
    }

    pub fn len(&self) -> usize {
        self.panels * self.order
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.a.is_finite() && self.b.is_finite() && self.a < self.b) {
            return Err(Error::invalid(format!(
                "grid interval [{}, {}] must be finite with a < b",
                self.a, self.b
            )));
        }
        if self.panels == 0 || self.order == 0 {
            return Err(Error::invalid("grid needs at least one panel and one node per panel"));
        }
        Ok(())
    }
}

/// Materialized quadrature grid: nodes strictly increasing, weights positive.
#[derive(Debug, Clone, PartialEq)]
pub struct QuadratureGrid {
    pub spec: GridSpec,
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl QuadratureGrid {
    pub fn build(spec: GridSpec) -> Result<Self> {
        spec.validate()?;
        let (ref_nodes, ref_weights) = gauss_legendre(spec.order);
        let width = (spec.b - spec.a) / spec.panels as f64;
        let mut nodes = Vec::with_capacity(spec.len());
        let mut weights = Vec::with_capacity(spec.len());
        for p in 0..spec.panels {
            let left = spec.a + width * p as f64;
            let mid = left + 0.5 * width;
            for (x, w) in ref_nodes.iter().zip(&ref_weights) {
                nodes.push(mid + 0.5 * width * x);
                weights.push(0.5 * width * w);
            }
        }
        Ok(QuadratureGrid {
            spec,
            nodes,
            weights,
        })
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn integrate(&self, f: impl Fn(f64) -> f64) -> f64 {
        self.nodes.iter().zip(&self.weights).map(|(&t, &w)| w * f(t)).sum()
    }

    /// Index of the node nearest to `t` (ties go to the lower node).
    pub fn nearest_node(&self, t: f64) -> usize {
        match self.nodes.binary_search_by(|x| x.total_cmp(&t)) {
            Ok(i) => i,
            Err(0) => 0,
            Err(i) if i >= self.nodes.len() => self.nodes.len() - 1,
            Err(i) => {
                if (t - self.nodes[i - 1]) <= (self.nodes[i] - t) {
                    i - 1
                } else {
                    i
                }
            }
        }
    }
}
