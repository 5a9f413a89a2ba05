//! Minimax polynomial approximation by the Remez exchange algorithm.
//!
//! Kept independent of the core crate so that its numbers can serve as a
//! reference for the negative control.

use nalgebra::{DMatrix, DVector};

/// Best uniform approximation of `f` on `[a, b]` by a polynomial of degree
/// `<= degree`.
#[derive(Debug, Clone)]
pub struct Minimax {
    /// Monomial coefficients in the variable `(2t - a - b) / (b - a)`.
    pub coeffs: Vec<f64>,
    /// Levelled error on the final reference.
    pub levelled: f64,
    /// Max `|f - p|` on the dense grid.
    pub error: f64,
    pub reference: Vec<f64>,
    pub iterations: usize,
}

pub fn remez(f: impl Fn(f64) -> f64, degree: usize, interval: (f64, f64), grid_points: usize) -> Minimax {
    let (a, b) = interval;
    assert!(a < b && grid_points > degree + 2);
    let to_t = |u: f64| 0.5 * (a + b) + 0.5 * (b - a) * u;
    let m = degree + 2;
    let grid: Vec<f64> = (0..grid_points)
        .map(|i| -(std::f64::consts::PI * i as f64 / (grid_points - 1) as f64).cos())
        .collect();
    let mut reference: Vec<f64> = (0..m)
        .map(|j| -(std::f64::consts::PI * j as f64 / (m - 1) as f64).cos())
        .collect();
    let eval = |c: &[f64], u: f64| c.iter().rev().fold(0.0, |acc, v| acc * u + v);
    let mut out = Minimax {
        coeffs: vec![0.0; degree + 1],
        levelled: 0.0,
        error: f64::INFINITY,
        reference: reference.clone(),
        iterations: 0,
    };
    for iteration in 1..=100 {
        let mut mat = DMatrix::zeros(m, m);
        let mut rhs = DVector::zeros(m);
        for (j, &u) in reference.iter().enumerate() {
            let mut power = 1.0;
            for k in 0..=degree {
                mat[(j, k)] = power;
                power *= u;
            }
            mat[(j, degree + 1)] = if j % 2 == 0 { 1.0 } else { -1.0 };
            rhs[j] = f(to_t(u));
        }
        let sol = mat.lu().solve(&rhs).expect("Remez reference system is singular");
        let coeffs: Vec<f64> = sol.iter().take(degree + 1).copied().collect();
        let levelled = sol[degree + 1].abs();
        let err: Vec<f64> = grid.iter().map(|&u| f(to_t(u)) - eval(&coeffs, u)).collect();
        let max = err.iter().fold(0.0f64, |acc, e| acc.max(e.abs()));

        // one extremum per run of constant sign, then trim to m alternating points
        let mut extrema: Vec<(usize, f64)> = Vec::new();
        for (i, &e) in err.iter().enumerate() {
            match extrema.last_mut() {
                Some(last) if last.1.signum() == e.signum() || e == 0.0 => {
                    if e.abs() > last.1.abs() {
                        *last = (i, e);
                    }
                }
                _ => extrema.push((i, e)),
            }
        }
        while extrema.len() > m {
            if extrema[0].1.abs() < extrema[extrema.len() - 1].1.abs() {
                extrema.remove(0);
            } else {
                extrema.pop();
            }
        }
        out = Minimax {
            coeffs,
            levelled,
            error: max,
            reference: reference.iter().map(|&u| to_t(u)).collect(),
            iterations: iteration,
        };
        if extrema.len() < m || max - levelled <= 1e-14 * max.max(1e-300) {
            break;
        }
        reference = extrema.iter().map(|&(i, _)| grid[i]).collect();
    }
    out
}

/// Smallest sup norm on `[-1, 1]` of a monic polynomial of degree `n`,
/// computed as the minimax distance from `t^n` to degree `n - 1`.
pub fn minimal_monic_sup(n: usize) -> f64 {
    assert!(n >= 1);
    remez(|t| t.powi(n as i32), n - 1, (-1.0, 1.0), 20001).error
}
