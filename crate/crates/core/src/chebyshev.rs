//! Chebyshev interpolation on `[-1, 1]` and conversion to the monomial basis.

use std::f64::consts::PI;

/// Chebyshev series `sum c_j T_j(u)` on `[-1, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct ChebyshevSeries {
    pub coeffs: Vec<f64>,
}

impl ChebyshevSeries {
    /// Interpolates `f` at the `degree + 1` Chebyshev-Gauss points.
    pub fn fit(degree: usize, f: impl Fn(f64) -> f64) -> Self {
        let n = degree + 1;
        let samples: Vec<f64> = (0..n)
            .map(|k| f((PI * (k as f64 + 0.5) / n as f64).cos()))
            .collect();
        let coeffs = (0..n)
            .map(|j| {
                let s: f64 = samples
                    .iter()
                    .enumerate()
                    .map(|(k, v)| v * (PI * j as f64 * (k as f64 + 0.5) / n as f64).cos())
                    .sum();
                let c = 2.0 * s / n as f64;
                if j == 0 {
                    0.5 * c
                } else {
                    c
                }
            })
            .collect();
        ChebyshevSeries { coeffs }
    }

    pub fn degree(&self) -> usize {
        self.coeffs.len().saturating_sub(1)
    }

    /// Clenshaw recurrence.
    pub fn eval(&self, u: f64) -> f64 {
        let mut b1 = 0.0;
        let mut b2 = 0.0;
        for &c in self.coeffs.iter().skip(1).rev() {
            let b0 = 2.0 * u * b1 - b2 + c;
            b2 = b1;
            b1 = b0;
        }
        self.coeffs.first().copied().unwrap_or(0.0) + u * b1 - b2
    }

    /// Ascending monomial coefficients of the same polynomial.
    pub fn to_monomial(&self) -> Vec<f64> {
        let n = self.coeffs.len();
        let mut out = vec![0.0; n];
        if n == 0 {
            return out;
        }
        // T_{j+1} = 2u T_j - T_{j-1}
        let mut prev = vec![0.0; n];
        let mut cur = vec![0.0; n];
        prev[0] = 1.0;
        out[0] += self.coeffs[0];
        if n > 1 {
            cur[1] = 1.0;
            out[1] += self.coeffs[1];
        }
        for j in 2..n {
            let mut next = vec![0.0; n];
            for i in 0..n {
                if i > 0 {
                    next[i] += 2.0 * cur[i - 1];
                }
                next[i] -= prev[i];
            }
            for (o, t) in out.iter_mut().zip(&next) {
                *o += self.coeffs[j] * t;
            }
            prev = cur;
            cur = next;
        }
        out
    }
}
