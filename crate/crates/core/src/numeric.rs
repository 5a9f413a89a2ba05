//! Small numeric helpers shared across modules.

/// Below this length [`pairwise_sum`] adds sequentially.
const PAIRWISE_BLOCK: usize = 8;

/// Pairwise (cascade) summation in index order.
///
/// The split points depend only on the slice length, so the result is
/// bitwise reproducible for a given input order.
pub fn pairwise_sum(values: &[f64]) -> f64 {
    if values.len() <= PAIRWISE_BLOCK {
        let mut acc = 0.0;
        for v in values {
            acc += v;
        }
        acc
    } else {
        let mid = values.len() / 2;
        pairwise_sum(&values[..mid]) + pairwise_sum(&values[mid..])
    }
}

/// Binomial coefficient as a float; exact for the small orders used here.
pub fn binomial(n: usize, k: usize) -> f64 {
    if k > n {
        return 0.0;
    }
    let k = k.min(n - k);
    let mut acc = 1.0f64;
    for i in 0..k {
        acc = acc * (n - i) as f64 / (i + 1) as f64;
    }
    acc.round()
}

/// `count` evenly spaced points covering `[a, b]` including both ends.
pub fn linspace(a: f64, b: f64, count: usize) -> Vec<f64> {
    match count {
        0 => Vec::new(),
        1 => vec![0.5 * (a + b)],
        _ => {
            let step = (b - a) / (count - 1) as f64;
            (0..count)
                .map(|i| if i + 1 == count { b } else { a + step * i as f64 })
                .collect()
        }
    }
}

/// Derives an independent child seed from a parent seed and a stream tag
/// (splitmix64 finalizer).
pub fn derive_seed(parent: u64, stream: u64) -> u64 {
    let mut z = parent
        .wrapping_add(stream.wrapping_mul(0x9E37_79B9_7F4A_7C15))
        .wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Evaluates a polynomial given by ascending coefficients (Horner).
pub fn horner(coeffs: &[f64], t: f64) -> f64 {
    coeffs.iter().rev().fold(0.0, |acc, &c| acc * t + c)
}

/// Coefficients of `p(m + s*u)` as a polynomial in `u`.
pub fn affine_substitute(coeffs: &[f64], m: f64, s: f64) -> Vec<f64> {
    let mut out = vec![0.0; coeffs.len()];
    for (k, &c) in coeffs.iter().enumerate() {
        if c == 0.0 {
            continue;
        }
        // (m + s u)^k = sum_j C(k,j) m^(k-j) s^j u^j
        for (j, slot) in out.iter_mut().enumerate().take(k + 1) {
            *slot += c * binomial(k, j) * m.powi((k - j) as i32) * s.powi(j as i32);
        }
    }
    out
}

/// Maximum absolute entry; 0 for an empty slice.
pub fn max_abs(values: &[f64]) -> f64 {
    values.iter().fold(0.0f64, |m, v| m.max(v.abs()))
}

/// Scaled p-norm `(sum |v|^p)^(1/p)`, robust against overflow for large p.
pub fn scaled_p_norm(values: &[f64], weights: Option<&[f64]>, p: f64) -> f64 {
    if p.is_infinite() {
        return max_abs(values);
    }
    let scale = max_abs(values);
    if scale == 0.0 {
        return 0.0;
    }
    let sum: f64 = match weights {
        Some(w) => values
            .iter()
            .zip(w)
            .map(|(v, w)| w * (v.abs() / scale).powf(p))
            .sum(),
        None => values.iter().map(|v| (v.abs() / scale).powf(p)).sum(),
    };
    scale * sum.powf(1.0 / p)
}
