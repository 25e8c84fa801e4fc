//! Legendre polynomials normalized to unit variance under the uniform
//! density on [-1, 1].

use crate::error::{Error, Result};

/// Orthonormal Legendre polynomial `sqrt(2k+1) * P_k(x)`.
pub fn legendre_eval(k: usize, x: f64) -> Result<f64> {
    if !(-1.0..=1.0).contains(&x) {
        return Err(Error::domain(format!("Legendre argument {x} outside [-1, 1]")));
    }
    let mut out = vec![0.0; k + 1];
    legendre_all(x, &mut out);
    Ok(out[k])
}

/// Fills `out[k]` with the orthonormal polynomial of degree `k` for
/// `k < out.len()`. No domain check.
pub(crate) fn legendre_all(x: f64, out: &mut [f64]) {
    if out.is_empty() {
        return;
    }
    // three-term recurrence on the classical polynomials, scaled afterwards
    let (mut prev, mut cur) = (1.0, x);
    out[0] = 1.0;
    for k in 1..out.len() {
        if k > 1 {
            let kf = (k - 1) as f64;
            let next = ((2.0 * kf + 1.0) * x * cur - kf * prev) / (kf + 1.0);
            prev = cur;
            cur = next;
        }
        out[k] = (2.0 * k as f64 + 1.0).sqrt() * cur;
    }
}
