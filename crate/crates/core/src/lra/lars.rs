//! Hybrid least-angle regression: the LARS path proposes nested supports,
//! each support is refitted by ordinary least squares and scored by its
//! leave-one-out error, and the best-scoring refit is returned.

use crate::error::{Error, Result};

/// Columns whose norm falls below this fraction of the largest column norm
/// are treated as identically zero.
const DEGENERATE_COLUMN: f64 = 1e-12;
/// Residual norm (of a unit column) left after projecting out the active set
/// below which a column counts as linearly dependent.
const DEPENDENT_COLUMN: f64 = 1e-9;
/// Leverage above which a sample is considered fully determined by its own
/// value, making its leave-one-out residual undefined.
const MAX_LEVERAGE: f64 = 1.0 - 1e-10;

#[derive(Debug, Clone, PartialEq)]
pub struct LarsFit {
    /// One coefficient per regressor column; zero outside the support.
    pub coefficients: Vec<f64>,
    /// Selected columns, ascending.
    pub support: Vec<usize>,
    /// Leave-one-out mean squared error of the selected refit.
    pub loo_error: f64,
    /// Columns in LARS entry order.
    pub path: Vec<usize>,
    /// Columns rejected as linearly dependent on earlier entries.
    pub dependent: Vec<usize>,
}

impl LarsFit {
    fn empty(k: usize, loo_error: f64) -> Self {
        Self {
            coefficients: vec![0.0; k],
            support: Vec::new(),
            loo_error,
            path: Vec::new(),
            dependent: Vec::new(),
        }
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Thin QR built one column at a time (modified Gram-Schmidt, applied twice).
struct IncrementalQr {
    q: Vec<Vec<f64>>,
    /// Column-major upper triangle: `r[j][i]` is R(i, j) for i <= j.
    r: Vec<Vec<f64>>,
}

impl IncrementalQr {
    fn new() -> Self {
        Self {
            q: Vec::new(),
            r: Vec::new(),
        }
    }

    /// Appends `col` if it is not (numerically) in the current span.
    fn push(&mut self, col: &[f64]) -> bool {
        let mut v = col.to_vec();
        let mut coeffs = vec![0.0; self.q.len()];
        for _ in 0..2 {
            for (c, q) in coeffs.iter_mut().zip(&self.q) {
                let proj = dot(q, &v);
                *c += proj;
                for (vi, qi) in v.iter_mut().zip(q) {
                    *vi -= proj * qi;
                }
            }
        }
        let norm = dot(&v, &v).sqrt();
        let scale = dot(col, col).sqrt();
        if !(norm > DEPENDENT_COLUMN * scale) {
            return false;
        }
        v.iter_mut().for_each(|x| *x /= norm);
        coeffs.push(norm);
        self.q.push(v);
        self.r.push(coeffs);
        true
    }

    /// Solves `R[..k,..k] x = rhs`.
    fn solve_upper(&self, k: usize, rhs: &[f64]) -> Vec<f64> {
        let mut x = rhs[..k].to_vec();
        for i in (0..k).rev() {
            for j in i + 1..k {
                x[i] -= self.r[j][i] * x[j];
            }
            x[i] /= self.r[i][i];
        }
        x
    }

    /// Solves `R[..k,..k]^T x = rhs`.
    fn solve_upper_transposed(&self, k: usize, rhs: &[f64]) -> Vec<f64> {
        let mut x = rhs[..k].to_vec();
        for i in 0..k {
            for j in 0..i {
                x[i] -= self.r[i][j] * x[j];
            }
            x[i] /= self.r[i][i];
        }
        x
    }
}

/// Picks the lowest index among the minimal values, treating scores within
/// a small tolerance of the minimum as ties. Returns `None` if no score is
/// finite.
pub(crate) fn argmin_with_ties(scores: &[f64], abs_tol: f64) -> Option<usize> {
    let best = scores
        .iter()
        .copied()
        .filter(|s| s.is_finite())
        .fold(f64::INFINITY, f64::min);
    if !best.is_finite() {
        return None;
    }
    let tol = 1e-9 * best.abs() + abs_tol;
    scores.iter().position(|s| s.is_finite() && *s <= best + tol)
}

/// Hybrid LARS on the regressor columns `columns` (each of length N).
///
/// Columns enter the LARS path by largest absolute correlation with the
/// current residual; exact ties go to the lower column index. The path stops
/// after `min(K, N - 1)` entries or once no column correlates with the
/// residual. The support of size `k` is the first `k` entries of the path;
/// the refit with the smallest leave-one-out error wins, ties going to the
/// smaller support.
pub fn lars_select(columns: &[Vec<f64>], target: &[f64]) -> Result<LarsFit> {
    let k = columns.len();
    let n = target.len();
    if k == 0 || n == 0 {
        return Err(Error::domain("hybrid LARS needs at least one regressor and one sample"));
    }
    if columns.iter().any(|c| c.len() != n) {
        return Err(Error::domain("regressor columns and target differ in length"));
    }
    if target.iter().chain(columns.iter().flatten()).any(|v| !v.is_finite()) {
        return Err(Error::Numeric("non-finite value in LARS inputs".into()));
    }

    let power = dot(target, target);
    if power == 0.0 {
        return Ok(LarsFit::empty(k, 0.0));
    }
    let mean_power = power / n as f64;

    let norms: Vec<f64> = columns.iter().map(|c| dot(c, c).sqrt()).collect();
    let max_norm = norms.iter().copied().fold(0.0, f64::max);
    let mut eligible: Vec<bool> = norms
        .iter()
        .map(|&nm| nm > 0.0 && nm > DEGENERATE_COLUMN * max_norm)
        .collect();
    let unit: Vec<Vec<f64>> = columns
        .iter()
        .zip(&norms)
        .map(|(c, &nm)| {
            if nm > 0.0 {
                c.iter().map(|v| v / nm).collect()
            } else {
                c.clone()
            }
        })
        .collect();

    let max_steps = k.min(n - 1);
    let y_norm = power.sqrt();
    let negligible = 1e-13 * y_norm;

    let mut qr = IncrementalQr::new();
    let mut path: Vec<usize> = Vec::new();
    let mut dependent: Vec<usize> = Vec::new();
    let mut active = vec![false; k];
    let mut residual = target.to_vec();
    let mut corr: Vec<f64> = unit.iter().map(|c| dot(c, &residual)).collect();

    while path.len() < max_steps {
        let candidate = if path.is_empty() {
            let mut best: Option<usize> = None;
            for j in 0..k {
                if eligible[j] && best.is_none_or(|b| corr[j].abs() > corr[b].abs()) {
                    best = Some(j);
                }
            }
            match best {
                Some(j) if corr[j].abs() > negligible => j,
                _ => break,
            }
        } else {
            let c_max = path.iter().map(|&j| corr[j].abs()).fold(0.0, f64::max);
            if c_max <= negligible {
                break;
            }
            // equiangular direction of the active set
            let signs: Vec<f64> = path.iter().map(|&j| corr[j].signum()).collect();
            let t = qr.solve_upper_transposed(path.len(), &signs);
            let w_raw = qr.solve_upper(path.len(), &t);
            let s_dot_w = dot(&signs, &w_raw);
            if !(s_dot_w > 0.0) {
                return Err(Error::Numeric("LARS equiangular system is not positive".into()));
            }
            let a_eq = 1.0 / s_dot_w.sqrt();
            let mut u = vec![0.0; n];
            for (&j, wj) in path.iter().zip(&w_raw) {
                let coef = a_eq * wj;
                for (ui, xi) in u.iter_mut().zip(&unit[j]) {
                    *ui += coef * xi;
                }
            }
            let mut best: Option<(usize, f64)> = None;
            for j in 0..k {
                if active[j] || !eligible[j] {
                    continue;
                }
                let a_j = dot(&unit[j], &u);
                let mut g = f64::INFINITY;
                for (num, den) in [(c_max - corr[j], a_eq - a_j), (c_max + corr[j], a_eq + a_j)] {
                    let cand = num / den;
                    if cand.is_finite() && cand > 0.0 && cand < g {
                        g = cand;
                    }
                }
                if g.is_finite() && best.is_none_or(|(_, bg)| g < bg) {
                    best = Some((j, g));
                }
            }
            let full_step = c_max / a_eq;
            let (next, gamma) = match best {
                Some((j, g)) if g < full_step => (Some(j), g),
                _ => (None, full_step),
            };
            for (r, ui) in residual.iter_mut().zip(&u) {
                *r -= gamma * ui;
            }
            for (c, col) in corr.iter_mut().zip(&unit) {
                *c = dot(col, &residual);
            }
            match next {
                Some(j) => j,
                None => break,
            }
        };

        if qr.push(&unit[candidate]) {
            active[candidate] = true;
            path.push(candidate);
        } else {
            eligible[candidate] = false;
            dependent.push(candidate);
        }
    }

    if path.is_empty() {
        return Ok(LarsFit {
            dependent,
            ..LarsFit::empty(k, mean_power)
        });
    }

    // OLS refit and leave-one-out score for every prefix of the path.
    let qty: Vec<f64> = qr.q.iter().map(|q| dot(q, target)).collect();
    let mut resid = target.to_vec();
    let mut leverage = vec![0.0; n];
    let mut scores = Vec::with_capacity(path.len());
    for s in 0..path.len() {
        let q = &qr.q[s];
        for i in 0..n {
            resid[i] -= qty[s] * q[i];
            leverage[i] += q[i] * q[i];
        }
        let score = if leverage.iter().any(|h| *h > MAX_LEVERAGE) {
            f64::INFINITY
        } else {
            resid
                .iter()
                .zip(&leverage)
                .map(|(e, h)| (e / (1.0 - h)).powi(2))
                .sum::<f64>()
                / n as f64
        };
        scores.push(score);
    }
    let size = match argmin_with_ties(&scores, 1e-24 * mean_power) {
        Some(i) => i + 1,
        None => {
            return Ok(LarsFit {
                path,
                dependent,
                ..LarsFit::empty(k, f64::INFINITY)
            })
        }
    };
    let beta_unit = qr.solve_upper(size, &qty);
    let mut coefficients = vec![0.0; k];
    for (&j, b) in path[..size].iter().zip(&beta_unit) {
        coefficients[j] = b / norms[j];
    }
    let mut support = path[..size].to_vec();
    support.sort_unstable();
    Ok(LarsFit {
        coefficients,
        support,
        loo_error: scores[size - 1],
        path,
        dependent,
    })
}
