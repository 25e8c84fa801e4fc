//! Alternating least squares building blocks: the correction step that
//! grows one rank-one factor and the update step that refits the weights.

use nalgebra::{DMatrix, DVector};

use super::lars::lars_select;
use super::legendre::legendre_all;
use crate::error::{Error, Result};

/// Smallest ratio of Cholesky diagonal entries for which the normal
/// equations are trusted.
const WELL_CONDITIONED: f64 = 1e-6;

/// Orthonormal Legendre values of every input coordinate, laid out as
/// `[dimension][degree][sample]`.
#[derive(Debug, Clone)]
pub struct LegendreTable {
    dims: usize,
    degree: usize,
    samples: usize,
    values: Vec<f64>,
}

impl LegendreTable {
    /// `inputs` holds one row of normalized coordinates per sample.
    pub fn new(inputs: &[Vec<f64>], degree: usize) -> Result<Self> {
        let samples = inputs.len();
        let dims = inputs.first().map_or(0, Vec::len);
        if samples == 0 || dims == 0 {
            return Err(Error::domain("experimental design is empty"));
        }
        let mut values = vec![0.0; dims * (degree + 1) * samples];
        let mut buf = vec![0.0; degree + 1];
        for (n, row) in inputs.iter().enumerate() {
            if row.len() != dims {
                return Err(Error::domain("design rows differ in length"));
            }
            for (i, &x) in row.iter().enumerate() {
                if !(-1.0..=1.0).contains(&x) {
                    return Err(Error::domain(format!("design input {x} outside [-1, 1]")));
                }
                legendre_all(x, &mut buf);
                for (k, v) in buf.iter().enumerate() {
                    values[(i * (degree + 1) + k) * samples + n] = *v;
                }
            }
        }
        Ok(Self {
            dims,
            degree,
            samples,
            values,
        })
    }

    pub fn dims(&self) -> usize {
        self.dims
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn samples(&self) -> usize {
        self.samples
    }

    /// `P_k(x_i)` over all samples.
    pub fn column(&self, dim: usize, k: usize) -> &[f64] {
        let start = (dim * (self.degree + 1) + k) * self.samples;
        &self.values[start..start + self.samples]
    }

    fn univariate(&self, dim: usize, z: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.samples];
        for (k, &c) in z.iter().enumerate() {
            if c != 0.0 {
                for (o, p) in out.iter_mut().zip(self.column(dim, k)) {
                    *o += c * p;
                }
            }
        }
        out
    }
}

/// Polynomial coefficients of one rank-one factor: `z[i][k]` multiplies the
/// degree-`k` polynomial of input `i`.
#[derive(Debug, Clone, PartialEq)]
pub struct RankOneFactor {
    pub z: Vec<Vec<f64>>,
}

impl RankOneFactor {
    pub fn constant(dims: usize, degree: usize) -> Self {
        let mut z = vec![vec![0.0; degree + 1]; dims];
        for row in &mut z {
            row[0] = 1.0;
        }
        Self { z }
    }

    /// Factor values at every design sample.
    pub fn evaluate(&self, table: &LegendreTable) -> Vec<f64> {
        let mut out = vec![1.0; table.samples()];
        for (i, z) in self.z.iter().enumerate() {
            for (o, v) in out.iter_mut().zip(table.univariate(i, z)) {
                *o *= v;
            }
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AlsOptions {
    /// Relative decrease of the residual norm below which sweeping stops.
    pub tol: f64,
    /// Sweep cap for each phase (dense, then sparse) of every ALS loop.
    pub max_sweeps: usize,
}

impl Default for AlsOptions {
    fn default() -> Self {
        Self {
            tol: 1e-6,
            max_sweeps: 50,
        }
    }
}

#[derive(Debug, Clone)]
pub struct Correction {
    /// Factor with unit-norm coefficients in every dimension.
    pub factor: RankOneFactor,
    /// Scale of the factor in the least-squares fit of the residual.
    pub amplitude: f64,
    /// Norm of `residual - amplitude * factor`.
    pub residual_norm: f64,
    pub sweeps: usize,
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

fn residual_norm(target: &[f64], fit: &[f64]) -> f64 {
    target
        .iter()
        .zip(fit)
        .map(|(t, f)| (t - f) * (t - f))
        .sum::<f64>()
        .sqrt()
}

#[derive(Clone, Copy, PartialEq)]
enum SweepKind {
    /// Least squares on the full univariate basis.
    Dense,
    /// Hybrid LARS; the first sweep replaces the dense solution outright.
    Sparse { first: bool },
}

struct AlsState<'a> {
    table: &'a LegendreTable,
    residual: &'a [f64],
    factor: RankOneFactor,
    dim_values: Vec<Vec<f64>>,
    amplitude: f64,
    err: f64,
}

impl AlsState<'_> {
    fn sweep(&mut self, kind: SweepKind) -> Result<()> {
        let table = self.table;
        let n = table.samples();
        let p = table.degree();
        let suffix = suffix_products(&self.dim_values, n);
        let mut prefix = vec![1.0; n];
        for i in 0..table.dims() {
            let others: Vec<f64> = prefix.iter().zip(&suffix[i]).map(|(a, b)| a * b).collect();
            let columns: Vec<Vec<f64>> = (0..=p)
                .map(|k| table.column(i, k).iter().zip(&others).map(|(a, b)| a * b).collect())
                .collect();
            let coefficients = match kind {
                SweepKind::Dense => dense_solve(&columns, self.residual)?,
                SweepKind::Sparse { .. } => lars_select(&columns, self.residual)?.coefficients,
            };
            let scale = norm(&coefficients);
            if scale == 0.0 {
                continue;
            }
            let fitted = combine(&columns, &coefficients, n);
            let candidate = residual_norm(self.residual, &fitted);
            if candidate <= self.err || kind == (SweepKind::Sparse { first: true }) {
                self.err = candidate;
                self.amplitude = scale;
                self.factor.z[i] = coefficients.iter().map(|c| c / scale).collect();
                self.dim_values[i] = table.univariate(i, &self.factor.z[i]);
            }
            for (a, v) in prefix.iter_mut().zip(&self.dim_values[i]) {
                *a *= v;
            }
        }
        Ok(())
    }

    /// Sweeps until the residual stalls; returns the number of sweeps.
    fn converge(&mut self, kind: SweepKind, options: &AlsOptions) -> Result<usize> {
        let mut sweeps = 0;
        let mut kind = kind;
        while sweeps < options.max_sweeps {
            sweeps += 1;
            let before = self.err;
            self.sweep(kind)?;
            if let SweepKind::Sparse { first: true } = kind {
                kind = SweepKind::Sparse { first: false };
                continue;
            }
            if self.err == 0.0 || (before - self.err) / before < options.tol {
                break;
            }
        }
        Ok(sweeps)
    }
}

/// Fits one rank-one factor to `residual`, starting from the constant
/// factor. Dense least-squares sweeps over the input dimensions locate the
/// factor; hybrid LARS sweeps then sparsify it. Within each phase a
/// dimension's new coefficients are kept only if they do not worsen the fit.
pub fn als_correction_step(table: &LegendreTable, residual: &[f64], options: &AlsOptions) -> Result<Correction> {
    als_refine(table, residual, &RankOneFactor::constant(table.dims(), table.degree()), options)
}

/// Same as [`als_correction_step`] but starting from `init`.
pub fn als_refine(
    table: &LegendreTable,
    residual: &[f64],
    init: &RankOneFactor,
    options: &AlsOptions,
) -> Result<Correction> {
    if residual.len() != table.samples() {
        return Err(Error::domain("residual length differs from the design size"));
    }
    let dims = table.dims();
    let p = table.degree();
    if init.z.len() != dims || init.z.iter().any(|z| z.len() != p + 1) {
        return Err(Error::domain("initial factor does not match the design"));
    }
    let start = norm(residual);
    if start == 0.0 {
        return Ok(Correction {
            factor: RankOneFactor::constant(dims, p),
            amplitude: 0.0,
            residual_norm: 0.0,
            sweeps: 0,
        });
    }
    let factor = RankOneFactor {
        z: init
            .z
            .iter()
            .map(|z| {
                let s = norm(z);
                if s > 0.0 {
                    z.iter().map(|c| c / s).collect()
                } else {
                    let mut e = vec![0.0; p + 1];
                    e[0] = 1.0;
                    e
                }
            })
            .collect(),
    };
    let dim_values = (0..dims).map(|i| table.univariate(i, &factor.z[i])).collect();
    let mut state = AlsState {
        table,
        residual,
        factor,
        dim_values,
        amplitude: 0.0,
        err: start,
    };
    let mut sweeps = state.converge(SweepKind::Dense, options)?;
    if state.amplitude > 0.0 && state.err > 0.0 {
        sweeps += state.converge(SweepKind::Sparse { first: true }, options)?;
    }
    if state.amplitude == 0.0 {
        return Ok(Correction {
            factor: RankOneFactor::constant(dims, p),
            amplitude: 0.0,
            residual_norm: start,
            sweeps,
        });
    }
    Ok(Correction {
        factor: state.factor,
        amplitude: state.amplitude,
        residual_norm: state.err,
        sweeps,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct Update {
    pub b: Vec<f64>,
    /// Set when the factor columns are linearly dependent and the
    /// minimum-norm least-squares solution was used instead.
    pub rank_deficient: bool,
}

#[derive(Debug, Clone)]
pub struct JointRefinement {
    pub factors: Vec<RankOneFactor>,
    pub b: Vec<f64>,
    /// Norm of the training residual.
    pub residual_norm: f64,
    pub sweeps: usize,
}

struct JointState<'a> {
    table: &'a LegendreTable,
    y: &'a [f64],
    factors: Vec<RankOneFactor>,
    /// `dim_values[l][i]` holds the univariate factor `l` along input `i`.
    dim_values: Vec<Vec<Vec<f64>>>,
    b: Vec<f64>,
    err: f64,
}

impl JointState<'_> {
    fn sweep(&mut self, kind: SweepKind) -> Result<()> {
        let table = self.table;
        let n = table.samples();
        let p = table.degree();
        let rank = self.factors.len();
        let suffix: Vec<Vec<Vec<f64>>> = self.dim_values.iter().map(|d| suffix_products(d, n)).collect();
        let mut prefix = vec![vec![1.0; n]; rank];
        for i in 0..table.dims() {
            let mut columns = Vec::with_capacity(rank * (p + 1));
            for (pre, suf) in prefix.iter().zip(&suffix) {
                let others: Vec<f64> = pre.iter().zip(&suf[i]).map(|(a, b)| a * b).collect();
                for k in 0..=p {
                    columns.push(table.column(i, k).iter().zip(&others).map(|(a, b)| a * b).collect::<Vec<f64>>());
                }
            }
            let coefficients = match kind {
                SweepKind::Dense => dense_solve(&columns, self.y)?,
                SweepKind::Sparse { .. } => lars_select(&columns, self.y)?.coefficients,
            };
            let candidate = residual_norm(self.y, &combine(&columns, &coefficients, n));
            if candidate <= self.err || kind == (SweepKind::Sparse { first: true }) {
                self.err = candidate;
                for (l, c) in coefficients.chunks(p + 1).enumerate() {
                    let scale = norm(c);
                    self.b[l] = scale;
                    if scale > 0.0 {
                        self.factors[l].z[i] = c.iter().map(|v| v / scale).collect();
                        self.dim_values[l][i] = table.univariate(i, &self.factors[l].z[i]);
                    }
                }
            }
            for (pre, dims) in prefix.iter_mut().zip(&self.dim_values) {
                for (a, v) in pre.iter_mut().zip(&dims[i]) {
                    *a *= v;
                }
            }
        }
        Ok(())
    }

    fn converge(&mut self, kind: SweepKind, options: &AlsOptions) -> Result<usize> {
        let mut sweeps = 0;
        let mut kind = kind;
        while sweeps < options.max_sweeps {
            sweeps += 1;
            let before = self.err;
            self.sweep(kind)?;
            if let SweepKind::Sparse { first: true } = kind {
                kind = SweepKind::Sparse { first: false };
                continue;
            }
            if self.err == 0.0 || (before - self.err) / before < options.tol {
                break;
            }
        }
        Ok(sweeps)
    }
}

/// Refines all factors together: each sweep refits, dimension by dimension,
/// the coefficients of that dimension for every factor at once (dense least
/// squares first, then hybrid LARS). The weights come out of the same fit.
pub fn als_joint_refine(
    table: &LegendreTable,
    outputs: &[f64],
    factors: &[RankOneFactor],
    b: &[f64],
    options: &AlsOptions,
) -> Result<JointRefinement> {
    if outputs.len() != table.samples() || factors.len() != b.len() || factors.is_empty() {
        return Err(Error::domain("joint refinement inputs are inconsistent"));
    }
    let values: Vec<Vec<f64>> = factors.iter().map(|f| f.evaluate(table)).collect();
    let start = residual_norm(outputs, &combine(&values, b, table.samples()));
    let mut state = JointState {
        table,
        y: outputs,
        factors: factors.to_vec(),
        dim_values: factors
            .iter()
            .map(|f| (0..table.dims()).map(|i| table.univariate(i, &f.z[i])).collect())
            .collect(),
        b: b.to_vec(),
        err: start,
    };
    let mut sweeps = state.converge(SweepKind::Dense, options)?;
    if state.err > 0.0 {
        sweeps += state.converge(SweepKind::Sparse { first: true }, options)?;
    }
    Ok(JointRefinement {
        factors: state.factors,
        b: state.b,
        residual_norm: state.err,
        sweeps,
    })
}

/// `suffix[i]` is the elementwise product of `dim_values[j]` for `j > i`.
fn suffix_products(dim_values: &[Vec<f64>], n: usize) -> Vec<Vec<f64>> {
    let mut suffix = vec![vec![1.0; n]; dim_values.len()];
    for i in (0..dim_values.len().saturating_sub(1)).rev() {
        let (head, tail) = suffix.split_at_mut(i + 1);
        for ((s, t), v) in head[i].iter_mut().zip(&tail[0]).zip(&dim_values[i + 1]) {
            *s = t * v;
        }
    }
    suffix
}

/// Least squares through the normal equations when they are well
/// conditioned, minimum-norm SVD otherwise.
fn dense_solve(columns: &[Vec<f64>], target: &[f64]) -> Result<Vec<f64>> {
    let k = columns.len();
    let mut gram = DMatrix::zeros(k, k);
    for a in 0..k {
        for b in 0..=a {
            let g: f64 = columns[a].iter().zip(&columns[b]).map(|(x, y)| x * y).sum();
            gram[(a, b)] = g;
            gram[(b, a)] = g;
        }
    }
    let rhs = DVector::from_iterator(k, columns.iter().map(|c| c.iter().zip(target).map(|(x, y)| x * y).sum()));
    if let Some(chol) = gram.cholesky() {
        let diag = chol.l_dirty().diagonal();
        if diag.min() > WELL_CONDITIONED * diag.max() {
            let b = chol.solve(&rhs);
            if b.iter().all(|v| v.is_finite()) {
                return Ok(b.iter().copied().collect());
            }
        }
    }
    min_norm_solve(columns, target)
}

/// Minimum-norm least-squares solution of `columns * b = target`.
pub fn min_norm_solve(columns: &[Vec<f64>], target: &[f64]) -> Result<Vec<f64>> {
    let n = target.len();
    let x = DMatrix::from_fn(n, columns.len(), |r, c| columns[c][r]);
    let y = DVector::from_column_slice(target);
    let svd = x.svd(true, true);
    let cutoff = 1e-12 * svd.singular_values.max();
    let b = svd
        .solve(&y, cutoff)
        .map_err(|e| Error::Numeric(format!("least-squares solve failed: {e}")))?;
    if b.iter().any(|v| !v.is_finite()) {
        return Err(Error::Numeric("least-squares solution is not finite".into()));
    }
    Ok(b.iter().copied().collect())
}

fn is_rank_deficient(columns: &[Vec<f64>]) -> bool {
    let n = columns.first().map_or(0, Vec::len);
    if columns.len() > n {
        return true;
    }
    let x = DMatrix::from_fn(n, columns.len(), |r, c| columns[c][r]);
    let sv = x.singular_values();
    !(sv.min() > 1e-10 * sv.max())
}

/// Refits the weights of all factors against the outputs with hybrid LARS,
/// or with minimum-norm least squares when the factors are linearly
/// dependent.
pub fn als_update_step(factor_values: &[Vec<f64>], outputs: &[f64]) -> Result<Update> {
    let fit = lars_select(factor_values, outputs)?;
    if fit.dependent.is_empty() && !is_rank_deficient(factor_values) {
        Ok(Update {
            b: fit.coefficients,
            rank_deficient: false,
        })
    } else {
        Ok(Update {
            b: min_norm_solve(factor_values, outputs)?,
            rank_deficient: true,
        })
    }
}

/// Weighted sum of factor columns.
pub(crate) fn combine(factor_values: &[Vec<f64>], b: &[f64], samples: usize) -> Vec<f64> {
    let mut out = vec![0.0; samples];
    for (w, bl) in factor_values.iter().zip(b) {
        for (o, x) in out.iter_mut().zip(w) {
            *o += bl * x;
        }
    }
    out
}

pub(crate) fn distance(a: &[f64], b: &[f64]) -> f64 {
    residual_norm(a, b)
}
