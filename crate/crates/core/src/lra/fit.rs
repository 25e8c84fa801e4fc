//! Greedy rank-by-rank construction: each rank adds one factor fitted to the
//! current residual and refits all weights, after which all factors are
//! refined jointly.

use super::als::{
    als_correction_step, als_joint_refine, als_update_step, combine, distance, min_norm_solve, AlsOptions,
    LegendreTable, RankOneFactor,
};
use super::design::ExperimentalDesign;
use super::model::LraModel;
use crate::error::{Error, Result};

/// Residual norm, relative to the output norm, below which adding more
/// factors is pointless.
const EXACT_FIT: f64 = 1e-13;

#[derive(Debug, Clone, PartialEq)]
pub struct LraFit {
    pub model: LraModel,
    /// Root mean squared training residual.
    pub train_rmse: f64,
    /// Set when some weight refit hit linearly dependent factors.
    pub rank_deficient: bool,
}

/// Fits models of every rank `1..=max_rank`; entry `r - 1` has rank `r`
/// unless an exact fit was reached earlier, in which case later entries
/// repeat that model.
pub fn fit_lra_path(
    design: &ExperimentalDesign,
    max_rank: usize,
    degree: usize,
    options: &AlsOptions,
) -> Result<Vec<LraFit>> {
    if max_rank == 0 {
        return Err(Error::domain("rank must be at least 1"));
    }
    let table = LegendreTable::new(&design.inputs, degree)?;
    fit_path_on(&table, design, max_rank, options)
}

struct Weights {
    b: Vec<f64>,
    err: f64,
    deficient: bool,
}

/// Update step, falling back to full least squares when the sparse refit
/// is worse than `reference`.
fn refit_weights(values: &[Vec<f64>], y: &[f64], reference: f64) -> Result<Weights> {
    let n = y.len();
    let update = als_update_step(values, y)?;
    let err = distance(&combine(values, &update.b, n), y);
    if err <= reference {
        return Ok(Weights {
            b: update.b,
            err,
            deficient: update.rank_deficient,
        });
    }
    let full = min_norm_solve(values, y)?;
    let full_err = distance(&combine(values, &full, n), y);
    Ok(if full_err < err {
        Weights {
            b: full,
            err: full_err,
            deficient: true,
        }
    } else {
        Weights {
            b: update.b,
            err,
            deficient: update.rank_deficient,
        }
    })
}

struct PathState<'a> {
    table: &'a LegendreTable,
    y: &'a [f64],
    factors: Vec<RankOneFactor>,
    values: Vec<Vec<f64>>,
    b: Vec<f64>,
    err: f64,
    rank_deficient: bool,
}

impl PathState<'_> {
    fn residual(&self, skip: Option<usize>) -> Vec<f64> {
        let mut r = self.y.to_vec();
        for (l, (w, bl)) in self.values.iter().zip(&self.b).enumerate() {
            if Some(l) != skip {
                for (ri, wi) in r.iter_mut().zip(w) {
                    *ri -= bl * wi;
                }
            }
        }
        r
    }

    fn add_rank(&mut self, options: &AlsOptions) -> Result<()> {
        let correction = als_correction_step(self.table, &self.residual(None), options)?;
        self.values.push(correction.factor.evaluate(self.table));
        self.factors.push(correction.factor);
        let w = refit_weights(&self.values, self.y, self.err)?;
        if w.err <= self.err {
            self.b = w.b;
            self.err = w.err;
            self.rank_deficient |= w.deficient;
        } else {
            self.b.push(0.0);
            self.err = distance(&combine(&self.values, &self.b, self.y.len()), self.y);
        }
        Ok(())
    }

    /// Joint refinement followed by an update step; kept only if the
    /// training residual does not grow.
    fn refine(&mut self, options: &AlsOptions) -> Result<()> {
        let joint = als_joint_refine(self.table, self.y, &self.factors, &self.b, options)?;
        let values: Vec<Vec<f64>> = joint.factors.iter().map(|f| f.evaluate(self.table)).collect();
        let w = refit_weights(&values, self.y, joint.residual_norm)?;
        let (b, err, deficient) = if w.err <= joint.residual_norm {
            (w.b, w.err, w.deficient)
        } else {
            let err = distance(&combine(&values, &joint.b, self.y.len()), self.y);
            (joint.b, err, false)
        };
        if err <= self.err {
            self.factors = joint.factors;
            self.values = values;
            self.b = b;
            self.err = err;
            self.rank_deficient |= deficient;
        }
        Ok(())
    }
}

pub(crate) fn fit_path_on(
    table: &LegendreTable,
    design: &ExperimentalDesign,
    max_rank: usize,
    options: &AlsOptions,
) -> Result<Vec<LraFit>> {
    let y = &design.outputs;
    let n = y.len();
    let y_norm = y.iter().map(|v| v * v).sum::<f64>().sqrt();
    let mut state = PathState {
        table,
        y,
        factors: Vec::new(),
        values: Vec::new(),
        b: Vec::new(),
        err: y_norm,
        rank_deficient: false,
    };
    let mut path: Vec<LraFit> = Vec::with_capacity(max_rank);

    for rank in 1..=max_rank {
        if let Some(last) = path.last() {
            if state.err <= EXACT_FIT * y_norm {
                path.push(last.clone());
                continue;
            }
        }
        state.add_rank(options)?;
        if rank > 1 && state.err > EXACT_FIT * y_norm {
            state.refine(options)?;
        }
        path.push(LraFit {
            model: LraModel {
                metric: design.metric,
                degree: table.degree(),
                b: state.b.clone(),
                factors: state.factors.clone(),
                normalization: design.normalization.clone(),
            },
            train_rmse: state.err / (n as f64).sqrt(),
            rank_deficient: state.rank_deficient,
        });
    }
    Ok(path)
}

/// Fits a model of rank `rank` (or lower, if the data are fitted exactly
/// before reaching it).
pub fn fit_lra(design: &ExperimentalDesign, rank: usize, degree: usize, options: &AlsOptions) -> Result<LraFit> {
    let mut path = fit_lra_path(design, rank, degree, options)?;
    Ok(path.pop().expect("path holds max_rank entries"))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lra::design::Metric;
    use crate::lra::legendre::legendre_eval;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn design_of(f: impl Fn(&[f64]) -> f64, n: usize, m: usize, seed: u64) -> ExperimentalDesign {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let inputs: Vec<Vec<f64>> = (0..n).map(|_| (0..m).map(|_| rng.gen_range(-1.0..=1.0)).collect()).collect();
        let outputs = inputs.iter().map(|x| f(x)).collect();
        ExperimentalDesign::new(inputs, outputs, Metric::S95, vec![(0.0, 1.0); m]).unwrap()
    }

    fn p(k: usize, x: f64) -> f64 {
        legendre_eval(k, x).unwrap()
    }

    fn rel_rmse(fit: &LraFit, d: &ExperimentalDesign) -> f64 {
        let rms = (d.outputs.iter().map(|v| v * v).sum::<f64>() / d.len() as f64).sqrt();
        fit.train_rmse / rms
    }

    #[test]
    fn constant_output() {
        let d = design_of(|_| 4.5, 50, 3, 1);
        let fit = fit_lra(&d, 3, 2, &AlsOptions::default()).unwrap();
        assert_eq!(fit.model.rank(), 1);
        assert!(fit.train_rmse < 1e-12);
        for f in &fit.model.factors {
            for z in &f.z {
                assert!(z[1..].iter().all(|c| *c == 0.0));
            }
        }
        assert!((fit.model.predict(&[0.2, -0.3, 0.9]).unwrap() - 4.5).abs() < 1e-12);
    }

    #[test]
    fn zero_output() {
        let d = design_of(|_| 0.0, 20, 2, 2);
        let fit = fit_lra(&d, 2, 2, &AlsOptions::default()).unwrap();
        assert_eq!(fit.model.predict(&[0.1, 0.1]).unwrap(), 0.0);
    }

    #[test]
    fn rank_one_recovery() {
        let d = design_of(|x| 3.0 * p(2, x[0]) * p(1, x[1]), 200, 3, 3);
        let fit = fit_lra(&d, 1, 3, &AlsOptions::default()).unwrap();
        assert!(rel_rmse(&fit, &d) < 1e-8, "{}", rel_rmse(&fit, &d));
        let m = &fit.model;
        let product = m.b[0] * m.factors[0].z[0][2] * m.factors[0].z[1][1] * m.factors[0].z[2][0];
        assert!((product - 3.0).abs() < 1e-6, "{product}");
    }

    #[test]
    fn rank_two_recovery() {
        let d = design_of(
            |x| 3.0 * p(2, x[0]) * p(1, x[1]) + 2.0 * p(1, x[0]) * p(3, x[2]),
            200,
            3,
            4,
        );
        let fit = fit_lra(&d, 2, 3, &AlsOptions::default()).unwrap();
        assert!(rel_rmse(&fit, &d) < 1e-6, "{}", rel_rmse(&fit, &d));
    }

    #[test]
    fn rank_two_recovery_with_dense_factors() {
        for seed in 0..10 {
            let d = design_of(
                |x| {
                    3.0 * p(2, x[0]) * p(1, x[1])
                        + 2.0 * (0.5 + p(1, x[0])) * p(3, x[1]) * (1.0 - 0.5 * p(2, x[2]))
                },
                200,
                3,
                seed,
            );
            let options = AlsOptions {
                max_sweeps: 500,
                ..AlsOptions::default()
            };
            let fit = fit_lra(&d, 2, 3, &options).unwrap();
            assert!(rel_rmse(&fit, &d) < 1e-6, "seed {seed}: {}", rel_rmse(&fit, &d));
        }
    }

    #[test]
    fn training_error_never_increases_with_rank() {
        let d = design_of(|x| (x[0] * x[1]).sin() + x[2].exp() * x[3], 120, 4, 5);
        let path = fit_lra_path(&d, 6, 3, &AlsOptions::default()).unwrap();
        for w in path.windows(2) {
            assert!(w[1].train_rmse <= w[0].train_rmse);
        }
    }

    #[test]
    fn deterministic() {
        let d = design_of(|x| x[0] * x[1] + x[2], 80, 3, 6);
        let a = fit_lra(&d, 3, 2, &AlsOptions::default()).unwrap();
        let b = fit_lra(&d, 3, 2, &AlsOptions::default()).unwrap();
        assert_eq!(a, b);
    }
}
