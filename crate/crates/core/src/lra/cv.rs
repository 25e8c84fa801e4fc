//! Three-fold cross-validated choice of rank and polynomial degree.

use std::fmt;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::als::{AlsOptions, LegendreTable};
use super::design::ExperimentalDesign;
use super::fit::{fit_lra, fit_path_on, LraFit};
use super::lars::argmin_with_ties;
use crate::error::{Error, Result};

pub const FOLDS: usize = 3;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CvEntry {
    pub rank: usize,
    pub degree: usize,
    /// Held-out RMSE averaged over the folds.
    pub rmse: f64,
    /// Held-out MSE over the held-out sample variance, averaged over the folds.
    pub normalized_error: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CvReport {
    /// One entry per candidate, ordered by rank then degree.
    pub entries: Vec<CvEntry>,
    pub selected_rank: usize,
    pub selected_degree: usize,
    /// Normalized error of the selected candidate.
    pub final_error: f64,
}

impl fmt::Display for CvReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "{:>4} {:>6} {:>14} {:>14}", "rank", "degree", "cv_rmse", "cv_error")?;
        for e in &self.entries {
            let mark = if e.rank == self.selected_rank && e.degree == self.selected_degree {
                " *"
            } else {
                ""
            };
            writeln!(
                f,
                "{:>4} {:>6} {:>14.6e} {:>14.6e}{mark}",
                e.rank, e.degree, e.rmse, e.normalized_error
            )?;
        }
        write!(
            f,
            "selected rank {} degree {}, normalized error {:.6e}",
            self.selected_rank, self.selected_degree, self.final_error
        )
    }
}

/// Assigns each sample to a fold: position `j` of a seeded shuffle goes to
/// fold `j % 3`.
pub fn fold_assignment(n: usize, seed: u64) -> Result<Vec<usize>> {
    if n < FOLDS {
        return Err(Error::domain(format!(
            "{FOLDS}-fold cross-validation needs at least {FOLDS} samples, got {n}"
        )));
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let mut fold = vec![0; n];
    for (pos, &i) in order.iter().enumerate() {
        fold[i] = pos % FOLDS;
    }
    Ok(fold)
}

fn held_out_errors(fit: &LraFit, test: &ExperimentalDesign) -> Result<(f64, f64)> {
    let n = test.len() as f64;
    let mut sq = 0.0;
    for (x, y) in test.inputs.iter().zip(&test.outputs) {
        let e = fit.model.predict(x)? - y;
        sq += e * e;
    }
    let mse = sq / n;
    let mean = test.outputs.iter().sum::<f64>() / n;
    let var = test.outputs.iter().map(|y| (y - mean).powi(2)).sum::<f64>() / n;
    let normalized = if var > 0.0 {
        mse / var
    } else if mse == 0.0 {
        0.0
    } else {
        f64::INFINITY
    };
    Ok((mse.sqrt(), normalized))
}

/// Scores every `(rank, degree)` candidate by 3-fold cross-validation,
/// picks the smallest mean held-out RMSE (ties to the smaller rank, then the
/// smaller degree) and refits it on the whole design.
pub fn select_rank_cv(
    design: &ExperimentalDesign,
    ranks: &[usize],
    degrees: &[usize],
    seed: u64,
    options: &AlsOptions,
) -> Result<(CvReport, LraFit)> {
    let mut ranks = ranks.to_vec();
    ranks.sort_unstable();
    ranks.dedup();
    let mut degrees = degrees.to_vec();
    degrees.sort_unstable();
    degrees.dedup();
    if ranks.is_empty() || degrees.is_empty() || ranks[0] == 0 {
        return Err(Error::domain("rank and degree candidates must be non-empty and ranks positive"));
    }
    let fold = fold_assignment(design.len(), seed)?;
    let max_rank = *ranks.last().unwrap();
    let splits: Vec<(ExperimentalDesign, ExperimentalDesign)> = (0..FOLDS)
        .map(|f| {
            let train: Vec<usize> = (0..design.len()).filter(|&i| fold[i] != f).collect();
            let test: Vec<usize> = (0..design.len()).filter(|&i| fold[i] == f).collect();
            (design.subset(&train), design.subset(&test))
        })
        .collect();

    let jobs: Vec<(usize, usize)> = degrees
        .iter()
        .flat_map(|&d| (0..FOLDS).map(move |f| (d, f)))
        .collect();
    let scores: Vec<Vec<(f64, f64)>> = jobs
        .par_iter()
        .map(|&(degree, f)| {
            let (train, test) = &splits[f];
            let table = LegendreTable::new(&train.inputs, degree)?;
            let path = fit_path_on(&table, train, max_rank, options)?;
            ranks
                .iter()
                .map(|&r| held_out_errors(&path[r - 1], test))
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<Vec<_>>>()?;

    let mut entries = Vec::with_capacity(ranks.len() * degrees.len());
    for (ri, &rank) in ranks.iter().enumerate() {
        for (di, &degree) in degrees.iter().enumerate() {
            let per_fold = &scores[di * FOLDS..(di + 1) * FOLDS];
            let rmse = per_fold.iter().map(|s| s[ri].0).sum::<f64>() / FOLDS as f64;
            let normalized_error = per_fold.iter().map(|s| s[ri].1).sum::<f64>() / FOLDS as f64;
            entries.push(CvEntry {
                rank,
                degree,
                rmse,
                normalized_error,
            });
        }
    }
    let rms_y = (design.outputs.iter().map(|y| y * y).sum::<f64>() / design.len() as f64).sqrt();
    let rmses: Vec<f64> = entries.iter().map(|e| e.rmse).collect();
    let best = argmin_with_ties(&rmses, 1e-9 * rms_y)
        .ok_or_else(|| Error::Numeric("cross-validation produced no finite error".into()))?;
    let chosen = entries[best];
    let fit = fit_lra(design, chosen.rank, chosen.degree, options)?;
    Ok((
        CvReport {
            entries,
            selected_rank: chosen.rank,
            selected_degree: chosen.degree,
            final_error: chosen.normalized_error,
        },
        fit,
    ))
}
