//! Strategy evaluation over a shared scenario set and the rate-versus-exposure
//! trade-off report.

use std::io::Write;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::exposure::{exposure_metrics, DistributionStats, ExposureMetrics, FieldKernel};
use crate::geometry::{GridSpec, OfficeLayout, NUM_GNBS, NUM_ROOMS};
use crate::lra::Metric;
use crate::propagation::{compute_pointings, rate_report, RfParams, Strategy};
use crate::scenario::{Scenario, ScenarioSet};
use crate::table;

pub const DEFAULT_STRATEGY_COUNT: usize = 32;

/// Outcome of one strategy on one scenario.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScenarioEvaluation {
    pub mean_rate_bps: f64,
    pub metrics: ExposureMetrics,
}

/// Evaluates strategies on scenarios for a fixed layout, radio setup and
/// grid. The beam-independent part of the exposure computation is shared.
#[derive(Debug, Clone)]
pub struct Simulator {
    params: RfParams,
    layout: OfficeLayout,
    kernel: FieldKernel,
}

impl Simulator {
    pub fn new(params: RfParams, layout: OfficeLayout, grid: &GridSpec) -> Result<Self> {
        params.validate()?;
        let kernel = FieldKernel::for_layout(&params, &layout, grid)?;
        Ok(Self { params, layout, kernel })
    }

    pub fn params(&self) -> &RfParams {
        &self.params
    }

    pub fn layout(&self) -> &OfficeLayout {
        &self.layout
    }

    pub fn evaluate_scenario(&self, strategy: &Strategy, scenario: &Scenario) -> Result<ScenarioEvaluation> {
        let rates = rate_report(&self.params, &self.layout, strategy, scenario)?;
        let field = self.kernel.field(&compute_pointings(&self.layout, strategy, scenario))?;
        Ok(ScenarioEvaluation {
            mean_rate_bps: rates.mean_rate_bps,
            metrics: exposure_metrics(&field)?,
        })
    }

    /// Per-scenario results in scenario order, computed in parallel.
    pub fn evaluate_set(&self, strategy: &Strategy, scenarios: &[Scenario]) -> Result<Vec<ScenarioEvaluation>> {
        strategy.validate(&self.layout)?;
        scenarios
            .par_iter()
            .map(|s| self.evaluate_scenario(strategy, s))
            .collect()
    }
}

/// Mean that does not depend on the order of `values`.
fn ordered_mean(values: &mut [f64]) -> f64 {
    values.sort_by(f64::total_cmp);
    values.iter().sum::<f64>() / values.len() as f64
}

/// Surrogate-sampled distribution of one metric.
#[derive(Debug, Clone, PartialEq)]
pub struct SurrogateSummary {
    pub metric: Metric,
    pub stats: DistributionStats,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StrategyRecord {
    /// 1-based position in the strategy list.
    pub id: usize,
    pub strategy: Strategy,
    pub mean_rate_bps: f64,
    pub mean_s95: f64,
    pub mean_smean: f64,
    pub surrogate: Vec<SurrogateSummary>,
    /// Set by [`tradeoff_report`].
    pub dominated: bool,
}

impl StrategyRecord {
    /// Averages per-scenario results.
    pub fn from_evaluations(id: usize, strategy: Strategy, evals: &[ScenarioEvaluation]) -> Result<Self> {
        if evals.is_empty() {
            return Err(Error::domain("cannot summarise a strategy over an empty scenario set"));
        }
        let mut rates: Vec<f64> = evals.iter().map(|e| e.mean_rate_bps).collect();
        let mut s95: Vec<f64> = evals.iter().map(|e| e.metrics.s95).collect();
        let mut smean: Vec<f64> = evals.iter().map(|e| e.metrics.smean).collect();
        Ok(Self {
            id,
            strategy,
            mean_rate_bps: ordered_mean(&mut rates),
            mean_s95: ordered_mean(&mut s95),
            mean_smean: ordered_mean(&mut smean),
            surrogate: Vec::new(),
            dominated: false,
        })
    }
}

/// Mean rate and exposure of `strategy` over every scenario of the set.
pub fn evaluate_strategy(
    params: &RfParams,
    layout: &OfficeLayout,
    grid: &GridSpec,
    strategy: &Strategy,
    scenarios: &ScenarioSet,
) -> Result<StrategyRecord> {
    if scenarios.is_empty() {
        return Err(Error::domain("scenario set is empty"));
    }
    let sim = Simulator::new(*params, layout.clone(), grid)?;
    let evals = sim.evaluate_set(strategy, &scenarios.scenarios)?;
    StrategyRecord::from_evaluations(1, *strategy, &evals)
}

#[derive(Debug, Clone, PartialEq)]
pub struct TradeoffReport {
    pub records: Vec<StrategyRecord>,
    /// Ids of the non-dominated records (maximum rate, minimum S95).
    pub front: Vec<usize>,
    /// Largest over smallest mean S95 among records whose mean rate is
    /// within 5% of the best.
    pub near_max_rate_ratio: f64,
}

fn dominates(b: &StrategyRecord, a: &StrategyRecord) -> bool {
    b.mean_rate_bps >= a.mean_rate_bps
        && b.mean_s95 <= a.mean_s95
        && (b.mean_rate_bps > a.mean_rate_bps || b.mean_s95 < a.mean_s95)
}

pub fn tradeoff_report(mut records: Vec<StrategyRecord>) -> Result<TradeoffReport> {
    if records.is_empty() {
        return Err(Error::domain("trade-off report needs at least one strategy"));
    }
    let flags: Vec<bool> = records
        .iter()
        .map(|a| records.iter().any(|b| dominates(b, a)))
        .collect();
    for (r, d) in records.iter_mut().zip(flags) {
        r.dominated = d;
    }
    let front = records.iter().filter(|r| !r.dominated).map(|r| r.id).collect();

    let best = records
        .iter()
        .map(|r| r.mean_rate_bps)
        .fold(f64::NEG_INFINITY, f64::max);
    let threshold = best - 0.05 * best.abs();
    let near: Vec<f64> = records
        .iter()
        .filter(|r| r.mean_rate_bps >= threshold)
        .map(|r| r.mean_s95)
        .collect();
    let hi = near.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let lo = near.iter().copied().fold(f64::INFINITY, f64::min);
    let near_max_rate_ratio = if hi == lo {
        1.0
    } else if lo > 0.0 {
        hi / lo
    } else {
        f64::INFINITY
    };
    Ok(TradeoffReport {
        records,
        front,
        near_max_rate_ratio,
    })
}

impl TradeoffReport {
    /// Writes `strategy,assignment,mean_rate_bps,mean_s95_wm2,mean_smean_wm2,pareto`.
    pub fn write_csv<W: Write>(&self, mut w: W, provenance: &str) -> std::io::Result<()> {
        writeln!(w, "{provenance}")?;
        writeln!(w, "strategy,assignment,mean_rate_bps,mean_s95_wm2,mean_smean_wm2,pareto")?;
        for r in &self.records {
            writeln!(
                w,
                "{},{},{:e},{:e},{:e},{}",
                r.id, r.strategy, r.mean_rate_bps, r.mean_s95, r.mean_smean, !r.dominated
            )?;
        }
        w.flush()
    }
}

/// Strategy 1 of the default set.
pub const FIRST_DEFAULT_STRATEGY: [u8; NUM_GNBS] = [1, 8, 8, 4, 8, 5];

fn decode_assignment(mut index: u32) -> Strategy {
    let mut rooms = [0u8; NUM_GNBS];
    for slot in rooms.iter_mut().rev() {
        *slot = (index % NUM_ROOMS as u32) as u8 + 1;
        index /= NUM_ROOMS as u32;
    }
    Strategy::new(rooms)
}

/// Strategy 1 is [`FIRST_DEFAULT_STRATEGY`]; the other 31 are distinct
/// assignments drawn uniformly from all `8^6` with ChaCha8 seeded by `seed`,
/// decoding an index as base-8 digits (g1 most significant) plus one.
pub fn default_strategies(seed: u64) -> Vec<Strategy> {
    let space = (NUM_ROOMS as u32).pow(NUM_GNBS as u32);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = vec![Strategy::new(FIRST_DEFAULT_STRATEGY)];
    while out.len() < DEFAULT_STRATEGY_COUNT {
        let s = decode_assignment(rng.gen_range(0..space));
        if !out.contains(&s) {
            out.push(s);
        }
    }
    out
}

/// Writes the `strategy,assignment` table.
pub fn write_strategies<W: Write>(strategies: &[Strategy], mut w: W, provenance: &str) -> std::io::Result<()> {
    writeln!(w, "{provenance}")?;
    writeln!(w, "strategy,assignment")?;
    for (i, s) in strategies.iter().enumerate() {
        writeln!(w, "{},{}", i + 1, s)?;
    }
    w.flush()
}

pub fn read_strategies(path: &Path, layout: &OfficeLayout) -> Result<Vec<Strategy>> {
    let rows = table::read_rows(path, &["strategy", "assignment"])?;
    let mut out = Vec::with_capacity(rows.len());
    for (i, row) in rows.iter().enumerate() {
        let id: usize = table::parse(path, &row[0])?;
        if id != i + 1 {
            return Err(Error::config(format!(
                "{}: strategy ids must run 1, 2, ... (found {id} at row {})",
                path.display(),
                i + 1
            )));
        }
        let s: Strategy = row[1]
            .parse()
            .map_err(|e| Error::config(format!("{}: {e}", path.display())))?;
        s.validate(layout)?;
        out.push(s);
    }
    if out.is_empty() {
        return Err(Error::config(format!("{}: no strategies listed", path.display())));
    }
    Ok(out)
}
