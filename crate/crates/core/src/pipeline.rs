//! The four pipeline commands. Each reads its inputs from and writes its
//! outputs to one run directory; every output file opens with the
//! configuration's provenance line.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use rayon::prelude::*;

use crate::analysis::{
    default_strategies, read_strategies, tradeoff_report, write_strategies, ScenarioEvaluation, Simulator,
    StrategyRecord, SurrogateSummary, TradeoffReport,
};
use crate::config::{RunConfig, StrategySource};
use crate::error::{Error, Result};
use crate::exposure::{distribution_stats, ExposureMetrics};
use crate::geometry::OfficeLayout;
use crate::lra::{select_rank_cv, surrogate_sample, AlsOptions, CvReport, ExperimentalDesign, LraModel, Metric};
use crate::propagation::Strategy;
use crate::scenario::{sample_scenarios, ScenarioSet};
use crate::table;

pub const SCENARIOS_FILE: &str = "scenarios.csv";
pub const STRATEGIES_FILE: &str = "strategies.csv";
pub const METRICS_FILE: &str = "metrics.csv";
pub const RATES_FILE: &str = "rates.csv";
pub const TRADEOFF_FILE: &str = "tradeoff.csv";
pub const SUMMARY_FILE: &str = "summary.txt";

/// Cross-validated error above which a fitted surrogate is flagged.
pub const CV_ERROR_WARNING: f64 = 0.1;

/// Near-max-rate exposure ratio below which the summary carries a notice.
pub const EXPECTED_EXPOSURE_RATIO: f64 = 1.3;

pub fn model_file(metric: Metric, strategy: usize) -> String {
    format!("model_{metric}_strategy{strategy}.json")
}

pub fn cv_file(metric: Metric, strategy: usize) -> String {
    format!("cv_{metric}_strategy{strategy}.txt")
}

pub fn histogram_file(metric: Metric, strategy: usize) -> String {
    format!("histogram_{metric}_strategy{strategy}.csv")
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    File::create(path).map(BufWriter::new).map_err(|e| Error::io(path, e))
}

fn write_file(path: &Path, f: impl FnOnce(&mut BufWriter<File>) -> std::io::Result<()>) -> Result<()> {
    let mut w = create(path)?;
    f(&mut w).and_then(|_| w.flush()).map_err(|e| Error::io(path, e))
}

fn require(path: &Path) -> Result<()> {
    if path.is_file() {
        Ok(())
    } else {
        Err(Error::io(
            path,
            std::io::Error::new(std::io::ErrorKind::NotFound, "required input file is missing"),
        ))
    }
}

fn ensure_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}

/// Configuration plus the output directory shared by the commands.
#[derive(Debug, Clone)]
pub struct Run {
    pub config: RunConfig,
    pub out: PathBuf,
    layout: OfficeLayout,
    provenance: String,
}

impl Run {
    pub fn new(config: RunConfig, out: impl Into<PathBuf>) -> Result<Self> {
        config.validate()?;
        let layout = config.layout.build()?;
        let provenance = config.provenance();
        Ok(Self {
            config,
            out: out.into(),
            layout,
            provenance,
        })
    }

    pub fn layout(&self) -> &OfficeLayout {
        &self.layout
    }

    pub fn path(&self, name: &str) -> PathBuf {
        self.out.join(name)
    }

    fn strategies_from_config(&self) -> Result<Vec<Strategy>> {
        match &self.config.strategies {
            StrategySource::DefaultSeed(seed) => Ok(default_strategies(*seed)),
            StrategySource::File(path) => {
                require(path)?;
                read_strategies(path, &self.layout)
            }
        }
    }

    pub fn load_scenarios(&self) -> Result<ScenarioSet> {
        let path = self.path(SCENARIOS_FILE);
        require(&path)?;
        ScenarioSet::read_csv(&path, &self.layout, self.config.sim.seed)
    }

    pub fn load_strategies(&self) -> Result<Vec<Strategy>> {
        let path = self.path(STRATEGIES_FILE);
        require(&path)?;
        read_strategies(&path, &self.layout)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GenerateSummary {
    pub scenarios: usize,
    pub seed: u64,
    pub strategies: usize,
}

/// Samples the scenario set and fixes the strategy list.
pub fn cmd_generate(run: &Run) -> Result<GenerateSummary> {
    let sim = &run.config.sim;
    let set = sample_scenarios(&run.layout, sim.scenario_count, sim.seed)?;
    let strategies = run.strategies_from_config()?;
    ensure_dir(&run.out)?;
    write_file(&run.path(SCENARIOS_FILE), |w| set.write_csv(w, &run.provenance))?;
    write_file(&run.path(STRATEGIES_FILE), |w| write_strategies(&strategies, w, &run.provenance))?;
    Ok(GenerateSummary {
        scenarios: set.len(),
        seed: sim.seed,
        strategies: strategies.len(),
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvaluateSummary {
    pub strategies: usize,
    pub scenarios: usize,
}

/// Evaluates every strategy on every scenario and writes the metric and
/// rate tables, ordered by strategy then scenario.
pub fn cmd_evaluate(run: &Run) -> Result<EvaluateSummary> {
    let set = run.load_scenarios()?;
    let strategies = run.load_strategies()?;
    let grid = run.layout.build_grid(run.config.sim.grid_spacing_m)?;
    let sim = Simulator::new(run.config.rf, run.layout.clone(), &grid)?;
    for s in &strategies {
        s.validate(&run.layout)?;
    }
    let jobs: Vec<(usize, usize)> = (0..strategies.len())
        .flat_map(|s| (0..set.len()).map(move |c| (s, c)))
        .collect();
    let results: Vec<ScenarioEvaluation> = jobs
        .par_iter()
        .map(|&(s, c)| sim.evaluate_scenario(&strategies[s], &set.scenarios[c]))
        .collect::<Result<_>>()?;

    write_file(&run.path(METRICS_FILE), |w| {
        writeln!(w, "{}", run.provenance)?;
        writeln!(w, "strategy,scenario,s95,smean")?;
        for (&(s, c), r) in jobs.iter().zip(&results) {
            writeln!(w, "{},{},{:e},{:e}", s + 1, c + 1, r.metrics.s95, r.metrics.smean)?;
        }
        Ok(())
    })?;
    write_file(&run.path(RATES_FILE), |w| {
        writeln!(w, "{}", run.provenance)?;
        writeln!(w, "strategy,scenario,mean_rate_bps")?;
        for (&(s, c), r) in jobs.iter().zip(&results) {
            writeln!(w, "{},{},{:e}", s + 1, c + 1, r.mean_rate_bps)?;
        }
        Ok(())
    })?;
    Ok(EvaluateSummary {
        strategies: strategies.len(),
        scenarios: set.len(),
    })
}

/// Per-strategy results read back from the metric and rate tables.
/// Every strategy must cover scenarios `1..=scenarios` in order.
pub fn load_evaluations(run: &Run, strategies: usize, scenarios: usize) -> Result<Vec<Vec<ScenarioEvaluation>>> {
    let metrics_path = run.path(METRICS_FILE);
    let rates_path = run.path(RATES_FILE);
    require(&metrics_path)?;
    require(&rates_path)?;
    let metrics = table::read_rows(&metrics_path, &["strategy", "scenario", "s95", "smean"])?;
    let rates = table::read_rows(&rates_path, &["strategy", "scenario", "mean_rate_bps"])?;
    let expected = strategies * scenarios;
    for (path, len) in [(&metrics_path, metrics.len()), (&rates_path, rates.len())] {
        if len != expected {
            return Err(Error::config(format!(
                "{}: expected {expected} rows ({strategies} strategies x {scenarios} scenarios), found {len}",
                path.display()
            )));
        }
    }
    let mut out = vec![Vec::with_capacity(scenarios); strategies];
    for (i, (m, r)) in metrics.iter().zip(&rates).enumerate() {
        let (s, c) = (i / scenarios + 1, i % scenarios + 1);
        for (path, row) in [(&metrics_path, m), (&rates_path, r)] {
            let rs: usize = table::parse(path, &row[0])?;
            let rc: usize = table::parse(path, &row[1])?;
            if (rs, rc) != (s, c) {
                return Err(Error::config(format!(
                    "{}: expected strategy {s} scenario {c} at data row {}, found {rs},{rc}",
                    path.display(),
                    i + 1
                )));
            }
        }
        out[s - 1].push(ScenarioEvaluation {
            mean_rate_bps: table::parse(&rates_path, &r[2])?,
            metrics: ExposureMetrics {
                s95: table::parse(&metrics_path, &m[2])?,
                smean: table::parse(&metrics_path, &m[3])?,
            },
        });
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq)]
pub struct FitSummary {
    pub report: CvReport,
    pub model_path: PathBuf,
    /// Set when the selected candidate's cross-validated error exceeds
    /// [`CV_ERROR_WARNING`].
    pub warning: bool,
}

/// Builds the surrogate of `metric` for strategy `strategy` (1-based)
/// from the evaluated scenarios.
pub fn cmd_fit(run: &Run, metric: Metric, strategy: usize) -> Result<FitSummary> {
    let set = run.load_scenarios()?;
    let strategies = run.load_strategies()?;
    if strategy == 0 || strategy > strategies.len() {
        return Err(Error::config(format!(
            "strategy {strategy} is not in 1..={}",
            strategies.len()
        )));
    }
    let evals = load_evaluations(run, strategies.len(), set.len())?;
    let metrics: Vec<ExposureMetrics> = evals[strategy - 1].iter().map(|e| e.metrics).collect();
    let design = ExperimentalDesign::from_scenarios(&run.layout, &set.scenarios, &metrics, metric)?;
    let s = &run.config.surrogate;
    let (report, fit) = select_rank_cv(&design, &s.ranks, &s.degrees, s.cv_seed, &AlsOptions::default())?;

    let model_path = run.path(&model_file(metric, strategy));
    write_file(&model_path, |w| fit.model.write(w, &run.provenance))?;
    write_file(&run.path(&cv_file(metric, strategy)), |w| {
        writeln!(w, "{}", run.provenance)?;
        writeln!(w, "# {metric} surrogate, strategy {strategy}, {} scenarios", design.len())?;
        writeln!(w, "{report}")
    })?;
    Ok(FitSummary {
        warning: !(report.final_error < CV_ERROR_WARNING),
        report,
        model_path,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReportSummary {
    pub report: TradeoffReport,
    /// Histogram files written, one per fitted model found.
    pub histograms: Vec<PathBuf>,
}

/// Assembles the trade-off table and, for every fitted model present in
/// the run directory, a surrogate-sampled histogram.
pub fn cmd_report(run: &Run) -> Result<ReportSummary> {
    let set = run.load_scenarios()?;
    let strategies = run.load_strategies()?;
    let evals = load_evaluations(run, strategies.len(), set.len())?;
    let s = &run.config.surrogate;

    let mut records = Vec::with_capacity(strategies.len());
    let mut histograms = Vec::new();
    for (i, (strategy, e)) in strategies.iter().zip(&evals).enumerate() {
        let id = i + 1;
        let mut record = StrategyRecord::from_evaluations(id, *strategy, e)?;
        for metric in [Metric::S95, Metric::Smean] {
            let path = run.path(&model_file(metric, id));
            if !path.is_file() {
                continue;
            }
            let model = LraModel::load(&path)?;
            if model.metric != metric {
                return Err(Error::config(format!("{} holds a {} model", path.display(), model.metric)));
            }
            let samples = surrogate_sample(&model, &run.layout, s.sample_count, s.sample_seed)?;
            let stats = distribution_stats(&samples, s.histogram_bins)?;
            let hist = run.path(&histogram_file(metric, id));
            write_file(&hist, |w| stats.write_histogram_csv(w, &run.provenance))?;
            histograms.push(hist);
            record.surrogate.push(SurrogateSummary { metric, stats });
        }
        records.push(record);
    }
    let report = tradeoff_report(records)?;
    write_file(&run.path(TRADEOFF_FILE), |w| report.write_csv(w, &run.provenance))?;
    write_file(&run.path(SUMMARY_FILE), |w| write_summary(w, run, &report, set.len()))?;
    Ok(ReportSummary { report, histograms })
}

fn write_summary<W: Write>(w: &mut W, run: &Run, report: &TradeoffReport, scenarios: usize) -> std::io::Result<()> {
    writeln!(w, "{}", run.provenance)?;
    writeln!(w, "strategies: {}", report.records.len())?;
    writeln!(w, "scenarios per strategy: {scenarios}")?;
    let front: Vec<String> = report.front.iter().map(usize::to_string).collect();
    writeln!(w, "pareto front (max rate, min S95): {}", front.join(" "))?;
    writeln!(
        w,
        "near-max-rate exposure ratio (max/min mean S95 within 5% of the best rate): {:.6}",
        report.near_max_rate_ratio
    )?;
    if !(report.near_max_rate_ratio >= EXPECTED_EXPOSURE_RATIO) {
        writeln!(
            w,
            "notice: ratio below {EXPECTED_EXPOSURE_RATIO}; on this layout the near-max-rate strategies \
             do not differ in S95 by the expected 30%"
        )?;
    }
    let reference = run.config.rf.icnirp_ref_wm2;
    let max_s95 = report.records.iter().map(|r| r.mean_s95).fold(0.0, f64::max);
    let max_smean = report.records.iter().map(|r| r.mean_smean).fold(0.0, f64::max);
    writeln!(
        w,
        "largest mean S95 {max_s95:e} W/m2, largest mean Smean {max_smean:e} W/m2, reference level {reference} W/m2"
    )?;
    for r in &report.records {
        for sur in &r.surrogate {
            writeln!(
                w,
                "surrogate {} strategy {}: samples {} mean {:e} std_dev {:e} skewness {:.6}",
                sur.metric, r.id, sur.stats.count, sur.stats.mean, sur.stats.std_dev, sur.stats.skewness
            )?;
        }
    }
    Ok(())
}
