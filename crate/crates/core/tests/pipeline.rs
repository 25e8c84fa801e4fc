use std::fs;
use std::path::Path;

use cellfree_emf::analysis::{write_strategies, Simulator};
use cellfree_emf::config::{RunConfig, StrategySource};
use cellfree_emf::exposure::{exposure_field, exposure_metrics};
use cellfree_emf::lra::{normalize_inputs, Metric};
use cellfree_emf::pipeline::*;
use cellfree_emf::propagation::{rate_report, Strategy};
use cellfree_emf::Error;

fn small_config() -> RunConfig {
    let mut c = RunConfig::default();
    c.sim.scenario_count = 8;
    c.sim.grid_spacing_m = 1.0;
    c.surrogate.ranks = vec![1, 2];
    c.surrogate.degrees = vec![1, 2];
    c.surrogate.sample_count = 500;
    c.surrogate.histogram_bins = 10;
    c
}

fn with_strategies(mut c: RunConfig, dir: &Path, list: &[[u8; 6]]) -> RunConfig {
    let path = dir.join("chosen.csv");
    let strategies: Vec<Strategy> = list.iter().map(|a| Strategy::new(*a)).collect();
    write_strategies(&strategies, fs::File::create(&path).unwrap(), "# test").unwrap();
    c.strategies = StrategySource::File(path);
    c
}

fn data_lines(path: &Path) -> usize {
    fs::read_to_string(path)
        .unwrap()
        .lines()
        .filter(|l| !l.starts_with('#'))
        .count()
        - 1
}

#[test]
fn generate_writes_ten_rows_per_scenario() {
    let dir = tempfile::tempdir().unwrap();
    let mut c = small_config();
    c.sim.scenario_count = 1000;
    let run = Run::new(c, dir.path()).unwrap();
    let s = cmd_generate(&run).unwrap();
    assert_eq!((s.scenarios, s.seed, s.strategies), (1000, 42, 32));
    assert_eq!(data_lines(&run.path(SCENARIOS_FILE)), 10_000);
    assert_eq!(data_lines(&run.path(STRATEGIES_FILE)), 32);
}

#[test]
fn generate_is_byte_identical_on_rerun() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    for d in [&a, &b] {
        cmd_generate(&Run::new(small_config(), d.path()).unwrap()).unwrap();
    }
    for f in [SCENARIOS_FILE, STRATEGIES_FILE] {
        assert_eq!(fs::read(a.path().join(f)).unwrap(), fs::read(b.path().join(f)).unwrap());
    }
}

#[test]
fn zero_scenarios_is_a_domain_error() {
    let dir = tempfile::tempdir().unwrap();
    let mut c = small_config();
    c.sim.scenario_count = 0;
    let r = cmd_generate(&Run::new(c, dir.path()).unwrap());
    assert!(matches!(r, Err(Error::Domain(_))));
}

#[test]
fn unwritable_output_names_the_path() {
    let dir = tempfile::tempdir().unwrap();
    let blocker = dir.path().join("file");
    fs::write(&blocker, "x").unwrap();
    let r = cmd_generate(&Run::new(small_config(), blocker.join("sub")).unwrap());
    match r {
        Err(Error::Io { path, .. }) => assert!(path.starts_with(&blocker)),
        other => panic!("expected an I/O error, got {other:?}"),
    }
}

#[test]
fn evaluate_without_inputs_names_the_missing_file() {
    let dir = tempfile::tempdir().unwrap();
    let run = Run::new(small_config(), dir.path()).unwrap();
    let err = cmd_evaluate(&run).unwrap_err();
    assert!(matches!(err, Error::Io { .. }));
    assert!(err.to_string().contains(SCENARIOS_FILE), "{err}");
}

#[test]
fn single_strategy_single_scenario_matches_library_calls() {
    let dir = tempfile::tempdir().unwrap();
    let mut c = with_strategies(small_config(), dir.path(), &[[3, 3, 2, 7, 6, 8]]);
    c.sim.scenario_count = 1;
    let run = Run::new(c.clone(), dir.path()).unwrap();
    cmd_generate(&run).unwrap();
    let e = cmd_evaluate(&run).unwrap();
    assert_eq!((e.strategies, e.scenarios), (1, 1));

    let layout = run.layout().clone();
    let grid = layout.build_grid(c.sim.grid_spacing_m).unwrap();
    let scenario = &run.load_scenarios().unwrap().scenarios[0];
    let strategy = Strategy::new([3, 3, 2, 7, 6, 8]);
    let m = exposure_metrics(&exposure_field(&c.rf, &layout, &grid, &strategy, scenario).unwrap()).unwrap();
    let rate = rate_report(&c.rf, &layout, &strategy, scenario).unwrap().mean_rate_bps;

    let evals = load_evaluations(&run, 1, 1).unwrap();
    assert_eq!(evals[0][0].metrics, m);
    assert_eq!(evals[0][0].mean_rate_bps, rate);
    let direct = Simulator::new(c.rf, layout, &grid).unwrap().evaluate_scenario(&strategy, scenario).unwrap();
    assert_eq!(direct, evals[0][0]);
}

#[test]
fn evaluate_row_counts_and_rerun_determinism() {
    let dir = tempfile::tempdir().unwrap();
    let other = tempfile::tempdir().unwrap();
    let mut c = small_config();
    c.sim.scenario_count = 3;
    for d in [&dir, &other] {
        let run = Run::new(c.clone(), d.path()).unwrap();
        cmd_generate(&run).unwrap();
        cmd_evaluate(&run).unwrap();
    }
    assert_eq!(data_lines(&dir.path().join(METRICS_FILE)), 96);
    assert_eq!(data_lines(&dir.path().join(RATES_FILE)), 96);
    for f in [METRICS_FILE, RATES_FILE] {
        assert_eq!(fs::read(dir.path().join(f)).unwrap(), fs::read(other.path().join(f)).unwrap());
    }
}

/// Replaces the evaluated metrics with `f` of the normalized user
/// coordinates, for every strategy.
fn inject_metrics(run: &Run, strategies: usize, f: impl Fn(&[f64]) -> (f64, f64)) {
    let set = run.load_scenarios().unwrap();
    let mut metrics = String::from("# injected\nstrategy,scenario,s95,smean\n");
    let mut rates = String::from("# injected\nstrategy,scenario,mean_rate_bps\n");
    for s in 1..=strategies {
        for (c, scenario) in set.scenarios.iter().enumerate() {
            let (a, b) = f(&normalize_inputs(run.layout(), scenario).unwrap());
            metrics.push_str(&format!("{s},{},{a:e},{b:e}\n", c + 1));
            rates.push_str(&format!("{s},{},{:e}\n", c + 1, 1e9 * s as f64));
        }
    }
    fs::write(run.path(METRICS_FILE), metrics).unwrap();
    fs::write(run.path(RATES_FILE), rates).unwrap();
}

#[test]
fn fit_recovers_injected_noiseless_design() {
    let dir = tempfile::tempdir().unwrap();
    let mut c = with_strategies(small_config(), dir.path(), &[[1, 2, 3, 4, 5, 6]]);
    c.sim.scenario_count = 60;
    let run = Run::new(c, dir.path()).unwrap();
    cmd_generate(&run).unwrap();
    inject_metrics(&run, 1, |x| ((1.0 + 0.5 * x[0]) * (2.0 - 0.3 * x[7]), 3.0 + x[4]));
    for metric in [Metric::S95, Metric::Smean] {
        let fit = cmd_fit(&run, metric, 1).unwrap();
        assert!(fit.report.final_error < 1e-6, "{metric}: {}", fit.report.final_error);
        assert!(!fit.warning);
        let first = fs::read(&fit.model_path).unwrap();
        cmd_fit(&run, metric, 1).unwrap();
        assert_eq!(fs::read(&fit.model_path).unwrap(), first);
        let cv = fs::read_to_string(run.path(&cv_file(metric, 1))).unwrap();
        assert!(cv.contains("selected rank 1"), "{cv}");
    }
}

#[test]
fn fit_rejects_unknown_strategy() {
    let dir = tempfile::tempdir().unwrap();
    let run = Run::new(small_config(), dir.path()).unwrap();
    cmd_generate(&run).unwrap();
    assert!(matches!(cmd_fit(&run, Metric::S95, 33), Err(Error::Config(_))));
    assert!(matches!(cmd_fit(&run, Metric::S95, 0), Err(Error::Config(_))));
}

#[test]
fn report_on_hand_made_records() {
    let dir = tempfile::tempdir().unwrap();
    let mut c = with_strategies(
        small_config(),
        dir.path(),
        &[[1, 1, 1, 1, 1, 1], [2, 2, 2, 2, 2, 2], [3, 3, 3, 3, 3, 3]],
    );
    c.sim.scenario_count = 1;
    let run = Run::new(c, dir.path()).unwrap();
    cmd_generate(&run).unwrap();
    let head = "# hand\n";
    fs::write(
        run.path(METRICS_FILE),
        format!("{head}strategy,scenario,s95,smean\n1,1,5,1\n2,1,3,1\n3,1,3,1\n"),
    )
    .unwrap();
    fs::write(
        run.path(RATES_FILE),
        format!("{head}strategy,scenario,mean_rate_bps\n1,1,10\n2,1,10\n3,1,8\n"),
    )
    .unwrap();
    let s = cmd_report(&run).unwrap();
    assert_eq!(s.report.front, vec![2]);
    assert!((s.report.near_max_rate_ratio - 5.0 / 3.0).abs() < 1e-12);
    let table = fs::read_to_string(run.path(TRADEOFF_FILE)).unwrap();
    let rows: Vec<&str> = table.lines().skip(2).collect();
    assert_eq!(rows.len(), 3);
    assert!(rows[0].ends_with(",false") && rows[1].ends_with(",true") && rows[2].ends_with(",false"));
    assert!(fs::read_to_string(run.path(SUMMARY_FILE)).unwrap().contains("1.666667"));
}

#[test]
fn report_rejects_inconsistent_tables() {
    let dir = tempfile::tempdir().unwrap();
    let mut c = with_strategies(small_config(), dir.path(), &[[1, 1, 1, 1, 1, 1]]);
    c.sim.scenario_count = 2;
    let run = Run::new(c, dir.path()).unwrap();
    cmd_generate(&run).unwrap();
    fs::write(run.path(METRICS_FILE), "# x\nstrategy,scenario,s95,smean\n1,1,5,1\n1,1,5,1\n").unwrap();
    fs::write(run.path(RATES_FILE), "# x\nstrategy,scenario,mean_rate_bps\n1,1,1\n1,2,1\n").unwrap();
    assert!(matches!(cmd_report(&run), Err(Error::Config(_))));
}

#[test]
fn histograms_sum_to_the_sample_count() {
    let dir = tempfile::tempdir().unwrap();
    let mut c = with_strategies(small_config(), dir.path(), &[[1, 2, 3, 4, 5, 6], [8, 7, 6, 5, 4, 3]]);
    c.sim.scenario_count = 30;
    c.surrogate.sample_count = 10_000;
    c.surrogate.histogram_bins = 40;
    let run = Run::new(c, dir.path()).unwrap();
    cmd_generate(&run).unwrap();
    cmd_evaluate(&run).unwrap();
    cmd_fit(&run, Metric::Smean, 2).unwrap();
    let s = cmd_report(&run).unwrap();
    assert_eq!(s.histograms, vec![run.path(&histogram_file(Metric::Smean, 2))]);
    let text = fs::read_to_string(&s.histograms[0]).unwrap();
    assert!(text.lines().nth(1).unwrap().contains("skewness="));
    let total: usize = text
        .lines()
        .filter(|l| !l.starts_with('#'))
        .skip(1)
        .map(|l| l.rsplit(',').next().unwrap().parse::<usize>().unwrap())
        .sum();
    assert_eq!(total, 10_000);
    assert_eq!(s.report.records[1].surrogate.len(), 1);
    assert_eq!(s.report.records[1].surrogate[0].stats.count, 10_000);
}

#[test]
fn doubling_power_doubles_exposure_and_keeps_the_front() {
    let base = tempfile::tempdir().unwrap();
    let loud = tempfile::tempdir().unwrap();
    let list = [[1, 8, 8, 4, 8, 5], [2, 2, 3, 3, 7, 7], [5, 3, 1, 3, 1, 4], [1, 2, 3, 6, 7, 8]];
    let mut reports = Vec::new();
    for (d, extra_db) in [(&base, 0.0), (&loud, 10.0 * 2f64.log10())] {
        let mut c = with_strategies(small_config(), d.path(), &list);
        c.sim.scenario_count = 5;
        c.rf.tx_power_dbm += extra_db;
        let run = Run::new(c, d.path()).unwrap();
        cmd_generate(&run).unwrap();
        cmd_evaluate(&run).unwrap();
        reports.push(cmd_report(&run).unwrap().report);
    }
    for (a, b) in reports[0].records.iter().zip(&reports[1].records) {
        assert!((b.mean_s95 / a.mean_s95 - 2.0).abs() < 1e-12);
        assert!((b.mean_smean / a.mean_smean - 2.0).abs() < 1e-12);
        assert_eq!(a.dominated, b.dominated);
    }
}

#[test]
fn every_output_starts_with_the_provenance_line() {
    let dir = tempfile::tempdir().unwrap();
    let mut c = with_strategies(small_config(), dir.path(), &[[1, 2, 3, 4, 5, 6]]);
    c.sim.scenario_count = 12;
    let run = Run::new(c.clone(), dir.path()).unwrap();
    cmd_generate(&run).unwrap();
    cmd_evaluate(&run).unwrap();
    cmd_fit(&run, Metric::S95, 1).unwrap();
    cmd_report(&run).unwrap();
    let expected = c.provenance();
    let mut seen = 0;
    for entry in fs::read_dir(dir.path()).unwrap() {
        let path = entry.unwrap().path();
        if path.file_name().unwrap() == "chosen.csv" {
            continue;
        }
        let text = fs::read_to_string(&path).unwrap();
        assert_eq!(text.lines().next().unwrap(), expected, "{}", path.display());
        seen += 1;
    }
    assert_eq!(seen, 9);
}
