use std::fs;
use std::process::Command;

use spiked_cli::row::{read_rows, SCHEMA_LINE};
use spiked_cli::summary::Rate;
use spiked_cli::*;
use spiked_core::tensor::Ensemble;

fn cfg(exp: Experiment, dir: &tempfile::TempDir) -> ExperimentConfig {
    ExperimentConfig::new(exp, dir.path())
}

fn row(exp: &str, cell: usize, n: usize, lambda1: f64) -> ResultRow {
    ResultRow { experiment: exp.into(), cell, n, p: 3, n_bos: 2, ensemble: "complex".into(), lambda1: Some(lambda1), ..Default::default() }
}

#[test]
fn single_trial_rerun_is_byte_identical() {
    for exp in [Experiment::Detect, Experiment::Recover, Experiment::QuantumOverlap] {
        let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
        let mut c = cfg(exp, &a);
        c.orders = vec![4];
        c.dims = vec![6];
        c.n_bos = vec![4];
        c.trials = 1;
        c.seed = 99;
        c.strength = Some(Strength::Ratio(vec![2.0]));
        run_experiment(&c).unwrap();
        c.out = b.path().into();
        run_experiment(&c).unwrap();
        let (x, y) = (fs::read(a.path().join("results.csv")).unwrap(), fs::read(b.path().join("results.csv")).unwrap());
        assert_eq!(x, y, "{exp:?}");
        assert_eq!(fs::read(a.path().join("summary.json")).unwrap(), fs::read(b.path().join("summary.json")).unwrap());
    }
}

#[test]
fn parallel_trials_keep_canonical_order() {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    let mut c = cfg(Experiment::NullSpectrum, &a);
    c.dims = vec![5, 6];
    c.trials = 16;
    let first = run_experiment(&c).unwrap();
    c.out = b.path().into();
    run_experiment(&c).unwrap();
    assert_eq!(fs::read(a.path().join("results.csv")).unwrap(), fs::read(b.path().join("results.csv")).unwrap());
    let order: Vec<(usize, usize)> = first.rows.iter().map(|r| (r.cell, r.trial)).collect();
    let want: Vec<(usize, usize)> = (0..2).flat_map(|c| (0..16).map(move |t| (c, t))).collect();
    assert_eq!(order, want);
    let timings = fs::read_to_string(a.path().join("timings.csv")).unwrap();
    assert_eq!(timings.lines().count(), 33);
}

#[test]
fn detect_grid_writes_one_row_per_cell_and_trial() {
    let dir = tempfile::tempdir().unwrap();
    let mut c = cfg(Experiment::Detect, &dir);
    c.n_bos = vec![2, 3];
    c.strength = Some(Strength::Ratio(vec![1.25, 1.5, 2.0]));
    c.trials = 50;
    let out = run_experiment(&c).unwrap();
    let text = fs::read_to_string(&out.results_path).unwrap();
    assert_eq!(text.lines().next().unwrap(), SCHEMA_LINE);
    let rows = read_rows(text.as_bytes()).unwrap();
    assert_eq!(rows.len(), 300);
    assert_eq!(out.summary.cells.len(), 6);
    for cell in &out.summary.cells {
        let acc = cell.hits.unwrap();
        assert_eq!(acc.trials, 50);
        assert!(acc.wilson_low <= acc.rate && acc.rate <= acc.wilson_high);
    }
    // accuracy at the widest separation
    let widest: Vec<&_> = out.summary.cells.iter().filter(|c| c.ratio == Some(2.0)).collect();
    assert!(widest.iter().all(|c| c.hits.unwrap().rate >= 0.9));
}

#[test]
fn summary_recomputed_from_csv_matches_json() {
    for exp in [Experiment::OddScaling, Experiment::SpeedupTable, Experiment::WickVerify] {
        let dir = tempfile::tempdir().unwrap();
        let mut c = cfg(exp, &dir);
        match exp {
            Experiment::OddScaling => {
                c.orders = vec![3];
                c.dims = vec![4, 5, 6];
                c.ensemble = Ensemble::COMPLEX;
                c.trials = 4;
            }
            Experiment::SpeedupTable => {
                c.n_bos = vec![8];
                c.dims = vec![8, 10, 12];
                c.strength = Some(Strength::Ratio(vec![2.0]));
            }
            _ => {
                c.orders = vec![2];
                c.dims = vec![3];
                c.trials = 2;
                c.tolerances.mc_draws = 2000;
            }
        }
        let out = run_experiment(&c).unwrap();
        let rows = read_rows(fs::File::open(&out.results_path).unwrap()).unwrap();
        assert_eq!(rows, out.rows);
        let mut again = emit_summary(&rows).unwrap();
        again.config = out.summary.config.clone();
        let json = fs::read_to_string(&out.summary_path).unwrap();
        assert_eq!(serde_json::to_string_pretty(&again).unwrap(), json, "{exp:?}");
    }
}

#[test]
fn summary_means_and_exact_slope() {
    let rows = [row("detect", 0, 10, 10.0), row("detect", 0, 10, 12.0)];
    let s = emit_summary(&rows).unwrap();
    assert_eq!(s.cells.len(), 1);
    assert_eq!(s.cells[0].means["lambda1"], 11.0);

    let rows: Vec<ResultRow> =
        [6usize, 8, 10, 12].iter().enumerate().map(|(i, &n)| row("odd-scaling", i, n, (n as f64).powf(1.5))).collect();
    let s = emit_summary(&rows).unwrap();
    assert_eq!(s.slopes.len(), 1);
    assert!((s.slopes[0].slope - 1.5).abs() < 1e-12);
    assert_eq!(s.slopes[0].dims, vec![6, 8, 10, 12]);

    assert!(matches!(emit_summary(&[]), Err(CliError::InvalidArgument(_))));
}

#[test]
fn failed_rows_are_excluded_from_means_but_counted() {
    let mut bad = row("detect", 0, 10, 1000.0).fail("boom");
    bad.hit = Some(true);
    let mut good = row("detect", 0, 10, 4.0);
    good.hit = Some(false);
    let s = emit_summary(&[good, bad]).unwrap();
    assert_eq!(s.failed, 1);
    assert_eq!(s.cells[0].failed, 1);
    assert_eq!(s.cells[0].means["lambda1"], 4.0);
    assert_eq!(s.cells[0].hits.unwrap().trials, 1);
}

#[test]
fn wilson_interval_examples() {
    let r = Rate::new(0, 100);
    assert_eq!(r.wilson_low, 0.0);
    assert!((r.wilson_high - 0.0370).abs() < 1e-3);
    assert_eq!(Rate::new(7, 7).wilson_high, 1.0);
    let r = Rate::new(50, 100);
    assert!((r.wilson_low - 0.4038).abs() < 1e-3 && (r.wilson_high - 0.5962).abs() < 1e-3);
}

#[test]
fn speedup_table_reports_a_decreasing_chosen_ratio() {
    let dir = tempfile::tempdir().unwrap();
    let mut c = cfg(Experiment::SpeedupTable, &dir);
    c.n_bos = vec![8];
    c.dims = vec![8, 10, 12, 14];
    c.strength = Some(Strength::Ratio(vec![2.0]));
    let out = run_experiment(&c).unwrap();
    assert_eq!(out.rows.len(), 16);
    let trend = &out.summary.cost_trends[0];
    assert_eq!(trend.dims, vec![8, 10, 12, 14]);
    assert!(trend.chosen_decreasing);
    // N^{-p/4} / lambda is the same in every cell
    let kappas: Vec<f64> = out.rows.iter().map(|r| (r.n as f64).powi(-1) / r.lambda_bar).collect();
    assert!(kappas.iter().all(|k| (k / kappas[0] - 1.0).abs() < 1e-12));
}

#[test]
fn null_spectrum_rate_with_interval() {
    let dir = tempfile::tempdir().unwrap();
    let mut c = cfg(Experiment::NullSpectrum, &dir);
    c.trials = 100;
    let out = run_experiment(&c).unwrap();
    let rate = out.summary.cells[0].hits.unwrap();
    assert_eq!(rate.trials, 100);
    assert!(rate.rate <= 0.05, "{rate:?}");
    assert!(rate.wilson_high > rate.rate);
}

#[test]
fn path_and_wick_rows_pass_their_checks() {
    let dir = tempfile::tempdir().unwrap();
    let mut c = cfg(Experiment::PathEquivalence, &dir);
    c.orders = vec![2, 3];
    c.dims = vec![3];
    c.n_bos = vec![2];
    c.trials = 6;
    let out = run_experiment(&c).unwrap();
    assert!(out.rows.iter().all(|r| r.hit == Some(true) && r.bound_holds == Some(true)), "{:?}", out.rows);

    let dir = tempfile::tempdir().unwrap();
    let mut c = cfg(Experiment::WickVerify, &dir);
    c.orders = vec![3];
    c.dims = vec![2];
    c.ensemble = Ensemble::COMPLEX;
    c.trials = 2;
    let out = run_experiment(&c).unwrap();
    assert_eq!(out.rows.len(), 8);
    assert!(out.rows.iter().all(|r| r.bound_holds == Some(true)));
    let spiked = out.rows.iter().find(|r| r.label.as_deref() == Some("spiked")).unwrap();
    assert_eq!(spiked.reference, Some(4.0));
}

type Edit = Box<dyn Fn(&mut ExperimentConfig)>;

#[test]
fn invalid_grids_fail_before_any_work() {
    let dir = tempfile::tempdir().unwrap();
    let sub = dir.path().join("never");
    let cases: Vec<Edit> = vec![
        Box::new(|c| c.trials = 0),
        Box::new(|c| c.n_bos = vec![1]),
        Box::new(|c| c.experiment = Experiment::Detect),
        Box::new(|c| {
            c.experiment = Experiment::OddScaling;
            c.dims = vec![6, 8];
        }),
        Box::new(|c| {
            c.experiment = Experiment::QuantumOverlap;
            c.n_bos = vec![3];
            c.strength = Some(Strength::Ratio(vec![2.0]));
        }),
        Box::new(|c| {
            c.experiment = Experiment::OddScaling;
            c.orders = vec![3];
            c.dims = vec![6];
        }),
        Box::new(|c| c.eps_tilde = 0.0),
        Box::new(|c| {
            c.experiment = Experiment::WickVerify;
            c.topologies = vec!["star".into()];
        }),
        Box::new(|c| {
            c.experiment = Experiment::Recover;
            c.strength = Some(Strength::Ratio(vec![-1.0]));
        }),
    ];
    for (i, edit) in cases.iter().enumerate() {
        let mut c = ExperimentConfig::new(Experiment::NullSpectrum, &sub);
        edit(&mut c);
        assert!(matches!(run_experiment(&c), Err(CliError::Config(_))), "case {i}");
        assert!(!sub.exists(), "case {i} wrote output");
    }
    assert!(Tolerances::default().with_overrides(&["nope=1".into()]).is_err());
    assert!(Tolerances::default().with_overrides(&["mc_draws".into()]).is_err());
    let t = Tolerances::default().with_overrides(&["strong_corr=0.8".into(), "mc_draws=50".into()]).unwrap();
    assert_eq!((t.strong_corr, t.mc_draws), (0.8, 50));
}

#[test]
fn exit_codes() {
    let bin = env!("CARGO_BIN_EXE_spiked");
    let dir = tempfile::tempdir().unwrap();
    let ok = Command::new(bin)
        .args(["null-spectrum", "--N", "5", "--trials", "2", "--out"])
        .arg(dir.path().join("ok"))
        .status()
        .unwrap();
    assert_eq!(ok.code(), Some(0));
    let config = Command::new(bin).args(["detect", "--nbos", "1", "--ratio", "2", "--out"]).arg(dir.path().join("c")).status().unwrap();
    assert_eq!(config.code(), Some(2));
    let clash = Command::new(bin).args(["detect", "--lambda", "1", "--ratio", "2"]).output().unwrap();
    assert_eq!(clash.status.code(), Some(2));
    // E0 < Emax: the soft window cannot be placed, every trial fails
    let partial = Command::new(bin)
        .args(["quantum-overlap", "--N", "5", "--nbos", "4", "--ratio", "0.5", "--trials", "2", "--out"])
        .arg(dir.path().join("p"))
        .status()
        .unwrap();
    assert_eq!(partial.code(), Some(3));
    let rows = read_rows(fs::File::open(dir.path().join("p/results.csv")).unwrap()).unwrap();
    assert!(rows.iter().all(|r| r.failed && r.error.is_some()));
}
