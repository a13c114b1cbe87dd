use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{CliError, Result};
use crate::row::ResultRow;

pub const SUMMARY_SCHEMA: &str = "spiked-cli summary v1";

/// Binomial rate with a 95% Wilson score interval.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Rate {
    pub successes: usize,
    pub trials: usize,
    pub rate: f64,
    pub wilson_low: f64,
    pub wilson_high: f64,
}

impl Rate {
    pub fn new(successes: usize, trials: usize) -> Self {
        let (k, n) = (successes as f64, trials as f64);
        let z = 1.959_963_984_540_054;
        let p = k / n;
        let denom = 1.0 + z * z / n;
        let centre = (p + z * z / (2.0 * n)) / denom;
        let half = z * (p * (1.0 - p) / n + z * z / (4.0 * n * n)).sqrt() / denom;
        let wilson_low = if successes == 0 { 0.0 } else { (centre - half).max(0.0) };
        let wilson_high = if successes == trials { 1.0 } else { (centre + half).min(1.0) };
        Rate { successes, trials, rate: p, wilson_low, wilson_high }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CellSummary {
    pub cell: usize,
    pub label: Option<String>,
    pub p: usize,
    pub n: usize,
    pub n_bos: usize,
    pub lambda_bar: f64,
    pub ratio: Option<f64>,
    pub ensemble: String,
    pub rows: usize,
    pub failed: usize,
    /// Rate of the row's `hit` event (accuracy for detect).
    pub hits: Option<Rate>,
    /// Means over completed rows of every populated numeric column.
    pub means: BTreeMap<String, f64>,
}

/// Least-squares slope of mean `ln lambda1` against `ln N`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SlopeFit {
    pub p: usize,
    pub n_bos: usize,
    pub ensemble: String,
    pub dims: Vec<usize>,
    pub mean_log_lambda1: Vec<f64>,
    pub slope: f64,
}

/// Log-cost ratios against the classical power method along an N sweep.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CostTrend {
    pub p: usize,
    pub n_bos: usize,
    pub ensemble: String,
    /// `N^(-p/4) / lambda_bar`, constant along the sweep.
    pub kappa: f64,
    pub dims: Vec<usize>,
    pub amplified_over_classical: Vec<f64>,
    pub chosen_over_classical: Vec<f64>,
    /// Chosen-input ratio strictly decreasing in N.
    pub chosen_decreasing: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub schema: String,
    pub experiments: Vec<String>,
    /// Run settings, filled in by the runner.
    pub config: Option<BTreeMap<String, String>>,
    pub rows: usize,
    pub failed: usize,
    pub cells: Vec<CellSummary>,
    pub slopes: Vec<SlopeFit>,
    pub cost_trends: Vec<CostTrend>,
}

fn numeric_columns(r: &ResultRow) -> [(&'static str, Option<f64>); 13] {
    [
        ("lambda1", r.lambda1),
        ("e0", r.e0),
        ("emax", r.emax),
        ("ecut", r.ecut),
        ("overlap_ratio", r.overlap_ratio),
        ("rounding_corr", r.rounding_corr),
        ("corr", r.corr),
        ("success_prob", r.success_prob),
        ("success_mixed", r.success_mixed),
        ("cost", r.cost),
        ("log_cost", r.log_cost),
        ("value", r.value),
        ("reference", r.reference),
    ]
}

fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

pub fn slope(x: &[f64], y: &[f64]) -> f64 {
    let (mx, my) = (mean(x), mean(y));
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx) * (a - mx)).sum();
    sxy / sxx
}

/// Per-cell aggregates plus the experiment-specific fits.
pub fn emit_summary(rows: &[ResultRow]) -> Result<Summary> {
    if rows.is_empty() {
        return Err(CliError::InvalidArgument("cannot summarize an empty set of rows".into()));
    }
    let mut groups: BTreeMap<(String, usize, Option<String>), Vec<&ResultRow>> = BTreeMap::new();
    for r in rows {
        groups.entry((r.experiment.clone(), r.cell, r.label.clone())).or_default().push(r);
    }
    let cells = groups
        .values()
        .map(|g| {
            let first = g[0];
            let done: Vec<&&ResultRow> = g.iter().filter(|r| !r.failed).collect();
            let hit_flags: Vec<bool> = done.iter().filter_map(|r| r.hit).collect();
            let mut means = BTreeMap::new();
            for (i, (name, _)) in numeric_columns(first).iter().enumerate() {
                let xs: Vec<f64> = done.iter().filter_map(|r| numeric_columns(r)[i].1).collect();
                if !xs.is_empty() {
                    means.insert(name.to_string(), mean(&xs));
                }
            }
            CellSummary {
                cell: first.cell,
                label: first.label.clone(),
                p: first.p,
                n: first.n,
                n_bos: first.n_bos,
                lambda_bar: first.lambda_bar,
                ratio: first.ratio,
                ensemble: first.ensemble.clone(),
                rows: g.len(),
                failed: g.len() - done.len(),
                hits: (!hit_flags.is_empty()).then(|| Rate::new(hit_flags.iter().filter(|&&h| h).count(), hit_flags.len())),
                means,
            }
        })
        .collect();

    let mut experiments: Vec<String> = rows.iter().map(|r| r.experiment.clone()).collect();
    experiments.sort();
    experiments.dedup();
    Ok(Summary {
        schema: SUMMARY_SCHEMA.into(),
        experiments,
        config: None,
        rows: rows.len(),
        failed: rows.iter().filter(|r| r.failed).count(),
        cells,
        slopes: slope_fits(rows),
        cost_trends: cost_trends(rows),
    })
}

fn slope_fits(rows: &[ResultRow]) -> Vec<SlopeFit> {
    let mut groups: BTreeMap<(usize, usize, String), BTreeMap<usize, Vec<f64>>> = BTreeMap::new();
    for r in rows.iter().filter(|r| r.experiment == "odd-scaling" && !r.failed) {
        if let Some(l) = r.lambda1.filter(|&l| l > 0.0) {
            groups.entry((r.p, r.n_bos, r.ensemble.clone())).or_default().entry(r.n).or_default().push(l.ln());
        }
    }
    groups
        .into_iter()
        .filter(|(_, by_n)| by_n.len() >= 2)
        .map(|((p, n_bos, ensemble), by_n)| {
            let dims: Vec<usize> = by_n.keys().copied().collect();
            let mean_log_lambda1: Vec<f64> = by_n.values().map(|v| mean(v)).collect();
            let x: Vec<f64> = dims.iter().map(|&n| (n as f64).ln()).collect();
            let slope = slope(&x, &mean_log_lambda1);
            SlopeFit { p, n_bos, ensemble, dims, mean_log_lambda1, slope }
        })
        .collect()
}

fn cost_trends(rows: &[ResultRow]) -> Vec<CostTrend> {
    // (p, n_bos, ensemble, kappa key) -> (kappa, N -> variant -> log cost)
    type Key = (usize, usize, String, String);
    type ByDim = BTreeMap<usize, BTreeMap<String, f64>>;
    let mut groups: BTreeMap<Key, (f64, ByDim)> = BTreeMap::new();
    for r in rows.iter().filter(|r| r.experiment == "speedup-table" && !r.failed) {
        let (Some(label), Some(lc)) = (&r.label, r.log_cost) else { continue };
        let kappa = (r.n as f64).powf(-(r.p as f64) / 4.0) / r.lambda_bar;
        let key = (r.p, r.n_bos, r.ensemble.clone(), format!("{kappa:.9e}"));
        let entry = groups.entry(key).or_insert((kappa, BTreeMap::new()));
        entry.1.entry(r.n).or_default().insert(label.clone(), lc);
    }
    groups
        .into_iter()
        .map(|((p, n_bos, ensemble, _), (kappa, by_n))| {
            let (mut dims, mut amp, mut chosen) = (Vec::new(), Vec::new(), Vec::new());
            for (n, costs) in by_n {
                let Some(&classical) = costs.get("classical-power") else { continue };
                dims.push(n);
                amp.push(costs.get("quantum-amplified").map_or(f64::NAN, |c| c / classical));
                chosen.push(costs.get("quantum-chosen-input").map_or(f64::NAN, |c| c / classical));
            }
            let chosen_decreasing = chosen.len() >= 2 && chosen.windows(2).all(|w| w[1] < w[0]);
            CostTrend { p, n_bos, ensemble, kappa, dims, amplified_over_classical: amp, chosen_over_classical: chosen, chosen_decreasing }
        })
        .collect()
}
