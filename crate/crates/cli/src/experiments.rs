//! Trial bodies, one per experiment.

use std::sync::Arc;

use spiked_core::fock::{enumerate_basis, FockVector};
use spiked_core::hamiltonian::build_hamiltonian;
use spiked_core::path_integral::{amplitude_naive, amplitude_recursive, ceil_log2, recursive_call_bound, GeneratorCircuit};
use spiked_core::quantum::{pe_model, prepare_chosen_input, runtime_model, success_probability, CostParams, Input, Variant};
use spiked_core::rng::substream;
use spiked_core::spectral::{detect, recover, thresholds, Decision, EigenOptions, PipelineOptions};
use spiked_core::tensor::{sample_gaussian_tensor, Ensemble, SpikedInstance};
use spiked_core::wick::{expected_value, mc_estimate, variance_check, TensorNetwork, VertexKind};

use crate::config::{Cell, Experiment, ExperimentConfig};
use crate::error::{CliError, Result};
use crate::row::ResultRow;

/// Rows produced by one (cell, trial); speedup-table yields one per variant.
pub fn run_trial(cfg: &ExperimentConfig, cell: &Cell, trial: usize, seed: u64) -> Vec<ResultRow> {
    let base = ResultRow::for_trial(cfg, cell, trial, seed);
    let out = match cfg.experiment {
        Experiment::Detect => detect_trial(cfg, cell, trial, seed, base.clone()).map(|r| vec![r]),
        Experiment::Recover => recover_trial(cfg, cell, seed, base.clone()).map(|r| vec![r]),
        Experiment::NullSpectrum | Experiment::OddScaling => null_trial(cfg, cell, seed, base.clone()).map(|r| vec![r]),
        Experiment::WickVerify => wick_trial(cfg, cell, seed, base.clone()).map(|r| vec![r]),
        Experiment::PathEquivalence => path_trial(cfg, cell, trial, seed, base.clone()).map(|r| vec![r]),
        Experiment::SpeedupTable => speedup_rows(cfg, cell, &base),
        Experiment::QuantumOverlap => overlap_trial(cfg, cell, seed, base.clone()).map(|r| vec![r]),
    };
    out.unwrap_or_else(|e| vec![base.fail(e)])
}

/// Trials actually run per cell; the cost model is deterministic.
pub fn trials_per_cell(cfg: &ExperimentConfig) -> usize {
    if cfg.experiment == Experiment::SpeedupTable {
        1
    } else {
        cfg.trials
    }
}

fn pipeline(cfg: &ExperimentConfig, seed: u64) -> PipelineOptions {
    PipelineOptions {
        eigen: EigenOptions { tol: cfg.tolerances.eigen_tol, seed: substream(seed, 2), ..Default::default() },
        rounding_retries: cfg.tolerances.rounding_retries,
        seed: substream(seed, 3),
    }
}

fn decision_name(d: Decision) -> String {
    match d {
        Decision::Planted => "planted".into(),
        Decision::Null => "null".into(),
    }
}

/// Even trials are planted, odd trials are pure noise.
fn detect_trial(cfg: &ExperimentConfig, cell: &Cell, trial: usize, seed: u64, mut row: ResultRow) -> Result<ResultRow> {
    let planted = trial % 2 == 0;
    let t0 = if planted {
        SpikedInstance::<f64>::sample(cell.order, cell.dim, cell.lambda_bar, cfg.ensemble, seed)?.t0
    } else {
        sample_gaussian_tensor(cell.order, cell.dim, cfg.ensemble, substream(seed, 1))?
    };
    let rep = detect(&t0, cell.lambda_bar, cell.n_bos, &pipeline(cfg, seed))?;
    row.planted = Some(planted);
    row.lambda1 = Some(rep.lambda1);
    row.e0 = Some(rep.thresholds.e0);
    row.emax = Some(rep.thresholds.emax);
    row.ecut = Some(rep.thresholds.ecut);
    row.decision = Some(decision_name(rep.decision));
    row.converged = Some(rep.converged);
    row.hit = Some((rep.decision == Decision::Planted) == planted);
    Ok(row)
}

fn recover_trial(cfg: &ExperimentConfig, cell: &Cell, seed: u64, mut row: ResultRow) -> Result<ResultRow> {
    let inst = SpikedInstance::<f64>::sample(cell.order, cell.dim, cell.lambda_bar, cfg.ensemble, seed)?;
    let rep = recover(&inst.t0, cell.lambda_bar, cell.n_bos, Some(&inst.signal), &pipeline(cfg, seed))?;
    let th = rep.detection.thresholds;
    row.planted = Some(true);
    row.lambda1 = Some(rep.detection.lambda1);
    row.e0 = Some(th.e0);
    row.emax = Some(th.emax);
    row.ecut = Some(th.ecut);
    row.decision = Some(decision_name(rep.detection.decision));
    row.converged = Some(rep.detection.converged);
    row.overlap_ratio = rep.overlap_ratio;
    row.rounding_corr = rep.rounding_corr;
    row.corr = rep.boosted_corr;
    row.below_cut = Some(rep.failed);
    row.hit = rep.boosted_corr.map(|c| c >= cfg.tolerances.strong_corr);
    Ok(row)
}

/// Top eigenvalue of `H(G)`; `value` is the exceedance `(lambda1 - Emax) / xi`.
fn null_trial(cfg: &ExperimentConfig, cell: &Cell, seed: u64, mut row: ResultRow) -> Result<ResultRow> {
    let g = sample_gaussian_tensor::<f64>(cell.order, cell.dim, cfg.ensemble, substream(seed, 1))?;
    let rep = detect(&g, 0.0, cell.n_bos, &pipeline(cfg, seed))?;
    let th = rep.thresholds;
    row.planted = Some(false);
    row.lambda1 = Some(rep.lambda1);
    row.emax = Some(th.emax);
    row.converged = Some(rep.converged);
    row.value = Some((rep.lambda1 - th.emax) / th.xi);
    if cfg.experiment == Experiment::NullSpectrum {
        row.hit = Some(rep.lambda1 >= th.emax);
    }
    Ok(row)
}

/// Built-in networks. `norm` uses order `p`; the others have fixed orders.
pub fn topology(name: &str, order: usize, dim: usize, ens: Ensemble) -> Result<TensorNetwork> {
    let partner = if ens.is_complex() { VertexKind::Conjugate } else { VertexKind::Gaussian };
    let mut net = TensorNetwork::new(dim, ens);
    match name {
        "norm" => {
            // sum |G|^2 over all entries
            let a = net.add_vertex(VertexKind::Gaussian, order);
            let b = net.add_vertex(partner, order);
            for l in 0..order {
                net.connect((a, l), (b, l));
            }
        }
        "ring" => {
            // Tr(G G* G G*) on order-2 noise
            let v: Vec<usize> =
                (0..4).map(|i| net.add_vertex(if i % 2 == 0 { VertexKind::Gaussian } else { partner }, 2)).collect();
            for i in 0..4 {
                net.connect((v[i], 1), (v[(i + 1) % 4], 0));
            }
        }
        "spiked" => {
            // v v . G . G* . v v, the noise pair sharing two legs; E = lambda^2 N^2
            net.lambda = 1.0;
            let s1 = net.add_vertex(VertexKind::Signal, 2);
            let g = net.add_vertex(VertexKind::Gaussian, 4);
            let c = net.add_vertex(partner, 4);
            let s2 = net.add_vertex(VertexKind::Signal, 2);
            net.connect((s1, 0), (g, 0)).connect((s1, 1), (g, 1)).connect((g, 2), (c, 0)).connect((g, 3), (c, 1));
            net.connect((c, 2), (s2, 0)).connect((c, 3), (s2, 1));
        }
        "crossed" => {
            let g1 = net.add_vertex(VertexKind::Gaussian, 3);
            let g2 = net.add_vertex(VertexKind::Gaussian, 3);
            let c1 = net.add_vertex(partner, 3);
            let c2 = net.add_vertex(partner, 3);
            net.connect((g1, 0), (c1, 0)).connect((g1, 1), (c2, 1)).connect((g1, 2), (g2, 2));
            net.connect((g2, 0), (c2, 0)).connect((g2, 1), (c1, 1)).connect((c1, 2), (c2, 2));
        }
        other => return Err(CliError::InvalidArgument(format!("unknown topology {other:?}"))),
    }
    net.validate()?;
    Ok(net)
}

fn wick_trial(cfg: &ExperimentConfig, cell: &Cell, seed: u64, mut row: ResultRow) -> Result<ResultRow> {
    let name = cell.topology.as_deref().unwrap_or("norm");
    let net = topology(name, cell.order, cell.dim, cfg.ensemble)?;
    let exact = expected_value(&net)?;
    let mc = mc_estimate(&net, cfg.tolerances.mc_draws, seed)?;
    let band = (cfg.tolerances.wick_sigmas * mc.stderr).max(1e-12 * exact.abs().max(1.0));
    row.value = Some(mc.mean);
    row.reference = Some(exact);
    row.stderr = Some(mc.stderr);
    row.hit = Some((mc.mean - exact).abs() <= band);
    row.bound_holds = Some(variance_check(&net)?.holds);
    Ok(row)
}

/// Random circuit of depth `1 + trial mod max_depth`; `value` is the largest
/// relative deviation from the state-vector amplitude.
fn path_trial(cfg: &ExperimentConfig, cell: &Cell, trial: usize, seed: u64, mut row: ResultRow) -> Result<ResultRow> {
    let basis = Arc::new(enumerate_basis(cell.dim, cell.n_bos)?);
    let depth = 1 + trial % cfg.max_depth;
    let circuit = GeneratorCircuit::<f64>::random(basis.clone(), depth, cell.order, cfg.ensemble, seed)?;
    let d = basis.dim();
    let (x, y) = ((substream(seed, 4) % d as u64) as usize, (substream(seed, 5) % d as u64) as usize);
    let dense = circuit.apply(&FockVector::basis_state(basis.clone(), x)?)?.amplitudes()[y];
    let (naive, _) = amplitude_naive(&circuit, x, y)?;
    let (rec, stats) = amplitude_recursive(&circuit, x, y)?;
    let scale = dense.norm().max(f64::MIN_POSITIVE);
    let dev = ((rec - dense).norm() / scale).max((naive - dense).norm() / scale);
    row.value = Some(dev);
    row.reference = Some(dense.norm());
    row.cost = Some(stats.calls as f64);
    row.hit = Some(dev <= cfg.tolerances.path_rel);
    row.bound_holds = Some(
        stats.calls as f64 <= recursive_call_bound(d, depth) && stats.max_live_frames <= ceil_log2(depth) as usize + 1,
    );
    Ok(row)
}

fn speedup_rows(cfg: &ExperimentConfig, cell: &Cell, base: &ResultRow) -> Result<Vec<ResultRow>> {
    let params = CostParams {
        order: cell.order,
        dim: cell.dim,
        n_bos: cell.n_bos,
        lambda_bar: cell.lambda_bar,
        ensemble: cfg.ensemble,
        eps_tilde: cfg.eps_tilde,
    };
    let th = thresholds(cell.order, cell.dim, cell.n_bos, cell.lambda_bar, cfg.ensemble)?;
    let mut rows = Vec::new();
    for (i, v) in Variant::ALL.into_iter().enumerate() {
        let mut row = base.clone();
        row.trial = i;
        row.label = Some(v.name().into());
        row.e0 = Some(th.e0);
        row.emax = Some(th.emax);
        match runtime_model(v, &params) {
            Ok(rec) => {
                row.success_prob = Some(rec.success_probability);
                row.cost = Some(rec.expected_total_cost);
                row.log_cost = Some(rec.log_cost());
            }
            Err(e) => row = row.fail(e),
        }
        rows.push(row);
    }
    Ok(rows)
}

/// `value` is the chosen input's squared overlap with `Psi_sig`, `reference`
/// the scaling prediction `C^(2n/p) N^(-n/2)` with `C = lambda N^(p/4)`.
fn overlap_trial(cfg: &ExperimentConfig, cell: &Cell, seed: u64, mut row: ResultRow) -> Result<ResultRow> {
    let (p, n, nb) = (cell.order as f64, cell.dim as f64, cell.n_bos as f64);
    let inst = SpikedInstance::<f64>::sample(cell.order, cell.dim, cell.lambda_bar, cfg.ensemble, seed)?;
    let th = thresholds(cell.order, cell.dim, cell.n_bos, cell.lambda_bar, cfg.ensemble)?;
    let h = build_hamiltonian(&inst.t0, cell.n_bos)?;
    let model = pe_model(&h, &th, cfg.eps_tilde, cfg.window)?;
    let ci = prepare_chosen_input(&inst.t0, cell.n_bos)?;
    let chosen = ci.success_probability(&model)?;
    let mixed = success_probability(&model, Input::MaximallyMixed)?;
    let c = cell.lambda_bar * n.powf(p / 4.0);
    row.planted = Some(true);
    row.e0 = Some(th.e0);
    row.emax = Some(th.emax);
    row.ecut = Some(th.ecut);
    row.value = Some(ci.signal_overlap(&inst.signal)?);
    row.reference = Some(c.powf(2.0 * nb / p) * n.powf(-nb / 2.0));
    row.success_prob = Some(chosen);
    row.success_mixed = Some(mixed);
    row.hit = Some(chosen >= cfg.tolerances.overlap_gain * mixed);
    Ok(row)
}
