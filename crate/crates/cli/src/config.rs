use std::collections::BTreeMap;
use std::path::PathBuf;

use serde::{Deserialize, Serialize};
use spiked_core::fock::basis_dimension;
use spiked_core::quantum::Window;
use spiked_core::spectral::{lambda_for_ratio, thresholds};
use spiked_core::tensor::Ensemble;

use crate::error::{CliError, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Experiment {
    Detect,
    Recover,
    NullSpectrum,
    OddScaling,
    WickVerify,
    PathEquivalence,
    SpeedupTable,
    QuantumOverlap,
}

impl Experiment {
    pub fn name(&self) -> &'static str {
        match self {
            Experiment::Detect => "detect",
            Experiment::Recover => "recover",
            Experiment::NullSpectrum => "null-spectrum",
            Experiment::OddScaling => "odd-scaling",
            Experiment::WickVerify => "wick-verify",
            Experiment::PathEquivalence => "path-equivalence",
            Experiment::SpeedupTable => "speedup-table",
            Experiment::QuantumOverlap => "quantum-overlap",
        }
    }

    fn needs_strength(&self) -> bool {
        matches!(self, Experiment::Detect | Experiment::Recover | Experiment::SpeedupTable | Experiment::QuantumOverlap)
    }
}

/// Signal strength axis: `lambda_bar` directly, or a target `E0 / Emax`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Strength {
    Lambda(Vec<f64>),
    Ratio(Vec<f64>),
}

impl Strength {
    fn values(&self) -> &[f64] {
        match self {
            Strength::Lambda(v) | Strength::Ratio(v) => v,
        }
    }
}

/// Knobs settable with `--tol-override KEY=VAL`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Tolerances {
    pub eigen_tol: f64,
    /// Post-boost correlation counted as strong recovery.
    pub strong_corr: f64,
    /// Relative agreement required between path-integral methods.
    pub path_rel: f64,
    /// Pairing sum vs Monte Carlo, in standard errors.
    pub wick_sigmas: f64,
    pub mc_draws: usize,
    /// Chosen-input success must beat the maximally mixed one by this factor.
    pub overlap_gain: f64,
    pub rounding_retries: usize,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances {
            eigen_tol: 1e-8,
            strong_corr: 0.9,
            path_rel: 1e-9,
            wick_sigmas: 3.0,
            mc_draws: 10_000,
            overlap_gain: 10.0,
            rounding_retries: spiked_core::spectral::DEFAULT_ROUNDING_RETRIES,
        }
    }
}

impl Tolerances {
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let bad = || CliError::Config(format!("cannot parse {value:?} for tolerance {key}"));
        match key {
            "eigen_tol" => self.eigen_tol = value.parse().map_err(|_| bad())?,
            "strong_corr" => self.strong_corr = value.parse().map_err(|_| bad())?,
            "path_rel" => self.path_rel = value.parse().map_err(|_| bad())?,
            "wick_sigmas" => self.wick_sigmas = value.parse().map_err(|_| bad())?,
            "mc_draws" => self.mc_draws = value.parse().map_err(|_| bad())?,
            "overlap_gain" => self.overlap_gain = value.parse().map_err(|_| bad())?,
            "rounding_retries" => self.rounding_retries = value.parse().map_err(|_| bad())?,
            _ => return Err(CliError::Config(format!("unknown tolerance key {key:?}"))),
        }
        Ok(())
    }

    /// Applies `KEY=VAL` strings in order.
    pub fn with_overrides(mut self, overrides: &[String]) -> Result<Self> {
        for o in overrides {
            let (k, v) = o
                .split_once('=')
                .ok_or_else(|| CliError::Config(format!("tolerance override {o:?} is not KEY=VAL")))?;
            self.set(k.trim(), v.trim())?;
        }
        Ok(self)
    }
}

pub const WICK_TOPOLOGIES: [&str; 4] = ["norm", "ring", "spiked", "crossed"];

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub experiment: Experiment,
    pub orders: Vec<usize>,
    pub dims: Vec<usize>,
    pub n_bos: Vec<usize>,
    pub strength: Option<Strength>,
    pub ensemble: Ensemble,
    pub trials: usize,
    pub seed: u64,
    pub out: PathBuf,
    pub tolerances: Tolerances,
    pub window: Window,
    pub eps_tilde: f64,
    /// Largest circuit depth for path-equivalence.
    pub max_depth: usize,
    /// Network topologies for wick-verify.
    pub topologies: Vec<String>,
}

impl ExperimentConfig {
    pub fn new(experiment: Experiment, out: impl Into<PathBuf>) -> Self {
        ExperimentConfig {
            experiment,
            orders: vec![4],
            dims: vec![10],
            n_bos: vec![2],
            strength: None,
            ensemble: Ensemble::REAL,
            trials: 20,
            seed: 0,
            out: out.into(),
            tolerances: Tolerances::default(),
            window: Window::Erf,
            eps_tilde: 0.01,
            max_depth: 6,
            topologies: WICK_TOPOLOGIES.iter().map(|s| s.to_string()).collect(),
        }
    }
}

/// One grid point.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Cell {
    pub index: usize,
    pub order: usize,
    pub dim: usize,
    pub n_bos: usize,
    pub lambda_bar: f64,
    /// Target `E0 / Emax` when the strength was given as a ratio.
    pub ratio: Option<f64>,
    pub topology: Option<String>,
}

pub(crate) fn legs(order: usize) -> usize {
    if order % 2 == 0 {
        order / 2
    } else {
        order - 1
    }
}

fn config<T>(msg: String) -> Result<T> {
    Err(CliError::Config(msg))
}

/// Checks the whole grid and expands it, cell-major in the order
/// `p`, `N`, `n_bos`, strength, topology.
pub fn expand(cfg: &ExperimentConfig) -> Result<Vec<Cell>> {
    use Experiment::*;
    let exp = cfg.experiment;
    if cfg.trials == 0 {
        return config("trials must be at least 1".into());
    }
    if cfg.orders.is_empty() || cfg.dims.is_empty() || cfg.n_bos.is_empty() {
        return config("--p, --N and --nbos need at least one value each".into());
    }
    if exp.needs_strength() {
        match &cfg.strength {
            None => return config(format!("{} needs --lambda or --ratio", exp.name())),
            Some(s) if s.values().is_empty() => return config("empty --lambda/--ratio list".into()),
            Some(Strength::Lambda(v)) if v.iter().any(|&x| !(x >= 0.0 && x.is_finite())) => {
                return config(format!("lambda values must be finite and nonnegative, got {v:?}"))
            }
            Some(Strength::Ratio(v)) if v.iter().any(|&x| !(x > 0.0 && x.is_finite())) => {
                return config(format!("ratio values must be positive, got {v:?}"))
            }
            _ => {}
        }
    }
    if !(cfg.eps_tilde >= 0.0 && cfg.eps_tilde < 0.5) || (cfg.window == Window::Erf && cfg.eps_tilde == 0.0) {
        return config(format!("--epsilon-tilde {} is outside the range allowed by the {:?} window", cfg.eps_tilde, cfg.window));
    }
    if exp == SpeedupTable && cfg.eps_tilde == 0.0 {
        return config("speedup-table needs a positive --epsilon-tilde".into());
    }
    let t = &cfg.tolerances;
    if t.mc_draws < 2 || !(t.eigen_tol > 0.0) || !(t.path_rel > 0.0) || t.rounding_retries == 0 {
        return config(format!("tolerance overrides out of range: {t:?}"));
    }
    for &p in &cfg.orders {
        if p < 2 {
            return config(format!("tensor order must be at least 2, got {p}"));
        }
        if exp == OddScaling && p % 2 == 0 {
            return config(format!("odd-scaling needs odd orders, got {p}"));
        }
        for &n in &cfg.dims {
            if n < 2 {
                return config(format!("dimension must be at least 2, got {n}"));
            }
            for &nb in &cfg.n_bos {
                if exp != WickVerify && nb < legs(p) {
                    return config(format!("order {p} needs at least {} bosons, got {nb}", legs(p)));
                }
                if exp == QuantumOverlap && nb % p != 0 {
                    return config(format!("quantum-overlap needs n_bos divisible by p, got n_bos={nb}, p={p}"));
                }
                if exp != WickVerify {
                    let d = basis_dimension(n, nb).map_err(|e| CliError::Config(e.to_string()))?;
                    if exp == PathEquivalence && (d as f64).powi(cfg.max_depth as i32 - 1) > 1e8 {
                        return config(format!("path-equivalence with D={d} and depth {} is too large for the naive sum", cfg.max_depth));
                    }
                }
            }
        }
    }
    if exp == OddScaling && cfg.dims.len() < 2 {
        return config("odd-scaling needs at least two values of N for a slope".into());
    }
    if exp == PathEquivalence && cfg.max_depth == 0 {
        return config("path-equivalence needs a depth of at least 1".into());
    }
    if exp == WickVerify {
        if let Some(t) = cfg.topologies.iter().find(|t| !WICK_TOPOLOGIES.contains(&t.as_str())) {
            return config(format!("unknown topology {t:?}; known: {WICK_TOPOLOGIES:?}"));
        }
        if cfg.topologies.is_empty() {
            return config("wick-verify needs at least one topology".into());
        }
    }

    let strengths: Vec<Option<f64>> = match (&cfg.strength, exp.needs_strength()) {
        (Some(s), true) => s.values().iter().map(|&x| Some(x)).collect(),
        _ => vec![None],
    };
    let topologies: Vec<Option<String>> =
        if exp == WickVerify { cfg.topologies.iter().cloned().map(Some).collect() } else { vec![None] };
    let n_min = *cfg.dims.iter().min().unwrap();
    let n_bos_axis: &[usize] = if exp == WickVerify { &cfg.n_bos[..1] } else { &cfg.n_bos };

    let mut cells = Vec::new();
    for &p in &cfg.orders {
        for &n in &cfg.dims {
            for &nb in n_bos_axis {
                for s in &strengths {
                    for topo in &topologies {
                        let (lambda_bar, ratio) = match (s, &cfg.strength) {
                            (None, _) => (0.0, None),
                            (Some(x), Some(Strength::Lambda(_))) => (*x, None),
                            (Some(r), _) => {
                                // speedup-table pins N^{-p/4} / lambda at the smallest N
                                let at = if exp == SpeedupTable { n_min } else { n };
                                let l = lambda_for_ratio(p, at, nb, *r, cfg.ensemble).map_err(|e| CliError::Config(e.to_string()))?;
                                (l, Some(*r))
                            }
                        };
                        let lambda_bar = if exp == SpeedupTable {
                            lambda_bar * (n as f64 / n_min as f64).powf(-(p as f64) / 4.0)
                        } else {
                            lambda_bar
                        };
                        if exp != WickVerify {
                            thresholds(p, n, nb, lambda_bar, cfg.ensemble).map_err(|e| CliError::Config(e.to_string()))?;
                        }
                        cells.push(Cell { index: cells.len(), order: p, dim: n, n_bos: nb, lambda_bar, ratio, topology: topo.clone() });
                    }
                }
            }
        }
    }
    Ok(cells)
}

/// `KEY=VAL` list as a map, for the summary header.
pub(crate) fn describe(cfg: &ExperimentConfig) -> BTreeMap<String, String> {
    let mut m = BTreeMap::new();
    m.insert("experiment".into(), cfg.experiment.name().into());
    m.insert("seed".into(), cfg.seed.to_string());
    m.insert("trials".into(), cfg.trials.to_string());
    m.insert("ensemble".into(), ensemble_name(cfg.ensemble));
    m.insert("window".into(), format!("{:?}", cfg.window).to_lowercase());
    m.insert("epsilon_tilde".into(), cfg.eps_tilde.to_string());
    m
}

pub fn ensemble_name(e: Ensemble) -> String {
    let base = if e.is_complex() { "complex" } else { "real" };
    if e.symmetrized {
        format!("{base}-sym")
    } else {
        base.to_string()
    }
}
