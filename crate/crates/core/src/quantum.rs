//! Classical emulation of the phase-estimation algorithms at desk scale.
//!
//! Phase estimation is replaced by its effective diagonal action: every
//! eigenvector `v_i` of `H(T0)` is kept with probability `q_i`, a window
//! function of its eigenvalue centred at `(E0 + Ecut) / 2`. Circuit costs enter
//! only through [`runtime_model`].

use std::sync::Arc;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{check_dim, Error, Result};
use crate::fock::{product_state, tensor_power_to_fock, FockVector, OccupationBasis};
use crate::hamiltonian::{HamiltonianOperator, DEFAULT_DENSE_CAP};
use crate::rng::{self, substream};
use crate::scalar::{czero, Real, C};
use crate::spectral::{binomial, dense_spectrum, thresholds, Thresholds};
use crate::tensor::{sample_gaussian_tensor, DenseTensor, Ensemble, SignalVector};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Window {
    /// Step at the centre; `q_i` is 0 or 1.
    Hard,
    /// Error-function profile around the centre.
    Erf,
}

/// Inverse of `erfc` on `(0, 2)` by bisection.
fn erfc_inv(y: f64) -> f64 {
    let (mut lo, mut hi) = (-10.0f64, 10.0f64);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if libm::erfc(mid) > y {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Width of the erf profile: `(E0 - Ecut) / 4`, narrowed when needed so that
/// the tail at `(7 E0 + Emax) / 8` stays within `eps_tilde`.
pub fn erf_width(th: &Thresholds, eps_tilde: f64) -> f64 {
    let margin = (th.e0 - th.emax) / 8.0;
    let default = (th.e0 - th.ecut) / 4.0;
    default.min(margin / erfc_inv(2.0 * eps_tilde))
}

pub fn window_probability(window: Window, center: f64, width: f64, energy: f64) -> f64 {
    match window {
        Window::Hard => {
            if energy > center {
                1.0
            } else {
                0.0
            }
        }
        Window::Erf => 0.5 * libm::erfc((center - energy) / width),
    }
}

/// Effective operator `E_PE = sum_i q_i |v_i><v_i|` of a phase-estimation step.
#[derive(Clone, Debug)]
pub struct PhaseEstimationModel<R: Real> {
    basis: Arc<OccupationBasis>,
    /// Descending.
    eigenvalues: Vec<f64>,
    /// Columns match `eigenvalues`.
    eigenvectors: DMatrix<C<R>>,
    q: Vec<f64>,
    pub window: Window,
    pub center: f64,
    pub width: f64,
    pub eps_tilde: f64,
}

fn check_eps(window: Window, eps_tilde: f64) -> Result<()> {
    let ok = match window {
        Window::Hard => (0.0..0.5).contains(&eps_tilde),
        Window::Erf => eps_tilde > 0.0 && eps_tilde < 0.5,
    };
    if ok {
        Ok(())
    } else {
        Err(Error::InvalidArgument(format!("eps_tilde {eps_tilde} out of range for the {window:?} window")))
    }
}

/// Model of phase estimation on `H(T0)` from its dense eigendecomposition.
pub fn pe_model<R: Real>(
    h: &HamiltonianOperator<R>,
    th: &Thresholds,
    eps_tilde: f64,
    window: Window,
) -> Result<PhaseEstimationModel<R>> {
    check_eps(window, eps_tilde)?;
    let (values, vectors) = dense_spectrum(h.materialize_dense(DEFAULT_DENSE_CAP)?);
    let values = values.into_iter().map(|x| x.to_f64_lossy()).collect();
    PhaseEstimationModel::from_spectrum(h.basis().clone(), values, vectors, th, eps_tilde, window)
}

impl<R: Real> PhaseEstimationModel<R> {
    /// Builds the model from a known spectrum (values descending or not).
    pub fn from_spectrum(
        basis: Arc<OccupationBasis>,
        values: Vec<f64>,
        vectors: DMatrix<C<R>>,
        th: &Thresholds,
        eps_tilde: f64,
        window: Window,
    ) -> Result<Self> {
        check_eps(window, eps_tilde)?;
        check_dim(basis.dim(), vectors.nrows())?;
        check_dim(values.len(), vectors.ncols())?;
        let center = 0.5 * (th.e0 + th.ecut);
        let width = match window {
            Window::Hard => 0.0,
            Window::Erf => {
                if !(th.e0 > th.emax) {
                    return Err(Error::InvalidArgument("the erf window needs E0 > Emax".into()));
                }
                erf_width(th, eps_tilde)
            }
        };
        let q = values.iter().map(|&e| window_probability(window, center, width, e)).collect();
        Ok(PhaseEstimationModel { basis, eigenvalues: values, eigenvectors: vectors, q, window, center, width, eps_tilde })
    }

    pub fn dim(&self) -> usize {
        self.basis.dim()
    }

    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    pub fn probabilities(&self) -> &[f64] {
        &self.q
    }

    pub fn eigenvector(&self, i: usize) -> FockVector<R> {
        let col = self.eigenvectors.column(i).iter().copied().collect();
        FockVector::from_amplitudes(self.basis.clone(), col).expect("column length matches basis")
    }

    /// `|<v_i|psi>|^2` for every eigenvector.
    pub fn weights(&self, psi: &FockVector<R>) -> Result<Vec<f64>> {
        check_dim(self.dim(), psi.dim())?;
        Ok((0..self.eigenvectors.ncols())
            .map(|i| {
                let c = self.eigenvectors.column(i).iter().zip(psi.amplitudes()).fold(czero::<R>(), |a, (v, x)| a + v.conj() * x);
                c.norm_sqr().to_f64_lossy()
            })
            .collect())
    }
}

/// Input to the phase-estimation step.
#[derive(Clone, Copy, Debug)]
pub enum Input<'a, R: Real> {
    /// The symmetric half of a maximally entangled state.
    MaximallyMixed,
    Pure(&'a FockVector<R>),
}

/// `sum_i q_i |<v_i|psi>|^2`, or `sum_i q_i / D` for the maximally mixed input.
pub fn success_probability<R: Real>(model: &PhaseEstimationModel<R>, input: Input<'_, R>) -> Result<f64> {
    match input {
        Input::MaximallyMixed => Ok(model.q.iter().sum::<f64>() / model.dim() as f64),
        Input::Pure(psi) => {
            psi.require_normalized("the phase-estimation input")?;
            Ok(model.weights(psi)?.iter().zip(&model.q).map(|(w, q)| w * q).sum())
        }
    }
}

/// State after a successful projection, `sum_i sqrt(q_i) <v_i|psi> v_i`
/// normalized, and the success probability.
pub fn post_selected_state<R: Real>(model: &PhaseEstimationModel<R>, psi: &FockVector<R>) -> Result<(FockVector<R>, f64)> {
    psi.require_normalized("post-selection")?;
    check_dim(model.dim(), psi.dim())?;
    let mut out = vec![czero::<R>(); model.dim()];
    for (i, &q) in model.q.iter().enumerate() {
        if q == 0.0 {
            continue;
        }
        let col = model.eigenvectors.column(i);
        let c = col.iter().zip(psi.amplitudes()).fold(czero::<R>(), |a, (v, x)| a + v.conj() * x);
        let c = c.scale(R::lit(q.sqrt()));
        for (o, v) in out.iter_mut().zip(col.iter()) {
            *o += v * c;
        }
    }
    let state = FockVector::from_amplitudes(model.basis.clone(), out)?;
    let prob = state.norm().to_f64_lossy().powi(2);
    if prob == 0.0 {
        return Err(Error::DegenerateOperator("input has no weight inside the window".into()));
    }
    Ok((state.normalized()?, prob))
}

/// Symmetric projection of `|T0>^{(x) n_bos / p}`, normalized.
#[derive(Clone, Debug)]
pub struct ChosenInput<R: Real> {
    pub state: FockVector<R>,
    /// Norm^2 kept by the symmetric projection; `1 - weight` is the
    /// probability that the projection step reports failure.
    pub projection_weight: f64,
    pub copies: usize,
}

impl<R: Real> ChosenInput<R> {
    /// `|<Psi_sig|state>|^2` for the normalized projected state.
    pub fn projected_overlap(&self, signal: &SignalVector<R>) -> Result<f64> {
        let sig = product_state(signal.values(), self.state.basis().clone())?;
        Ok(sig.inner(&self.state)?.norm_sqr().to_f64_lossy())
    }

    /// Squared overlap of the unprojected input `|T0|^{-c} |T0^{(x) c}>` with
    /// `Psi_sig`, i.e. the projected overlap times the projection weight.
    pub fn signal_overlap(&self, signal: &SignalVector<R>) -> Result<f64> {
        Ok(self.projected_overlap(signal)? * self.projection_weight)
    }

    /// Overall success: projection kept, then the window accepts.
    pub fn success_probability(&self, model: &PhaseEstimationModel<R>) -> Result<f64> {
        Ok(self.projection_weight * success_probability(model, Input::Pure(&self.state))?)
    }
}

pub fn prepare_chosen_input<R: Real>(t0: &DenseTensor<R>, n_bos: usize) -> Result<ChosenInput<R>> {
    let p = t0.order();
    if n_bos == 0 || n_bos % p != 0 {
        return Err(Error::InvalidArgument(format!(
            "chosen input needs n_bos divisible by the tensor order {p}, got {n_bos}"
        )));
    }
    let copies = n_bos / p;
    let (proj, full) = tensor_power_to_fock(t0, copies)?;
    let kept = proj.norm();
    if kept == R::zero() {
        return Err(Error::DegenerateStart("tensor power has no symmetric component".into()));
    }
    let projection_weight = (kept / full).to_f64_lossy().powi(2);
    Ok(ChosenInput { state: proj.normalized()?, projection_weight, copies })
}

/// Interpolation parameters of the perturbed input.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Perturbation {
    pub x: f64,
    pub y: f64,
    pub x_prime: f64,
}

impl Perturbation {
    /// `x = 1 / ln N`, `x'^2` uniform on `[0, x^2]`, `y` uniform on `[0, 1]`.
    pub fn sample(dim: usize, seed: u64) -> Self {
        use rand::Rng;
        let x = 1.0 / (dim as f64).ln();
        let mut g = rng::rng(seed);
        let y: f64 = g.gen();
        let u: f64 = g.gen();
        Perturbation { x, y, x_prime: x * u.sqrt() }
    }

    fn validate(&self) -> Result<()> {
        if !(self.x >= 0.0 && self.x_prime >= 0.0 && (0.0..=1.0).contains(&self.y)) {
            return Err(Error::InvalidArgument(format!("invalid perturbation {self:?}")));
        }
        Ok(())
    }
}

#[derive(Clone, Debug)]
pub struct PerturbedInput<R: Real> {
    pub input: ChosenInput<R>,
    /// `T0' = T0 + x Delta`, whose Hamiltonian the perturbed algorithm uses.
    pub t0_prime: DenseTensor<R>,
    pub perturbation: Perturbation,
}

/// Input built from `T0 + y x Delta + b x' g`, `b = x (1 - y) / sqrt(1 + x^2)`,
/// which equals `lambda v^p + G(y) + b delta'` without reference to `v`.
/// `Delta` comes from substream 0 of `seed` and the unit Gaussian `g` behind
/// `delta'` from substream 1; both follow `ensemble`.
pub fn perturbed_input<R: Real>(
    t0: &DenseTensor<R>,
    n_bos: usize,
    perturbation: Perturbation,
    ensemble: Ensemble,
    seed: u64,
) -> Result<PerturbedInput<R>> {
    perturbation.validate()?;
    let Perturbation { x, y, x_prime } = perturbation;
    let (p, n) = (t0.order(), t0.dim());
    if x == 0.0 {
        return Ok(PerturbedInput { input: prepare_chosen_input(t0, n_bos)?, t0_prime: t0.clone(), perturbation });
    }
    let delta = sample_gaussian_tensor::<R>(p, n, ensemble, substream(seed, 0))?;
    let t0_prime = t0.add_scaled(R::lit(x), &delta)?;
    let mut t = if y == 0.0 { t0.clone() } else { t0.add_scaled(R::lit(y * x), &delta)? };
    let b = x * (1.0 - y) / (1.0 + x * x).sqrt();
    if b * x_prime != 0.0 {
        let g = sample_gaussian_tensor::<R>(p, n, ensemble, substream(seed, 1))?;
        t = t.add_scaled(R::lit(b * x_prime), &g)?;
    }
    Ok(PerturbedInput { input: prepare_chosen_input(&t, n_bos)?, t0_prime, perturbation })
}

/// `ceil(pi / (4 asin(sqrt(p))))` rounds of amplitude amplification.
pub fn amplification_iterations(p_success: f64) -> Result<u64> {
    if !(p_success > 0.0 && p_success <= 1.0) {
        return Err(Error::InvalidArgument(format!("success probability must lie in (0, 1], got {p_success}")));
    }
    let k = (std::f64::consts::FRAC_PI_4 / p_success.sqrt().asin()).ceil();
    Ok((k as u64).max(1))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Variant {
    ClassicalPower,
    QuantumUnamplified,
    QuantumAmplified,
    QuantumChosenInput,
}

impl Variant {
    pub const ALL: [Variant; 4] =
        [Variant::ClassicalPower, Variant::QuantumUnamplified, Variant::QuantumAmplified, Variant::QuantumChosenInput];

    pub fn name(&self) -> &'static str {
        match self {
            Variant::ClassicalPower => "classical-power",
            Variant::QuantumUnamplified => "quantum-unamplified",
            Variant::QuantumAmplified => "quantum-amplified",
            Variant::QuantumChosenInput => "quantum-chosen-input",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CostParams {
    pub order: usize,
    pub dim: usize,
    pub n_bos: usize,
    pub lambda_bar: f64,
    pub ensemble: Ensemble,
    pub eps_tilde: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CostRecord {
    pub variant: Variant,
    pub success_probability: f64,
    pub oracle_calls: f64,
    pub state_prep_cost: f64,
    /// Expected repetitions: `1 / p` unamplified, the amplification count
    /// when amplified, 1 for the classical method.
    pub repetitions: f64,
    pub expected_total_cost: f64,
}

impl CostRecord {
    pub fn log_cost(&self) -> f64 {
        self.expected_total_cost.ln()
    }
}

/// Pieces shared by the cost variants.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CostInputs {
    pub thresholds: Thresholds,
    /// Fock dimension `C(N + n - 1, n)`.
    pub fock_dim: f64,
    /// `E0 + Emax`, the operator norm estimate.
    pub norm_estimate: f64,
    /// Phase-estimation bits `ceil(log2(|H| / (E0 - Emax)))`.
    pub pe_bits: u32,
    /// Classical power iterations `ceil(ln D / ln(E0 / Emax))`.
    pub power_iterations: f64,
    /// `(E0 - Emax) / (8 (E0 + Emax))`: window weight of `Psi_sig`.
    pub signal_window_weight: f64,
    /// `(lambda^2 / (1 + lambda^2))^(n / p)`: chosen-input overlap with `Psi_sig`.
    pub chosen_overlap: f64,
}

pub fn cost_inputs(params: &CostParams) -> Result<CostInputs> {
    let th = thresholds(params.order, params.dim, params.n_bos, params.lambda_bar, params.ensemble)?;
    if !(th.e0 > th.emax) {
        return Err(Error::InvalidArgument(format!("cost model needs E0 > Emax (E0 = {}, Emax = {})", th.e0, th.emax)));
    }
    if !(params.eps_tilde > 0.0 && params.eps_tilde < 0.5) {
        return Err(Error::InvalidArgument(format!("eps_tilde must lie in (0, 1/2), got {}", params.eps_tilde)));
    }
    let gap = th.e0 - th.emax;
    let norm_estimate = th.e0 + th.emax;
    let fock_dim = binomial(params.dim + params.n_bos - 1, params.n_bos);
    let l2 = params.lambda_bar * params.lambda_bar;
    Ok(CostInputs {
        thresholds: th,
        fock_dim,
        norm_estimate,
        pe_bits: (norm_estimate / gap).log2().ceil().max(0.0) as u32,
        power_iterations: (fock_dim.ln() / (th.e0 / th.emax).ln()).ceil().max(1.0),
        signal_window_weight: gap / (8.0 * norm_estimate),
        chosen_overlap: (l2 / (1.0 + l2)).powf(params.n_bos as f64 / params.order as f64),
    })
}

/// Expected cost of one variant.
///
/// Units are applications of `H` to a basis vector (classical) and
/// evolutions under `H / |H|` for unit time (quantum). Phase estimation with
/// `s` bits runs for time `2^s / (E0 - Emax)`, repeated `ceil(ln(1 / eps))`
/// times for confidence. The maximally mixed input costs `n ceil(log2 N)`
/// Bell pairs; the chosen input loads `n / p` copies of the `N^p` entries of `T0`.
pub fn runtime_model(variant: Variant, params: &CostParams) -> Result<CostRecord> {
    let ci = cost_inputs(params)?;
    let gap = ci.thresholds.e0 - ci.thresholds.emax;
    let pe_calls =
        2f64.powi(ci.pe_bits as i32) / gap * ci.norm_estimate * (1.0 / params.eps_tilde).ln().ceil().max(1.0);
    let mixed_prep = params.n_bos as f64 * (params.dim as f64).log2().ceil();
    let record = |success_probability: f64, oracle_calls: f64, state_prep_cost: f64, repetitions: f64| CostRecord {
        variant,
        success_probability,
        oracle_calls,
        state_prep_cost,
        repetitions,
        expected_total_cost: (state_prep_cost + oracle_calls) * repetitions,
    };
    Ok(match variant {
        Variant::ClassicalPower => record(1.0, ci.fock_dim * ci.power_iterations, 0.0, 1.0),
        Variant::QuantumUnamplified => {
            let p = 1.0 / ci.fock_dim;
            record(p, pe_calls, mixed_prep, 1.0 / p)
        }
        Variant::QuantumAmplified => {
            let p = 1.0 / ci.fock_dim;
            record(p, pe_calls, mixed_prep, amplification_iterations(p)? as f64)
        }
        Variant::QuantumChosenInput => {
            if params.n_bos % params.order != 0 {
                return Err(Error::InvalidArgument(format!(
                    "chosen input needs n_bos divisible by the tensor order {}, got {}",
                    params.order, params.n_bos
                )));
            }
            let p = ci.signal_window_weight * ci.chosen_overlap;
            let prep = (params.n_bos / params.order) as f64 * (params.dim as f64).powi(params.order as i32);
            record(p, pe_calls, prep, amplification_iterations(p)? as f64)
        }
    })
}
