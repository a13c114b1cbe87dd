//! Detection and recovery from the top of the spectrum of `H(T0)`.

use nalgebra::{DMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::{check_dim, Error, Result};
use crate::fock::{single_particle_density_matrix, DensityMatrix, FockVector};
use crate::hamiltonian::{build_hamiltonian, HamiltonianOperator, HermitianOperator, DEFAULT_DENSE_CAP};
use crate::rng::{self, substream};
use crate::scalar::{cabs, carg, cis, czero, inner, norm, Real, C};
use crate::tensor::{correlation, tensor_power_step, DenseTensor, Ensemble, SignalVector};

/// Median of `|g|` for a standard real Gaussian `g`.
pub const GAUSSIAN_MEDIAN_ABS: f64 = 0.6745;

/// Rounding draws kept by [`recover`]; the best by `<w|rho|w>` wins.
pub const DEFAULT_ROUNDING_RETRIES: usize = 8;

pub fn binomial(n: usize, k: usize) -> f64 {
    if k > n {
        return 0.0;
    }
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

pub fn factorial(n: usize) -> f64 {
    (1..=n).fold(1.0, |acc, i| acc * i as f64)
}

/// Signal energy, null-spectrum bound and decision threshold for one setting.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Thresholds {
    pub order: usize,
    pub dim: usize,
    pub n_bos: usize,
    pub lambda_bar: f64,
    pub complex: bool,
    /// Variance constant of the null-spectrum bound.
    pub j: f64,
    pub e0: f64,
    pub emax: f64,
    pub ecut: f64,
    /// Tail scale: `P[lambda_1 >= emax + x] <= exp(-x / xi)`.
    pub xi: f64,
}

/// `k! C(n, k) / n^k`, doubled for the complex ensemble.
fn variance_constant(k: usize, n_bos: usize, complex: bool) -> f64 {
    let j = factorial(k) * binomial(n_bos, k) / (n_bos as f64).powi(k as i32);
    if complex {
        2.0 * j
    } else {
        j
    }
}

fn validate(order: usize, dim: usize, n_bos: usize) -> Result<()> {
    if order < 2 {
        return Err(Error::InvalidArgument(format!("tensor order must be at least 2, got {order}")));
    }
    if dim < 2 {
        return Err(Error::InvalidArgument(format!("dimension must be at least 2, got {dim}")));
    }
    let need = if order % 2 == 0 { order / 2 } else { order - 1 };
    if n_bos < need {
        return Err(Error::InvalidArgument(format!(
            "order {order} needs at least {need} bosons, got {n_bos}"
        )));
    }
    Ok(())
}

/// Signal energy per unit `lambda_bar` (even order) or `lambda_bar^2` (odd order).
fn e0_coefficient(order: usize, dim: usize, n_bos: usize) -> f64 {
    let nf = dim as f64;
    if order % 2 == 0 {
        let k = order / 2;
        factorial(k) * binomial(n_bos, k) * nf.powi(k as i32)
    } else {
        let k = order - 1;
        factorial(k) * binomial(n_bos, k) * nf.powi(order as i32)
    }
}

fn null_bounds(order: usize, dim: usize, n_bos: usize, complex: bool) -> (f64, f64, f64) {
    let nf = dim as f64;
    let nb = n_bos as f64;
    let ln = nf.ln();
    let p = order as f64;
    if order % 2 == 0 {
        let j = variance_constant(order / 2, n_bos, complex);
        let emax = (2.0 * j * ln).sqrt() * nb.powf(p / 4.0 + 0.5) * nf.powf(p / 4.0);
        let xi = j.sqrt() * nb.powf(p / 4.0 - 0.5) * nf.powf(p / 4.0) / (2.0 * ln).sqrt();
        (j, emax, xi)
    } else {
        let j = variance_constant(order - 1, n_bos, complex);
        let emax = 2.0 * (j * ln).sqrt() * nb.powf(p / 2.0) * nf.powf(p / 2.0);
        let xi = j.sqrt() * nb.powf(p / 2.0 - 1.0) * nf.powf(p / 2.0) / ln.sqrt();
        (j, emax, xi)
    }
}

pub fn thresholds(order: usize, dim: usize, n_bos: usize, lambda_bar: f64, ensemble: Ensemble) -> Result<Thresholds> {
    validate(order, dim, n_bos)?;
    if !(lambda_bar >= 0.0) {
        return Err(Error::InvalidArgument(format!("lambda_bar must be non-negative, got {lambda_bar}")));
    }
    let complex = ensemble.is_complex();
    let coeff = e0_coefficient(order, dim, n_bos);
    let e0 = if order % 2 == 0 { lambda_bar * coeff } else { lambda_bar * lambda_bar * coeff };
    let (j, emax, xi) = null_bounds(order, dim, n_bos, complex);
    Ok(Thresholds { order, dim, n_bos, lambda_bar, complex, j, e0, emax, ecut: 0.5 * (e0 + emax), xi })
}

/// The `lambda_bar` at which `E0 / Emax = ratio`.
pub fn lambda_for_ratio(order: usize, dim: usize, n_bos: usize, ratio: f64, ensemble: Ensemble) -> Result<f64> {
    validate(order, dim, n_bos)?;
    if !(ratio > 0.0) {
        return Err(Error::InvalidArgument(format!("energy ratio must be positive, got {ratio}")));
    }
    let (_, emax, _) = null_bounds(order, dim, n_bos, ensemble.is_complex());
    let x = ratio * emax / e0_coefficient(order, dim, n_bos);
    Ok(if order % 2 == 0 { x } else { x.sqrt() })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EigenMethod {
    /// Shifted power iteration only.
    Power,
    /// Dense Hermitian eigendecomposition.
    Dense,
    /// Power iteration, falling back to dense when it stalls below the cap.
    Auto,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EigenOptions {
    pub tol: f64,
    /// `None` means `ceil(10 D ln D)`.
    pub max_iter: Option<usize>,
    pub seed: u64,
    pub method: EigenMethod,
    pub dense_cap: usize,
}

impl Default for EigenOptions {
    fn default() -> Self {
        EigenOptions { tol: 1e-8, max_iter: None, seed: 0, method: EigenMethod::Auto, dense_cap: DEFAULT_DENSE_CAP }
    }
}

pub fn default_max_iter(dim: usize) -> usize {
    let d = dim.max(2) as f64;
    ((10.0 * d * d.ln()).ceil() as usize).max(100)
}

#[derive(Clone, Debug)]
pub struct Eigenpair<R: Real> {
    pub value: R,
    pub vector: Vec<C<R>>,
    pub iterations: usize,
    /// `|H psi - lambda psi|`.
    pub residual: R,
    pub method: EigenMethod,
}

#[derive(Clone, Debug)]
pub enum EigenError<R: Real> {
    /// Iteration budget exhausted; carries the best iterate.
    NonConvergence(Eigenpair<R>),
    Failed(Error),
}

impl<R: Real> From<Error> for EigenError<R> {
    fn from(e: Error) -> Self {
        EigenError::Failed(e)
    }
}

impl<R: Real> From<EigenError<R>> for Error {
    fn from(e: EigenError<R>) -> Self {
        match e {
            EigenError::NonConvergence(best) => Error::NonConvergence {
                iterations: best.iterations,
                residual: best.residual.to_f64_lossy(),
            },
            EigenError::Failed(e) => e,
        }
    }
}

fn residual<R: Real>(h: &dyn HermitianOperator<R>, v: &[C<R>], value: R) -> R {
    let mut hv = vec![czero(); v.len()];
    h.apply_into(v, &mut hv);
    let r: Vec<C<R>> = hv.iter().zip(v).map(|(a, b)| a - b.scale(value)).collect();
    norm(&r)
}

/// Dense eigendecomposition of a Hermitian operator: all eigenvalues in
/// descending order with matching eigenvectors as columns.
pub fn dense_spectrum<R: Real>(m: DMatrix<C<R>>) -> (Vec<R>, DMatrix<C<R>>) {
    let eig = SymmetricEigen::new(m);
    let mut order: Vec<usize> = (0..eig.eigenvalues.len()).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].partial_cmp(&eig.eigenvalues[a]).expect("finite eigenvalues"));
    let values = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let vectors = DMatrix::from_fn(eig.eigenvectors.nrows(), order.len(), |r, c| eig.eigenvectors[(r, order[c])]);
    (values, vectors)
}

fn dense_leading<R: Real>(h: &dyn HermitianOperator<R>) -> Eigenpair<R> {
    let (values, vectors) = dense_spectrum(h.to_dense());
    let vector: Vec<C<R>> = vectors.column(0).iter().copied().collect();
    let value = values[0];
    let res = residual(h, &vector, value);
    Eigenpair { value, vector, iterations: 0, residual: res, method: EigenMethod::Dense }
}

fn power_iteration<R: Real>(
    h: &dyn HermitianOperator<R>,
    tol: R,
    max_iter: usize,
    seed: u64,
) -> std::result::Result<Eigenpair<R>, EigenError<R>> {
    let d = h.dim();
    let shift = h.spectral_radius_bound();
    if shift == R::zero() {
        return Err(Error::DegenerateOperator("operator is identically zero".into()).into());
    }
    let mut g = rng::rng(seed);
    let half = std::f64::consts::FRAC_1_SQRT_2;
    let mut x: Vec<C<R>> = (0..d)
        .map(|_| C::new(R::lit(rng::normal(&mut g) * half), R::lit(rng::normal(&mut g) * half)))
        .collect();
    let nx = norm(&x);
    x.iter_mut().for_each(|z| *z = z.unscale(nx));
    let mut y = vec![czero(); d];
    let mut best: Option<Eigenpair<R>> = None;
    for it in 1..=max_iter {
        h.apply_into(&x, &mut y);
        let value = inner(&x, &y).re;
        let res = y.iter().zip(&x).fold(R::zero(), |a, (hy, xx)| a + (hy - xx.scale(value)).norm_sqr()).sqrt();
        let better = best.as_ref().is_none_or(|b| value > b.value);
        if better {
            best = Some(Eigenpair { value, vector: x.clone(), iterations: it, residual: res, method: EigenMethod::Power });
        }
        if res <= tol * value.abs().max(shift * R::lit(1e-12)) {
            return Ok(Eigenpair { value, vector: x, iterations: it, residual: res, method: EigenMethod::Power });
        }
        for (xi, yi) in x.iter_mut().zip(&y) {
            *xi = yi + xi.scale(shift);
        }
        let nx = norm(&x);
        x.iter_mut().for_each(|z| *z = z.unscale(nx));
    }
    let mut best = best.expect("at least one iteration");
    best.iterations = max_iter;
    Err(EigenError::NonConvergence(best))
}

/// Largest eigenvalue and a unit eigenvector of a Hermitian operator.
pub fn leading_eigenpair<R: Real>(
    h: &dyn HermitianOperator<R>,
    opts: &EigenOptions,
) -> std::result::Result<Eigenpair<R>, EigenError<R>> {
    let d = h.dim();
    if d == 0 {
        return Err(Error::InvalidArgument("empty operator".into()).into());
    }
    let max_iter = opts.max_iter.unwrap_or_else(|| default_max_iter(d));
    let tol = R::lit(opts.tol);
    match opts.method {
        EigenMethod::Dense => {
            if d > opts.dense_cap {
                return Err(Error::Size(format!("dense eigensolve of dimension {d} exceeds the cap {}", opts.dense_cap)).into());
            }
            if h.spectral_radius_bound() == R::zero() {
                return Err(Error::DegenerateOperator("operator is identically zero".into()).into());
            }
            Ok(dense_leading(h))
        }
        EigenMethod::Power => power_iteration(h, tol, max_iter, opts.seed),
        EigenMethod::Auto => match power_iteration(h, tol, max_iter, opts.seed) {
            Err(EigenError::NonConvergence(best)) if d <= opts.dense_cap => {
                let mut pair = dense_leading(h);
                pair.iterations = best.iterations;
                Ok(pair)
            }
            other => other,
        },
    }
}

/// One random rounding draw: `u` with `E[conj(u_i) u_j] = rho_ij`, returned as `u / |u|`.
/// Real density matrices are sampled with real Gaussians.
pub fn randomized_rounding<R: Real>(rho: &DensityMatrix<R>, seed: u64) -> Result<Vec<C<R>>> {
    let factor = rounding_factor(rho)?;
    draw_rounding(&factor, seed)
}

enum RoundingFactor<R: Real> {
    Real(DMatrix<R>),
    Complex(DMatrix<C<R>>),
}

fn rounding_factor<R: Real>(rho: &DensityMatrix<R>) -> Result<RoundingFactor<R>> {
    let tol = R::lit(1e-8).max(R::contract_tol());
    let scale = rho.matrix().iter().fold(R::one(), |m, z| m.max(cabs(*z)));
    if rho.hermiticity_defect() > tol * scale {
        return Err(Error::ContractViolation("density matrix is not Hermitian".into()));
    }
    let tr = rho.trace();
    if (tr.re - R::one()).abs() > tol || tr.im.abs() > tol {
        return Err(Error::ContractViolation(format!("density matrix has trace {tr}, expected 1")));
    }
    let n = rho.dim();
    let check = |vals: &[R]| -> Result<()> {
        if let Some(v) = vals.iter().find(|&&v| v < -tol) {
            return Err(Error::InvalidArgument(format!("density matrix has negative eigenvalue {v}")));
        }
        Ok(())
    };
    if rho.is_real() {
        let m = DMatrix::from_fn(n, n, |i, j| (rho.matrix()[(i, j)].re + rho.matrix()[(j, i)].re) * R::lit(0.5));
        let eig = SymmetricEigen::new(m);
        let vals: Vec<R> = eig.eigenvalues.iter().copied().collect();
        check(&vals)?;
        let mut l = eig.eigenvectors;
        for (k, v) in vals.iter().enumerate() {
            let s = v.max(R::zero()).sqrt();
            l.column_mut(k).scale_mut(s);
        }
        Ok(RoundingFactor::Real(l))
    } else {
        let eig = rho.eigen();
        let vals: Vec<R> = eig.eigenvalues.iter().copied().collect();
        check(&vals)?;
        let mut l = eig.eigenvectors;
        for (k, v) in vals.iter().enumerate() {
            let s = v.max(R::zero()).sqrt();
            for z in l.column_mut(k).iter_mut() {
                *z = z.scale(s);
            }
        }
        Ok(RoundingFactor::Complex(l))
    }
}

fn draw_rounding<R: Real>(factor: &RoundingFactor<R>, seed: u64) -> Result<Vec<C<R>>> {
    let mut g = rng::rng(seed);
    let half = std::f64::consts::FRAC_1_SQRT_2;
    for _ in 0..64 {
        let u: Vec<C<R>> = match factor {
            RoundingFactor::Real(l) => {
                let z: Vec<R> = (0..l.ncols()).map(|_| R::lit(rng::normal(&mut g))).collect();
                (0..l.nrows())
                    .map(|i| C::new(l.row(i).iter().zip(&z).fold(R::zero(), |a, (x, y)| a + *x * *y), R::zero()))
                    .collect()
            }
            RoundingFactor::Complex(l) => {
                let z: Vec<C<R>> = (0..l.ncols())
                    .map(|_| C::new(R::lit(rng::normal(&mut g) * half), R::lit(rng::normal(&mut g) * half)))
                    .collect();
                // u = conj(L) z gives E[conj(u_i) u_j] = (L L^dag)_ij
                (0..l.nrows())
                    .map(|i| l.row(i).iter().zip(&z).fold(czero(), |a, (x, y)| a + x.conj() * y))
                    .collect()
            }
        };
        let n = norm(&u);
        if n > R::zero() {
            return Ok(u.into_iter().map(|z| z.unscale(n)).collect());
        }
    }
    Err(Error::DegenerateOperator("rounding draws kept vanishing".into()))
}

/// Best of `retries` rounding draws by the overlap proxy `w^T rho conj(w)`.
pub fn best_rounding<R: Real>(rho: &DensityMatrix<R>, seed: u64, retries: usize) -> Result<Vec<C<R>>> {
    let factor = rounding_factor(rho)?;
    let mut best: Option<(R, Vec<C<R>>)> = None;
    for attempt in 0..retries.max(1) {
        let w = draw_rounding(&factor, substream(seed, attempt as u64))?;
        // rho1 holds <a+_mu a_nu>, the transpose of the usual covariance, so
        // the overlap proxy is evaluated on conj(w)
        let wc: Vec<C<R>> = w.iter().map(|z| z.conj()).collect();
        let score = rho.expectation(&wc)?;
        if best.as_ref().is_none_or(|(s, _)| score > *s) {
            best = Some((score, w));
        }
    }
    Ok(best.expect("at least one draw").1)
}

/// Real unit vector closest to the complex line through `w`.
pub fn realign<R: Real>(w: &[C<R>]) -> Vec<R> {
    let s = w.iter().fold(czero::<R>(), |a, z| a + z * z);
    let phase = if cabs(s) > R::zero() { cis(-carg(s) * R::lit(0.5)) } else { C::new(R::one(), R::zero()) };
    let u: Vec<R> = w.iter().map(|z| (z * phase).re).collect();
    let n = u.iter().fold(R::zero(), |a, &x| a + x * x).sqrt();
    if n == R::zero() {
        return u;
    }
    u.into_iter().map(|x| x / n).collect()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Decision {
    Planted,
    Null,
}

#[derive(Clone, Debug)]
pub struct DetectionReport<R: Real> {
    pub lambda1: R,
    pub thresholds: Thresholds,
    pub decision: Decision,
    pub eigenpair: Eigenpair<R>,
    /// False when the eigensolver stopped at its iteration budget; `lambda1`
    /// is then a Rayleigh quotient, i.e. a lower bound.
    pub converged: bool,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PipelineOptions {
    pub eigen: EigenOptions,
    pub rounding_retries: usize,
    pub seed: u64,
}

impl Default for PipelineOptions {
    fn default() -> Self {
        PipelineOptions { eigen: EigenOptions::default(), rounding_retries: DEFAULT_ROUNDING_RETRIES, seed: 0 }
    }
}

fn ensemble_of<R: Real>(t0: &DenseTensor<R>) -> Ensemble {
    Ensemble { field: t0.field(), symmetrized: t0.is_symmetric() }
}

pub fn decide(lambda1: f64, th: &Thresholds) -> Decision {
    if lambda1 > th.ecut {
        Decision::Planted
    } else {
        Decision::Null
    }
}

/// Builds `H(T0)` and tests its top eigenvalue against `Ecut`. The ensemble
/// constants follow the field of `t0`.
pub fn detect<R: Real>(t0: &DenseTensor<R>, lambda_bar: f64, n_bos: usize, opts: &PipelineOptions) -> Result<DetectionReport<R>> {
    let h = build_hamiltonian(t0, n_bos)?;
    detect_with(&h, lambda_bar, opts)
}

pub fn detect_with<R: Real>(h: &HamiltonianOperator<R>, lambda_bar: f64, opts: &PipelineOptions) -> Result<DetectionReport<R>> {
    let th = thresholds(h.order(), h.modes(), h.n_bos(), lambda_bar, ensemble_of(h.source()))?;
    let (pair, converged) = match leading_eigenpair(h, &opts.eigen) {
        Ok(p) => (p, true),
        Err(EigenError::NonConvergence(best)) => (best, false),
        Err(EigenError::Failed(e)) => return Err(e),
    };
    let lambda1 = pair.value;
    Ok(DetectionReport { lambda1, decision: decide(lambda1.to_f64_lossy(), &th), thresholds: th, eigenpair: pair, converged })
}

#[derive(Clone, Debug)]
pub struct RecoveryReport<R: Real> {
    pub detection: DetectionReport<R>,
    /// `<psi|H|psi>` of the state fed to rounding.
    pub energy: R,
    /// Set when no state with energy at least `Ecut` was found.
    pub failed: bool,
    pub rho1: DensityMatrix<R>,
    pub rounded: Vec<C<R>>,
    /// Unit vector after one tensor power step.
    pub recovered: Vec<R>,
    /// `<v|rho1|v> / N`, when the signal is supplied.
    pub overlap_ratio: Option<R>,
    pub rounding_corr: Option<R>,
    pub boosted_corr: Option<R>,
}

/// Detection, one-particle density matrix, randomized rounding and one power
/// step. `signal` is only used to score the output.
pub fn recover<R: Real>(
    t0: &DenseTensor<R>,
    lambda_bar: f64,
    n_bos: usize,
    signal: Option<&SignalVector<R>>,
    opts: &PipelineOptions,
) -> Result<RecoveryReport<R>> {
    let h = build_hamiltonian(t0, n_bos)?;
    let detection = detect_with(&h, lambda_bar, opts)?;
    let psi = FockVector::from_amplitudes(h.basis().clone(), detection.eigenpair.vector.clone())?.normalized()?;
    recover_from_state(t0, &h, detection, &psi, signal, opts)
}

/// Recovery starting from any state; `failed` is set when its energy is below `Ecut`.
pub fn recover_from_state<R: Real>(
    t0: &DenseTensor<R>,
    h: &HamiltonianOperator<R>,
    detection: DetectionReport<R>,
    psi: &FockVector<R>,
    signal: Option<&SignalVector<R>>,
    opts: &PipelineOptions,
) -> Result<RecoveryReport<R>> {
    let energy = h.expectation(psi)?;
    let failed = energy.to_f64_lossy() < detection.thresholds.ecut;
    let rho1 = single_particle_density_matrix(psi)?;
    let rounded = best_rounding(&rho1, substream(opts.seed, 0x7255), opts.rounding_retries)?;
    let u = realign(&rounded);
    let boosted = tensor_power_step(t0, &u)?;
    let bn = boosted.iter().fold(R::zero(), |a, &x| a + x * x).sqrt();
    let recovered: Vec<R> = if bn > R::zero() { boosted.iter().map(|&x| x / bn).collect() } else { u.clone() };
    let (overlap_ratio, rounding_corr, boosted_corr) = match signal {
        Some(v) => {
            check_dim(t0.dim(), v.dim())?;
            let vc = v.to_complex();
            let ratio = rho1.expectation(&vc)? / R::lit(v.dim() as f64);
            let rc = correlation(&rounded, &vc)?;
            let rec_c: Vec<C<R>> = recovered.iter().map(|&x| C::new(x, R::zero())).collect();
            let bc = correlation(&rec_c, &vc)?;
            (Some(ratio), Some(rc), Some(bc))
        }
        None => (None, None, None),
    };
    Ok(RecoveryReport { detection, energy, failed, rho1, rounded, recovered, overlap_ratio, rounding_corr, boosted_corr })
}
