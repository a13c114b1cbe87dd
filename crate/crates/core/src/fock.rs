//! Symmetric (bosonic) subspace in the occupation-number basis.
//!
//! States of `n` bosons in `N` modes are indexed by occupation vectors listed
//! in descending lexicographic order, e.g. for `N = 3, n = 2`:
//! `(2,0,0) (1,1,0) (1,0,1) (0,2,0) (0,1,1) (0,0,2)`. Modes are 0-based.

use std::sync::Arc;

use nalgebra::{DMatrix, SymmetricEigen};

use crate::error::{check_dim, Error, Result};
use crate::scalar::{cabs, creal, czero, inner, norm, norm_sqr, Real, C};
use crate::tensor::DenseTensor;

/// Largest basis [`enumerate_basis`] will materialize.
pub const MAX_BASIS_STATES: usize = 1 << 26;

/// Number of occupations of `b` bosons in `m` modes, `C(m+b-1, b)`, for all
/// `m <= modes`, `b <= bosons`.
fn count_table(modes: usize, bosons: usize) -> Result<Vec<Vec<usize>>> {
    let mut t = vec![vec![0usize; bosons + 1]; modes + 1];
    t[0][0] = 1;
    for m in 1..=modes {
        t[m][0] = 1;
        for b in 1..=bosons {
            t[m][b] = t[m - 1][b].checked_add(t[m][b - 1]).ok_or_else(|| {
                Error::Size(format!("basis size for {modes} modes and {bosons} bosons overflows usize"))
            })?;
        }
    }
    Ok(t)
}

/// `C(N + n - 1, n)` with overflow detection.
pub fn basis_dimension(modes: usize, n_bos: usize) -> Result<usize> {
    if modes == 0 {
        return Err(Error::InvalidArgument("at least one mode is required".into()));
    }
    Ok(count_table(modes, n_bos)?[modes][n_bos])
}

#[derive(Debug, PartialEq, Eq)]
pub struct OccupationBasis {
    modes: usize,
    n_bos: usize,
    states: Vec<u8>,
    counts: Vec<Vec<usize>>,
}

/// Lists every occupation vector of `n_bos` bosons in `modes` modes.
pub fn enumerate_basis(modes: usize, n_bos: usize) -> Result<OccupationBasis> {
    if n_bos > u8::MAX as usize {
        return Err(Error::Size(format!("{n_bos} bosons exceed the per-mode occupation limit")));
    }
    let dim = basis_dimension(modes, n_bos)?;
    if dim > MAX_BASIS_STATES {
        return Err(Error::Size(format!("basis of {dim} states exceeds the cap {MAX_BASIS_STATES}")));
    }
    let counts = count_table(modes, n_bos)?;
    let mut states = Vec::with_capacity(dim * modes);
    let mut occ = vec![0u8; modes];
    fn fill(mode: usize, rem: usize, occ: &mut [u8], out: &mut Vec<u8>) {
        if mode + 1 == occ.len() {
            occ[mode] = rem as u8;
            out.extend_from_slice(occ);
            return;
        }
        for k in (0..=rem).rev() {
            occ[mode] = k as u8;
            fill(mode + 1, rem - k, occ, out);
        }
    }
    fill(0, n_bos, &mut occ, &mut states);
    debug_assert_eq!(states.len(), dim * modes);
    Ok(OccupationBasis { modes, n_bos, states, counts })
}

impl OccupationBasis {
    pub fn modes(&self) -> usize {
        self.modes
    }

    pub fn n_bos(&self) -> usize {
        self.n_bos
    }

    pub fn dim(&self) -> usize {
        self.states.len() / self.modes
    }

    pub fn occupation(&self, i: usize) -> &[u8] {
        &self.states[i * self.modes..(i + 1) * self.modes]
    }

    pub fn iter(&self) -> impl Iterator<Item = &[u8]> {
        self.states.chunks_exact(self.modes)
    }

    /// Position of a valid occupation vector (combinatorial ranking).
    pub fn rank(&self, occ: &[u8]) -> usize {
        debug_assert_eq!(occ.len(), self.modes);
        let mut rem = self.n_bos;
        let mut r = 0;
        for (i, &o) in occ[..self.modes - 1].iter().enumerate() {
            let o = o as usize;
            if o < rem {
                // states whose mode i holds more than o bosons come first
                r += self.counts[self.modes - i][rem - o - 1];
            }
            rem -= o;
        }
        r
    }

    /// Like [`rank`](Self::rank) but validates length and particle number.
    pub fn try_rank(&self, occ: &[u8]) -> Option<usize> {
        if occ.len() != self.modes || occ.iter().map(|&o| o as usize).sum::<usize>() != self.n_bos {
            return None;
        }
        Some(self.rank(occ))
    }

    /// Index of the state with all bosons in `mode`.
    pub fn condensed_index(&self, mode: usize) -> usize {
        let mut occ = vec![0u8; self.modes];
        occ[mode] = self.n_bos as u8;
        self.rank(&occ)
    }
}

#[derive(Clone, Debug)]
pub struct FockVector<R: Real> {
    basis: Arc<OccupationBasis>,
    amps: Vec<C<R>>,
}

impl<R: Real> FockVector<R> {
    pub fn zeros(basis: Arc<OccupationBasis>) -> Self {
        let d = basis.dim();
        FockVector { basis, amps: vec![czero(); d] }
    }

    pub fn from_amplitudes(basis: Arc<OccupationBasis>, amps: Vec<C<R>>) -> Result<Self> {
        check_dim(basis.dim(), amps.len())?;
        Ok(FockVector { basis, amps })
    }

    pub fn basis_state(basis: Arc<OccupationBasis>, i: usize) -> Result<Self> {
        if i >= basis.dim() {
            return Err(Error::InvalidArgument(format!("basis index {i} out of range")));
        }
        let mut v = Self::zeros(basis);
        v.amps[i] = creal(R::one());
        Ok(v)
    }

    pub fn basis(&self) -> &Arc<OccupationBasis> {
        &self.basis
    }

    pub fn amplitudes(&self) -> &[C<R>] {
        &self.amps
    }

    pub fn amplitudes_mut(&mut self) -> &mut [C<R>] {
        &mut self.amps
    }

    pub fn into_amplitudes(self) -> Vec<C<R>> {
        self.amps
    }

    pub fn dim(&self) -> usize {
        self.amps.len()
    }

    pub fn norm(&self) -> R {
        norm(&self.amps)
    }

    pub fn is_normalized(&self) -> bool {
        (norm_sqr(&self.amps) - R::one()).abs() <= R::contract_tol()
    }

    pub fn normalized(&self) -> Result<Self> {
        let n = self.norm();
        if n == R::zero() {
            return Err(Error::InvalidArgument("cannot normalize the zero vector".into()));
        }
        let inv = R::one() / n;
        Ok(FockVector { basis: self.basis.clone(), amps: self.amps.iter().map(|z| z.scale(inv)).collect() })
    }

    pub fn inner(&self, other: &Self) -> Result<C<R>> {
        self.check_same_basis(other)?;
        Ok(inner(&self.amps, &other.amps))
    }

    pub fn check_same_basis(&self, other: &Self) -> Result<()> {
        check_dim(self.basis.modes(), other.basis.modes())?;
        check_dim(self.basis.n_bos(), other.basis.n_bos())
    }

    pub(crate) fn require_normalized(&self, what: &str) -> Result<()> {
        if self.is_normalized() {
            Ok(())
        } else {
            Err(Error::ContractViolation(format!("{what} needs a normalized state, |psi|^2 = {}", norm_sqr(&self.amps))))
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Ladder {
    Create(usize),
    Annihilate(usize),
}

/// Applies the operator product `ops[0] ops[1] ... ops[k-1]` (rightmost acts first).
/// The product must conserve particle number.
pub fn apply_monomial<R: Real>(ops: &[Ladder], state: &FockVector<R>) -> Result<FockVector<R>> {
    let basis = state.basis();
    let modes = basis.modes();
    let mut balance = 0i64;
    for op in ops {
        match *op {
            Ladder::Create(m) | Ladder::Annihilate(m) if m >= modes => {
                return Err(Error::InvalidArgument(format!("mode {m} out of range for {modes} modes")))
            }
            Ladder::Create(_) => balance += 1,
            Ladder::Annihilate(_) => balance -= 1,
        }
    }
    if balance != 0 {
        return Err(Error::ContractViolation("monomial does not conserve particle number".into()));
    }
    let mut out = FockVector::zeros(basis.clone());
    let mut occ = vec![0u32; modes];
    let mut packed = vec![0u8; modes];
    'states: for (i, amp) in state.amps.iter().enumerate() {
        if *amp == czero() {
            continue;
        }
        for (o, &b) in occ.iter_mut().zip(basis.occupation(i)) {
            *o = b as u32;
        }
        let mut factor = 1.0f64;
        for op in ops.iter().rev() {
            match *op {
                Ladder::Create(m) => {
                    occ[m] += 1;
                    factor *= (occ[m] as f64).sqrt();
                }
                Ladder::Annihilate(m) => {
                    if occ[m] == 0 {
                        continue 'states;
                    }
                    factor *= (occ[m] as f64).sqrt();
                    occ[m] -= 1;
                }
            }
        }
        for (p, &o) in packed.iter_mut().zip(&occ) {
            *p = o as u8;
        }
        let j = basis.rank(&packed);
        out.amps[j] += amp.scale(R::lit(factor));
    }
    Ok(out)
}

fn ln_factorial(k: usize) -> f64 {
    (1..=k).map(|i| (i as f64).ln()).sum()
}

/// `|v_hat>^{(x) n}` written in the occupation basis: amplitude
/// `sqrt(n! / prod n_mu!) prod v_hat_mu^{n_mu}`.
pub fn product_state<R: Real>(v: &[R], basis: Arc<OccupationBasis>) -> Result<FockVector<R>> {
    check_dim(basis.modes(), v.len())?;
    let vn = v.iter().fold(R::zero(), |a, &x| a + x * x).sqrt();
    if vn == R::zero() {
        return Err(Error::InvalidArgument("product state of the zero vector".into()));
    }
    let vhat: Vec<f64> = v.iter().map(|&x| (x / vn).to_f64_lossy()).collect();
    let lnn = ln_factorial(basis.n_bos());
    let amps = basis
        .iter()
        .map(|occ| {
            let mut a = 1.0f64;
            let mut lnd = 0.0;
            for (&o, &x) in occ.iter().zip(&vhat) {
                a *= x.powi(o as i32);
                lnd += ln_factorial(o as usize);
            }
            creal(R::lit(a * (0.5 * (lnn - lnd)).exp()))
        })
        .collect();
    FockVector::from_amplitudes(basis, amps)
}

/// Symmetric projection of `|t>^{(x) copies}` into the occupation basis of
/// `order * copies` bosons.
///
/// Returns the (unnormalized) projected state and the norm of the full
/// unprojected tensor power; the squared ratio of the two norms is the weight
/// the projection keeps.
pub fn tensor_power_to_fock<R: Real>(t: &DenseTensor<R>, copies: usize) -> Result<(FockVector<R>, R)> {
    if copies == 0 {
        return Err(Error::InvalidArgument("at least one tensor copy is required".into()));
    }
    let n_bos = t.order() * copies;
    let basis = Arc::new(enumerate_basis(t.dim(), n_bos)?);
    let modes = t.dim();
    let total = crate::tensor::tensor_len(n_bos, modes)?;
    let mut acc = vec![czero::<R>(); basis.dim()];
    let mut idx = vec![0usize; n_bos];
    let mut occ = vec![0u8; modes];
    let block = t.len();
    for lin in 0..total {
        // digits of lin, most significant first
        let mut rest = lin;
        for slot in idx.iter_mut().rev() {
            *slot = rest % modes;
            rest /= modes;
        }
        let mut val = creal(R::one());
        let mut rest = lin;
        for _ in 0..copies {
            val *= t.data()[rest % block];
            rest /= block;
        }
        if val == czero() {
            continue;
        }
        occ.iter_mut().for_each(|o| *o = 0);
        for &m in &idx {
            occ[m] += 1;
        }
        acc[basis.rank(&occ)] += val;
    }
    // each occupation vector o stands for mult(o) index tuples
    let lnn = ln_factorial(n_bos);
    for (a, occ) in acc.iter_mut().zip(basis.iter()) {
        let lnd: f64 = occ.iter().map(|&o| ln_factorial(o as usize)).sum();
        let inv_sqrt_mult = (-0.5 * (lnn - lnd)).exp();
        *a = a.scale(R::lit(inv_sqrt_mult));
    }
    let full = t.frobenius_norm().powi(copies as i32);
    Ok((FockVector::from_amplitudes(basis, acc)?, full))
}

/// Symmetric projection of a single tensor; see [`tensor_power_to_fock`].
pub fn tensor_to_fock<R: Real>(t: &DenseTensor<R>) -> Result<(FockVector<R>, R)> {
    tensor_power_to_fock(t, 1)
}

/// One-particle reduced density matrix of an `N x N` Hermitian, trace-one operator.
#[derive(Clone, Debug, PartialEq)]
pub struct DensityMatrix<R: Real> {
    matrix: DMatrix<C<R>>,
}

impl<R: Real> DensityMatrix<R> {
    pub fn from_matrix(matrix: DMatrix<C<R>>) -> Result<Self> {
        if !matrix.is_square() {
            return Err(Error::InvalidArgument("density matrix must be square".into()));
        }
        Ok(DensityMatrix { matrix })
    }

    pub fn matrix(&self) -> &DMatrix<C<R>> {
        &self.matrix
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn trace(&self) -> C<R> {
        self.matrix.trace()
    }

    pub fn hermiticity_defect(&self) -> R {
        let d = &self.matrix - self.matrix.adjoint();
        d.iter().fold(R::zero(), |m, z| m.max(cabs(*z)))
    }

    pub fn is_real(&self) -> bool {
        self.matrix.iter().all(|z| z.im.abs() <= R::contract_tol())
    }

    /// `<v|rho|v>` (real part).
    pub fn expectation(&self, v: &[C<R>]) -> Result<R> {
        check_dim(self.dim(), v.len())?;
        let mut acc = czero();
        for i in 0..v.len() {
            for j in 0..v.len() {
                acc += v[i].conj() * self.matrix[(i, j)] * v[j];
            }
        }
        Ok(acc.re)
    }

    pub fn eigen(&self) -> SymmetricEigen<C<R>, nalgebra::Dyn> {
        let herm = (&self.matrix + self.matrix.adjoint()).scale(R::lit(0.5));
        SymmetricEigen::new(herm)
    }
}

/// `rho_{mu nu} = <psi| a_mu^dag a_nu |psi> / n`.
pub fn single_particle_density_matrix<R: Real>(state: &FockVector<R>) -> Result<DensityMatrix<R>> {
    state.require_normalized("the one-particle density matrix")?;
    let basis = state.basis();
    let modes = basis.modes();
    let n = basis.n_bos();
    if n == 0 {
        return Err(Error::InvalidArgument("density matrix of the vacuum is undefined".into()));
    }
    let mut rho = DMatrix::from_element(modes, modes, czero::<R>());
    let mut occ = vec![0u8; modes];
    for (s, amp) in state.amplitudes().iter().enumerate() {
        if *amp == czero() {
            continue;
        }
        occ.copy_from_slice(basis.occupation(s));
        for nu in 0..modes {
            let n_nu = occ[nu];
            if n_nu == 0 {
                continue;
            }
            occ[nu] -= 1;
            let f_nu = (n_nu as f64).sqrt();
            for mu in 0..modes {
                let f = f_nu * ((occ[mu] as f64) + 1.0).sqrt();
                occ[mu] += 1;
                let t = basis.rank(&occ);
                occ[mu] -= 1;
                rho[(mu, nu)] += state.amplitudes()[t].conj() * amp.scale(R::lit(f));
            }
            occ[nu] += 1;
        }
    }
    DensityMatrix::from_matrix(rho.scale(R::lit(1.0 / n as f64)))
}
