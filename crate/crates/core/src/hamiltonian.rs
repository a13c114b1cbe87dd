//! Bosonic Hamiltonians built from tensors.
//!
//! For an order-`q` tensor `T` with `q = 2k` the operator is
//!
//! ```text
//! H(T) = 1/2 ( sum_{mu,nu} T[mu_1..mu_k, nu_1..nu_k] a+_{mu_1}..a+_{mu_k} a_{nu_1}..a_{nu_k} + h.c. )
//! ```
//!
//! restricted to `n_bos` bosons. Odd-order tensors are first squared into the
//! order-`2(p-1)` tensor of [`interleaved_square`] and then treated as above.
//!
//! Internally the sum over ordered index tuples is folded into a Hermitian
//! kernel indexed by multisets of `k` modes (the `k`-boson occupation basis),
//! and the action on the `n`-boson space goes through the `(n-k)`-boson space:
//! `H = sum_{a,b} K[a,b] A+_a A_b` with `A_b |s> = f |s - b>`.

use std::sync::{Arc, OnceLock};

use nalgebra::DMatrix;

use crate::error::{check_dim, Error, Result};
use crate::fock::{enumerate_basis, FockVector, OccupationBasis};
use crate::scalar::{cabs, czero, inner, Real, C};
use crate::tensor::{tensor_len, DenseTensor, Field};

/// Default cap on the basis size for dense materialization.
pub const DEFAULT_DENSE_CAP: usize = 5000;

/// The squared tensor of an odd-order input is materialized only below this
/// many entries; larger inputs contract the shared leg on the fly.
pub const INTERLEAVED_DENSE_CAP: usize = 1 << 22;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Parity {
    Even,
    Odd,
}

/// Matrix-free Hermitian operator on `C^dim`.
pub trait HermitianOperator<R: Real>: Sync {
    fn dim(&self) -> usize;

    /// `y = H x`.
    fn apply_into(&self, x: &[C<R>], y: &mut [C<R>]);

    /// Upper bound on the spectral radius.
    fn spectral_radius_bound(&self) -> R;

    fn to_dense(&self) -> DMatrix<C<R>> {
        let d = self.dim();
        let mut m = DMatrix::from_element(d, d, czero());
        let mut e = vec![czero(); d];
        let mut col = vec![czero(); d];
        for j in 0..d {
            e[j] = C::new(R::one(), R::zero());
            self.apply_into(&e, &mut col);
            e[j] = czero();
            for i in 0..d {
                m[(i, j)] = col[i];
            }
        }
        m
    }
}

/// A Hermitian matrix held densely.
#[derive(Clone, Debug)]
pub struct DenseHermitian<R: Real> {
    matrix: DMatrix<C<R>>,
    bound: R,
}

impl<R: Real> DenseHermitian<R> {
    pub fn new(matrix: DMatrix<C<R>>) -> Result<Self> {
        if !matrix.is_square() {
            return Err(Error::InvalidArgument("operator matrix must be square".into()));
        }
        let scale = matrix.iter().fold(R::zero(), |m, z| m.max(cabs(*z)));
        let defect = (&matrix - matrix.adjoint()).iter().fold(R::zero(), |m, z| m.max(cabs(*z)));
        if defect > R::contract_tol() * (R::one() + scale) {
            return Err(Error::ContractViolation(format!("matrix is not Hermitian (defect {defect})")));
        }
        let bound = (0..matrix.nrows())
            .map(|i| matrix.row(i).iter().fold(R::zero(), |a, z| a + cabs(*z)))
            .fold(R::zero(), |m, x| m.max(x));
        Ok(DenseHermitian { matrix, bound })
    }

    pub fn matrix(&self) -> &DMatrix<C<R>> {
        &self.matrix
    }
}

impl<R: Real> HermitianOperator<R> for DenseHermitian<R> {
    fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    fn apply_into(&self, x: &[C<R>], y: &mut [C<R>]) {
        for (i, yi) in y.iter_mut().enumerate() {
            *yi = self.matrix.row(i).iter().zip(x).fold(czero(), |a, (m, v)| a + m * v);
        }
    }

    fn spectral_radius_bound(&self) -> R {
        self.bound
    }

    fn to_dense(&self) -> DMatrix<C<R>> {
        self.matrix.clone()
    }
}

/// `A_b |s> = factor |r>` with `r = s - b`; equivalently `A+_b |r> = factor |s>`.
#[derive(Clone, Copy, Debug)]
struct Link {
    b: u32,
    r: u32,
    factor: f64,
}

#[derive(Debug)]
pub struct HamiltonianOperator<R: Real> {
    source: DenseTensor<R>,
    parity: Parity,
    legs: usize,
    basis: Arc<OccupationBasis>,
    leg_basis: OccupationBasis,
    rest_basis: OccupationBasis,
    kernel: DMatrix<C<R>>,
    // CSR over source states
    link_start: Vec<usize>,
    links: Vec<Link>,
    // the same links grouped by r, as (s, b, factor)
    by_rest_start: Vec<usize>,
    by_rest: Vec<(u32, u32, f64)>,
    coarse_bound: R,
    row_bound: OnceLock<R>,
}

/// Index-interleaved square of an odd-order tensor:
/// `T~[mu_1..mu_h, nu_1..nu_h, mu_{h+1}..mu_{p-1}, nu_{h+1}..nu_{p-1}] = sum_s T[mu.., s] T[nu.., s]`
/// with `h = (p-1)/2`. No conjugation is applied.
pub fn interleaved_square<R: Real>(t: &DenseTensor<R>) -> Result<DenseTensor<R>> {
    let p = t.order();
    if p % 2 == 0 {
        return Err(Error::InvalidArgument("interleaved square needs an odd-order tensor".into()));
    }
    let n = t.dim();
    let q = 2 * (p - 1);
    tensor_len(q, n)?;
    let h = (p - 1) / 2;
    let field = t.field();
    let mut mu = vec![0usize; p - 1];
    let mut nu = vec![0usize; p - 1];
    DenseTensor::from_fn(q, n, field, |idx| {
        mu[..h].copy_from_slice(&idx[..h]);
        nu[..h].copy_from_slice(&idx[h..2 * h]);
        mu[h..].copy_from_slice(&idx[2 * h..3 * h]);
        nu[h..].copy_from_slice(&idx[3 * h..]);
        let a = mu.iter().fold(0, |acc, &m| acc * n + m) * n;
        let b = nu.iter().fold(0, |acc, &m| acc * n + m) * n;
        let d = t.data();
        (0..n).fold(czero(), |acc, s| acc + d[a + s] * d[b + s])
    })
}

fn occupation_of(idx: &[usize], occ: &mut [u8]) {
    occ.iter_mut().for_each(|o| *o = 0);
    for &m in idx {
        occ[m] += 1;
    }
}

/// Sum of `E(mu, nu)` over ordered tuples grouped by (creation multiset,
/// annihilation multiset), for an even tensor whose first `k` legs create.
fn reduce_even<R: Real>(t: &DenseTensor<R>, leg_basis: &OccupationBasis) -> DMatrix<C<R>> {
    let k = t.order() / 2;
    let n = t.dim();
    let dk = leg_basis.dim();
    let mut red = DMatrix::from_element(dk, dk, czero());
    let side = t.len() / tensor_len(k, n).expect("side fits");
    let mut idx = vec![0usize; k];
    let mut occ = vec![0u8; n];
    let row_rank: Vec<usize> = (0..side)
        .map(|lin| {
            let mut rest = lin;
            for slot in idx.iter_mut().rev() {
                *slot = rest % n;
                rest /= n;
            }
            occupation_of(&idx, &mut occ);
            leg_basis.rank(&occ)
        })
        .collect();
    for (lin, z) in t.data().iter().enumerate() {
        red[(row_rank[lin / side], row_rank[lin % side])] += *z;
    }
    red
}

/// Same reduction for the interleaved square of an odd tensor, contracting the
/// shared leg on the fly instead of materializing the squared tensor.
fn reduce_odd_streaming<R: Real>(t: &DenseTensor<R>, leg_basis: &OccupationBasis) -> DMatrix<C<R>> {
    let p = t.order();
    let h = (p - 1) / 2;
    let n = t.dim();
    let rows = t.len() / n;
    let dk = leg_basis.dim();
    let mut red = DMatrix::from_element(dk, dk, czero());
    let digits = |lin: usize| {
        let mut v = vec![0usize; p - 1];
        let mut rest = lin;
        for slot in v.iter_mut().rev() {
            *slot = rest % n;
            rest /= n;
        }
        v
    };
    let all: Vec<Vec<usize>> = (0..rows).map(digits).collect();
    let mut occ = vec![0u8; n];
    let mut cre = vec![0usize; p - 1];
    let mut ann = vec![0usize; p - 1];
    let d = t.data();
    for (a, mu) in all.iter().enumerate() {
        for (b, nu) in all.iter().enumerate() {
            let val = (0..n).fold(czero(), |acc, s| acc + d[a * n + s] * d[b * n + s]);
            cre[..h].copy_from_slice(&mu[..h]);
            cre[h..].copy_from_slice(&nu[..h]);
            ann[..h].copy_from_slice(&mu[h..]);
            ann[h..].copy_from_slice(&nu[h..]);
            occupation_of(&cre, &mut occ);
            let i = leg_basis.rank(&occ);
            occupation_of(&ann, &mut occ);
            let j = leg_basis.rank(&occ);
            red[(i, j)] += val;
        }
    }
    red
}

fn ln_fact_ratio(s: &[u8], r: &[u8]) -> f64 {
    s.iter()
        .zip(r)
        .map(|(&a, &b)| ((b as usize + 1)..=(a as usize)).map(|x| (x as f64).ln()).sum::<f64>())
        .sum()
}

/// Enumerates `b <= s` with `|b| = k`, calling `f(b)`.
fn sub_multisets(s: &[u8], k: usize, b: &mut [u8], mode: usize, f: &mut impl FnMut(&[u8])) {
    if mode == s.len() {
        if k == 0 {
            f(b);
        }
        return;
    }
    let remaining_capacity: usize = s[mode..].iter().map(|&x| x as usize).sum();
    if remaining_capacity < k {
        return;
    }
    let top = (s[mode] as usize).min(k);
    for take in (0..=top).rev() {
        b[mode] = take as u8;
        sub_multisets(s, k - take, b, mode + 1, f);
    }
    b[mode] = 0;
}

/// Builds `H(T)` on the `n_bos`-boson space.
pub fn build_hamiltonian<R: Real>(t: &DenseTensor<R>, n_bos: usize) -> Result<HamiltonianOperator<R>> {
    let basis = Arc::new(enumerate_basis(t.dim(), n_bos)?);
    build_hamiltonian_on(t, basis)
}

/// As [`build_hamiltonian`], reusing an existing basis.
pub fn build_hamiltonian_on<R: Real>(
    t: &DenseTensor<R>,
    basis: Arc<OccupationBasis>,
) -> Result<HamiltonianOperator<R>> {
    let p = t.order();
    check_dim(t.dim(), basis.modes())?;
    let n_bos = basis.n_bos();
    let (parity, legs) = if p % 2 == 0 { (Parity::Even, p / 2) } else { (Parity::Odd, p - 1) };
    if n_bos < legs {
        return Err(Error::DegenerateOperator(format!(
            "an order-{p} Hamiltonian vanishes on fewer than {legs} bosons, got {n_bos}"
        )));
    }
    let n = t.dim();
    let leg_basis = enumerate_basis(n, legs)?;
    let rest_basis = enumerate_basis(n, n_bos - legs)?;
    let reduced = match parity {
        Parity::Even => reduce_even(t, &leg_basis),
        Parity::Odd => {
            let q = 2 * (p - 1);
            let len = tensor_len(q, n)?;
            if len <= INTERLEAVED_DENSE_CAP {
                reduce_even(&interleaved_square(t)?, &leg_basis)
            } else {
                reduce_odd_streaming(t, &leg_basis)
            }
        }
    };
    let kernel = (&reduced + reduced.adjoint()).scale(R::lit(0.5));

    let mut link_start = Vec::with_capacity(basis.dim() + 1);
    let mut links = Vec::new();
    let mut b = vec![0u8; n];
    let mut r = vec![0u8; n];
    for s in basis.iter() {
        link_start.push(links.len());
        sub_multisets(s, legs, &mut b, 0, &mut |bb: &[u8]| {
            for i in 0..n {
                r[i] = s[i] - bb[i];
            }
            links.push(Link {
                b: leg_basis.rank(bb) as u32,
                r: rest_basis.rank(&r) as u32,
                factor: (0.5 * ln_fact_ratio(s, &r)).exp(),
            });
        });
    }
    link_start.push(links.len());

    let mut counts = vec![0usize; rest_basis.dim() + 1];
    for l in &links {
        counts[l.r as usize + 1] += 1;
    }
    for i in 0..rest_basis.dim() {
        counts[i + 1] += counts[i];
    }
    let by_rest_start = counts.clone();
    let mut fill = counts;
    let mut by_rest = vec![(0u32, 0u32, 0.0f64); links.len()];
    for s in 0..basis.dim() {
        for l in &links[link_start[s]..link_start[s + 1]] {
            let slot = &mut fill[l.r as usize];
            by_rest[*slot] = (s as u32, l.b, l.factor);
            *slot += 1;
        }
    }

    let falling: f64 = (0..legs).map(|i| (n_bos - i) as f64).product();
    let kernel_l1 = kernel.iter().fold(R::zero(), |a, z| a + cabs(*z));
    let coarse_bound = kernel_l1 * R::lit(falling);

    Ok(HamiltonianOperator {
        source: t.clone(),
        parity,
        legs,
        basis,
        leg_basis,
        rest_basis,
        kernel,
        link_start,
        links,
        by_rest_start,
        by_rest,
        coarse_bound,
        row_bound: OnceLock::new(),
    })
}

impl<R: Real> HamiltonianOperator<R> {
    pub fn source(&self) -> &DenseTensor<R> {
        &self.source
    }

    pub fn order(&self) -> usize {
        self.source.order()
    }

    pub fn parity(&self) -> Parity {
        self.parity
    }

    /// Creation (and annihilation) operators per term.
    pub fn legs(&self) -> usize {
        self.legs
    }

    pub fn basis(&self) -> &Arc<OccupationBasis> {
        &self.basis
    }

    pub fn n_bos(&self) -> usize {
        self.basis.n_bos()
    }

    pub fn modes(&self) -> usize {
        self.basis.modes()
    }

    /// Hermitian kernel over pairs of `k`-mode multisets.
    pub fn kernel(&self) -> &DMatrix<C<R>> {
        &self.kernel
    }

    pub fn leg_basis(&self) -> &OccupationBasis {
        &self.leg_basis
    }

    pub fn is_real(&self) -> bool {
        self.source.field() == Field::Real
    }

    /// `(n!/(n-k)!) * sum |K|`, a cheap bound on `||H||`.
    pub fn coarse_norm_bound(&self) -> R {
        self.coarse_bound
    }

    /// Largest absolute row sum (computed once, then cached).
    pub fn row_sum_bound(&self) -> R {
        *self.row_bound.get_or_init(|| {
            let d = self.basis.dim();
            let mut row = vec![czero::<R>(); d];
            let mut touched = Vec::new();
            let mut best = R::zero();
            for s in 0..d {
                for l in &self.links[self.link_start[s]..self.link_start[s + 1]] {
                    let r = l.r as usize;
                    for &(t, b, f) in &self.by_rest[self.by_rest_start[r]..self.by_rest_start[r + 1]] {
                        let t = t as usize;
                        if row[t] == czero() {
                            touched.push(t);
                        }
                        row[t] += self.kernel[(l.b as usize, b as usize)].scale(R::lit(f * l.factor));
                    }
                }
                let sum = touched.iter().fold(R::zero(), |a, &t| a + cabs(row[t]));
                best = best.max(sum);
                for &t in &touched {
                    row[t] = czero();
                }
                touched.clear();
            }
            best
        })
    }

    /// `<y|H|x>` for basis indices, from the kernel without forming `H`.
    pub fn matrix_element(&self, y: usize, x: usize) -> C<R> {
        let mut acc = czero();
        let ys = &self.links[self.link_start[y]..self.link_start[y + 1]];
        for lx in &self.links[self.link_start[x]..self.link_start[x + 1]] {
            for ly in ys {
                if ly.r == lx.r {
                    acc += self.kernel[(ly.b as usize, lx.b as usize)].scale(R::lit(lx.factor * ly.factor));
                }
            }
        }
        acc
    }

    /// `y = H x` on raw amplitude slices.
    pub fn apply_slice(&self, x: &[C<R>], y: &mut [C<R>]) {
        let dr = self.rest_basis.dim();
        let dk = self.leg_basis.dim();
        let mut phi = DMatrix::from_element(dr, dk, czero::<R>());
        for (s, xs) in x.iter().enumerate() {
            if *xs == czero() {
                continue;
            }
            for l in &self.links[self.link_start[s]..self.link_start[s + 1]] {
                phi[(l.r as usize, l.b as usize)] += xs.scale(R::lit(l.factor));
            }
        }
        // psi[r, a] = sum_b K[a, b] phi[r, b]
        let psi = phi * self.kernel.transpose();
        for (s, ys) in y.iter_mut().enumerate() {
            let mut acc = czero();
            for l in &self.links[self.link_start[s]..self.link_start[s + 1]] {
                acc += psi[(l.r as usize, l.b as usize)].scale(R::lit(l.factor));
            }
            *ys = acc;
        }
    }

    pub fn apply(&self, psi: &FockVector<R>) -> Result<FockVector<R>> {
        if psi.basis().modes() != self.modes() || psi.basis().n_bos() != self.n_bos() {
            return Err(Error::InvalidArgument("state and operator live on different bases".into()));
        }
        let mut out = vec![czero(); self.basis.dim()];
        self.apply_slice(psi.amplitudes(), &mut out);
        FockVector::from_amplitudes(self.basis.clone(), out)
    }

    /// Dense `D x D` matrix; refuses when `D > cap`.
    pub fn materialize_dense(&self, cap: usize) -> Result<DMatrix<C<R>>> {
        let d = self.basis.dim();
        if d > cap {
            return Err(Error::Size(format!("dense Hamiltonian of dimension {d} exceeds the cap {cap}")));
        }
        let mut m = DMatrix::from_element(d, d, czero());
        for r in 0..self.rest_basis.dim() {
            let group = &self.by_rest[self.by_rest_start[r]..self.by_rest_start[r + 1]];
            for &(s, a, fa) in group {
                for &(t, b, fb) in group {
                    m[(s as usize, t as usize)] += self.kernel[(a as usize, b as usize)].scale(R::lit(fa * fb));
                }
            }
        }
        Ok(m)
    }

    /// `<psi|H|psi>` for a normalized state.
    pub fn expectation(&self, psi: &FockVector<R>) -> Result<R> {
        psi.require_normalized("an energy expectation")?;
        let h = self.apply(psi)?;
        Ok(inner(psi.amplitudes(), h.amplitudes()).re)
    }
}

impl<R: Real> HermitianOperator<R> for HamiltonianOperator<R> {
    fn dim(&self) -> usize {
        self.basis.dim()
    }

    fn apply_into(&self, x: &[C<R>], y: &mut [C<R>]) {
        self.apply_slice(x, y)
    }

    fn spectral_radius_bound(&self) -> R {
        self.coarse_bound.min(self.row_sum_bound())
    }

    fn to_dense(&self) -> DMatrix<C<R>> {
        self.materialize_dense(usize::MAX).expect("uncapped")
    }
}

pub fn apply<R: Real>(h: &HamiltonianOperator<R>, psi: &FockVector<R>) -> Result<FockVector<R>> {
    h.apply(psi)
}

pub fn materialize_dense<R: Real>(h: &HamiltonianOperator<R>, cap: usize) -> Result<DMatrix<C<R>>> {
    h.materialize_dense(cap)
}

pub fn quantum_expectation<R: Real>(h: &HamiltonianOperator<R>, psi: &FockVector<R>) -> Result<R> {
    h.expectation(psi)
}
