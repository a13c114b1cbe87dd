//! Dense order-`p` tensors over `C^N`, Gaussian ensembles and planted instances.
//!
//! Entries are stored row-major: the last index varies fastest, so the linear
//! position of `(mu_1, .., mu_p)` is `sum_a mu_a * N^(p-1-a)`. Real tensors keep
//! zero imaginary parts and carry [`Field::Real`].

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{check_dim, Error, Result};
use crate::rng::{self, substream};
use crate::scalar::{cabs, creal, czero, inner, norm, Real, C};

/// Largest tensor (in entries) the dense representation will allocate.
pub const MAX_TENSOR_ENTRIES: usize = 1 << 28;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Field {
    Real,
    Complex,
}

/// Noise ensemble: field of the entries and whether draws are symmetrized.
///
/// Complex draws have independent real and imaginary parts of variance 1/2, so
/// every ensemble has `E|G_mu|^2 = 1` per entry.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Ensemble {
    pub field: Field,
    pub symmetrized: bool,
}

impl Ensemble {
    pub const REAL: Ensemble = Ensemble { field: Field::Real, symmetrized: false };
    pub const COMPLEX: Ensemble = Ensemble { field: Field::Complex, symmetrized: false };

    pub fn symmetrized(self) -> Self {
        Ensemble { symmetrized: true, ..self }
    }

    pub fn is_complex(&self) -> bool {
        self.field == Field::Complex
    }
}

/// Checked `dim^order`.
pub fn tensor_len(order: usize, dim: usize) -> Result<usize> {
    let mut len: usize = 1;
    for _ in 0..order {
        len = len
            .checked_mul(dim)
            .ok_or_else(|| Error::Size(format!("{dim}^{order} overflows usize")))?;
    }
    if len > MAX_TENSOR_ENTRIES {
        return Err(Error::Size(format!(
            "{dim}^{order} = {len} entries exceeds the dense cap {MAX_TENSOR_ENTRIES}"
        )));
    }
    Ok(len)
}

#[derive(Clone, Debug, PartialEq)]
pub struct DenseTensor<R: Real> {
    order: usize,
    dim: usize,
    data: Vec<C<R>>,
    field: Field,
    symmetric: bool,
}

impl<R: Real> DenseTensor<R> {
    pub fn zeros(order: usize, dim: usize, field: Field) -> Result<Self> {
        if order == 0 || dim == 0 {
            return Err(Error::InvalidArgument("order and dimension must be positive".into()));
        }
        let len = tensor_len(order, dim)?;
        Ok(DenseTensor { order, dim, data: vec![czero(); len], field, symmetric: false })
    }

    /// Builds a tensor from row-major entries. The field is `Real` iff every
    /// imaginary part is exactly zero.
    pub fn from_data(order: usize, dim: usize, data: Vec<C<R>>) -> Result<Self> {
        let mut t = Self::zeros(order, dim, Field::Real)?;
        check_dim(t.data.len(), data.len())?;
        let field = if data.iter().all(|z| z.im == R::zero()) { Field::Real } else { Field::Complex };
        t.data = data;
        t.field = field;
        Ok(t)
    }

    pub fn from_real(order: usize, dim: usize, data: &[R]) -> Result<Self> {
        let mut t = Self::zeros(order, dim, Field::Real)?;
        check_dim(t.data.len(), data.len())?;
        t.data = data.iter().map(|&x| creal(x)).collect();
        Ok(t)
    }

    pub fn from_fn(
        order: usize,
        dim: usize,
        field: Field,
        mut f: impl FnMut(&[usize]) -> C<R>,
    ) -> Result<Self> {
        let mut t = Self::zeros(order, dim, field)?;
        let mut idx = vec![0; order];
        for lin in 0..t.data.len() {
            t.digits_into(lin, &mut idx);
            let z = f(&idx);
            t.data[lin] = if field == Field::Real { creal(z.re) } else { z };
        }
        Ok(t)
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn field(&self) -> Field {
        self.field
    }

    pub fn is_real(&self) -> bool {
        self.field == Field::Real
    }

    /// True when the tensor was produced by [`symmetrize`] (or a symmetrized draw).
    pub fn is_symmetric(&self) -> bool {
        self.symmetric
    }

    pub fn data(&self) -> &[C<R>] {
        &self.data
    }

    pub fn linear_index(&self, idx: &[usize]) -> usize {
        debug_assert_eq!(idx.len(), self.order);
        idx.iter().fold(0, |acc, &m| acc * self.dim + m)
    }

    pub fn digits_into(&self, mut lin: usize, out: &mut [usize]) {
        for slot in out.iter_mut().rev() {
            *slot = lin % self.dim;
            lin /= self.dim;
        }
    }

    pub fn multi_index(&self, lin: usize) -> Vec<usize> {
        let mut out = vec![0; self.order];
        self.digits_into(lin, &mut out);
        out
    }

    pub fn get(&self, idx: &[usize]) -> C<R> {
        self.data[self.linear_index(idx)]
    }

    pub fn frobenius_norm(&self) -> R {
        norm(&self.data)
    }

    /// `<self|other>`, conjugating `self`.
    pub fn inner(&self, other: &Self) -> Result<C<R>> {
        self.check_shape(other)?;
        Ok(inner(&self.data, &other.data))
    }

    pub fn scaled(&self, s: R) -> Self {
        let mut out = self.clone();
        for z in &mut out.data {
            *z = z.scale(s);
        }
        out
    }

    /// `self + s * other`.
    pub fn add_scaled(&self, s: R, other: &Self) -> Result<Self> {
        self.check_shape(other)?;
        let data = self.data.iter().zip(&other.data).map(|(a, b)| a + b.scale(s)).collect();
        let field = if self.is_real() && other.is_real() { Field::Real } else { Field::Complex };
        Ok(DenseTensor {
            order: self.order,
            dim: self.dim,
            data,
            field,
            symmetric: self.symmetric && other.symmetric,
        })
    }

    /// Entrywise complex conjugate.
    pub fn conj(&self) -> Self {
        let mut out = self.clone();
        for z in &mut out.data {
            *z = z.conj();
        }
        out
    }

    /// Largest `|T_mu - T_{pi(mu)}|` over all index permutations `pi`.
    pub fn symmetry_defect(&self) -> R {
        let perms = permutations(self.order);
        let mut idx = vec![0; self.order];
        let mut pidx = vec![0; self.order];
        let mut worst = R::zero();
        for lin in 0..self.data.len() {
            self.digits_into(lin, &mut idx);
            for perm in &perms {
                for (a, &pa) in perm.iter().enumerate() {
                    pidx[a] = idx[pa];
                }
                let d = cabs(self.data[lin] - self.get(&pidx));
                if d > worst {
                    worst = d;
                }
            }
        }
        worst
    }

    pub fn check_shape(&self, other: &Self) -> Result<()> {
        check_dim(self.order, other.order)?;
        check_dim(self.dim, other.dim)
    }

    pub(crate) fn raw_parts(order: usize, dim: usize, data: Vec<C<R>>, field: Field, symmetric: bool) -> Self {
        DenseTensor { order, dim, data, field, symmetric }
    }
}

/// All permutations of `0..p` in lexicographic order.
pub fn permutations(p: usize) -> Vec<Vec<usize>> {
    fn rec(prefix: &mut Vec<usize>, used: &mut [bool], out: &mut Vec<Vec<usize>>) {
        if prefix.len() == used.len() {
            out.push(prefix.clone());
            return;
        }
        for i in 0..used.len() {
            if !used[i] {
                used[i] = true;
                prefix.push(i);
                rec(prefix, used, out);
                prefix.pop();
                used[i] = false;
            }
        }
    }
    let mut out = Vec::new();
    rec(&mut Vec::with_capacity(p), &mut vec![false; p], &mut out);
    out
}

/// Average of `t` over all `p!` permutations of its legs.
pub fn symmetrize<R: Real>(t: &DenseTensor<R>) -> DenseTensor<R> {
    let perms = permutations(t.order);
    let inv = R::lit(1.0 / perms.len() as f64);
    let mut idx = vec![0; t.order];
    let mut data = vec![czero(); t.data.len()];
    for (lin, slot) in data.iter_mut().enumerate() {
        t.digits_into(lin, &mut idx);
        let mut acc = czero();
        for perm in &perms {
            let plin = perm.iter().fold(0, |a, &pa| a * t.dim + idx[pa]);
            acc += t.data[plin];
        }
        *slot = acc.scale(inv);
    }
    DenseTensor { order: t.order, dim: t.dim, data, field: t.field, symmetric: true }
}

/// Draws an i.i.d. Gaussian tensor from `ensemble` on the stream `seed`.
pub fn sample_gaussian_tensor<R: Real>(
    order: usize,
    dim: usize,
    ensemble: Ensemble,
    seed: u64,
) -> Result<DenseTensor<R>> {
    let mut t = DenseTensor::zeros(order, dim, ensemble.field)?;
    let mut g = rng::rng(seed);
    let half = std::f64::consts::FRAC_1_SQRT_2;
    for z in &mut t.data {
        *z = match ensemble.field {
            Field::Real => creal(R::lit(rng::normal(&mut g))),
            Field::Complex => {
                let re = rng::normal(&mut g) * half;
                let im = rng::normal(&mut g) * half;
                C::new(R::lit(re), R::lit(im))
            }
        };
    }
    Ok(if ensemble.symmetrized { symmetrize(&t) } else { t })
}

/// Real signal direction with `|v| = sqrt(N)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SignalVector<R: Real> {
    values: Vec<R>,
}

impl<R: Real> SignalVector<R> {
    /// Uniform on the sphere of radius `sqrt(N)`.
    pub fn sample(dim: usize, seed: u64) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidArgument("signal dimension must be positive".into()));
        }
        let mut g = rng::rng(seed);
        let raw: Vec<R> = (0..dim).map(|_| R::lit(rng::normal(&mut g))).collect();
        Self::from_values(raw)
    }

    /// Rescales `values` onto the sphere of radius `sqrt(N)`.
    pub fn from_values(values: Vec<R>) -> Result<Self> {
        let n2 = values.iter().fold(R::zero(), |a, &x| a + x * x);
        if values.is_empty() || n2 == R::zero() {
            return Err(Error::InvalidArgument("signal vector must be nonzero".into()));
        }
        let s = (R::lit(values.len() as f64) / n2).sqrt();
        Ok(SignalVector { values: values.into_iter().map(|x| x * s).collect() })
    }

    /// `(sqrt(N), 0, ..., 0)`.
    pub fn basis_aligned(dim: usize) -> Result<Self> {
        let mut v = vec![R::zero(); dim];
        if dim == 0 {
            return Err(Error::InvalidArgument("signal dimension must be positive".into()));
        }
        v[0] = R::one();
        Self::from_values(v)
    }

    pub fn dim(&self) -> usize {
        self.values.len()
    }

    pub fn values(&self) -> &[R] {
        &self.values
    }

    pub fn to_complex(&self) -> Vec<C<R>> {
        self.values.iter().map(|&x| creal(x)).collect()
    }
}

/// `v^{(x) p}`.
pub fn outer_power<R: Real>(v: &[R], order: usize) -> Result<DenseTensor<R>> {
    DenseTensor::from_fn(order, v.len(), Field::Real, |idx| {
        creal(idx.iter().fold(R::one(), |acc, &m| acc * v[m]))
    })
    .map(|mut t| {
        t.symmetric = true;
        t
    })
}

/// `T0 = lambda v^{(x) p} + G` together with its ingredients.
#[derive(Clone, Debug)]
pub struct SpikedInstance<R: Real> {
    pub lambda: R,
    pub signal: SignalVector<R>,
    pub noise: DenseTensor<R>,
    pub t0: DenseTensor<R>,
    pub ensemble: Ensemble,
    pub seed: Option<u64>,
}

pub fn make_spiked<R: Real>(
    lambda: R,
    signal: &SignalVector<R>,
    noise: &DenseTensor<R>,
) -> Result<SpikedInstance<R>> {
    check_dim(noise.dim(), signal.dim())?;
    let spike = outer_power(signal.values(), noise.order())?;
    let t0 = noise.add_scaled(lambda, &spike)?;
    Ok(SpikedInstance {
        lambda,
        signal: signal.clone(),
        noise: noise.clone(),
        t0,
        ensemble: Ensemble { field: noise.field(), symmetrized: noise.is_symmetric() },
        seed: None,
    })
}

impl<R: Real> SpikedInstance<R> {
    /// Signal from substream 0 and noise from substream 1 of `seed`.
    pub fn sample(order: usize, dim: usize, lambda: R, ensemble: Ensemble, seed: u64) -> Result<Self> {
        let signal = SignalVector::sample(dim, substream(seed, 0))?;
        let noise = sample_gaussian_tensor(order, dim, ensemble, substream(seed, 1))?;
        let mut inst = make_spiked(lambda, &signal, &noise)?;
        inst.ensemble = ensemble;
        inst.seed = Some(seed);
        Ok(inst)
    }

    pub fn order(&self) -> usize {
        self.t0.order()
    }

    pub fn dim(&self) -> usize {
        self.t0.dim()
    }
}

/// `|<x|y>| / (|x| |y|)`.
pub fn correlation<R: Real>(x: &[C<R>], y: &[C<R>]) -> Result<R> {
    check_dim(x.len(), y.len())?;
    let d = norm(x) * norm(y);
    if d == R::zero() {
        return Err(Error::InvalidArgument("correlation of a zero vector".into()));
    }
    Ok(cabs(inner(x, y)) / d)
}

pub fn correlation_real<R: Real>(x: &[R], y: &[R]) -> Result<R> {
    correlation(&crate::scalar::to_complex(x), &crate::scalar::to_complex(y))
}

/// One tensor power step with the first leg free:
/// `x_mu = sum T0[mu, nu_2, .., nu_p] u_{nu_2} .. u_{nu_p}`.
/// Complex tensors contribute their real part.
pub fn tensor_power_step<R: Real>(t0: &DenseTensor<R>, u: &[R]) -> Result<Vec<R>> {
    check_dim(t0.dim(), u.len())?;
    let un = u.iter().fold(R::zero(), |a, &x| a + x * x).sqrt();
    if (un - R::one()).abs() > R::lit(1e-6).max(R::contract_tol()) {
        return Err(Error::InvalidArgument(format!("power step needs a unit vector, |u| = {un}")));
    }
    let n = t0.dim();
    let tail = t0.len() / n;
    // weights of the trailing p-1 legs, built once
    let mut w = vec![R::one()];
    for _ in 1..t0.order() {
        let mut next = Vec::with_capacity(w.len() * n);
        for &a in &w {
            for &b in u {
                next.push(a * b);
            }
        }
        w = next;
    }
    debug_assert_eq!(w.len(), tail);
    Ok((0..n)
        .map(|mu| {
            let row = &t0.data()[mu * tail..(mu + 1) * tail];
            row.iter().zip(&w).fold(R::zero(), |acc, (z, &wi)| acc + z.re * wi)
        })
        .collect())
}

/// Matricization with the first `k` legs as rows: shape `N^k x N^(p-k)`.
pub fn unfold_to_matrix<R: Real>(t: &DenseTensor<R>, k: usize) -> Result<DMatrix<C<R>>> {
    if k == 0 || k >= t.order() {
        return Err(Error::InvalidArgument(format!("cannot unfold {k} legs of an order-{} tensor", t.order())));
    }
    let rows = tensor_len(k, t.dim())?;
    let cols = t.len() / rows;
    Ok(DMatrix::from_row_slice(rows, cols, t.data()))
}
