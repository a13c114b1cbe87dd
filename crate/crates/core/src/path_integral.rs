//! Amplitudes `<y|g_d ... g_1|x>` of gate products as sums over paths of
//! basis states, in space polynomial in the circuit depth and `log D`.
//!
//! Gate matrix elements are computed on demand: Hamiltonian gates read the
//! multiset kernel built from the source tensor, hopping gates are evaluated
//! from occupation numbers. Nothing of size `D x D` is ever formed.

use std::sync::Arc;

use crate::error::{check_dim, Error, Result};
use crate::fock::{apply_monomial, FockVector, Ladder, OccupationBasis};
use crate::hamiltonian::{build_hamiltonian_on, HamiltonianOperator, HermitianOperator};
use crate::rng::substream;
use crate::scalar::{cabs, creal, czero, Real, C};
use crate::spectral::Thresholds;
use crate::tensor::{sample_gaussian_tensor, Ensemble};

#[derive(Clone, Debug)]
pub enum Gate<R: Real> {
    Identity,
    Hamiltonian(Arc<HamiltonianOperator<R>>),
    /// `a+_create a_annihilate`.
    Hopping { create: usize, annihilate: usize },
}

/// Gate product; `gates[0]` acts first.
#[derive(Clone, Debug)]
pub struct GeneratorCircuit<R: Real> {
    basis: Arc<OccupationBasis>,
    gates: Vec<Gate<R>>,
}

impl<R: Real> GeneratorCircuit<R> {
    pub fn new(basis: Arc<OccupationBasis>) -> Self {
        GeneratorCircuit { basis, gates: Vec::new() }
    }

    pub fn push(&mut self, gate: Gate<R>) -> Result<()> {
        match &gate {
            Gate::Identity => {}
            Gate::Hamiltonian(h) => {
                check_dim(self.basis.modes(), h.modes())?;
                check_dim(self.basis.n_bos(), h.n_bos())?;
            }
            Gate::Hopping { create, annihilate } => {
                let n = self.basis.modes();
                if *create >= n || *annihilate >= n {
                    return Err(Error::InvalidArgument(format!("hopping mode out of range for {n} modes")));
                }
            }
        }
        self.gates.push(gate);
        Ok(())
    }

    pub fn with(mut self, gate: Gate<R>) -> Result<Self> {
        self.push(gate)?;
        Ok(self)
    }

    pub fn basis(&self) -> &Arc<OccupationBasis> {
        &self.basis
    }

    pub fn gates(&self) -> &[Gate<R>] {
        &self.gates
    }

    pub fn depth(&self) -> usize {
        self.gates.len()
    }

    /// Circuit of `depth` gates mixing random Hamiltonians of order `order`
    /// (drawn from `ensemble`) with random hoppings.
    pub fn random(basis: Arc<OccupationBasis>, depth: usize, order: usize, ensemble: Ensemble, seed: u64) -> Result<Self> {
        use rand::Rng;
        let mut g = crate::rng::rng(substream(seed, 0));
        let mut c = GeneratorCircuit::new(basis.clone());
        let n = basis.modes();
        for i in 0..depth {
            if g.gen_bool(0.5) {
                let t = sample_gaussian_tensor(order, n, ensemble, substream(seed, 1 + i as u64))?;
                c.push(Gate::Hamiltonian(Arc::new(build_hamiltonian_on(&t, basis.clone())?)))?;
            } else {
                let create = g.gen_range(0..n);
                let annihilate = g.gen_range(0..n);
                c.push(Gate::Hopping { create, annihilate })?;
            }
        }
        Ok(c)
    }

    /// `g |psi>` applied gate by gate, as a reference.
    pub fn apply(&self, psi: &FockVector<R>) -> Result<FockVector<R>> {
        let mut v = psi.clone();
        for gate in &self.gates {
            v = match gate {
                Gate::Identity => v,
                Gate::Hamiltonian(h) => h.apply(&v)?,
                Gate::Hopping { create, annihilate } => {
                    apply_monomial(&[Ladder::Create(*create), Ladder::Annihilate(*annihilate)], &v)?
                }
            };
        }
        Ok(v)
    }
}

fn gate_element<R: Real>(basis: &OccupationBasis, gate: &Gate<R>, y: usize, x: usize) -> C<R> {
    match gate {
        Gate::Identity => {
            if x == y {
                creal(R::one())
            } else {
                czero()
            }
        }
        Gate::Hamiltonian(h) => h.matrix_element(y, x),
        Gate::Hopping { create, annihilate } => {
            let ox = basis.occupation(x);
            let oy = basis.occupation(y);
            let (c, a) = (*create, *annihilate);
            if ox[a] == 0 {
                return czero();
            }
            let matches = (0..ox.len()).all(|m| {
                let mut v = ox[m] as i32;
                if m == a {
                    v -= 1;
                }
                if m == c {
                    v += 1;
                }
                v == oy[m] as i32
            });
            if !matches {
                return czero();
            }
            let after = oy[c] as f64;
            creal(R::lit((ox[a] as f64).sqrt() * after.sqrt()))
        }
    }
}

/// Neumaier-compensated complex accumulator.
#[derive(Clone, Copy, Debug)]
pub struct CompensatedSum<R: Real> {
    sum: C<R>,
    comp: C<R>,
}

impl<R: Real> Default for CompensatedSum<R> {
    fn default() -> Self {
        CompensatedSum { sum: czero(), comp: czero() }
    }
}

fn two_sum<R: Real>(s: R, c: R, x: R) -> (R, R) {
    let t = s + x;
    let c = if s.abs() >= x.abs() { c + ((s - t) + x) } else { c + ((x - t) + s) };
    (t, c)
}

impl<R: Real> CompensatedSum<R> {
    pub fn add(&mut self, x: C<R>) {
        let (re, cre) = two_sum(self.sum.re, self.comp.re, x.re);
        let (im, cim) = two_sum(self.sum.im, self.comp.im, x.im);
        self.sum = C::new(re, im);
        self.comp = C::new(cre, cim);
    }

    pub fn value(&self) -> C<R> {
        self.sum + self.comp
    }
}

/// Work counters of one amplitude evaluation.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct PathStats {
    /// Recursive calls (recursive method) or complete paths visited (naive).
    pub calls: u64,
    /// Largest number of simultaneously live recursion frames.
    pub max_live_frames: usize,
    live: usize,
}

impl PathStats {
    fn enter(&mut self) {
        self.calls += 1;
        self.live += 1;
        self.max_live_frames = self.max_live_frames.max(self.live);
    }

    fn leave(&mut self) {
        self.live -= 1;
    }
}

/// `2 (2D)^ceil(log2 d)`: bound on recursive calls for depth `d`.
pub fn recursive_call_bound(dim: usize, depth: usize) -> f64 {
    let levels = ceil_log2(depth);
    2.0 * (2.0 * dim as f64).powi(levels as i32)
}

pub fn ceil_log2(d: usize) -> u32 {
    if d <= 1 {
        0
    } else {
        usize::BITS - (d - 1).leading_zeros()
    }
}

fn check_endpoints<R: Real>(c: &GeneratorCircuit<R>, x: usize, y: usize) -> Result<()> {
    let d = c.basis.dim();
    if x >= d || y >= d {
        return Err(Error::InvalidArgument(format!("basis index out of range for dimension {d}")));
    }
    if c.gates.is_empty() {
        return Err(Error::InvalidArgument("empty circuit".into()));
    }
    Ok(())
}

/// Direct sum over all intermediate basis states (depth-first, zero branches pruned).
pub fn amplitude_naive<R: Real>(c: &GeneratorCircuit<R>, x: usize, y: usize) -> Result<(C<R>, PathStats)> {
    check_endpoints(c, x, y)?;
    let mut acc = CompensatedSum::default();
    let mut stats = PathStats::default();
    let dim = c.basis.dim();
    let depth = c.gates.len();
    #[allow(clippy::too_many_arguments)]
    fn walk<R: Real>(
        c: &GeneratorCircuit<R>,
        layer: usize,
        from: usize,
        weight: C<R>,
        y: usize,
        dim: usize,
        depth: usize,
        acc: &mut CompensatedSum<R>,
        stats: &mut PathStats,
    ) {
        if layer + 1 == depth {
            let e = gate_element(&c.basis, &c.gates[layer], y, from);
            stats.calls += 1;
            acc.add(weight * e);
            return;
        }
        for z in 0..dim {
            let e = gate_element(&c.basis, &c.gates[layer], z, from);
            if e == czero() {
                continue;
            }
            walk(c, layer + 1, z, weight * e, y, dim, depth, acc, stats);
        }
    }
    walk(c, 0, x, creal(R::one()), y, dim, depth, &mut acc, &mut stats);
    stats.max_live_frames = depth;
    Ok((acc.value(), stats))
}

/// Divide and conquer over the depth: `<y|C|x> = sum_z <y|C_top|z><z|C_bottom|x>`.
pub fn amplitude_recursive<R: Real>(c: &GeneratorCircuit<R>, x: usize, y: usize) -> Result<(C<R>, PathStats)> {
    check_endpoints(c, x, y)?;
    let mut stats = PathStats::default();
    let v = recurse(&c.basis, &c.gates, x, y, &mut stats);
    Ok((v, stats))
}

fn recurse<R: Real>(basis: &OccupationBasis, gates: &[Gate<R>], x: usize, y: usize, stats: &mut PathStats) -> C<R> {
    stats.enter();
    let out = if gates.len() == 1 {
        gate_element(basis, &gates[0], y, x)
    } else {
        let mid = gates.len().div_ceil(2);
        let (bottom, top) = gates.split_at(mid);
        let mut acc = CompensatedSum::default();
        for z in 0..basis.dim() {
            let b = recurse(basis, bottom, x, z, stats);
            if b == czero() {
                continue;
            }
            let t = recurse(basis, top, z, y, stats);
            acc.add(t * b);
        }
        acc.value()
    };
    stats.leave();
    out
}

/// `<x| H^m a+_mu a_nu H^m |x> / <x| H^{2m} |x>` evaluated by path sums.
#[derive(Clone, Copy, Debug)]
pub struct PoweredEntry<R: Real> {
    pub value: C<R>,
    pub numerator: C<R>,
    pub denominator: C<R>,
    pub stats: PathStats,
}

pub fn powered_density_entry<R: Real>(
    h: &Arc<HamiltonianOperator<R>>,
    m: usize,
    mu: usize,
    nu: usize,
    x: usize,
) -> Result<PoweredEntry<R>> {
    let basis = h.basis().clone();
    let mut num = GeneratorCircuit::new(basis.clone());
    let mut den = GeneratorCircuit::new(basis);
    for _ in 0..m {
        num.push(Gate::Hamiltonian(h.clone()))?;
    }
    num.push(Gate::Hopping { create: mu, annihilate: nu })?;
    for _ in 0..m {
        num.push(Gate::Hamiltonian(h.clone()))?;
    }
    for _ in 0..2 * m {
        den.push(Gate::Hamiltonian(h.clone()))?;
    }
    let (numerator, s1) = amplitude_recursive(&num, x, x)?;
    let denominator = if m == 0 {
        creal(R::one())
    } else {
        amplitude_recursive(&den, x, x)?.0
    };
    let scale = h.spectral_radius_bound().powi(2 * m as i32);
    if cabs(denominator) <= R::lit(1e-14) * scale {
        return Err(Error::DegenerateStart(format!("<x|H^{}|x> vanishes for start state {x}", 2 * m)));
    }
    Ok(PoweredEntry { value: numerator / denominator, numerator, denominator, stats: s1 })
}

/// `ceil(ln D / ln(E0 / Emax))`.
pub fn default_power(th: &Thresholds, dim: usize) -> Result<usize> {
    if th.e0 <= th.emax {
        return Err(Error::InvalidArgument("E0 must exceed Emax to choose a power".into()));
    }
    Ok(((dim as f64).ln() / (th.e0 / th.emax).ln()).ceil().max(1.0) as usize)
}
