//! Gaussian expectations of tensor networks by pairing enumeration.
//!
//! A network is a set of vertices (the noise tensor `G`, its conjugate, or the
//! deterministic spike `lambda v^{(x) p}`) whose legs are joined by edges, each
//! edge summing one index over `0..N`. The expectation over `G` is a sum over
//! pairings of the Gaussian vertices; each pairing glues paired legs together
//! and evaluates to `N^(closed loops)`. The spike is taken in the frame
//! `v = sqrt(N) e_0`, so each of its legs pins its strand to index 0 and
//! carries a factor `sqrt(N)`; strands ending on spike legs are not loops.

use std::collections::BTreeMap;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, ToPrimitive, Zero};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hamiltonian::build_hamiltonian;
use crate::rng::substream;
use crate::scalar::{creal, czero, C};
use crate::spectral::{binomial, factorial, thresholds};
use crate::tensor::{permutations, sample_gaussian_tensor, DenseTensor, Ensemble, Field};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum VertexKind {
    Gaussian,
    Conjugate,
    Signal,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Vertex {
    pub kind: VertexKind,
    pub order: usize,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct LegRef {
    pub vertex: usize,
    pub leg: usize,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Edge {
    pub a: LegRef,
    pub b: LegRef,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TensorNetwork {
    pub dim: usize,
    pub field: Field,
    pub symmetrized: bool,
    #[serde(default)]
    pub lambda: f64,
    pub vertices: Vec<Vertex>,
    pub edges: Vec<Edge>,
    #[serde(default)]
    pub open: Vec<LegRef>,
}

/// Pairs of vertex indices; for complex networks each pair is `(G, conj G)`.
pub type Pairing = Vec<(usize, usize)>;

impl TensorNetwork {
    pub fn new(dim: usize, ensemble: Ensemble) -> Self {
        TensorNetwork {
            dim,
            field: ensemble.field,
            symmetrized: ensemble.symmetrized,
            lambda: 1.0,
            vertices: Vec::new(),
            edges: Vec::new(),
            open: Vec::new(),
        }
    }

    pub fn ensemble(&self) -> Ensemble {
        Ensemble { field: self.field, symmetrized: self.symmetrized }
    }

    pub fn add_vertex(&mut self, kind: VertexKind, order: usize) -> usize {
        self.vertices.push(Vertex { kind, order });
        self.vertices.len() - 1
    }

    pub fn connect(&mut self, a: (usize, usize), b: (usize, usize)) -> &mut Self {
        self.edges.push(Edge { a: LegRef { vertex: a.0, leg: a.1 }, b: LegRef { vertex: b.0, leg: b.1 } });
        self
    }

    pub fn mark_open(&mut self, v: usize, leg: usize) -> &mut Self {
        self.open.push(LegRef { vertex: v, leg });
        self
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let net: TensorNetwork = serde_json::from_str(s)?;
        net.validate()?;
        Ok(net)
    }

    fn offsets(&self) -> Vec<usize> {
        let mut off = Vec::with_capacity(self.vertices.len() + 1);
        let mut acc = 0;
        for v in &self.vertices {
            off.push(acc);
            acc += v.order;
        }
        off.push(acc);
        off
    }

    /// Every leg must appear in exactly one edge or be marked open.
    pub fn validate(&self) -> Result<()> {
        if self.dim == 0 {
            return Err(Error::Network("dimension must be positive".into()));
        }
        let off = self.offsets();
        let mut seen = vec![0u32; *off.last().expect("offsets")];
        let mut mark = |l: &LegRef| -> Result<()> {
            let v = self.vertices.get(l.vertex).ok_or_else(|| Error::Network(format!("vertex {} does not exist", l.vertex)))?;
            if l.leg >= v.order {
                return Err(Error::Network(format!("vertex {} has no leg {}", l.vertex, l.leg)));
            }
            seen[off[l.vertex] + l.leg] += 1;
            Ok(())
        };
        for e in &self.edges {
            mark(&e.a)?;
            mark(&e.b)?;
        }
        for l in &self.open {
            mark(l)?;
        }
        if let Some(pos) = seen.iter().position(|&c| c != 1) {
            let v = off.partition_point(|&o| o <= pos) - 1;
            return Err(Error::Network(format!(
                "leg {} of vertex {v} is used {} times",
                pos - off[v],
                seen[pos]
            )));
        }
        Ok(())
    }

    fn require_closed(&self) -> Result<()> {
        self.validate()?;
        if !self.open.is_empty() {
            return Err(Error::Network("expectation needs a closed network (no open legs)".into()));
        }
        Ok(())
    }

    pub fn signal_count(&self) -> usize {
        self.vertices.iter().filter(|v| v.kind == VertexKind::Signal).count()
    }

    /// Disjoint union with the complex conjugate network (computes `|Val|^2`).
    pub fn doubled(&self) -> Self {
        let mut out = self.clone();
        let shift = self.vertices.len();
        for v in &self.vertices {
            let kind = match (self.field, v.kind) {
                (Field::Complex, VertexKind::Gaussian) => VertexKind::Conjugate,
                (Field::Complex, VertexKind::Conjugate) => VertexKind::Gaussian,
                (_, k) => k,
            };
            out.vertices.push(Vertex { kind, order: v.order });
        }
        for e in &self.edges {
            out.edges.push(Edge {
                a: LegRef { vertex: e.a.vertex + shift, leg: e.a.leg },
                b: LegRef { vertex: e.b.vertex + shift, leg: e.b.leg },
            });
        }
        for l in &self.open {
            out.open.push(LegRef { vertex: l.vertex + shift, leg: l.leg });
        }
        out
    }
}

/// All Wick pairings of the Gaussian vertices. Real networks pair any two
/// (`(m-1)!!` pairings of `m` vertices); complex networks pair each `G` with a
/// conjugate (`(m/2)!` pairings). Pairings of vertices with different orders
/// are listed but evaluate to zero.
pub fn enumerate_pairings(net: &TensorNetwork) -> Vec<Pairing> {
    let mut out = Vec::new();
    match net.field {
        Field::Real => {
            let ids: Vec<usize> =
                (0..net.vertices.len()).filter(|&i| net.vertices[i].kind != VertexKind::Signal).collect();
            if ids.len() % 2 == 1 {
                return out;
            }
            fn rec(rest: &[usize], cur: &mut Pairing, out: &mut Vec<Pairing>) {
                if rest.is_empty() {
                    out.push(cur.clone());
                    return;
                }
                let first = rest[0];
                for j in 1..rest.len() {
                    let mut remaining: Vec<usize> = rest[1..].to_vec();
                    let partner = remaining.remove(j - 1);
                    cur.push((first, partner));
                    rec(&remaining, cur, out);
                    cur.pop();
                }
            }
            rec(&ids, &mut Vec::new(), &mut out);
        }
        Field::Complex => {
            let gs: Vec<usize> = (0..net.vertices.len()).filter(|&i| net.vertices[i].kind == VertexKind::Gaussian).collect();
            let cs: Vec<usize> = (0..net.vertices.len()).filter(|&i| net.vertices[i].kind == VertexKind::Conjugate).collect();
            if gs.len() != cs.len() {
                return out;
            }
            for perm in permutations(gs.len()) {
                out.push(gs.iter().zip(&perm).map(|(&g, &k)| (g, cs[k])).collect());
            }
        }
    }
    out
}

struct UnionFind {
    parent: Vec<usize>,
}

impl UnionFind {
    fn new(n: usize) -> Self {
        UnionFind { parent: (0..n).collect() }
    }

    fn find(&mut self, mut x: usize) -> usize {
        while self.parent[x] != x {
            self.parent[x] = self.parent[self.parent[x]];
            x = self.parent[x];
        }
        x
    }

    fn union(&mut self, a: usize, b: usize) {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra != rb {
            self.parent[ra] = rb;
        }
    }
}

fn pow_n(n: usize, k: u32) -> BigRational {
    BigRational::from_integer(BigInt::from(n).pow(k))
}

/// Closed loops plus spike-terminated strands after gluing the given leg matchings.
fn strand_count(net: &TensorNetwork, off: &[usize], glue: &[(usize, usize, &[usize])]) -> u32 {
    let total = *off.last().expect("offsets");
    let mut uf = UnionFind::new(total);
    for e in &net.edges {
        uf.union(off[e.a.vertex] + e.a.leg, off[e.b.vertex] + e.b.leg);
    }
    for &(a, b, perm) in glue {
        for (leg, &pl) in perm.iter().enumerate() {
            uf.union(off[a] + leg, off[b] + pl);
        }
    }
    let mut roots: Vec<usize> = (0..total).map(|i| uf.find(i)).collect();
    roots.sort_unstable();
    roots.dedup();
    roots.len() as u32
}

/// Value of one pairing, without the `lambda^(spikes)` factor.
pub fn pairing_value(net: &TensorNetwork, pairing: &Pairing) -> Result<BigRational> {
    net.require_closed()?;
    let off = net.offsets();
    for &(a, b) in pairing {
        if net.vertices[a].order != net.vertices[b].order {
            return Ok(BigRational::zero());
        }
    }
    // each strand through spike legs carries sqrt(N) at both ends, i.e. N
    let value_of = |glue: &[(usize, usize, &[usize])]| pow_n(net.dim, strand_count(net, &off, glue));
    if !net.symmetrized {
        let ident: Vec<Vec<usize>> = pairing.iter().map(|&(a, _)| (0..net.vertices[a].order).collect()).collect();
        let glue: Vec<(usize, usize, &[usize])> =
            pairing.iter().zip(&ident).map(|(&(a, b), p)| (a, b, p.as_slice())).collect();
        return Ok(value_of(&glue));
    }
    // symmetrized noise: each pair averages over the p! leg matchings
    let perm_sets: Vec<Vec<Vec<usize>>> = pairing.iter().map(|&(a, _)| permutations(net.vertices[a].order)).collect();
    let mut total = BigRational::zero();
    let mut choice = vec![0usize; pairing.len()];
    loop {
        let glue: Vec<(usize, usize, &[usize])> = pairing
            .iter()
            .enumerate()
            .map(|(i, &(a, b))| (a, b, perm_sets[i][choice[i]].as_slice()))
            .collect();
        total += value_of(&glue);
        let mut i = 0;
        loop {
            if i == choice.len() {
                let denom: BigInt = perm_sets.iter().map(|s| BigInt::from(s.len())).product();
                return Ok(total / BigRational::from_integer(denom));
            }
            choice[i] += 1;
            if choice[i] < perm_sets[i].len() {
                break;
            }
            choice[i] = 0;
            i += 1;
        }
    }
}

/// Largest number of Gaussian vertices accepted by the exact evaluator.
pub const MAX_GAUSSIAN_VERTICES: usize = 12;

/// Exact `E[Val] / lambda^(spikes)`.
pub fn expected_value_exact(net: &TensorNetwork) -> Result<BigRational> {
    net.require_closed()?;
    let gaussians = net.vertices.len() - net.signal_count();
    if gaussians > MAX_GAUSSIAN_VERTICES {
        return Err(Error::Size(format!("{gaussians} Gaussian vertices exceed the cap of {MAX_GAUSSIAN_VERTICES}")));
    }
    let mut acc = BigRational::zero();
    for p in enumerate_pairings(net) {
        acc += pairing_value(net, &p)?;
    }
    Ok(acc)
}

pub fn expected_value(net: &TensorNetwork) -> Result<f64> {
    let exact = expected_value_exact(net)?;
    Ok(exact.to_f64().unwrap_or(f64::INFINITY) * net.lambda.powi(net.signal_count() as i32))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct McEstimate {
    pub mean: f64,
    pub stderr: f64,
    /// Mean imaginary part (zero in expectation for the networks used here).
    pub mean_imag: f64,
    pub trials: usize,
}

/// Direct contraction of the network for one noise draw per order.
pub fn contract(net: &TensorNetwork, noise: &BTreeMap<usize, DenseTensor<f64>>) -> Result<C<f64>> {
    net.require_closed()?;
    let n = net.dim;
    let off = net.offsets();
    let mut edge_of = vec![0usize; *off.last().expect("offsets")];
    for (i, e) in net.edges.iter().enumerate() {
        edge_of[off[e.a.vertex] + e.a.leg] = i;
        edge_of[off[e.b.vertex] + e.b.leg] = i;
    }
    let n_edges = net.edges.len();
    let total = crate::tensor::tensor_len(n_edges, n)?;
    let root_n = (n as f64).sqrt();
    let mut assign = vec![0usize; n_edges];
    let mut acc = czero::<f64>();
    for lin in 0..total {
        let mut rest = lin;
        for a in assign.iter_mut() {
            *a = rest % n;
            rest /= n;
        }
        let mut val = creal(1.0);
        for (v, vert) in net.vertices.iter().enumerate() {
            let legs = &edge_of[off[v]..off[v + 1]];
            match vert.kind {
                VertexKind::Signal => {
                    if legs.iter().any(|&e| assign[e] != 0) {
                        val = czero();
                        break;
                    }
                    val *= net.lambda * root_n.powi(vert.order as i32);
                }
                VertexKind::Gaussian | VertexKind::Conjugate => {
                    let t = noise
                        .get(&vert.order)
                        .ok_or_else(|| Error::Network(format!("no noise tensor of order {}", vert.order)))?;
                    let idx = legs.iter().fold(0, |acc, &e| acc * n + assign[e]);
                    let z = t.data()[idx];
                    val *= if vert.kind == VertexKind::Conjugate { z.conj() } else { z };
                }
            }
            if val == czero() {
                break;
            }
        }
        acc += val;
    }
    Ok(acc)
}

/// Monte-Carlo mean of the network value over fresh noise draws.
pub fn mc_estimate(net: &TensorNetwork, trials: usize, seed: u64) -> Result<McEstimate> {
    net.require_closed()?;
    if trials < 2 {
        return Err(Error::InvalidArgument("Monte-Carlo needs at least two trials".into()));
    }
    let mut orders: Vec<usize> =
        net.vertices.iter().filter(|v| v.kind != VertexKind::Signal).map(|v| v.order).collect();
    orders.sort_unstable();
    orders.dedup();
    let mut acc = Welford::default();
    let mut si = 0.0;
    for t in 0..trials {
        let mut noise = BTreeMap::new();
        for &o in &orders {
            let seed_t = substream(substream(seed, t as u64), o as u64);
            noise.insert(o, sample_gaussian_tensor::<f64>(o, net.dim, net.ensemble(), seed_t)?);
        }
        let v = contract(net, &noise)?;
        acc.push(v.re);
        si += v.im;
    }
    Ok(McEstimate { mean: acc.mean, stderr: acc.stderr(), mean_imag: si / trials as f64, trials })
}

/// Running mean and variance (Welford), exact for constant samples.
#[derive(Default)]
struct Welford {
    n: usize,
    mean: f64,
    m2: f64,
}

impl Welford {
    fn push(&mut self, x: f64) {
        self.n += 1;
        let d = x - self.mean;
        self.mean += d / self.n as f64;
        self.m2 += d * (x - self.mean);
    }

    fn stderr(&self) -> f64 {
        let nt = self.n as f64;
        (self.m2 / (nt - 1.0) / nt).sqrt()
    }
}

/// Second moment of a network value against the diagonal-pairing floor `N^(edges)`.
#[derive(Clone, Debug, PartialEq)]
pub struct VarianceCheck {
    pub second_moment: BigRational,
    pub floor: BigRational,
    pub holds: bool,
}

pub fn variance_check(net: &TensorNetwork) -> Result<VarianceCheck> {
    let second_moment = expected_value_exact(&net.doubled())?;
    let floor = pow_n(net.dim, net.edges.len() as u32);
    let holds = second_moment >= floor;
    Ok(VarianceCheck { second_moment, floor, holds })
}

/// `E[H(eta)^2]` per basis state for Gaussian `eta`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct H2Scalar {
    /// Leading-order closed form `J n^(p/2) N^(p/2)`.
    pub closed_form: f64,
    /// Exact value where `E[H^2]` is a multiple of the identity by symmetry
    /// (complex, unsymmetrized noise).
    pub exact: Option<f64>,
    pub monte_carlo_mean: f64,
    pub monte_carlo_stderr: f64,
    pub trials: usize,
}

/// Closed form, exact value (when available) and Monte-Carlo estimate of the
/// mean diagonal of `H(eta)^2`, for even `order`.
pub fn expected_h2_scalar(order: usize, dim: usize, n_bos: usize, ensemble: Ensemble, trials: usize, seed: u64) -> Result<H2Scalar> {
    if order % 2 == 1 {
        return Err(Error::InvalidArgument("the H^2 scalar is defined for even orders".into()));
    }
    let th = thresholds(order, dim, n_bos, 0.0, ensemble)?;
    let k = order / 2;
    let closed_form = th.j * (n_bos as f64).powi(k as i32) * (dim as f64).powi(k as i32);
    let exact = if ensemble == Ensemble::COMPLEX {
        // E[H^2] = 1/2 sum_mu A+_mu (sum_nu A_nu A+_nu) A_mu; both sums are U(N)
        // invariant, hence scalars fixed by their traces
        let d = |b: usize| binomial(dim + b - 1, b);
        let falling = factorial(n_bos) / factorial(n_bos - k);
        let inner = d(n_bos) * falling / d(n_bos - k);
        Some(0.5 * inner * falling)
    } else {
        None
    };
    if trials < 2 {
        return Err(Error::InvalidArgument("Monte-Carlo needs at least two trials".into()));
    }
    let mut acc = Welford::default();
    for t in 0..trials {
        let eta = sample_gaussian_tensor::<f64>(order, dim, ensemble, substream(seed, t as u64))?;
        let h = build_hamiltonian(&eta, n_bos)?;
        let m = h.materialize_dense(usize::MAX)?;
        acc.push(m.iter().map(|z| z.norm_sqr()).sum::<f64>() / m.nrows() as f64);
    }
    Ok(H2Scalar { closed_form, exact, monte_carlo_mean: acc.mean, monte_carlo_stderr: acc.stderr(), trials })
}

/// Number of pairings `enumerate_pairings` would produce, without listing them.
pub fn pairing_count(net: &TensorNetwork) -> BigInt {
    let g = net.vertices.iter().filter(|v| v.kind == VertexKind::Gaussian).count();
    let c = net.vertices.iter().filter(|v| v.kind == VertexKind::Conjugate).count();
    match net.field {
        Field::Real => {
            let m = g + c;
            if m % 2 == 1 {
                return BigInt::zero();
            }
            (1..m).step_by(2).fold(BigInt::one(), |acc, k| acc * BigInt::from(k))
        }
        Field::Complex => {
            if g != c {
                return BigInt::zero();
            }
            (1..=g).fold(BigInt::one(), |acc, k| acc * BigInt::from(k))
        }
    }
}
