//! First-quantized oracles: operators on the full `N^n` tensor-product space,
//! pulled back to the occupation basis through an explicit isometry.
#![allow(dead_code)]

use nalgebra::DMatrix;
use spiked_core::fock::OccupationBasis;
use spiked_core::{Tensor, C};

pub type C64 = C<f64>;

fn digits(mut lin: usize, n: usize, modes: usize) -> Vec<usize> {
    let mut d = vec![0; n];
    for slot in d.iter_mut().rev() {
        *slot = lin % modes;
        lin /= modes;
    }
    d
}

fn undigits(d: &[usize], modes: usize) -> usize {
    d.iter().fold(0, |acc, &x| acc * modes + x)
}

fn occupation(d: &[usize], modes: usize) -> Vec<u8> {
    let mut o = vec![0u8; modes];
    for &m in d {
        o[m] += 1;
    }
    o
}

/// Columns are the normalized symmetrized product states, one per occupation.
pub fn isometry(basis: &OccupationBasis) -> DMatrix<C64> {
    let (modes, n) = (basis.modes(), basis.n_bos());
    let full = modes.pow(n as u32);
    let mut v = DMatrix::from_element(full, basis.dim(), C64::new(0.0, 0.0));
    let mut counts = vec![0usize; basis.dim()];
    for lin in 0..full {
        counts[basis.rank(&occupation(&digits(lin, n, modes), modes))] += 1;
    }
    for lin in 0..full {
        let j = basis.rank(&occupation(&digits(lin, n, modes), modes));
        v[(lin, j)] = C64::new(1.0 / (counts[j] as f64).sqrt(), 0.0);
    }
    v
}

fn ordered_distinct_sites(n: usize, k: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    fn rec(n: usize, k: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if cur.len() == k {
            out.push(cur.clone());
            return;
        }
        for i in 0..n {
            if !cur.contains(&i) {
                cur.push(i);
                rec(n, k, cur, out);
                cur.pop();
            }
        }
    }
    rec(n, k, &mut Vec::new(), &mut out);
    out
}

/// `sum_{mu,nu} K[mu, nu] a+_{mu_1}..a+_{mu_k} a_{nu_1}..a_{nu_k}` in first
/// quantization, with `K` indexed by `k`-tuples written as base-`N` integers.
pub fn first_quantized(kernel: impl Fn(&[usize], &[usize]) -> C64, modes: usize, n: usize, k: usize) -> DMatrix<C64> {
    let full = modes.pow(n as u32);
    let mut f = DMatrix::from_element(full, full, C64::new(0.0, 0.0));
    let sites = ordered_distinct_sites(n, k);
    let kk = modes.pow(k as u32);
    for x in 0..full {
        let xd = digits(x, n, modes);
        for s in &sites {
            let nu: Vec<usize> = s.iter().map(|&i| xd[i]).collect();
            for m in 0..kk {
                let mu = digits(m, k, modes);
                let mut yd = xd.clone();
                for (j, &i) in s.iter().enumerate() {
                    yd[i] = mu[j];
                }
                f[(undigits(&yd, modes), x)] += kernel(&mu, &nu);
            }
        }
    }
    f
}

/// `H(T)` for even-order `T` on the occupation basis, built independently of the library.
pub fn dense_even_oracle(t: &Tensor, basis: &OccupationBasis) -> DMatrix<C64> {
    let k = t.order() / 2;
    let modes = t.dim();
    let f = first_quantized(
        |mu, nu| {
            let idx: Vec<usize> = mu.iter().chain(nu).copied().collect();
            t.get(&idx)
        },
        modes,
        basis.n_bos(),
        k,
    );
    let herm = (&f + f.adjoint()).scale(0.5);
    let v = isometry(basis);
    v.adjoint() * herm * v
}

pub fn max_abs(m: &DMatrix<C64>) -> f64 {
    m.iter().map(|z| z.norm()).fold(0.0, f64::max)
}
