use std::collections::BTreeMap;

use num_bigint::BigInt;
use num_rational::BigRational;
use proptest::prelude::*;
use spiked_core::tensor::{sample_gaussian_tensor, Ensemble};
use spiked_core::wick::*;
use spiked_core::{Error, C};

fn int(n: i64) -> BigRational {
    BigRational::from_integer(BigInt::from(n))
}

/// Two order-`p` Gaussian vertices glued leg to leg: `sum |G|^2` (or `sum G^2` when real).
fn norm_network(dim: usize, p: usize, ens: Ensemble) -> TensorNetwork {
    let mut net = TensorNetwork::new(dim, ens);
    let second = if ens.is_complex() { VertexKind::Conjugate } else { VertexKind::Gaussian };
    let a = net.add_vertex(VertexKind::Gaussian, p);
    let b = net.add_vertex(second, p);
    for l in 0..p {
        net.connect((a, l), (b, l));
    }
    net
}

/// `Tr(G^4)` for a real order-2 `G`.
fn square_cycle(dim: usize) -> TensorNetwork {
    let mut net = TensorNetwork::new(dim, Ensemble::REAL);
    let v: Vec<usize> = (0..4).map(|_| net.add_vertex(VertexKind::Gaussian, 2)).collect();
    for i in 0..4 {
        net.connect((v[i], 1), (v[(i + 1) % 4], 0));
    }
    net
}

/// Two `G` and two conjugates of order 3, wired crosswise.
fn complex_crossed(dim: usize) -> TensorNetwork {
    let mut net = TensorNetwork::new(dim, Ensemble::COMPLEX);
    let g1 = net.add_vertex(VertexKind::Gaussian, 3);
    let g2 = net.add_vertex(VertexKind::Gaussian, 3);
    let c1 = net.add_vertex(VertexKind::Conjugate, 3);
    let c2 = net.add_vertex(VertexKind::Conjugate, 3);
    net.connect((g1, 0), (c1, 0)).connect((g1, 1), (c2, 1)).connect((g1, 2), (g2, 2));
    net.connect((g2, 0), (c2, 0)).connect((g2, 1), (c1, 1)).connect((c1, 2), (c2, 2));
    net
}

/// Spike of order 2 contracted with a real order-4 `G` whose other two legs close on each other.
fn spike_with_noise(dim: usize, lambda: f64) -> TensorNetwork {
    let mut net = TensorNetwork::new(dim, Ensemble::REAL);
    net.lambda = lambda;
    let s = net.add_vertex(VertexKind::Signal, 2);
    let g = net.add_vertex(VertexKind::Gaussian, 4);
    let h = net.add_vertex(VertexKind::Gaussian, 2);
    net.connect((s, 0), (g, 0)).connect((s, 1), (g, 1)).connect((g, 2), (h, 0)).connect((g, 3), (h, 1));
    net
}

#[test]
fn pairing_counts() {
    let two = norm_network(3, 2, Ensemble::REAL);
    assert_eq!(enumerate_pairings(&two).len(), 1);
    let four = square_cycle(3);
    assert_eq!(enumerate_pairings(&four).len(), 3);
    let cplx = complex_crossed(2);
    assert_eq!(enumerate_pairings(&cplx).len(), 2);
    for m in [2usize, 4, 6, 8, 10] {
        let mut net = TensorNetwork::new(2, Ensemble::REAL);
        for _ in 0..m {
            net.add_vertex(VertexKind::Gaussian, 1);
        }
        let want: usize = (1..m).step_by(2).product();
        assert_eq!(enumerate_pairings(&net).len(), want);
        assert_eq!(pairing_count(&net), BigInt::from(want));
    }
}

#[test]
fn unbalanced_gaussians_have_no_pairings() {
    let mut odd = TensorNetwork::new(3, Ensemble::REAL);
    let a = odd.add_vertex(VertexKind::Gaussian, 2);
    let b = odd.add_vertex(VertexKind::Gaussian, 2);
    let c = odd.add_vertex(VertexKind::Gaussian, 2);
    odd.connect((a, 1), (b, 0)).connect((b, 1), (c, 0)).connect((c, 1), (a, 0));
    assert!(enumerate_pairings(&odd).is_empty());
    assert_eq!(pairing_count(&odd), BigInt::from(0));
    assert_eq!(expected_value(&odd).unwrap(), 0.0);

    let mut unbalanced = TensorNetwork::new(3, Ensemble::COMPLEX);
    let g = unbalanced.add_vertex(VertexKind::Gaussian, 2);
    let h = unbalanced.add_vertex(VertexKind::Gaussian, 2);
    unbalanced.connect((g, 0), (h, 0)).connect((g, 1), (h, 1));
    assert!(enumerate_pairings(&unbalanced).is_empty());
    assert_eq!(expected_value(&unbalanced).unwrap(), 0.0);
}

#[test]
fn squared_norm_values() {
    assert_eq!(expected_value_exact(&norm_network(3, 2, Ensemble::REAL)).unwrap(), int(9));
    assert_eq!(expected_value_exact(&norm_network(5, 2, Ensemble::REAL)).unwrap(), int(25));
    let net = norm_network(3, 2, Ensemble::REAL);
    let p = &enumerate_pairings(&net)[0];
    assert_eq!(pairing_value(&net, p).unwrap(), int(9));
    for (n, p) in [(2usize, 5usize), (3, 3), (4, 2), (6, 1)] {
        for ens in [Ensemble::REAL, Ensemble::COMPLEX] {
            let want = int((n as i64).pow(p as u32));
            assert_eq!(expected_value_exact(&norm_network(n, p, ens)).unwrap(), want);
        }
    }
}

#[test]
fn symmetrized_pairs_average_over_leg_matchings() {
    // E sum_ij Gs_ij^2 with Gs = (G + G^T)/2 is N(N+1)/2
    let net = norm_network(4, 2, Ensemble::REAL.symmetrized());
    assert_eq!(expected_value_exact(&net).unwrap(), int(10));
    let mc = mc_estimate(&net, 20_000, 3).unwrap();
    assert!((mc.mean - 10.0).abs() < 3.0 * mc.stderr, "{mc:?}");
}

#[test]
fn deterministic_network_has_zero_spread() {
    let mut net = TensorNetwork::new(3, Ensemble::REAL);
    net.lambda = 0.7;
    let a = net.add_vertex(VertexKind::Signal, 3);
    let b = net.add_vertex(VertexKind::Signal, 3);
    for l in 0..3 {
        net.connect((a, l), (b, l));
    }
    let mc = mc_estimate(&net, 10, 1).unwrap();
    let want = 0.7f64.powi(2) * 27.0;
    assert_eq!(mc.stderr, 0.0);
    assert!((mc.mean - want).abs() < 1e-12);
    assert!((expected_value(&net).unwrap() - want).abs() < 1e-12);
}

#[test]
fn norm_network_monte_carlo_and_determinism() {
    let net = norm_network(3, 2, Ensemble::REAL);
    let a = mc_estimate(&net, 10_000, 42).unwrap();
    let b = mc_estimate(&net, 10_000, 42).unwrap();
    assert_eq!(a, b);
    assert!((a.mean - 9.0).abs() <= 3.0 * a.stderr, "{a:?}");
    assert!(matches!(mc_estimate(&net, 1, 0), Err(Error::InvalidArgument(_))));
}

#[test]
fn hermitian_part_trace_matches_monte_carlo() {
    // Tr(((G + G^dag)/2)^2) = (Tr GG + Tr G G^dag + Tr G^dag G + Tr G^dag G^dag) / 4
    let n = 4;
    let mut gg = TensorNetwork::new(n, Ensemble::COMPLEX);
    let (a, b) = (gg.add_vertex(VertexKind::Gaussian, 2), gg.add_vertex(VertexKind::Gaussian, 2));
    gg.connect((a, 1), (b, 0)).connect((b, 1), (a, 0));
    let mut cc = TensorNetwork::new(n, Ensemble::COMPLEX);
    let (a, b) = (cc.add_vertex(VertexKind::Conjugate, 2), cc.add_vertex(VertexKind::Conjugate, 2));
    cc.connect((a, 1), (b, 0)).connect((b, 1), (a, 0));
    let gc = norm_network(n, 2, Ensemble::COMPLEX);
    let parts = [(&gg, 1.0), (&gc, 2.0), (&cc, 1.0)];
    let exact: f64 = parts.iter().map(|(net, w)| w * expected_value(net).unwrap()).sum::<f64>() / 4.0;
    assert_eq!(exact, 8.0);

    let trials = 100_000;
    let (mut s1, mut s2) = (0.0, 0.0);
    for t in 0..trials {
        let g = sample_gaussian_tensor::<f64>(2, n, Ensemble::COMPLEX, 900_000 + t).unwrap();
        let noise = BTreeMap::from([(2usize, g)]);
        let v: C<f64> = parts.iter().map(|(net, w)| contract(net, &noise).unwrap() * *w).sum::<C<f64>>() / 4.0;
        assert!(v.im.abs() < 1e-9);
        s1 += v.re;
        s2 += v.re * v.re;
    }
    let nt = trials as f64;
    let mean = s1 / nt;
    let se = ((s2 / nt - mean * mean) / (nt - 1.0)).sqrt();
    assert!((mean - exact).abs() <= 3.0 * se, "mean {mean} se {se}");
}

#[test]
fn pairing_sum_agrees_with_monte_carlo_on_several_topologies() {
    let nets = [square_cycle(3), complex_crossed(2), spike_with_noise(3, 0.8), norm_network(2, 3, Ensemble::COMPLEX)];
    for (i, net) in nets.iter().enumerate() {
        let exact = expected_value(net).unwrap();
        let mc = mc_estimate(net, 100_000, 17 + i as u64).unwrap();
        assert!((mc.mean - exact).abs() <= 3.0 * mc.stderr.max(1e-12), "network {i}: exact {exact}, {mc:?}");
    }
}

#[test]
fn second_moment_dominates_the_diagonal_pairing() {
    let nets = [
        norm_network(3, 2, Ensemble::REAL),
        square_cycle(3),
        complex_crossed(2),
        spike_with_noise(3, 1.0),
        norm_network(2, 3, Ensemble::COMPLEX.symmetrized()),
    ];
    for net in &nets {
        let chk = variance_check(net).unwrap();
        assert!(chk.holds, "{:?} < {:?}", chk.second_moment, chk.floor);
        assert!(chk.second_moment >= chk.floor);
    }
    // the diagonal pairing alone gives exactly N^{edges} for |Tr G^4|^2
    let doubled = square_cycle(2).doubled();
    let diagonal: Pairing = (0..4).map(|i| (i, i + 4)).collect();
    assert_eq!(pairing_value(&doubled, &diagonal).unwrap(), int(16));
}

#[test]
fn json_round_trip_and_validation() {
    let net = spike_with_noise(3, 0.5);
    let back = TensorNetwork::from_json(&net.to_json().unwrap()).unwrap();
    assert_eq!(back, net);

    let mut dangling = TensorNetwork::new(3, Ensemble::REAL);
    let a = dangling.add_vertex(VertexKind::Gaussian, 2);
    let b = dangling.add_vertex(VertexKind::Gaussian, 2);
    dangling.connect((a, 0), (b, 0));
    assert!(matches!(dangling.validate(), Err(Error::Network(_))));
    dangling.mark_open(a, 1).mark_open(b, 1);
    dangling.validate().unwrap();
    assert!(matches!(expected_value(&dangling), Err(Error::Network(_))));
    let mut twice = norm_network(3, 2, Ensemble::REAL);
    twice.connect((0, 0), (1, 1));
    assert!(twice.validate().is_err());
    assert!(TensorNetwork::from_json("{\"dim\": 3}").is_err());
}

#[test]
fn vertex_cap_is_enforced() {
    let mut net = TensorNetwork::new(2, Ensemble::REAL);
    let v: Vec<usize> = (0..14).map(|_| net.add_vertex(VertexKind::Gaussian, 2)).collect();
    for i in 0..14 {
        net.connect((v[i], 1), (v[(i + 1) % 14], 0));
    }
    assert!(matches!(expected_value(&net), Err(Error::Size(_))));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]
    #[test]
    fn value_is_homogeneous_in_the_noise_scale(s in 0.1f64..3.0, seed in 0u64..500) {
        // four Gaussian vertices: each draw scales by s^4
        let net = square_cycle(3);
        let g = sample_gaussian_tensor::<f64>(2, 3, Ensemble::REAL, seed).unwrap();
        let base = contract(&net, &BTreeMap::from([(2usize, g.clone())])).unwrap();
        let scaled = contract(&net, &BTreeMap::from([(2usize, g.scaled(s))])).unwrap();
        prop_assert!((scaled - base * s.powi(4)).norm() <= 1e-10 * (1.0 + scaled.norm()));
    }
}

#[test]
fn h2_scalar_exact_values_and_closed_form() {
    // p = 2, n = 1: H = (G + G^dag)/2, mean diagonal of H^2 is (N+1)/2 real, N/2 complex
    let n = 6;
    let real = expected_h2_scalar(2, n, 1, Ensemble::REAL, 4000, 1).unwrap();
    let cplx = expected_h2_scalar(2, n, 1, Ensemble::COMPLEX, 4000, 2).unwrap();
    assert_eq!(real.closed_form, n as f64);
    assert_eq!(cplx.closed_form, 2.0 * real.closed_form);
    assert_eq!(cplx.exact, Some(n as f64 / 2.0));
    assert!((real.monte_carlo_mean - (n as f64 + 1.0) / 2.0).abs() < 4.0 * real.monte_carlo_stderr);
    assert!((cplx.monte_carlo_mean - n as f64 / 2.0).abs() < 4.0 * cplx.monte_carlo_stderr);
    assert!(matches!(expected_h2_scalar(3, 4, 2, Ensemble::COMPLEX, 10, 0), Err(Error::InvalidArgument(_))));
}

#[test]
fn h2_scalar_complex_exact_value_matches_monte_carlo() {
    let r = expected_h2_scalar(4, 5, 3, Ensemble::COMPLEX, 400, 9).unwrap();
    let exact = r.exact.unwrap();
    assert!((r.monte_carlo_mean - exact).abs() < 4.0 * r.monte_carlo_stderr, "{r:?}");
}
