mod common;

use std::sync::Arc;

use common::{first_quantized, isometry, max_abs, C64};
use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;
use spiked_core::fock::*;
use spiked_core::io::{decode_fock, encode_fock};
use spiked_core::tensor::{outer_power, sample_gaussian_tensor, symmetrize, Ensemble};
use spiked_core::{Error, Fock, Tensor};

fn basis(modes: usize, n: usize) -> Arc<OccupationBasis> {
    Arc::new(enumerate_basis(modes, n).unwrap())
}

fn random_state(b: &Arc<OccupationBasis>, seed: u64) -> Fock {
    let g = sample_gaussian_tensor::<f64>(1, b.dim(), Ensemble::COMPLEX, seed).unwrap();
    Fock::from_amplitudes(b.clone(), g.data().to_vec()).unwrap().normalized().unwrap()
}

fn c(re: f64) -> C64 {
    C64::new(re, 0.0)
}

#[test]
fn enumeration_examples() {
    let b = enumerate_basis(3, 2).unwrap();
    let states: Vec<Vec<u8>> = b.iter().map(|s| s.to_vec()).collect();
    let want: Vec<Vec<u8>> =
        vec![vec![2, 0, 0], vec![1, 1, 0], vec![1, 0, 1], vec![0, 2, 0], vec![0, 1, 1], vec![0, 0, 2]];
    assert_eq!(states, want);
    assert_eq!(enumerate_basis(10, 4).unwrap().dim(), 715);
    assert_eq!(enumerate_basis(2, 1).unwrap().dim(), 2);
    assert_eq!(enumerate_basis(4, 0).unwrap().dim(), 1);
    assert!(matches!(enumerate_basis(0, 2), Err(Error::InvalidArgument(_))));
    assert!(matches!(basis_dimension(10_000, 10_000), Err(Error::Size(_))));
}

#[test]
fn dimension_matches_enumeration_up_to_twelve_modes() {
    for modes in 1..=12 {
        for n in 0..=6 {
            let b = enumerate_basis(modes, n).unwrap();
            assert_eq!(basis_dimension(modes, n).unwrap(), b.dim(), "N={modes} n={n}");
            for w in b.iter().collect::<Vec<_>>().windows(2) {
                assert!(w[0] > w[1], "order must be strictly descending");
            }
        }
    }
}

proptest! {
    #[test]
    fn rank_inverts_enumeration(modes in 1usize..7, n in 0usize..6) {
        let b = enumerate_basis(modes, n).unwrap();
        for (i, occ) in b.iter().enumerate() {
            prop_assert_eq!(b.rank(occ), i);
            prop_assert_eq!(b.try_rank(occ), Some(i));
        }
        let mut bad = vec![0u8; modes];
        bad[0] = n as u8 + 1;
        prop_assert_eq!(b.try_rank(&bad), None);
        prop_assert_eq!(b.occupation(b.condensed_index(modes - 1))[modes - 1] as usize, n);
    }
}

#[test]
fn number_operator_and_vacuum_annihilation() {
    let b = basis(2, 2);
    let s = Fock::basis_state(b.clone(), b.rank(&[2, 0])).unwrap();
    let out = apply_monomial(&[Ladder::Create(0), Ladder::Annihilate(0)], &s).unwrap();
    assert!((out.amplitudes()[b.rank(&[2, 0])] - c(2.0)).norm() < 1e-14);
    assert!(out.amplitudes().iter().enumerate().all(|(i, z)| i == b.rank(&[2, 0]) || z.norm() == 0.0));

    let b1 = basis(2, 1);
    let s = Fock::basis_state(b1.clone(), b1.rank(&[1, 0])).unwrap();
    let out = apply_monomial(&[Ladder::Create(0), Ladder::Annihilate(1)], &s).unwrap();
    assert_eq!(out.norm(), 0.0);

    assert!(matches!(apply_monomial(&[Ladder::Create(0)], &s), Err(Error::ContractViolation(_))));
    assert!(matches!(apply_monomial(&[Ladder::Create(5), Ladder::Annihilate(0)], &s), Err(Error::InvalidArgument(_))));
}

#[test]
fn hopping_matches_first_quantized_oracle() {
    let b = basis(3, 2);
    let v = isometry(&b);
    let psi = random_state(&b, 11);
    let x = DVector::from_column_slice(psi.amplitudes());
    for mu in 0..3 {
        for nu in 0..3 {
            let f = first_quantized(|m, n| c(if m[0] == mu && n[0] == nu { 1.0 } else { 0.0 }), 3, 2, 1);
            let dense = v.adjoint() * f * &v;
            let want = (x.adjoint() * &dense * &x)[(0, 0)];
            let out = apply_monomial(&[Ladder::Create(mu), Ladder::Annihilate(nu)], &psi).unwrap();
            let got = psi.inner(&out).unwrap();
            assert!((got - want).norm() < 1e-12, "mu={mu} nu={nu}: {got} vs {want}");
        }
    }
}

#[test]
fn canonical_commutation_on_every_basis_state() {
    // a_mu a+_nu - a+_nu a_mu leaves n fixed, so test it on the n-boson space
    let b = basis(3, 3);
    for i in 0..b.dim() {
        let s = Fock::basis_state(b.clone(), i).unwrap();
        for mu in 0..3 {
            for nu in 0..3 {
                let ab = apply_monomial(&[Ladder::Annihilate(mu), Ladder::Create(nu)], &s).unwrap();
                let ba = apply_monomial(&[Ladder::Create(nu), Ladder::Annihilate(mu)], &s).unwrap();
                for j in 0..b.dim() {
                    let want = if mu == nu && i == j { 1.0 } else { 0.0 };
                    let got = ab.amplitudes()[j] - ba.amplitudes()[j];
                    assert!((got - c(want)).norm() < 1e-12);
                }
            }
        }
    }
}

#[test]
fn product_state_examples() {
    let b = basis(4, 3);
    let aligned = product_state(&[2.0, 0.0, 0.0, 0.0], b.clone()).unwrap();
    for (i, z) in aligned.amplitudes().iter().enumerate() {
        let want = if i == b.condensed_index(0) { 1.0 } else { 0.0 };
        assert_eq!(*z, c(want));
    }
    let v = [1.0, -2.0, 0.5];
    let one = product_state(&v, basis(3, 1)).unwrap();
    let nv = (1.0f64 + 4.0 + 0.25).sqrt();
    for (z, x) in one.amplitudes().iter().zip(v) {
        assert!((z.re - x / nv).abs() < 1e-15);
    }
    assert!(matches!(product_state(&[0.0; 3], basis(3, 2)), Err(Error::InvalidArgument(_))));
}

proptest! {
    #[test]
    fn product_state_is_normalized(v in prop::collection::vec(-3.0f64..3.0, 5)) {
        prop_assume!(v.iter().map(|x| x * x).sum::<f64>() > 1e-3);
        let s = product_state(&v, basis(5, 3)).unwrap();
        prop_assert!((s.norm() - 1.0).abs() < 1e-12);
    }
}

#[test]
fn tensor_embedding_of_a_product_is_the_product_state() {
    let v = [0.3, -1.2, 2.0];
    let t = outer_power(&v, 3).unwrap();
    let (psi, full) = tensor_to_fock(&t).unwrap();
    let nv: f64 = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    assert!((psi.norm() - nv.powi(3)).abs() < 1e-12);
    assert!((full - nv.powi(3)).abs() < 1e-12);
    let ps = product_state(&v, basis(3, 3)).unwrap();
    for (a, b) in psi.amplitudes().iter().zip(ps.amplitudes()) {
        assert!((a / nv.powi(3) - b).norm() < 1e-12);
    }
}

#[test]
fn antisymmetric_tensor_projects_to_zero() {
    let t = Tensor::from_real(2, 2, &[0.0, 1.0, -1.0, 0.0]).unwrap();
    let (psi, full) = tensor_to_fock(&t).unwrap();
    assert_eq!(psi.norm(), 0.0);
    assert!((full - 2f64.sqrt()).abs() < 1e-15);
}

#[test]
fn embedding_is_the_symmetric_projection() {
    let b = basis(3, 2);
    let v = isometry(&b);
    for seed in 0..5 {
        let t = sample_gaussian_tensor::<f64>(2, 3, Ensemble::REAL, seed).unwrap();
        let (psi, full) = tensor_to_fock(&t).unwrap();
        let want = v.adjoint() * DVector::from_column_slice(t.data());
        for (a, w) in psi.amplitudes().iter().zip(want.iter()) {
            assert!((a - w).norm() < 1e-12);
        }
        assert!(psi.norm() <= full + 1e-12);
        let s = symmetrize(&t);
        let (psi_s, full_s) = tensor_to_fock(&s).unwrap();
        assert!((psi_s.norm() - full_s).abs() < 1e-12, "symmetric input keeps its norm");
        for (a, b) in psi.amplitudes().iter().zip(psi_s.amplitudes()) {
            assert!((a - b).norm() < 1e-12);
        }
    }
}

#[test]
fn tensor_power_embedding_concatenates_copies() {
    let t = sample_gaussian_tensor::<f64>(2, 3, Ensemble::COMPLEX, 4).unwrap();
    let (two, full) = tensor_power_to_fock(&t, 2).unwrap();
    assert_eq!(two.basis().n_bos(), 4);
    assert!((full - t.frobenius_norm().powi(2)).abs() < 1e-12);
    let mut data = Vec::with_capacity(81);
    for a in t.data() {
        for b in t.data() {
            data.push(a * b);
        }
    }
    let (direct, _) = tensor_to_fock(&Tensor::from_data(4, 3, data).unwrap()).unwrap();
    for (a, b) in two.amplitudes().iter().zip(direct.amplitudes()) {
        assert!((a - b).norm() < 1e-12);
    }
    assert!(matches!(tensor_power_to_fock(&t, 0), Err(Error::InvalidArgument(_))));
}

#[test]
fn density_matrix_examples() {
    let v = [1.0, 2.0, -1.0, 0.5];
    let rho = single_particle_density_matrix(&product_state(&v, basis(4, 3)).unwrap()).unwrap();
    let n2: f64 = v.iter().map(|x| x * x).sum();
    for i in 0..4 {
        for j in 0..4 {
            assert!((rho.matrix()[(i, j)] - c(v[i] * v[j] / n2)).norm() < 1e-12);
        }
    }

    let b = basis(4, 2);
    let s = Fock::basis_state(b.clone(), b.rank(&[1, 1, 0, 0])).unwrap();
    let rho = single_particle_density_matrix(&s).unwrap();
    let want = DMatrix::from_diagonal(&DVector::from_vec(vec![c(0.5), c(0.5), c(0.0), c(0.0)]));
    assert!(max_abs(&(rho.matrix() - want)) < 1e-15);

    let un = Fock::from_amplitudes(b.clone(), vec![c(1.0); b.dim()]).unwrap();
    assert!(matches!(single_particle_density_matrix(&un), Err(Error::ContractViolation(_))));
}

#[test]
fn density_matrix_of_random_states_is_a_state() {
    let b = basis(4, 2);
    let v = isometry(&b);
    for seed in 0..10 {
        let psi = random_state(&b, seed);
        let rho = single_particle_density_matrix(&psi).unwrap();
        assert!((rho.trace() - c(1.0)).norm() < 1e-10);
        assert!(rho.hermiticity_defect() < 1e-12);
        assert!(rho.eigen().eigenvalues.iter().all(|&e| e >= -1e-10));
        let x = DVector::from_column_slice(psi.amplitudes());
        for mu in 0..4 {
            for nu in 0..4 {
                let f = first_quantized(|m, n| c(if m[0] == mu && n[0] == nu { 1.0 } else { 0.0 }), 4, 2, 1);
                let want = (x.adjoint() * (v.adjoint() * f * &v) * &x)[(0, 0)] / 2.0;
                assert!((rho.matrix()[(mu, nu)] - want).norm() < 1e-12);
            }
        }
    }
}

#[test]
fn fock_vectors_round_trip_through_the_binary_layout() {
    let b = basis(5, 3);
    let psi = random_state(&b, 3);
    let back: Fock = decode_fock(&encode_fock(&psi)).unwrap();
    assert_eq!(back.basis().modes(), 5);
    assert_eq!(back.basis().n_bos(), 3);
    assert_eq!(back.amplitudes(), psi.amplitudes());
    assert!(decode_fock::<f64>(&encode_fock(&psi)[..30]).is_err());
}
