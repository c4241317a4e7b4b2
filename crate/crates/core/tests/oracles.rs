//! Independent dense-matrix oracles for the split-step propagator and the
//! Schmidt decomposition.

mod support;

use std::f64::consts::TAU;

use mlkr::entanglement::{schmidt_spectrum, von_neumann_entropy, SchmidtSpectrum};
use mlkr::quantum::{FloquetPropagator, MomentumGrid, QuantumState};
use mlkr::ModelParams;
use num_complex::Complex64;
use rand::{RngExt, SeedableRng};
use rand_pcg::Pcg64;
use support::*;

#[test]
fn one_step_matches_dense_operator_8x8() {
    let grid = MomentumGrid::square(8).unwrap();
    let mut rng = Pcg64::seed_from_u64(11);
    for p in [odd_params(), ModelParams::with_defaults(0.6, 2.0).unwrap()] {
        let v = random_vector(&mut rng, 64);
        let f = dense_floquet(&p, 8, 8);
        let expect = &f * nalgebra::DVector::from_vec(v.clone());
        let mut s = to_state(grid, &v);
        FloquetPropagator::new(&p, grid).apply(&mut s);
        let dev = max_deviation(&s, expect.as_slice());
        assert!(dev < 1e-10, "max deviation {dev:e}");
    }
}

#[test]
fn many_steps_match_dense_powers() {
    for (seed, (n1, n2)) in [(16, 16), (8, 16), (16, 8)].into_iter().enumerate() {
        let dev = dense_evolution_deviation(&odd_params(), n1, n2, 50, 12 + seed as u64);
        assert!(dev < 1e-8, "{n1}x{n2}: max deviation {dev:e}");
    }
}

#[test]
fn dense_operator_is_unitary() {
    let f = dense_floquet(&odd_params(), 8, 8);
    let id = CMat::identity(64, 64);
    let err = (f.adjoint() * &f - id).camax();
    assert!(err < 1e-12, "{err:e}");
}

/// Eigenvalues of Tr₂|ψ⟩⟨ψ| in descending order.
fn reduced_density_eigenvalues(state: &QuantumState) -> Vec<f64> {
    let MomentumGrid { n1, n2 } = state.grid;
    let a = CMat::from_row_slice(n1, n2, &state.amps);
    let rho = &a * a.adjoint();
    let mut ev: Vec<f64> = rho.symmetric_eigen().eigenvalues.iter().copied().collect();
    ev.sort_by(|x, y| y.partial_cmp(x).unwrap());
    ev
}

fn spectrum_deviation(spec: &SchmidtSpectrum, oracle: &[f64]) -> f64 {
    oracle
        .iter()
        .enumerate()
        .map(|(i, &e)| (spec.values.get(i).copied().unwrap_or(0.0) - e).abs())
        .fold(0.0, f64::max)
}

#[test]
fn schmidt_spectrum_matches_reduced_density_matrix() {
    let mut rng = Pcg64::seed_from_u64(13);
    for (n1, n2) in [(16, 16), (8, 16), (16, 8)] {
        let s = random_state(&mut rng, MomentumGrid::new(n1, n2).unwrap());
        let spec = schmidt_spectrum(&s).unwrap();
        let oracle = reduced_density_eigenvalues(&s);
        let dev = spectrum_deviation(&spec, &oracle);
        assert!(dev < 1e-10, "{n1}x{n2}: {dev:e}");
        assert!((spec.total() - 1.0).abs() < 1e-10);
        assert!(spec.values.windows(2).all(|w| w[0] >= w[1]));
    }
}

#[test]
fn rank_r_uniform_state_entropy() {
    let grid = MomentumGrid::square(16).unwrap();
    for r in [1usize, 2, 3, 7, 16] {
        let mut amps = vec![c(0.0, 0.0); grid.len()];
        for k in 0..r {
            // Distinct rows and columns, with arbitrary phases.
            let (i, j) = (k, (3 * k + 5) % 16);
            amps[i * 16 + j] = Complex64::from_polar(1.0 / (r as f64).sqrt(), 0.37 * k as f64);
        }
        let s = QuantumState::from_amplitudes(grid, amps).unwrap();
        let entropy = von_neumann_entropy(&schmidt_spectrum(&s).unwrap());
        assert!((entropy - (r as f64).ln()).abs() < 1e-12, "r = {r}: {entropy}");
    }
}

#[test]
fn product_state_entropy_is_zero() {
    let mut rng = Pcg64::seed_from_u64(14);
    let phi = random_vector(&mut rng, 16);
    let chi = random_vector(&mut rng, 8);
    let amps = phi.iter().flat_map(|a| chi.iter().map(move |b| a * b)).collect();
    let s = QuantumState::from_amplitudes(MomentumGrid::new(16, 8).unwrap(), amps).unwrap();
    assert!(von_neumann_entropy(&schmidt_spectrum(&s).unwrap()).abs() < 1e-12);
}

fn transposed(s: &QuantumState) -> QuantumState {
    let MomentumGrid { n1, n2 } = s.grid;
    let mut amps = vec![c(0.0, 0.0); n1 * n2];
    for i in 0..n1 {
        for j in 0..n2 {
            amps[j * n1 + i] = s.amps[i * n2 + j];
        }
    }
    QuantumState::from_amplitudes(MomentumGrid::new(n2, n1).unwrap(), amps).unwrap()
}

#[test]
fn entropy_symmetric_under_exchange() {
    let mut rng = Pcg64::seed_from_u64(15);
    let s = random_state(&mut rng, MomentumGrid::new(16, 32).unwrap());
    let a = von_neumann_entropy(&schmidt_spectrum(&s).unwrap());
    let b = von_neumann_entropy(&schmidt_spectrum(&transposed(&s)).unwrap());
    assert!((a - b).abs() < 1e-10, "{a} vs {b}");
}

#[test]
fn entropy_invariant_under_local_phases() {
    let mut rng = Pcg64::seed_from_u64(16);
    let s = random_state(&mut rng, MomentumGrid::square(16).unwrap());
    let before = von_neumann_entropy(&schmidt_spectrum(&s).unwrap());
    let th1: Vec<f64> = (0..16).map(|_| TAU * rng.random::<f64>()).collect();
    let th2: Vec<f64> = (0..16).map(|_| TAU * rng.random::<f64>()).collect();
    let amps = s
        .amps
        .iter()
        .enumerate()
        .map(|(k, a)| a * Complex64::from_polar(1.0, th1[k / 16] + th2[k % 16]))
        .collect();
    let rotated = QuantumState::from_amplitudes(s.grid, amps).unwrap();
    let after = von_neumann_entropy(&schmidt_spectrum(&rotated).unwrap());
    assert!((before - after).abs() < 1e-10);
}

#[test]
fn haar_random_mean_entropy() {
    let mut rng = Pcg64::seed_from_u64(17);
    let grid = MomentumGrid::square(32).unwrap();
    let n = 200;
    let mean = (0..n)
        .map(|_| von_neumann_entropy(&schmidt_spectrum(&random_state(&mut rng, grid)).unwrap()))
        .sum::<f64>()
        / n as f64;
    let expect = 32f64.ln() - 0.5;
    assert!((mean - expect).abs() < 0.05, "mean {mean}, expected {expect}");
}
