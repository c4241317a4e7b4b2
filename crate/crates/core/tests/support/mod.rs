//! Dense-matrix reference implementations shared by the oracle tests and the
//! acceptance target.
#![allow(dead_code)]

use std::f64::consts::TAU;

use mlkr::quantum::{FloquetPropagator, MomentumGrid, QuantumState};
use mlkr::ModelParams;
use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::{RngExt, SeedableRng};
use rand_distr::StandardNormal;
use rand_pcg::Pcg64;

pub type CMat = DMatrix<Complex64>;

pub fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

/// Momentum values of one axis in increasing order.
pub fn momenta(n: usize) -> Vec<i64> {
    let h = (n / 2) as i64;
    (-h..h).collect()
}

/// Unitary change of basis from momentum (sorted) to position x_j = 2πj/n,
/// kernel exp(+i m x).
pub fn dft(n: usize) -> CMat {
    let ms = momenta(n);
    let s = 1.0 / (n as f64).sqrt();
    CMat::from_fn(n, n, |j, k| {
        let x = TAU * j as f64 / n as f64;
        Complex64::from_polar(s, ms[k] as f64 * x)
    })
}

/// exp(−iK cos x/ħ) represented in the sorted momentum basis.
pub fn kick_1d(n: usize, k: f64, hbar: f64) -> CMat {
    let w = dft(n);
    let diag = CMat::from_fn(n, n, |i, j| {
        if i == j {
            Complex64::from_polar(1.0, -k * (TAU * i as f64 / n as f64).cos() / hbar)
        } else {
            c(0.0, 0.0)
        }
    });
    w.adjoint() * diag * w
}

pub fn kron(a: &CMat, b: &CMat) -> CMat {
    let (ra, ca) = a.shape();
    let (rb, cb) = b.shape();
    CMat::from_fn(ra * rb, ca * cb, |i, j| a[(i / rb, j / cb)] * b[(i % rb, j % cb)])
}

/// Dense one-period operator on the sorted basis index (m₁, m₂) ↦ i₁·n₂ + i₂.
pub fn dense_floquet(p: &ModelParams, n1: usize, n2: usize) -> CMat {
    let (m1s, m2s) = (momenta(n1), momenta(n2));
    let dim = n1 * n2;
    let free = CMat::from_fn(dim, dim, |i, j| {
        if i != j {
            return c(0.0, 0.0);
        }
        let m1 = m1s[i / n2] as f64;
        let m2 = m2s[i % n2] as f64;
        let h = TAU * p.alpha1() * m1 + TAU * p.alpha2() * m2 + p.k_p() * m1 * m2;
        Complex64::from_polar(1.0, -p.period() * h / p.hbar())
    });
    let kick = kron(&kick_1d(n1, p.k(), p.hbar()), &kick_1d(n2, p.k(), p.hbar()));
    kick * free
}

pub fn random_vector(rng: &mut Pcg64, dim: usize) -> Vec<Complex64> {
    let mut v: Vec<Complex64> = (0..dim)
        .map(|_| c(rng.sample(StandardNormal), rng.sample(StandardNormal)))
        .collect();
    let norm = v.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt();
    v.iter_mut().for_each(|a| *a /= norm);
    v
}

/// Place sorted-order amplitudes into a state.
pub fn to_state(grid: MomentumGrid, sorted: &[Complex64]) -> QuantumState {
    let MomentumGrid { n1, n2 } = grid;
    let mut amps = vec![c(0.0, 0.0); n1 * n2];
    for (i1, &m1) in momenta(n1).iter().enumerate() {
        for (i2, &m2) in momenta(n2).iter().enumerate() {
            let s1 = MomentumGrid::index(m1, n1).unwrap();
            let s2 = MomentumGrid::index(m2, n2).unwrap();
            amps[s1 * n2 + s2] = sorted[i1 * n2 + i2];
        }
    }
    QuantumState::from_amplitudes(grid, amps).unwrap()
}

pub fn max_deviation(state: &QuantumState, sorted: &[Complex64]) -> f64 {
    let MomentumGrid { n1, n2 } = state.grid;
    let mut worst: f64 = 0.0;
    for (i1, &m1) in momenta(n1).iter().enumerate() {
        for (i2, &m2) in momenta(n2).iter().enumerate() {
            worst = worst.max((state.amp(m1, m2) - sorted[i1 * n2 + i2]).norm());
        }
    }
    worst
}

pub fn odd_params() -> ModelParams {
    ModelParams::new(1.3, 0.7, 3f64.sqrt(), 5f64.sqrt(), 0.9, 1.1).unwrap()
}

pub fn random_state(rng: &mut Pcg64, grid: MomentumGrid) -> QuantumState {
    QuantumState::from_amplitudes(grid, random_vector(rng, grid.len())).unwrap()
}

/// Worst amplitude gap between `steps` split-step kicks and the same number
/// of dense-operator powers, from a random start.
pub fn dense_evolution_deviation(p: &ModelParams, n1: usize, n2: usize, steps: usize, seed: u64) -> f64 {
    let mut rng = Pcg64::seed_from_u64(seed);
    let grid = MomentumGrid::new(n1, n2).unwrap();
    let v = random_vector(&mut rng, n1 * n2);
    let f = dense_floquet(p, n1, n2);
    let mut expect = DVector::from_vec(v.clone());
    let mut s = to_state(grid, &v);
    let mut prop = FloquetPropagator::new(p, grid);
    for _ in 0..steps {
        expect = &f * expect;
        prop.apply(&mut s);
    }
    max_deviation(&s, expect.as_slice())
}
