//! Floquet evolution of the two-rotor wavefunction on a truncated integer
//! momentum lattice.
//!
//! One period applies the momentum-diagonal free factor
//! `exp(−iT(2πα₁m₁ + 2πα₂m₂ + k_p m₁m₂)/ħ)` and then the position-diagonal
//! kick `exp(−iK(cos x₁ + cos x₂)/ħ)`. The two free terms commute, so they
//! are applied as a single phase. Basis changes use 2D FFTs with the
//! convention ψ(x) = Σₘ aₘ e^{imx} (momentum → position) and
//! aₘ = (1/n) Σⱼ ψ(xⱼ) e^{−imxⱼ} (position → momentum).
//!
//! Amplitudes are stored row-major with rotor 1 along rows, in FFT order:
//! index i holds momentum i for i < n/2 and i − n otherwise.

use std::f64::consts::TAU;
use std::sync::Arc;

use num_complex::Complex64;
use rayon::prelude::*;
use rustfft::{Fft, FftPlanner};
use serde::Serialize;

use crate::classical::{Axis, EnergySeries, MomentumHistogram};
use crate::error::{Error, Result};
use crate::params::ModelParams;

/// Largest probability tolerated in the outer momentum band.
pub const DEFAULT_EDGE_LIMIT: f64 = 1e-8;

/// Fraction of each axis, at each end, that forms the outer band.
pub const EDGE_BAND_FRACTION: f64 = 0.1;

/// Rows handed to one FFT task.
const ROWS_PER_TASK: usize = 16;

/// Finite window of the integer momentum lattice, mᵢ ∈ [−nᵢ/2, nᵢ/2).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct MomentumGrid {
    pub n1: usize,
    pub n2: usize,
}

impl MomentumGrid {
    pub fn new(n1: usize, n2: usize) -> Result<Self> {
        if n1 < 8 || n2 < 8 || !n1.is_multiple_of(2) || !n2.is_multiple_of(2) {
            return Err(Error::InvalidGrid { n1, n2 });
        }
        Ok(MomentumGrid { n1, n2 })
    }

    pub fn square(n: usize) -> Result<Self> {
        Self::new(n, n)
    }

    pub fn len(&self) -> usize {
        self.n1 * self.n2
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Momentum stored at FFT index `i` on an axis of size `n`.
    #[inline]
    pub fn momentum(i: usize, n: usize) -> i64 {
        if i < n / 2 {
            i as i64
        } else {
            i as i64 - n as i64
        }
    }

    /// FFT index of momentum `m`, if it lies in the window.
    pub fn index(m: i64, n: usize) -> Option<usize> {
        let half = (n / 2) as i64;
        if m < -half || m >= half {
            None
        } else {
            Some(m.rem_euclid(n as i64) as usize)
        }
    }

    /// Conjugate angle xⱼ = 2πj/n.
    pub fn position(j: usize, n: usize) -> f64 {
        TAU * j as f64 / n as f64
    }

    fn band_width(n: usize) -> i64 {
        ((EDGE_BAND_FRACTION * n as f64).ceil() as i64).max(1)
    }

    /// Whether momentum `m` lies in the outer band of an axis of size `n`.
    #[inline]
    pub fn in_edge_band(m: i64, n: usize) -> bool {
        let half = (n / 2) as i64;
        let w = Self::band_width(n);
        m < -half + w || m >= half - w
    }
}

/// Complex amplitudes over the two-rotor momentum grid.
#[derive(Debug, Clone, PartialEq)]
pub struct QuantumState {
    pub grid: MomentumGrid,
    /// Row-major, FFT order; see module docs.
    pub amps: Vec<Complex64>,
}

impl QuantumState {
    pub fn from_amplitudes(grid: MomentumGrid, amps: Vec<Complex64>) -> Result<Self> {
        if amps.len() != grid.len() {
            return Err(Error::invalid(
                "amps",
                format!("expected {} amplitudes, got {}", grid.len(), amps.len()),
            ));
        }
        Ok(QuantumState { grid, amps })
    }

    /// Amplitude at momenta (m₁, m₂), zero outside the window.
    pub fn amp(&self, m1: i64, m2: i64) -> Complex64 {
        match (
            MomentumGrid::index(m1, self.grid.n1),
            MomentumGrid::index(m2, self.grid.n2),
        ) {
            (Some(i), Some(j)) => self.amps[i * self.grid.n2 + j],
            _ => Complex64::new(0.0, 0.0),
        }
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amps.iter().map(|a| a.norm_sqr()).sum()
    }

    /// ⟨p₁² + p₂²⟩ with p = m (ħ = 1 quantization).
    pub fn mean_energy(&self) -> f64 {
        let MomentumGrid { n1, n2 } = self.grid;
        let m2sq: Vec<f64> = (0..n2)
            .map(|j| (MomentumGrid::momentum(j, n2) as f64).powi(2))
            .collect();
        self.amps
            .par_chunks(n2)
            .enumerate()
            .map(|(i, row)| {
                let m1sq = (MomentumGrid::momentum(i, n1) as f64).powi(2);
                row.iter()
                    .zip(&m2sq)
                    .map(|(a, &m2sq)| (m1sq + m2sq) * a.norm_sqr())
                    .sum::<f64>()
            })
            .collect::<Vec<_>>()
            .into_iter()
            .sum()
    }

    /// Probability in the outer band of either axis.
    pub fn edge_mass(&self) -> f64 {
        let MomentumGrid { n1, n2 } = self.grid;
        let edge2: Vec<bool> = (0..n2)
            .map(|j| MomentumGrid::in_edge_band(MomentumGrid::momentum(j, n2), n2))
            .collect();
        self.amps
            .chunks(n2)
            .enumerate()
            .map(|(i, row)| {
                if MomentumGrid::in_edge_band(MomentumGrid::momentum(i, n1), n1) {
                    row.iter().map(|a| a.norm_sqr()).sum::<f64>()
                } else {
                    row.iter()
                        .zip(&edge2)
                        .filter(|(_, &e)| e)
                        .map(|(a, _)| a.norm_sqr())
                        .sum::<f64>()
                }
            })
            .sum()
    }

    /// Marginal probabilities of one rotor, indexed in FFT order.
    pub fn marginal(&self, axis: Axis) -> Vec<f64> {
        let MomentumGrid { n1, n2 } = self.grid;
        match axis {
            Axis::First => self
                .amps
                .chunks(n2)
                .map(|row| row.iter().map(|a| a.norm_sqr()).sum())
                .collect(),
            Axis::Second => {
                let mut out = vec![0.0; n2];
                for row in self.amps.chunks(n2) {
                    for (o, a) in out.iter_mut().zip(row) {
                        *o += a.norm_sqr();
                    }
                }
                debug_assert_eq!(self.amps.len(), n1 * n2);
                out
            }
        }
    }
}

/// Momentum eigenstate at (m₁, m₂) = (0, 0).
pub fn initial_state(grid: MomentumGrid) -> QuantumState {
    let mut amps = vec![Complex64::new(0.0, 0.0); grid.len()];
    amps[0] = Complex64::new(1.0, 0.0);
    QuantumState { grid, amps }
}

/// Precomputed phases and FFT plans for repeated Floquet steps on one grid.
///
/// A step makes three passes over rows, each fused so a block of rows stays
/// in cache: free phase then inverse FFT along rotor 2; inverse FFT, kick
/// and forward FFT along rotor 1; forward FFT along rotor 2. Two transposes
/// sit between them. The kick is separable and kept as two 1D factors.
pub struct FloquetPropagator {
    grid: MomentumGrid,
    /// exp(−iT(2πα₁m₁ + 2πα₂m₂ + k_p m₁m₂)/ħ) in storage order.
    free: Vec<Complex64>,
    /// exp(−iK cos x₁/ħ)/(n₁n₂) and exp(−iK cos x₂/ħ).
    kick1: Vec<Complex64>,
    kick2: Vec<Complex64>,
    inv1: Arc<dyn Fft<f64>>,
    inv2: Arc<dyn Fft<f64>>,
    fwd1: Arc<dyn Fft<f64>>,
    fwd2: Arc<dyn Fft<f64>>,
    buf: Vec<Complex64>,
    pub edge_limit: f64,
}

impl std::fmt::Debug for FloquetPropagator {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("FloquetPropagator")
            .field("grid", &self.grid)
            .field("edge_limit", &self.edge_limit)
            .finish_non_exhaustive()
    }
}

/// Run `op(first_row, rows, scratch)` over parallel blocks of whole rows of
/// length `row_len`.
fn for_each_block<F>(data: &mut [Complex64], row_len: usize, scratch_len: usize, op: F)
where
    F: Fn(usize, &mut [Complex64], &mut [Complex64]) + Sync,
{
    data.par_chunks_mut(row_len * ROWS_PER_TASK).enumerate().for_each_init(
        || vec![Complex64::new(0.0, 0.0); scratch_len],
        |scratch, (block, rows)| op(block * ROWS_PER_TASK, rows, scratch),
    );
}

impl FloquetPropagator {
    pub fn new(params: &ModelParams, grid: MomentumGrid) -> Self {
        let MomentumGrid { n1, n2 } = grid;
        let (d1, d2) = params.drifts();
        let tau = params.period() / params.hbar();
        let k_p = params.k_p();
        let mut free = Vec::with_capacity(grid.len());
        for i in 0..n1 {
            let m1 = MomentumGrid::momentum(i, n1) as f64;
            for j in 0..n2 {
                let m2 = MomentumGrid::momentum(j, n2) as f64;
                free.push(Complex64::from_polar(1.0, -tau * (d1 * m1 + d2 * m2 + k_p * m1 * m2)));
            }
        }

        let strength = params.k() / params.hbar();
        let norm = 1.0 / (n1 * n2) as f64;
        let kick1 = (0..n1)
            .map(|j| Complex64::from_polar(norm, -strength * MomentumGrid::position(j, n1).cos()))
            .collect();
        let kick2 = (0..n2)
            .map(|j| Complex64::from_polar(1.0, -strength * MomentumGrid::position(j, n2).cos()))
            .collect();

        let mut planner = FftPlanner::new();
        FloquetPropagator {
            grid,
            free,
            kick1,
            kick2,
            inv1: planner.plan_fft_inverse(n1),
            inv2: planner.plan_fft_inverse(n2),
            fwd1: planner.plan_fft_forward(n1),
            fwd2: planner.plan_fft_forward(n2),
            buf: vec![Complex64::new(0.0, 0.0); grid.len()],
            edge_limit: DEFAULT_EDGE_LIMIT,
        }
    }

    pub fn grid(&self) -> MomentumGrid {
        self.grid
    }

    /// One period without the edge-mass check.
    pub fn apply(&mut self, state: &mut QuantumState) {
        assert_eq!(state.grid, self.grid, "state and propagator grids differ");
        let MomentumGrid { n1, n2 } = self.grid;
        let mut buf = std::mem::take(&mut self.buf);
        let amps = &mut state.amps;
        let this = &*self;

        let s2 = this.inv2.get_inplace_scratch_len();
        for_each_block(amps, n2, s2, |first, rows, scratch| {
            let phase = &this.free[first * n2..first * n2 + rows.len()];
            for (a, p) in rows.iter_mut().zip(phase) {
                *a *= p;
            }
            this.inv2.process_with_scratch(rows, scratch);
        });
        transpose::transpose(amps, &mut buf, n2, n1);

        let s1 = this
            .inv1
            .get_inplace_scratch_len()
            .max(this.fwd1.get_inplace_scratch_len());
        for_each_block(&mut buf, n1, s1, |first, rows, scratch| {
            this.inv1.process_with_scratch(rows, scratch);
            for (r, row) in rows.chunks_mut(n1).enumerate() {
                let k2 = this.kick2[first + r];
                for (a, k1) in row.iter_mut().zip(&this.kick1) {
                    *a *= k1 * k2;
                }
            }
            this.fwd1.process_with_scratch(rows, scratch);
        });

        transpose::transpose(&buf, amps, n1, n2);
        let s2 = this.fwd2.get_inplace_scratch_len();
        for_each_block(amps, n2, s2, |_, rows, scratch| {
            this.fwd2.process_with_scratch(rows, scratch);
        });
        self.buf = buf;
    }

    /// One period, then verify the outer band still holds negligible
    /// probability. `kick` is only used for the diagnostic.
    pub fn step(&mut self, state: &mut QuantumState, kick: u64) -> Result<()> {
        self.apply(state);
        let mass = state.edge_mass();
        if mass >= self.edge_limit || !mass.is_finite() {
            return Err(Error::EdgeMass {
                kick,
                mass,
                limit: self.edge_limit,
                n1: self.grid.n1,
                n2: self.grid.n2,
            });
        }
        Ok(())
    }
}

/// Single Floquet step with a freshly built propagator. Prefer
/// [`FloquetPropagator`] for repeated steps.
pub fn floquet_step(state: &QuantumState, params: &ModelParams) -> Result<QuantumState> {
    let mut prop = FloquetPropagator::new(params, state.grid);
    let mut next = state.clone();
    prop.step(&mut next, 1)?;
    Ok(next)
}

/// Evolve for `n_kicks` periods, calling `observe(t, state)` at t = 0, every
/// `record_every` kicks and after the final kick.
pub fn evolve_with<F>(
    state: &QuantumState,
    params: &ModelParams,
    n_kicks: u64,
    record_every: u64,
    edge_limit: f64,
    mut observe: F,
) -> Result<QuantumState>
where
    F: FnMut(u64, &QuantumState) -> Result<()>,
{
    if record_every == 0 {
        return Err(Error::invalid("record_every", "must be >= 1"));
    }
    let mut prop = FloquetPropagator::new(params, state.grid);
    prop.edge_limit = edge_limit;
    let mut psi = state.clone();
    observe(0, &psi)?;
    for t in 1..=n_kicks {
        prop.step(&mut psi, t)?;
        if t % record_every == 0 || t == n_kicks {
            observe(t, &psi)?;
        }
    }
    Ok(psi)
}

/// Evolve and record ⟨p₁² + p₂²⟩ at the sampling times of [`evolve_with`].
pub fn evolve(
    state: &QuantumState,
    params: &ModelParams,
    n_kicks: u64,
    record_every: u64,
) -> Result<(EnergySeries, QuantumState)> {
    let mut series = EnergySeries::default();
    let last = evolve_with(state, params, n_kicks, record_every, DEFAULT_EDGE_LIMIT, |t, s| {
        series.push(t, s.mean_energy());
        Ok(())
    })?;
    Ok((series, last))
}

/// Marginal momentum distribution of one rotor as unit-width bins centred
/// on the integer momenta, ordered by increasing momentum.
pub fn momentum_marginal(state: &QuantumState, axis: Axis) -> MomentumHistogram {
    let n = match axis {
        Axis::First => state.grid.n1,
        Axis::Second => state.grid.n2,
    };
    let marg = state.marginal(axis);
    let half = (n / 2) as i64;
    let bin_edges = (-half..=half).map(|m| m as f64 - 0.5).collect();
    let density = (-half..half)
        .map(|m| marg[MomentumGrid::index(m, n).unwrap()])
        .collect();
    MomentumHistogram { bin_edges, density }
}
