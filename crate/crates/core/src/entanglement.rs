//! Entanglement between the two rotors: Schmidt spectrum, von Neumann
//! entropy, participation-ratio effective dimensions and the random-state
//! entropy estimate built on them.

use faer::Mat;
use num_complex::Complex64;

use crate::classical::Axis;
use crate::error::{Error, Result};
use crate::params::ModelParams;
use crate::quantum::{evolve_with, initial_state, MomentumGrid, QuantumState};

/// Singular values below this are exact zeros in the entropy sum.
pub const SINGULAR_VALUE_FLOOR: f64 = 1e-14;

/// Momentum rows or columns whose marginal probability falls below this are
/// dropped before the decomposition. The dropped block perturbs each
/// Schmidt value by at most √(n·cutoff).
const SUPPORT_CUTOFF: f64 = 1e-26;

/// Squared Schmidt coefficients, i.e. the eigenvalues of either reduced
/// density matrix, in descending order.
#[derive(Debug, Clone, PartialEq)]
pub struct SchmidtSpectrum {
    pub values: Vec<f64>,
}

impl SchmidtSpectrum {
    pub fn total(&self) -> f64 {
        self.values.iter().sum()
    }
}

fn support(marginal: &[f64]) -> Vec<usize> {
    marginal
        .iter()
        .enumerate()
        .filter(|(_, &p)| p >= SUPPORT_CUTOFF)
        .map(|(i, _)| i)
        .collect()
}

/// Schmidt spectrum of the state viewed as an n₁×n₂ amplitude matrix.
pub fn schmidt_spectrum(state: &QuantumState) -> Result<SchmidtSpectrum> {
    let rows = support(&state.marginal(Axis::First));
    let cols = support(&state.marginal(Axis::Second));
    if rows.is_empty() || cols.is_empty() {
        return Ok(SchmidtSpectrum { values: vec![] });
    }
    let n2 = state.grid.n2;
    let a = Mat::<Complex64>::from_fn(rows.len(), cols.len(), |i, j| state.amps[rows[i] * n2 + cols[j]]);
    let sv = a.singular_values().map_err(|e| Error::Linalg(format!("{e:?}")))?;
    let mut values: Vec<f64> = sv.into_iter().map(|s| s * s).collect();
    values.sort_by(|a, b| b.total_cmp(a));
    Ok(SchmidtSpectrum { values })
}

/// S = −Σ λ ln λ in nats, with 0·ln 0 = 0.
pub fn von_neumann_entropy(spec: &SchmidtSpectrum) -> f64 {
    let floor = SINGULAR_VALUE_FLOOR * SINGULAR_VALUE_FLOOR;
    let s: f64 = spec.values.iter().filter(|&&l| l > floor).map(|&l| -l * l.ln()).sum();
    s.max(0.0)
}

/// Participation ratio 1/Σᵢ P(i)² of one rotor's marginal distribution.
pub fn effective_dimension(state: &QuantumState, subsystem: Axis) -> f64 {
    participation_ratio(&state.marginal(subsystem))
}

pub fn participation_ratio(probs: &[f64]) -> f64 {
    let total: f64 = probs.iter().sum();
    let sq: f64 = probs.iter().map(|p| p * p).sum();
    total * total / sq
}

/// Mean entropy of a random pure state in an N₁×N₂ space,
/// ln N₁ − N₁/(2N₂) with N₁ ≤ N₂ (arguments are swapped if needed).
/// Clamped at zero for nearly unentangled dimensions.
///
/// Equal dimensions give ln N − 1/2; N₂ → ∞ gives ln N₁.
pub fn rmt_entropy_estimate(n1_eff: f64, n2_eff: f64) -> Result<f64> {
    if !(n1_eff >= 1.0) {
        return Err(Error::invalid("N1_eff", format!("must be >= 1, got {n1_eff}")));
    }
    if !(n2_eff >= 1.0) {
        return Err(Error::invalid("N2_eff", format!("must be >= 1, got {n2_eff}")));
    }
    let (small, large) = if n1_eff <= n2_eff {
        (n1_eff, n2_eff)
    } else {
        (n2_eff, n1_eff)
    };
    Ok((small.ln() - small / (2.0 * large)).max(0.0))
}

/// Entropy and its random-state estimate sampled along one evolution.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct EntanglementSeries {
    pub times: Vec<u64>,
    pub entropy: Vec<f64>,
    pub entropy_rmt: Vec<f64>,
    pub n1_eff: Vec<f64>,
    pub n2_eff: Vec<f64>,
}

impl EntanglementSeries {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    fn record(&mut self, t: u64, state: &QuantumState) -> Result<()> {
        let s = von_neumann_entropy(&schmidt_spectrum(state)?);
        let n1 = effective_dimension(state, Axis::First);
        let n2 = effective_dimension(state, Axis::Second);
        self.times.push(t);
        self.entropy.push(s);
        self.entropy_rmt.push(rmt_entropy_estimate(n1, n2)?);
        self.n1_eff.push(n1);
        self.n2_eff.push(n2);
        Ok(())
    }

    /// Mean entropy over samples with t in [lo, hi].
    pub fn window_mean(&self, lo: u64, hi: u64) -> Option<f64> {
        let v: Vec<f64> = self
            .times
            .iter()
            .zip(&self.entropy)
            .filter(|(&t, _)| t >= lo && t <= hi)
            .map(|(_, &s)| s)
            .collect();
        (!v.is_empty()).then(|| v.iter().sum::<f64>() / v.len() as f64)
    }

    /// Least-squares slope of S against ln t over t in [lo, hi], t > 0.
    pub fn log_growth_rate(&self, lo: u64, hi: u64) -> Option<f64> {
        let (x, y): (Vec<f64>, Vec<f64>) = self
            .times
            .iter()
            .zip(&self.entropy)
            .filter(|(&t, _)| t > 0 && t >= lo && t <= hi)
            .map(|(&t, &s)| ((t as f64).ln(), s))
            .unzip();
        crate::stats::linear_fit(&x, &y).map(|f| f.slope)
    }
}

/// Evolve the unentangled momentum eigenstate at the origin and record the
/// entanglement diagnostics at t = 0, every `record_every` kicks and at the
/// end.
pub fn entanglement_series(
    params: &ModelParams,
    grid: MomentumGrid,
    n_kicks: u64,
    record_every: u64,
    edge_limit: f64,
) -> Result<EntanglementSeries> {
    let mut out = EntanglementSeries::default();
    evolve_with(
        &initial_state(grid),
        params,
        n_kicks,
        record_every,
        edge_limit,
        |t, s| out.record(t, s),
    )?;
    Ok(out)
}
