//! Transport exponent β from ⟨E⟩ ∼ t^β, regime classification, and sweeps
//! over the (K, k_p) plane.

use std::fmt;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::classical::EnergySeries;
use crate::error::{Error, Result};
use crate::params::ModelParams;
use crate::quantum::{evolve_with, initial_state, MomentumGrid, DEFAULT_EDGE_LIMIT, EDGE_BAND_FRACTION};
use crate::stats::linear_fit;

/// Below this β the quantum dynamics counts as localized.
pub const BETA_LOC: f64 = 0.15;
/// At or above this β the dynamics counts as (nearly) normal diffusion.
pub const BETA_DIFFUSIVE: f64 = 0.8;
/// Reported β is clamped to this range; values outside are flagged.
pub const BETA_REPORT_RANGE: (f64, f64) = (-0.1, 2.2);
/// Minimum number of samples inside the fit window.
pub const MIN_FIT_POINTS: usize = 10;

/// Inclusive range of kick indices used by a fit.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FitWindow {
    pub t_min: u64,
    pub t_max: u64,
}

impl FitWindow {
    /// [max(100, 0.1·t_max), t_max], skipping the early transient.
    pub fn default_for(t_max: u64) -> Self {
        let t_min = (t_max as f64 * 0.1).ceil() as u64;
        FitWindow {
            t_min: t_min.max(100),
            t_max,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BetaFit {
    /// Slope of ln⟨E⟩ against ln t, clamped to [`BETA_REPORT_RANGE`].
    pub beta: f64,
    /// Unclamped slope.
    pub raw_beta: f64,
    /// Fitted ln of the prefactor.
    pub intercept: f64,
    pub window: FitWindow,
    pub r_squared: f64,
    pub n_points: usize,
    pub out_of_range: bool,
}

/// Least-squares fit of ln E = β ln t + c over `window` (or the default
/// window for the series' last time).
pub fn fit_beta(series: &EnergySeries, window: Option<FitWindow>) -> Result<BetaFit> {
    let t_last = *series.times.last().ok_or_else(|| Error::Fit("empty series".into()))?;
    let window = window.unwrap_or_else(|| FitWindow::default_for(t_last));
    if window.t_min > window.t_max {
        return Err(Error::Fit(format!(
            "window [{}, {}] is empty",
            window.t_min, window.t_max
        )));
    }
    let mut lt = Vec::new();
    let mut le = Vec::new();
    for (&t, &e) in series.times.iter().zip(&series.values) {
        if t < window.t_min || t > window.t_max {
            continue;
        }
        if t == 0 {
            continue;
        }
        if !(e > 0.0) || !e.is_finite() {
            return Err(Error::Fit(format!("non-positive energy {e} at t = {t}")));
        }
        lt.push((t as f64).ln());
        le.push(e.ln());
    }
    if lt.len() < MIN_FIT_POINTS {
        return Err(Error::Fit(format!(
            "{} points in window [{}, {}], need {MIN_FIT_POINTS}",
            lt.len(),
            window.t_min,
            window.t_max
        )));
    }
    let fit = linear_fit(&lt, &le).ok_or_else(|| Error::Fit("degenerate window".into()))?;
    let (lo, hi) = BETA_REPORT_RANGE;
    let raw = fit.slope;
    Ok(BetaFit {
        beta: raw.clamp(lo, hi),
        raw_beta: raw,
        intercept: fit.intercept,
        window,
        r_squared: fit.r_squared,
        n_points: lt.len(),
        out_of_range: !(lo..=hi).contains(&raw),
    })
}

/// Dynamical regimes of the quantum transport.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Regime {
    /// Classically regular (Kₛ < 1) and localized.
    I,
    /// Classically chaotic yet localized: dynamical localization.
    II,
    /// Quantum subdiffusion.
    III,
    /// (Nearly) normal quantum diffusion.
    IV,
}

impl fmt::Display for Regime {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Regime::I => "I",
            Regime::II => "II",
            Regime::III => "III",
            Regime::IV => "IV",
        })
    }
}

/// Regime from the fitted exponent and Kₛ = K·k_p, whose unit line
/// separates classically regular from chaotic motion.
pub fn classify_regime(beta: f64, params: &ModelParams) -> Regime {
    classify(beta, params.ks())
}

pub fn classify(beta: f64, ks: f64) -> Regime {
    if beta >= BETA_DIFFUSIVE {
        Regime::IV
    } else if beta >= BETA_LOC {
        Regime::III
    } else if ks < 1.0 {
        Regime::I
    } else {
        Regime::II
    }
}

/// `n` log-spaced values from `lo` to `hi` inclusive.
pub fn log_space(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![lo];
    }
    let (a, b) = (lo.ln(), hi.ln());
    (0..n)
        .map(|i| (a + (b - a) * i as f64 / (n - 1) as f64).exp())
        .collect()
}

/// Edge of the auto-sized grid, in quasi-linear momentum spreads.
pub const AUTO_GRID_SIGMAS: f64 = 7.0;

/// How each sweep cell picks its momentum grid. The choice is made before
/// the run and never revised; cells that still overflow are invalid.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum GridPolicy {
    Fixed(MomentumGrid),
    /// Smallest power-of-two square grid whose outer band starts beyond
    /// [`AUTO_GRID_SIGMAS`] times the quasi-linear spread K·√(t/2) per
    /// rotor at the last kick, clamped to [min, max].
    Auto {
        min: usize,
        max: usize,
    },
}

impl GridPolicy {
    pub fn grid_for(&self, k: f64, n_kicks: u64) -> Result<MomentumGrid> {
        match *self {
            GridPolicy::Fixed(g) => Ok(g),
            GridPolicy::Auto { min, max } => {
                let spread = k * (n_kicks as f64 / 2.0).sqrt();
                let need = AUTO_GRID_SIGMAS * spread / (0.5 - EDGE_BAND_FRACTION);
                let n = (need.ceil().max(1.0) as usize).next_power_of_two();
                MomentumGrid::square(n.clamp(min, max))
            }
        }
    }
}

/// Settings for a (K, k_p) sweep.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepConfig {
    pub k_values: Vec<f64>,
    pub kp_values: Vec<f64>,
    pub n_kicks: u64,
    pub record_every: u64,
    pub grid: GridPolicy,
    pub edge_limit: f64,
    pub alpha1: f64,
    pub alpha2: f64,
}

impl SweepConfig {
    /// Log-spaced axes over the given ranges with the default winding
    /// numbers.
    pub fn log_grid(
        k_range: (f64, f64),
        kp_range: (f64, f64),
        resolution: usize,
        n_kicks: u64,
        grid: MomentumGrid,
    ) -> Result<Self> {
        for (name, (lo, hi)) in [("K_range", k_range), ("kp_range", kp_range)] {
            if !(lo > 0.0 && hi >= lo && hi.is_finite()) {
                return Err(Error::Config {
                    path: name.into(),
                    msg: format!("need 0 < lo <= hi, got [{lo}, {hi}]"),
                });
            }
        }
        if resolution < 2 {
            return Err(Error::Config {
                path: "resolution".into(),
                msg: "need at least 2 points per axis".into(),
            });
        }
        Ok(SweepConfig {
            k_values: log_space(k_range.0, k_range.1, resolution),
            kp_values: log_space(kp_range.0, kp_range.1, resolution),
            n_kicks,
            record_every: (n_kicks / 500).max(1),
            grid: GridPolicy::Fixed(grid),
            edge_limit: DEFAULT_EDGE_LIMIT,
            alpha1: crate::params::DEFAULT_ALPHA1,
            alpha2: crate::params::DEFAULT_ALPHA2,
        })
    }
}

/// Outcome for one (K, k_p) cell.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Cell {
    pub k: f64,
    pub k_p: f64,
    pub grid: MomentumGrid,
    /// `None` when the run was invalid.
    pub fit: Option<BetaFit>,
    pub regime: Option<Regime>,
    /// Why the cell is invalid, if it is.
    pub note: Option<String>,
}

impl Cell {
    pub fn valid(&self) -> bool {
        self.fit.is_some()
    }
}

/// β and regime over a rectangular (K, k_p) grid, row-major with K as the
/// slow index.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PhaseDiagram {
    pub k_values: Vec<f64>,
    pub kp_values: Vec<f64>,
    pub cells: Vec<Cell>,
}

impl PhaseDiagram {
    pub fn cell(&self, ik: usize, ikp: usize) -> &Cell {
        &self.cells[ik * self.kp_values.len() + ikp]
    }

    /// β matrix indexed [K][k_p]; NaN marks invalid cells.
    pub fn beta_matrix(&self) -> Vec<Vec<f64>> {
        self.cells
            .chunks(self.kp_values.len())
            .map(|row| row.iter().map(|c| c.fit.map_or(f64::NAN, |f| f.beta)).collect())
            .collect()
    }

    pub fn regime_matrix(&self) -> Vec<Vec<Option<Regime>>> {
        self.cells
            .chunks(self.kp_values.len())
            .map(|row| row.iter().map(|c| c.regime).collect())
            .collect()
    }
}

/// Run the quantum evolution for one cell and classify it. Edge-mass
/// violations and fit failures yield an invalid, unlabelled cell.
pub fn run_cell(k: f64, k_p: f64, cfg: &SweepConfig) -> Result<Cell> {
    let params = ModelParams::new(k, k_p, cfg.alpha1, cfg.alpha2, 1.0, 1.0)?;
    let grid = cfg.grid.grid_for(k, cfg.n_kicks)?;
    let mut series = EnergySeries::default();
    let outcome = evolve_with(
        &initial_state(grid),
        &params,
        cfg.n_kicks,
        cfg.record_every,
        cfg.edge_limit,
        |t, s| {
            series.push(t, s.mean_energy());
            Ok(())
        },
    );
    let invalid = |note: String| Cell {
        k,
        k_p,
        grid,
        fit: None,
        regime: None,
        note: Some(note),
    };
    match outcome {
        Ok(_) => {}
        Err(e @ Error::EdgeMass { .. }) => return Ok(invalid(e.to_string())),
        Err(e) => return Err(e),
    }
    match fit_beta(&series, None) {
        Ok(fit) => Ok(Cell {
            k,
            k_p,
            grid,
            fit: Some(fit),
            regime: Some(classify_regime(fit.beta, &params)),
            note: None,
        }),
        Err(e @ Error::Fit(_)) => Ok(invalid(e.to_string())),
        Err(e) => Err(e),
    }
}

/// Evaluate every cell of the sweep. Cells run in parallel on the current
/// rayon pool and are returned in deterministic row-major order.
pub fn sweep_phase_diagram(cfg: &SweepConfig) -> Result<PhaseDiagram> {
    if cfg.k_values.is_empty() || cfg.kp_values.is_empty() {
        return Err(Error::Config {
            path: "sweep".into(),
            msg: "both axes need at least one value".into(),
        });
    }
    let jobs: Vec<(f64, f64)> = cfg
        .k_values
        .iter()
        .flat_map(|&k| cfg.kp_values.iter().map(move |&kp| (k, kp)))
        .collect();
    let cells = jobs
        .into_par_iter()
        .map(|(k, kp)| run_cell(k, kp, cfg))
        .collect::<Result<Vec<_>>>()?;
    Ok(PhaseDiagram {
        k_values: cfg.k_values.clone(),
        kp_values: cfg.kp_values.clone(),
        cells,
    })
}
