//! Classical stroboscopic map, ensemble evolution and the derived
//! observables (energy series, Poincaré sections, momentum histograms).

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::params::ModelParams;
use crate::phase_space::{reduce_angle, ClassicalEnsemble, ClassicalState, ScaledState};
use crate::stats::linear_fit;

/// Default bound on |p| beyond which a trajectory counts as diverged.
pub const DEFAULT_MOMENTUM_BOUND: f64 = 1e12;

/// Members per work unit in parallel evolution. Fixed so that the reduction
/// order, and therefore every rounded sum, is independent of thread count.
const CHUNK: usize = 256;

/// One kick followed by one free rotation.
///
/// Momenta are updated first and the new momenta drive the angles. The
/// coupling is crossed: x₁ drifts with p₂ and x₂ with p₁.
#[inline]
pub fn map_step(s: &ClassicalState, params: &ModelParams) -> ClassicalState {
    let k = params.k();
    let k_p = params.k_p();
    let (d1, d2) = params.drifts();
    let p1 = s.p1 + k * s.x1.sin();
    let p2 = s.p2 + k * s.x2.sin();
    ClassicalState {
        x1: reduce_angle(s.x1 + d1 + k_p * p2),
        x2: reduce_angle(s.x2 + d2 + k_p * p1),
        p1,
        p2,
    }
}

/// The same map in scaled momenta Pᵢ = k_p·pᵢ, which depends on K and k_p
/// only through Kₛ.
#[inline]
pub fn scaled_map_step(s: &ScaledState, params: &ModelParams) -> ScaledState {
    let ks = params.ks();
    let (d1, d2) = params.drifts();
    let big_p1 = s.big_p1 + ks * s.x1.sin();
    let big_p2 = s.big_p2 + ks * s.x2.sin();
    ScaledState {
        x1: reduce_angle(s.x1 + d1 + big_p2),
        x2: reduce_angle(s.x2 + d2 + big_p1),
        big_p1,
        big_p2,
    }
}

/// Mean energy sampled at increasing kick indices.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct EnergySeries {
    pub times: Vec<u64>,
    pub values: Vec<f64>,
}

impl EnergySeries {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn push(&mut self, t: u64, e: f64) {
        debug_assert!(self.times.last().is_none_or(|&last| t > last));
        self.times.push(t);
        self.values.push(e);
    }

    /// Least-squares slope of E against t over the last 80% of the samples.
    pub fn diffusion_slope(&self) -> Result<f64> {
        let skip = self.len() / 5;
        let t: Vec<f64> = self.times[skip..].iter().map(|&t| t as f64).collect();
        let fit = linear_fit(&t, &self.values[skip..])
            .ok_or_else(|| Error::Fit("need at least two distinct times".into()))?;
        Ok(fit.slope)
    }
}

/// Quasi-linear diffusion coefficient D₀ = K².
pub fn quasilinear_d0(params: &ModelParams) -> f64 {
    params.k() * params.k()
}

fn check_bound(s: &ClassicalState, member: usize, kick: u64, bound: f64) -> Result<()> {
    let m = s.p1.abs().max(s.p2.abs());
    if m > bound || !m.is_finite() {
        return Err(Error::Divergence {
            member,
            kick,
            value: m,
            bound,
        });
    }
    Ok(())
}

/// Evolution settings for an ensemble run.
#[derive(Debug, Clone, Copy)]
pub struct EvolveOptions {
    pub n_kicks: u64,
    pub record_every: u64,
    pub momentum_bound: f64,
}

impl EvolveOptions {
    pub fn new(n_kicks: u64, record_every: u64) -> Self {
        EvolveOptions {
            n_kicks,
            record_every,
            momentum_bound: DEFAULT_MOMENTUM_BOUND,
        }
    }

    fn validate(&self) -> Result<()> {
        if self.n_kicks == 0 {
            return Err(Error::invalid("n_kicks", "must be >= 1"));
        }
        if self.record_every == 0 {
            return Err(Error::invalid("record_every", "must be >= 1"));
        }
        Ok(())
    }

    fn sample_times(&self) -> Vec<u64> {
        let mut times: Vec<u64> = (0..=self.n_kicks).step_by(self.record_every as usize).collect();
        if *times.last().unwrap() != self.n_kicks {
            times.push(self.n_kicks);
        }
        times
    }
}

/// Evolve every member for `n_kicks` kicks, recording the ensemble-mean
/// energy at t = 0, every `record_every` kicks, and at the final kick.
///
/// Members are processed in fixed-size chunks in parallel; per-sample sums
/// are formed inside each chunk in member order and then combined in chunk
/// order, so results are bitwise independent of the worker count.
pub fn evolve_ensemble(
    ens: &ClassicalEnsemble,
    params: &ModelParams,
    opts: EvolveOptions,
) -> Result<(EnergySeries, ClassicalEnsemble)> {
    opts.validate()?;
    if ens.is_empty() {
        return Err(Error::EmptyEnsemble);
    }
    let times = opts.sample_times();
    let n_samples = times.len();

    let chunks: Vec<(Vec<f64>, Vec<ClassicalState>)> = ens
        .members
        .par_chunks(CHUNK)
        .enumerate()
        .map(|(ci, chunk)| {
            let mut sums = vec![0.0; n_samples];
            let mut out = Vec::with_capacity(chunk.len());
            for (j, s0) in chunk.iter().enumerate() {
                let member = ci * CHUNK + j;
                let mut s = *s0;
                let mut slot = 0;
                let mut energies = vec![0.0; n_samples];
                energies[0] = s.energy();
                slot += 1;
                for kick in 1..=opts.n_kicks {
                    s = map_step(&s, params);
                    check_bound(&s, member, kick, opts.momentum_bound)?;
                    if slot < n_samples && times[slot] == kick {
                        energies[slot] = s.energy();
                        slot += 1;
                    }
                }
                for (acc, e) in sums.iter_mut().zip(&energies) {
                    *acc += e;
                }
                out.push(s);
            }
            Ok((sums, out))
        })
        .collect::<Result<_>>()?;

    let n = ens.len() as f64;
    let mut totals = vec![0.0; n_samples];
    let mut members = Vec::with_capacity(ens.len());
    for (sums, out) in chunks {
        for (acc, v) in totals.iter_mut().zip(sums) {
            *acc += v;
        }
        members.extend(out);
    }
    let series = EnergySeries {
        times,
        values: totals.into_iter().map(|v| v / n).collect(),
    };
    Ok((
        series,
        ClassicalEnsemble {
            members,
            seed: ens.seed,
        },
    ))
}

/// One recorded (x₁, p₁) point of a stroboscopic section.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SectionPoint {
    pub traj_id: usize,
    pub t: u64,
    pub x1: f64,
    pub p1: f64,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct SectionData {
    pub points: Vec<SectionPoint>,
    pub kicks: u64,
}

impl SectionData {
    pub fn trajectory(&self, id: usize) -> impl Iterator<Item = &SectionPoint> {
        self.points.iter().filter(move |p| p.traj_id == id)
    }
}

/// Record (x₁, p₁) after every kick for every member, ordered by trajectory
/// then time.
pub fn poincare_section(ens: &ClassicalEnsemble, params: &ModelParams, n_kicks: u64) -> Result<SectionData> {
    poincare_section_bounded(ens, params, n_kicks, DEFAULT_MOMENTUM_BOUND)
}

pub fn poincare_section_bounded(
    ens: &ClassicalEnsemble,
    params: &ModelParams,
    n_kicks: u64,
    bound: f64,
) -> Result<SectionData> {
    if n_kicks == 0 {
        return Err(Error::invalid("n_kicks", "must be >= 1"));
    }
    let per_traj: Vec<Vec<SectionPoint>> = ens
        .members
        .par_iter()
        .enumerate()
        .map(|(id, s0)| {
            let mut s = *s0;
            let mut pts = Vec::with_capacity(n_kicks as usize);
            for t in 1..=n_kicks {
                s = map_step(&s, params);
                check_bound(&s, id, t, bound)?;
                pts.push(SectionPoint {
                    traj_id: id,
                    t,
                    x1: s.x1,
                    p1: s.p1,
                });
            }
            Ok(pts)
        })
        .collect::<Result<_>>()?;
    Ok(SectionData {
        points: per_traj.into_iter().flatten().collect(),
        kicks: n_kicks,
    })
}

/// Which rotor's momentum to histogram.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Axis {
    First,
    Second,
}

/// Normalized momentum density on contiguous bins.
#[derive(Debug, Clone, PartialEq)]
pub struct MomentumHistogram {
    /// `bins + 1` increasing edges.
    pub bin_edges: Vec<f64>,
    pub density: Vec<f64>,
}

impl MomentumHistogram {
    /// Σ density·width, which is 1 for a normalized histogram.
    pub fn integral(&self) -> f64 {
        self.density
            .iter()
            .zip(self.bin_edges.windows(2))
            .map(|(d, w)| d * (w[1] - w[0]))
            .sum()
    }

    pub fn centers(&self) -> Vec<f64> {
        self.bin_edges.windows(2).map(|w| 0.5 * (w[0] + w[1])).collect()
    }

    /// Mean and variance of the binned density.
    pub fn moments(&self) -> (f64, f64) {
        let c = self.centers();
        let w: Vec<f64> = self
            .density
            .iter()
            .zip(self.bin_edges.windows(2))
            .map(|(d, e)| d * (e[1] - e[0]))
            .collect();
        let mean: f64 = c.iter().zip(&w).map(|(c, w)| c * w).sum();
        let var: f64 = c.iter().zip(&w).map(|(c, w)| (c - mean).powi(2) * w).sum();
        (mean, var)
    }
}

pub const DEFAULT_HISTOGRAM_BINS: usize = 201;

/// Histogram of p₁ (or p₂) on `bins` uniform bins spanning ±5σ about the
/// empirical mean. Degenerate (zero-spread) samples get a unit-width window
/// centred on the common value.
pub fn momentum_histogram(ens: &ClassicalEnsemble, axis: Axis, bins: usize) -> Result<MomentumHistogram> {
    if ens.is_empty() {
        return Err(Error::EmptyEnsemble);
    }
    if bins < 2 {
        return Err(Error::invalid("bins", "must be >= 2"));
    }
    let values: Vec<f64> = ens
        .members
        .iter()
        .map(|s| match axis {
            Axis::First => s.p1,
            Axis::Second => s.p2,
        })
        .collect();
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    let sigma = var.sqrt();
    let half = if sigma > 0.0 { 5.0 * sigma } else { 0.5 };
    let (lo, hi) = (mean - half, mean + half);
    let width = (hi - lo) / bins as f64;
    let bin_edges: Vec<f64> = (0..=bins).map(|i| lo + width * i as f64).collect();

    let mut counts = vec![0u64; bins];
    let mut kept = 0u64;
    for v in values {
        if v < lo || v > hi {
            continue;
        }
        let i = (((v - lo) / width) as usize).min(bins - 1);
        counts[i] += 1;
        kept += 1;
    }
    let density = counts
        .iter()
        .zip(bin_edges.windows(2))
        .map(|(&c, e)| c as f64 / (kept as f64 * (e[1] - e[0])))
        .collect();
    Ok(MomentumHistogram { bin_edges, density })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::phase_space::{angle_distance, uniform_angle_ensemble};
    use std::f64::consts::{FRAC_PI_2, TAU};

    fn params(k: f64, k_p: f64) -> ModelParams {
        ModelParams::with_defaults(k, k_p).unwrap()
    }

    #[test]
    fn zero_kick_only_rotates() {
        let p = params(0.0, 1.5);
        let s = ClassicalState::new(1.0, 2.0, 0.3, -0.7);
        let n = map_step(&s, &p);
        assert_eq!((n.p1, n.p2), (0.3, -0.7));
        let want = reduce_angle(1.0 + TAU * p.alpha1() + 1.5 * -0.7);
        assert!(angle_distance(n.x1, want) < 1e-15);
    }

    #[test]
    fn hand_evaluated_step() {
        // K = 1, k_p = 0: p₁ = 0 + sin(π/2) = 1, p₂ = 0 + sin 0 = 0.
        let p = params(1.0, 0.0);
        let s = ClassicalState::new(FRAC_PI_2, 0.0, 0.0, 0.0);
        let n = map_step(&s, &p);
        assert_eq!(n.p1, 1.0);
        assert_eq!(n.p2, 0.0);
        assert!(angle_distance(n.x1, FRAC_PI_2 + TAU * p.alpha1()) < 1e-15);
        assert!(angle_distance(n.x2, TAU * p.alpha2()) < 1e-15);
    }

    #[test]
    fn quasilinear_values() {
        assert!((quasilinear_d0(&params(0.6, 2.0)) - 0.36).abs() < 1e-15);
        assert_eq!(quasilinear_d0(&params(0.0, 2.0)), 0.0);
        assert_eq!(quasilinear_d0(&params(3.0, 2.0)), 9.0);
    }

    #[test]
    fn zero_kick_keeps_zero_energy() {
        let ens = uniform_angle_ensemble(100, 1).unwrap();
        let (series, _) = evolve_ensemble(&ens, &params(0.0, 2.0), EvolveOptions::new(200, 10)).unwrap();
        assert!(series.values.iter().all(|&e| e == 0.0));
        assert_eq!(series.times.first(), Some(&0));
        assert_eq!(series.times.last(), Some(&200));
    }

    #[test]
    fn sample_times_include_final_kick() {
        let opts = EvolveOptions::new(25, 10);
        assert_eq!(opts.sample_times(), vec![0, 10, 20, 25]);
    }

    #[test]
    fn evolve_rejects_bad_options() {
        let ens = uniform_angle_ensemble(4, 1).unwrap();
        let p = params(1.0, 1.0);
        assert!(evolve_ensemble(&ens, &p, EvolveOptions::new(0, 1)).is_err());
        assert!(evolve_ensemble(&ens, &p, EvolveOptions::new(10, 0)).is_err());
    }

    #[test]
    fn divergence_guard_trips() {
        let ens = uniform_angle_ensemble(8, 1).unwrap();
        let mut opts = EvolveOptions::new(1000, 10);
        opts.momentum_bound = 5.0;
        let err = evolve_ensemble(&ens, &params(3.0, 2.0), opts).unwrap_err();
        assert!(matches!(err, Error::Divergence { .. }), "{err}");
    }

    #[test]
    fn uncoupled_energy_stays_bounded() {
        // With k_p = 0 the angles rotate rigidly, so for uniformly spread
        // angles ⟨pᵢ²⟩(t) = (K²/2)·sin²(παᵢt)/sin²(παᵢ): bounded and
        // quasi-periodic, returning close to zero near rational αᵢt.
        use std::f64::consts::PI;
        for k in [0.5, 3.0, 10.0] {
            let p = params(k, 0.0);
            let bound = 0.5 * k * k * (1.0 / (PI * p.alpha1()).sin().powi(2) + 1.0 / (PI * p.alpha2()).sin().powi(2));
            let ens = uniform_angle_ensemble(2000, 11).unwrap();
            let (series, _) = evolve_ensemble(&ens, &p, EvolveOptions::new(10_000, 10)).unwrap();
            let max = series.values.iter().cloned().fold(f64::MIN, f64::max);
            assert!(max < 1.1 * bound, "K={k}: max {max} bound {bound}");
            let half = series.len() / 2;
            let early = series.values[..half].iter().sum::<f64>() / half as f64;
            let late = series.values[half..].iter().sum::<f64>() / (series.len() - half) as f64;
            assert!((late / early - 1.0).abs() < 0.1, "K={k}: early {early} late {late}");
        }
    }

    #[test]
    fn uncoupled_energy_matches_closed_form() {
        use std::f64::consts::PI;
        let p = params(1.0, 0.0);
        let ens = uniform_angle_ensemble(20_000, 4).unwrap();
        let (series, _) = evolve_ensemble(&ens, &p, EvolveOptions::new(200, 1)).unwrap();
        for (&t, &e) in series.times.iter().zip(&series.values) {
            let t = t as f64;
            let want = 0.5
                * ((PI * p.alpha1() * t).sin().powi(2) / (PI * p.alpha1()).sin().powi(2)
                    + (PI * p.alpha2() * t).sin().powi(2) / (PI * p.alpha2()).sin().powi(2));
            assert!((e - want).abs() < 0.05 * (1.0 + want), "t={t}: {e} vs {want}");
        }
    }

    #[test]
    fn section_with_zero_kick_is_flat() {
        let ens = ClassicalEnsemble {
            members: vec![ClassicalState::new(0.3, 0.1, 0.25, 0.0)],
            seed: 0,
        };
        let sec = poincare_section(&ens, &params(0.0, 1.0), 50).unwrap();
        assert_eq!(sec.points.len(), 50);
        assert!(sec.points.iter().all(|p| p.p1 == 0.25));
        assert!(sec.points.iter().all(|p| (0.0..TAU).contains(&p.x1)));
    }

    #[test]
    fn section_is_tagged_and_ordered() {
        let ens = uniform_angle_ensemble(3, 5).unwrap();
        let sec = poincare_section(&ens, &params(0.6, 2.0), 20).unwrap();
        assert_eq!(sec.kicks, 20);
        assert_eq!(sec.trajectory(1).count(), 20);
        assert_eq!(sec.points[20].traj_id, 1);
        assert_eq!(sec.points[20].t, 1);
    }

    #[test]
    fn histogram_single_member() {
        let ens = ClassicalEnsemble {
            members: vec![ClassicalState::new(0.0, 0.0, 1.5, 0.0)],
            seed: 0,
        };
        let h = momentum_histogram(&ens, Axis::First, DEFAULT_HISTOGRAM_BINS).unwrap();
        assert_eq!(h.density.iter().filter(|&&d| d > 0.0).count(), 1);
        assert!((h.integral() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn histogram_of_zero_momenta_is_peaked_at_zero() {
        let ens = uniform_angle_ensemble(1000, 2).unwrap();
        let h = momentum_histogram(&ens, Axis::Second, 201).unwrap();
        let imax = h
            .density
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.total_cmp(b.1))
            .unwrap()
            .0;
        let e = &h.bin_edges;
        assert!(e[imax] <= 0.0 && 0.0 <= e[imax + 1]);
        assert_eq!(h.density.iter().filter(|&&d| d > 0.0).count(), 1);
    }

    #[test]
    fn histogram_errors() {
        let empty = ClassicalEnsemble {
            members: vec![],
            seed: 0,
        };
        assert!(momentum_histogram(&empty, Axis::First, 10).is_err());
        let ens = uniform_angle_ensemble(10, 1).unwrap();
        assert!(momentum_histogram(&ens, Axis::First, 1).is_err());
    }
}
