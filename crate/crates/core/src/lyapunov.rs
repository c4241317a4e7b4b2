//! Largest Lyapunov exponent of the scaled map.
//!
//! Two independent routes are provided: evolving a single tangent vector
//! through the linearized map, and accumulating products of the full 4×4
//! Jacobian with periodic QR re-orthonormalization. Both average over random
//! initial phase points. For Kₛ ≫ 1 the exponent approaches ln Kₛ from
//! below.

use std::f64::consts::TAU;

use log::warn;
use nalgebra::{Matrix4, Vector4};
use rand::RngExt;
use rayon::prelude::*;

use crate::classical::scaled_map_step;
use crate::error::{Error, Result};
use crate::params::ModelParams;
use crate::phase_space::{rng_from_seed, ScaledState};
use crate::stats::mean_stderr;

pub const DEFAULT_RENORM_EVERY: u64 = 10;
pub const DEFAULT_SAMPLES: usize = 100;

/// Tangent vectors below this norm are considered collapsed.
const DEGENERATE_NORM: f64 = 1e-300;

/// Linearization of the scaled map at one phase point, in variable order
/// (x₁, x₂, P₁, P₂).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct JacobianAtPoint(pub Matrix4<f64>);

impl JacobianAtPoint {
    pub fn matrix(&self) -> &Matrix4<f64> {
        &self.0
    }

    /// Unity for every phase point: the map is a composition of shears.
    pub fn det(&self) -> f64 {
        self.0.determinant()
    }
}

/// Jacobian of the scaled map at `theta`.
///
/// ```text
/// ⎡ 1        Kₛcos x₂  0  1 ⎤
/// ⎢ Kₛcos x₁ 1         1  0 ⎥
/// ⎢ Kₛcos x₁ 0         1  0 ⎥
/// ⎣ 0        Kₛcos x₂  0  1 ⎦
/// ```
///
/// Entries do not depend on the momenta.
pub fn jacobian(theta: &ScaledState, params: &ModelParams) -> JacobianAtPoint {
    let c1 = params.ks() * theta.x1.cos();
    let c2 = params.ks() * theta.x2.cos();
    #[rustfmt::skip]
    let m = Matrix4::new(
        1.0, c2,  0.0, 1.0,
        c1,  1.0, 1.0, 0.0,
        c1,  0.0, 1.0, 0.0,
        0.0, c2,  0.0, 1.0,
    );
    JacobianAtPoint(m)
}

/// Apply the linearized map at base point `at` (pre-kick angles) to `v`.
#[inline]
fn tangent_apply(at: &ScaledState, ks: f64, v: [f64; 4]) -> [f64; 4] {
    let [dx1, dx2, dp1, dp2] = v;
    let dp1 = dp1 + ks * at.x1.cos() * dx1;
    let dp2 = dp2 + ks * at.x2.cos() * dx2;
    [dx1 + dp2, dx2 + dp1, dp1, dp2]
}

fn norm(v: &[f64; 4]) -> f64 {
    v.iter().map(|c| c * c).sum::<f64>().sqrt()
}

/// A base point with tangent vectors carried along the flow.
#[derive(Debug, Clone, PartialEq)]
pub struct TangentFrame {
    pub base: ScaledState,
    pub vectors: Vec<[f64; 4]>,
    /// Accumulated log of the norms divided out at each renormalization.
    pub log_stretch: Vec<f64>,
}

impl TangentFrame {
    pub fn new(base: ScaledState, vectors: Vec<[f64; 4]>) -> Self {
        let n = vectors.len();
        let mut f = TangentFrame {
            base,
            vectors,
            log_stretch: vec![0.0; n],
        };
        for v in &mut f.vectors {
            let s = norm(v);
            v.iter_mut().for_each(|c| *c /= s);
        }
        f
    }

    /// Advance base point and tangent vectors by one kick.
    pub fn step(&mut self, params: &ModelParams) {
        let ks = params.ks();
        for v in &mut self.vectors {
            *v = tangent_apply(&self.base, ks, *v);
        }
        self.base = scaled_map_step(&self.base, params);
    }

    /// Normalize each vector, adding the log of its norm to `log_stretch`.
    /// Returns the indices of vectors that had collapsed (and were left
    /// untouched so the caller can reseed them).
    pub fn renormalize(&mut self) -> Vec<usize> {
        let mut collapsed = Vec::new();
        for (i, (v, acc)) in self.vectors.iter_mut().zip(&mut self.log_stretch).enumerate() {
            let s = norm(v);
            if s < DEGENERATE_NORM || !s.is_finite() {
                collapsed.push(i);
                continue;
            }
            *acc += s.ln();
            v.iter_mut().for_each(|c| *c /= s);
        }
        collapsed
    }
}

/// Sampling settings shared by both estimators.
#[derive(Debug, Clone, Copy)]
pub struct LyapunovOptions {
    pub n_kicks: u64,
    pub n_samples: usize,
    pub renorm_every: u64,
    pub seed: u64,
    /// Starting momenta (P₁, P₂) of every sample; angles are random.
    pub initial_momenta: (f64, f64),
}

impl LyapunovOptions {
    pub fn new(n_kicks: u64, n_samples: usize) -> Self {
        LyapunovOptions {
            n_kicks,
            n_samples,
            renorm_every: DEFAULT_RENORM_EVERY,
            seed: 0,
            initial_momenta: (0.0, 0.0),
        }
    }

    pub fn seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    fn validate(&self) -> Result<()> {
        if self.n_kicks == 0 {
            return Err(Error::invalid("n_kicks", "must be >= 1"));
        }
        if self.n_samples == 0 {
            return Err(Error::invalid("n_samples", "must be >= 1"));
        }
        if self.renorm_every == 0 {
            return Err(Error::invalid("renorm_every", "must be >= 1"));
        }
        Ok(())
    }

    /// Initial phase points and tangent vectors, drawn in sample order.
    fn draws(&self) -> Vec<(ScaledState, [f64; 4], u64)> {
        let mut rng = rng_from_seed(self.seed);
        (0..self.n_samples)
            .map(|_| {
                let x1 = TAU * rng.random::<f64>();
                let x2 = TAU * rng.random::<f64>();
                let v = random_direction(&mut rng);
                let reseed = rng.random::<u64>();
                let (p1, p2) = self.initial_momenta;
                (ScaledState::new(x1, x2, p1, p2), v, reseed)
            })
            .collect()
    }
}

fn random_direction(rng: &mut impl RngExt) -> [f64; 4] {
    loop {
        let v = [
            rng.random::<f64>() - 0.5,
            rng.random::<f64>() - 0.5,
            rng.random::<f64>() - 0.5,
            rng.random::<f64>() - 0.5,
        ];
        if norm(&v) > 1e-3 {
            return v;
        }
    }
}

/// θ-averaged exponent with its standard error and the per-sample values.
#[derive(Debug, Clone, PartialEq)]
pub struct LyapunovEstimate {
    pub mean: f64,
    pub stderr: f64,
    pub samples: Vec<f64>,
}

impl LyapunovEstimate {
    fn from_samples(samples: Vec<f64>) -> Self {
        let (mean, stderr) = mean_stderr(&samples);
        LyapunovEstimate { mean, stderr, samples }
    }
}

/// Largest exponent from a single tangent vector evolved along each sampled
/// trajectory and renormalized every `renorm_every` kicks.
pub fn lyapunov_tangent(params: &ModelParams, opts: LyapunovOptions) -> Result<LyapunovEstimate> {
    opts.validate()?;
    let samples = opts
        .draws()
        .into_par_iter()
        .map(|(base, v, reseed)| {
            let mut frame = TangentFrame::new(base, vec![v]);
            let mut rng = rng_from_seed(reseed);
            for t in 1..=opts.n_kicks {
                frame.step(params);
                if t % opts.renorm_every == 0 || t == opts.n_kicks {
                    for i in frame.renormalize() {
                        warn!("tangent vector collapsed at kick {t}; re-randomizing");
                        let mut fresh = random_direction(&mut rng);
                        let s = norm(&fresh);
                        fresh.iter_mut().for_each(|c| *c /= s);
                        frame.vectors[i] = fresh;
                    }
                }
            }
            frame.log_stretch[0] / opts.n_kicks as f64
        })
        .collect();
    Ok(LyapunovEstimate::from_samples(samples))
}

/// All four exponents for one trajectory via products of Jacobians and QR.
fn jacobian_product_spectrum(params: &ModelParams, base: ScaledState, n_kicks: u64, renorm_every: u64) -> [f64; 4] {
    let mut q = Matrix4::<f64>::identity();
    let mut logs = Vector4::<f64>::zeros();
    let mut s = base;
    for t in 1..=n_kicks {
        q = jacobian(&s, params).0 * q;
        s = scaled_map_step(&s, params);
        if t % renorm_every == 0 || t == n_kicks {
            let qr = q.qr();
            let r = qr.r();
            for i in 0..4 {
                logs[i] += r[(i, i)].abs().ln();
            }
            q = qr.q();
        }
    }
    let n = n_kicks as f64;
    [logs[0] / n, logs[1] / n, logs[2] / n, logs[3] / n]
}

/// Largest exponent from (1/t)·ln of the growth of the accumulated Jacobian
/// product along each sampled trajectory, averaged over samples.
///
/// Accumulation is log-domain: the product is re-orthonormalized by QR every
/// `renorm_every` kicks and only the logs of the diagonal of R are kept.
pub fn lyapunov_jacobian_product(params: &ModelParams, opts: LyapunovOptions) -> Result<LyapunovEstimate> {
    opts.validate()?;
    let samples = opts
        .draws()
        .into_par_iter()
        .map(|(base, _, _)| jacobian_product_spectrum(params, base, opts.n_kicks, opts.renorm_every)[0])
        .collect();
    Ok(LyapunovEstimate::from_samples(samples))
}

/// Full spectrum averaged over samples, sorted descending. Sums to zero
/// since the map preserves volume; the two smallest exponents need
/// `renorm_every = 1` to be resolved accurately for large Kₛ.
pub fn lyapunov_spectrum(params: &ModelParams, opts: LyapunovOptions) -> Result<[f64; 4]> {
    opts.validate()?;
    let per: Vec<[f64; 4]> = opts
        .draws()
        .into_par_iter()
        .map(|(base, _, _)| jacobian_product_spectrum(params, base, opts.n_kicks, opts.renorm_every))
        .collect();
    let mut avg = [0.0; 4];
    for s in &per {
        for i in 0..4 {
            avg[i] += s[i] / per.len() as f64;
        }
    }
    avg.sort_by(|a, b| b.total_cmp(a));
    Ok(avg)
}

/// Large-Kₛ estimate λ ≈ ln Kₛ. Meaningful only for Kₛ ≫ 1, where it
/// over-estimates the measured exponent by a roughly constant offset.
pub fn analytic_lyapunov_estimate(params: &ModelParams) -> Result<f64> {
    let ks = params.ks();
    if ks <= 0.0 {
        return Err(Error::invalid("K·k_p", "ln Kₛ needs Kₛ > 0"));
    }
    Ok(ks.ln())
}

/// Period-1 fixed point (x₁ = 2l₁π, x₂ = 2l₂π, P₁ = −2πα₂, P₂ = −2πα₁) of
/// the scaled map. The angles reduce to zero for every l₁, l₂.
pub fn fixed_points(params: &ModelParams, l1: i64, l2: i64) -> ScaledState {
    let (d1, d2) = params.drifts();
    ScaledState::new(TAU * l1 as f64, TAU * l2 as f64, -d2, -d1)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::phase_space::angle_distance;
    use std::f64::consts::FRAC_PI_2;

    fn params(k: f64, k_p: f64) -> ModelParams {
        ModelParams::with_defaults(k, k_p).unwrap()
    }

    #[test]
    fn jacobian_at_cosine_zeros() {
        let j = jacobian(&ScaledState::new(FRAC_PI_2, FRAC_PI_2, 3.0, -1.0), &params(2.0, 3.0));
        #[rustfmt::skip]
        let want = Matrix4::new(
            1.0, 0.0, 0.0, 1.0,
            0.0, 1.0, 1.0, 0.0,
            0.0, 0.0, 1.0, 0.0,
            0.0, 0.0, 0.0, 1.0,
        );
        assert!((j.0 - want).abs().max() < 1e-15);
        assert!((j.det() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn jacobian_at_origin_places_ks() {
        let j = jacobian(&ScaledState::new(0.0, 0.0, 0.0, 0.0), &params(2.0, 2.0));
        let m = j.matrix();
        assert_eq!(m[(0, 1)], 4.0);
        assert_eq!(m[(1, 0)], 4.0);
        assert_eq!(m[(2, 0)], 4.0);
        assert_eq!(m[(3, 1)], 4.0);
    }

    #[test]
    fn jacobian_ignores_momenta() {
        let p = params(3.0, 2.0);
        let a = jacobian(&ScaledState::new(0.4, 1.9, 0.0, 0.0), &p);
        let b = jacobian(&ScaledState::new(0.4, 1.9, -17.0, 250.0), &p);
        assert_eq!(a, b);
    }

    #[test]
    fn jacobian_matches_finite_differences() {
        let p = params(1.5, 2.0);
        let s = ScaledState::new(0.7, 2.3, 0.4, -1.1);
        let j = jacobian(&s, &p);
        let h = 1e-6;
        for col in 0..4 {
            let mut plus = s.as_array();
            let mut minus = s.as_array();
            plus[col] += h;
            minus[col] -= h;
            let fp = scaled_map_step(&ScaledState::new(plus[0], plus[1], plus[2], plus[3]), &p);
            let fm = scaled_map_step(&ScaledState::new(minus[0], minus[1], minus[2], minus[3]), &p);
            let d = [
                (reduce_diff(fp.x1, fm.x1)) / (2.0 * h),
                (reduce_diff(fp.x2, fm.x2)) / (2.0 * h),
                (fp.big_p1 - fm.big_p1) / (2.0 * h),
                (fp.big_p2 - fm.big_p2) / (2.0 * h),
            ];
            for row in 0..4 {
                assert!((j.0[(row, col)] - d[row]).abs() < 1e-6, "({row},{col})");
            }
        }
    }

    fn reduce_diff(a: f64, b: f64) -> f64 {
        let d = (a - b).rem_euclid(TAU);
        if d > std::f64::consts::PI {
            d - TAU
        } else {
            d
        }
    }

    #[test]
    fn fixed_point_is_fixed() {
        let p = params(0.6, 2.0);
        for (l1, l2) in [(0, 0), (1, -2), (7, 3)] {
            let fp = fixed_points(&p, l1, l2);
            assert_eq!(fp, fixed_points(&p, 0, 0));
            let img = scaled_map_step(&fp, &p);
            assert!(angle_distance(img.x1, fp.x1) < 1e-12);
            assert!(angle_distance(img.x2, fp.x2) < 1e-12);
            assert!((img.big_p1 - fp.big_p1).abs() < 1e-12);
            assert!((img.big_p2 - fp.big_p2).abs() < 1e-12);
        }
        let fp = fixed_points(&p, 0, 0);
        assert!((fp.big_p1 + TAU * 5f64.sqrt()).abs() < 1e-12);
        assert!((fp.big_p2 + TAU * 3f64.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn analytic_estimate() {
        let est = analytic_lyapunov_estimate(&params(0.6, 256.0)).unwrap();
        assert!((est - 5.034).abs() < 5e-4);
        assert_eq!(analytic_lyapunov_estimate(&params(1.0, 1.0)).unwrap(), 0.0);
        let e = std::f64::consts::E;
        assert!((analytic_lyapunov_estimate(&params(e, 1.0)).unwrap() - 1.0).abs() < 1e-15);
        assert!(analytic_lyapunov_estimate(&params(0.0, 2.0)).is_err());
    }

    #[test]
    fn options_validated() {
        let p = params(1.0, 1.0);
        assert!(lyapunov_tangent(&p, LyapunovOptions::new(0, 1)).is_err());
        assert!(lyapunov_tangent(&p, LyapunovOptions::new(10, 0)).is_err());
    }

    #[test]
    fn estimators_are_deterministic() {
        let p = params(2.0, 2.0);
        let o = LyapunovOptions::new(500, 4).seed(9);
        assert_eq!(lyapunov_tangent(&p, o).unwrap(), lyapunov_tangent(&p, o).unwrap());
    }

    #[test]
    fn spectrum_sums_to_zero() {
        let mut opts = LyapunovOptions::new(2000, 8);
        // Small exponents lose precision if the product is allowed to
        // stretch for many kicks between orthonormalizations.
        opts.renorm_every = 1;
        let spec = lyapunov_spectrum(&params(3.0, 2.0), opts).unwrap();
        let sum: f64 = spec.iter().sum();
        assert!(sum.abs() < 1e-6, "{spec:?}");
        assert!(spec[0] > 0.5);
    }
}
