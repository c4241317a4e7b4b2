//! Phase-space points of the two-rotor system and seeded ensembles of them.

use std::f64::consts::TAU;

use rand::{RngExt, SeedableRng};
use rand_pcg::Pcg64;

use crate::error::{Error, Result};

/// Reduce an angle onto [0, 2π).
#[inline]
pub fn reduce_angle(x: f64) -> f64 {
    let r = x.rem_euclid(TAU);
    // rem_euclid can round up to exactly TAU for tiny negative inputs.
    if r >= TAU {
        0.0
    } else {
        r
    }
}

/// Circular distance between two angles, in [0, π].
pub fn angle_distance(a: f64, b: f64) -> f64 {
    let d = reduce_angle(a - b);
    d.min(TAU - d)
}

/// One phase point (x₁, x₂, p₁, p₂) in unscaled momenta.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct ClassicalState {
    pub x1: f64,
    pub x2: f64,
    pub p1: f64,
    pub p2: f64,
}

impl ClassicalState {
    pub fn new(x1: f64, x2: f64, p1: f64, p2: f64) -> Self {
        ClassicalState {
            x1: reduce_angle(x1),
            x2: reduce_angle(x2),
            p1,
            p2,
        }
    }

    /// p₁² + p₂².
    pub fn energy(&self) -> f64 {
        self.p1 * self.p1 + self.p2 * self.p2
    }

    /// Pᵢ = k_p·pᵢ.
    pub fn scale(&self, k_p: f64) -> ScaledState {
        ScaledState {
            x1: self.x1,
            x2: self.x2,
            big_p1: k_p * self.p1,
            big_p2: k_p * self.p2,
        }
    }
}

/// Phase point in scaled momenta Pᵢ = k_p·pᵢ, the natural coordinates for the
/// single-parameter (Kₛ) map.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct ScaledState {
    pub x1: f64,
    pub x2: f64,
    pub big_p1: f64,
    pub big_p2: f64,
}

impl ScaledState {
    pub fn new(x1: f64, x2: f64, big_p1: f64, big_p2: f64) -> Self {
        ScaledState {
            x1: reduce_angle(x1),
            x2: reduce_angle(x2),
            big_p1,
            big_p2,
        }
    }

    /// Inverse of [`ClassicalState::scale`]. Requires `k_p > 0`.
    pub fn unscale(&self, k_p: f64) -> Result<ClassicalState> {
        if k_p <= 0.0 {
            return Err(Error::invalid("k_p", "unscaling needs k_p > 0"));
        }
        Ok(ClassicalState {
            x1: self.x1,
            x2: self.x2,
            p1: self.big_p1 / k_p,
            p2: self.big_p2 / k_p,
        })
    }

    pub fn as_array(&self) -> [f64; 4] {
        [self.x1, self.x2, self.big_p1, self.big_p2]
    }
}

/// A population of phase points together with the seed that produced it.
///
/// Sampling uses PCG-64 (`Lcg128Xsl64`, O'Neill 2014) seeded through
/// `SeedableRng::seed_from_u64`; the stream is fully specified, so a given
/// seed reproduces the same ensemble bit-for-bit on every platform.
#[derive(Debug, Clone, PartialEq)]
pub struct ClassicalEnsemble {
    pub members: Vec<ClassicalState>,
    pub seed: u64,
}

impl ClassicalEnsemble {
    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    /// Ensemble mean of p₁² + p₂².
    pub fn mean_energy(&self) -> f64 {
        self.members.iter().map(ClassicalState::energy).sum::<f64>() / self.len() as f64
    }
}

pub(crate) fn rng_from_seed(seed: u64) -> Pcg64 {
    Pcg64::seed_from_u64(seed)
}

/// `n` states with angles i.i.d. uniform on [0, 2π) and all momenta zero,
/// the classical counterpart of a momentum eigenstate at p = 0.
pub fn uniform_angle_ensemble(n: usize, seed: u64) -> Result<ClassicalEnsemble> {
    uniform_angle_ensemble_with_momenta(n, seed, 0.0, 0.0)
}

/// Like [`uniform_angle_ensemble`] but with every member starting at the
/// given momenta.
pub fn uniform_angle_ensemble_with_momenta(n: usize, seed: u64, p1: f64, p2: f64) -> Result<ClassicalEnsemble> {
    if n == 0 {
        return Err(Error::EmptyEnsemble);
    }
    let mut rng = rng_from_seed(seed);
    let members = (0..n)
        .map(|_| {
            let x1 = TAU * rng.random::<f64>();
            let x2 = TAU * rng.random::<f64>();
            ClassicalState::new(x1, x2, p1, p2)
        })
        .collect();
    Ok(ClassicalEnsemble { members, seed })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn zero_size_rejected() {
        assert!(matches!(uniform_angle_ensemble(0, 1), Err(Error::EmptyEnsemble)));
    }

    #[test]
    fn momenta_start_at_zero() {
        let ens = uniform_angle_ensemble(10_000, 7).unwrap();
        assert_eq!(ens.len(), 10_000);
        assert!(ens.members.iter().all(|s| s.p1 == 0.0 && s.p2 == 0.0));
        assert!(ens
            .members
            .iter()
            .all(|s| (0.0..TAU).contains(&s.x1) && (0.0..TAU).contains(&s.x2)));
    }

    #[test]
    fn same_seed_same_ensemble() {
        let a = uniform_angle_ensemble(1, 42).unwrap();
        let b = uniform_angle_ensemble(1, 42).unwrap();
        assert_eq!(a, b);
        let c = uniform_angle_ensemble(1, 43).unwrap();
        assert_ne!(a.members, c.members);
    }

    #[test]
    fn uniform_mean_within_three_sigma() {
        let n = 100_000;
        let ens = uniform_angle_ensemble(n, 3).unwrap();
        let mean = ens.members.iter().map(|s| s.x1).sum::<f64>() / n as f64;
        let sigma = (TAU / 12f64.sqrt()) / (n as f64).sqrt();
        assert!((mean - std::f64::consts::PI).abs() < 3.0 * sigma, "mean {mean}");
    }

    #[test]
    fn reduce_handles_tiny_negatives() {
        let r = reduce_angle(-1e-18);
        assert!((0.0..TAU).contains(&r));
        assert_eq!(reduce_angle(TAU), 0.0);
    }

    #[test]
    fn unscale_rejects_zero_coupling() {
        let s = ScaledState::new(0.0, 0.0, 1.0, 1.0);
        assert!(s.unscale(0.0).is_err());
    }

    proptest! {
        #[test]
        fn reduce_is_idempotent(x in -1e6f64..1e6) {
            let r = reduce_angle(x);
            prop_assert!((0.0..TAU).contains(&r));
            prop_assert_eq!(reduce_angle(r), r);
        }

        #[test]
        fn scaling_round_trips(x1 in 0.0f64..TAU, x2 in 0.0f64..TAU,
                               p1 in -1e3f64..1e3, p2 in -1e3f64..1e3,
                               e in -8i32..9) {
            // Powers of two make the round trip exact in binary floating point.
            let k_p = 2f64.powi(e);
            let s = ClassicalState::new(x1, x2, p1, p2);
            prop_assert_eq!(s.scale(k_p).unscale(k_p).unwrap(), s);
        }
    }
}
