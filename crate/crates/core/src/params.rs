//! Model parameters of the momentum-coupled two-body linear kicked rotor.
//!
//! The Hamiltonian is
//!
//! ```text
//! H = 2π α₁ p₁ + 2π α₂ p₂ + k_p p₁ p₂ + K [cos x₁ + cos x₂] Σₙ δ(t − nT)
//! ```
//!
//! The winding numbers default to √3 and √5. Every `f64` is rational, so
//! "irrational α" is only meaningful in the far-from-resonance sense: the
//! defaults sit far from low-order rationals, which is all the dynamics needs.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const DEFAULT_ALPHA1: f64 = 1.732_050_807_568_877_2; // √3
pub const DEFAULT_ALPHA2: f64 = 2.236_067_977_499_79; // √5

/// Validated parameter set.
///
/// Serialized as a JSON object with keys `K`, `k_p`, `alpha1`, `alpha2`,
/// `T`, `hbar`. Fields are private so the invariants cannot be bypassed;
/// deserialization goes through [`ModelParams::new`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawParams", into = "RawParams")]
pub struct ModelParams {
    kick: f64,
    coupling: f64,
    alpha1: f64,
    alpha2: f64,
    period: f64,
    hbar: f64,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawParams {
    #[serde(rename = "K")]
    kick: f64,
    k_p: f64,
    alpha1: f64,
    alpha2: f64,
    #[serde(rename = "T")]
    period: f64,
    hbar: f64,
}

impl TryFrom<RawParams> for ModelParams {
    type Error = Error;

    fn try_from(r: RawParams) -> Result<Self> {
        ModelParams::new(r.kick, r.k_p, r.alpha1, r.alpha2, r.period, r.hbar)
    }
}

impl From<ModelParams> for RawParams {
    fn from(p: ModelParams) -> Self {
        RawParams {
            kick: p.kick,
            k_p: p.coupling,
            alpha1: p.alpha1,
            alpha2: p.alpha2,
            period: p.period,
            hbar: p.hbar,
        }
    }
}

fn finite(field: &'static str, v: f64) -> Result<f64> {
    if v.is_finite() {
        Ok(v)
    } else {
        Err(Error::invalid(field, format!("must be finite, got {v}")))
    }
}

impl ModelParams {
    pub fn new(k: f64, k_p: f64, alpha1: f64, alpha2: f64, period: f64, hbar: f64) -> Result<Self> {
        let k = finite("K", k)?;
        let k_p = finite("k_p", k_p)?;
        let alpha1 = finite("alpha1", alpha1)?;
        let alpha2 = finite("alpha2", alpha2)?;
        let period = finite("T", period)?;
        let hbar = finite("hbar", hbar)?;
        if k < 0.0 {
            return Err(Error::invalid("K", format!("must be >= 0, got {k}")));
        }
        if k_p < 0.0 {
            return Err(Error::invalid("k_p", format!("must be >= 0, got {k_p}")));
        }
        if alpha1 <= 0.0 {
            return Err(Error::invalid("alpha1", format!("must be > 0, got {alpha1}")));
        }
        if alpha2 <= 0.0 {
            return Err(Error::invalid("alpha2", format!("must be > 0, got {alpha2}")));
        }
        if alpha1 == alpha2 {
            return Err(Error::invalid("alpha2", "must differ from alpha1"));
        }
        if period <= 0.0 {
            return Err(Error::invalid("T", format!("must be > 0, got {period}")));
        }
        if hbar <= 0.0 {
            return Err(Error::invalid("hbar", format!("must be > 0, got {hbar}")));
        }
        Ok(ModelParams {
            kick: k,
            coupling: k_p,
            alpha1,
            alpha2,
            period,
            hbar,
        })
    }

    /// Parameters with α₁ = √3, α₂ = √5, T = 1, ħ = 1.
    pub fn with_defaults(k: f64, k_p: f64) -> Result<Self> {
        Self::new(k, k_p, DEFAULT_ALPHA1, DEFAULT_ALPHA2, 1.0, 1.0)
    }

    /// Kick strength K.
    pub fn k(&self) -> f64 {
        self.kick
    }

    /// Momentum coupling k_p.
    pub fn k_p(&self) -> f64 {
        self.coupling
    }

    pub fn alpha1(&self) -> f64 {
        self.alpha1
    }

    pub fn alpha2(&self) -> f64 {
        self.alpha2
    }

    /// Kick period T.
    pub fn period(&self) -> f64 {
        self.period
    }

    pub fn hbar(&self) -> f64 {
        self.hbar
    }

    /// Scaled chaos parameter Kₛ = K·k_p. Classical dynamics depends on K
    /// and k_p only through this product once momenta are scaled by k_p.
    pub fn ks(&self) -> f64 {
        self.kick * self.coupling
    }

    /// k̃_p = k_p / (α₁α₂).
    pub fn scaled_coupling(&self) -> f64 {
        self.coupling / (self.alpha1 * self.alpha2)
    }

    /// K̃ = K / T.
    pub fn scaled_kick(&self) -> f64 {
        self.kick / self.period
    }

    /// ħₛ = ħ / T.
    pub fn scaled_hbar(&self) -> f64 {
        self.hbar / self.period
    }

    /// Free rotation angles 2πα₁ and 2πα₂ per period.
    pub(crate) fn drifts(&self) -> (f64, f64) {
        (std::f64::consts::TAU * self.alpha1, std::f64::consts::TAU * self.alpha2)
    }
}
