//! Simulation and analysis of the momentum-coupled two-body linear kicked
//! rotor: classical stroboscopic dynamics, Lyapunov exponents, quantum
//! Floquet evolution, transport exponents and rotor–rotor entanglement.

pub mod classical;
pub mod config;
pub mod entanglement;
pub mod error;
pub mod lyapunov;
pub mod params;
pub mod phase_space;
pub mod quantum;
pub mod run;
pub mod stats;
pub mod transport;

pub use error::{Error, Result};
pub use params::ModelParams;
