//! Saturated PMSM flux model, locked-rotor simulation and identification of
//! magnetic saturation coefficients from pulsating-voltage injection.

pub mod cli;
pub mod config;
pub mod error;
pub mod estimator;
pub mod lsq;
pub mod magnetics;
pub mod manifest;
pub mod presets;
pub mod ripple;
pub mod signal;
pub mod simulator;
pub mod trace;
pub mod validation;

pub use error::{Error, Result};
pub use magnetics::{Currents, FluxLinkage, InductanceMatrix, MotorParams, SaturationCoeffs};
pub use signal::{InjectionSpec, Waveform};
pub use simulator::{simulate, SimConfig};
pub use trace::Trace;
