//! Reference motors used as ground-truth fixtures.
//!
//! Magnet flux is not part of either table and is left at zero; it only
//! enters the dynamics when the rotor turns.

use crate::magnetics::{MotorParams, SaturationCoeffs};

/// Interior-magnet motor: 6 pole pairs, 12.15 Ω.
pub fn ipm() -> MotorParams {
    MotorParams {
        r: 12.15,
        ld: 91.9e-3,
        lq: 45.8e-3,
        phi_m: 0.0,
        pole_pairs: 6,
        sat: SaturationCoeffs {
            a30: 7.70,
            a12: 5.35,
            a40: 19.42,
            a22: 22.18,
            a04: 6.62,
        },
    }
}

/// Surface-mounted motor: 2 pole pairs, 6.69 Ω.
pub fn spm() -> MotorParams {
    MotorParams {
        r: 6.69,
        ld: 155.4e-3,
        lq: 58.6e-3,
        phi_m: 0.0,
        pole_pairs: 2,
        sat: SaturationCoeffs {
            a30: 5.01,
            a12: 4.83,
            a40: 1.83,
            a22: 8.76,
            a04: 1.18,
        },
    }
}

/// Injection amplitude used with [`ipm`] (V).
pub const IPM_U_TILDE: f64 = 30.0;
/// Injection amplitude used with [`spm`] (V).
pub const SPM_U_TILDE: f64 = 40.0;
/// Injection frequency of both experiments (Hz).
pub const INJECTION_HZ: f64 = 500.0;

/// Bias-current sweep of the interior-magnet experiment: (max |i|, step) in A.
pub const IPM_SWEEP: (f64, f64) = (2.0, 0.3);
/// Bias-current sweep of the surface-mounted experiment: (max |i|, step) in A.
pub const SPM_SWEEP: (f64, f64) = (8.0, 0.5);

/// Current measurement uncertainty half-width (A).
pub const CURRENT_NOISE: f64 = 10e-3;
