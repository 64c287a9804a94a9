//! Energy-based magnetic model of a saturated PMSM in the d-q frame.
//!
//! The state is the pair of flux linkages. Currents are the gradient of a
//! scalar energy made of the unsaturated quadratic part plus the cubic and
//! quartic terms allowed by the symmetry `H(phi_d, -phi_q) = H(phi_d, phi_q)`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Maximum number of damped Newton iterations used by [`MotorParams::flux_from_currents_exact`].
pub const NEWTON_MAX_ITER: usize = 50;

/// Flux linkage pair (Wb).
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct FluxLinkage {
    pub d: f64,
    pub q: f64,
}

impl FluxLinkage {
    pub const ZERO: FluxLinkage = FluxLinkage { d: 0.0, q: 0.0 };

    pub fn new(d: f64, q: f64) -> Self {
        FluxLinkage { d, q }
    }

    pub fn is_finite(&self) -> bool {
        self.d.is_finite() && self.q.is_finite()
    }

    /// Reflection about the direct axis.
    pub fn mirrored(self) -> Self {
        FluxLinkage::new(self.d, -self.q)
    }
}

/// Current pair (A).
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Currents {
    pub d: f64,
    pub q: f64,
}

impl Currents {
    pub const ZERO: Currents = Currents { d: 0.0, q: 0.0 };

    pub fn new(d: f64, q: f64) -> Self {
        Currents { d, q }
    }

    pub fn is_finite(&self) -> bool {
        self.d.is_finite() && self.q.is_finite()
    }

    pub fn mirrored(self) -> Self {
        Currents::new(self.d, -self.q)
    }
}

/// Differential inductance matrix `d(phi)/d(i)` (H). Symmetric by construction.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InductanceMatrix {
    pub dd: f64,
    pub dq: f64,
    pub qq: f64,
}

impl InductanceMatrix {
    pub fn qd(&self) -> f64 {
        self.dq
    }
}

/// Second derivatives of the energy function, i.e. `d(i)/d(phi)` (1/H).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnergyHessian {
    pub dd: f64,
    pub dq: f64,
    pub qq: f64,
}

impl EnergyHessian {
    pub fn determinant(&self) -> f64 {
        self.dd * self.qq - self.dq * self.dq
    }
}

/// The five saturation coefficients of the cubic and quartic energy terms.
///
/// `a30`, `a12` are in A·Wb⁻², `a40`, `a22`, `a04` in A·Wb⁻³.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct SaturationCoeffs {
    pub a30: f64,
    pub a12: f64,
    pub a40: f64,
    pub a22: f64,
    pub a04: f64,
}

impl SaturationCoeffs {
    pub const ZERO: SaturationCoeffs = SaturationCoeffs {
        a30: 0.0,
        a12: 0.0,
        a40: 0.0,
        a22: 0.0,
        a04: 0.0,
    };

    pub fn scaled(self, eps: f64) -> Self {
        SaturationCoeffs {
            a30: self.a30 * eps,
            a12: self.a12 * eps,
            a40: self.a40 * eps,
            a22: self.a22 * eps,
            a04: self.a04 * eps,
        }
    }

    pub fn as_array(&self) -> [f64; 5] {
        [self.a30, self.a12, self.a40, self.a22, self.a04]
    }

    pub fn from_array(a: [f64; 5]) -> Self {
        SaturationCoeffs {
            a30: a[0],
            a12: a[1],
            a40: a[2],
            a22: a[3],
            a04: a[4],
        }
    }
}

/// Electrical and magnetic parameters of one motor, SI units.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MotorParams {
    /// Stator resistance (Ω).
    pub r: f64,
    /// Unsaturated direct-axis self-inductance (H).
    pub ld: f64,
    /// Unsaturated quadrature-axis self-inductance (H).
    pub lq: f64,
    /// Permanent-magnet flux linkage (Wb).
    pub phi_m: f64,
    pub pole_pairs: u32,
    pub sat: SaturationCoeffs,
}

impl MotorParams {
    pub fn new(
        r: f64,
        ld: f64,
        lq: f64,
        phi_m: f64,
        pole_pairs: u32,
        sat: SaturationCoeffs,
    ) -> Result<Self> {
        let p = MotorParams {
            r,
            ld,
            lq,
            phi_m,
            pole_pairs,
            sat,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.r > 0.0 && self.r.is_finite()) {
            return Err(Error::invalid("R", format!("must be positive, got {}", self.r)));
        }
        if !(self.ld > 0.0 && self.ld.is_finite()) {
            return Err(Error::invalid("Ld", format!("must be positive, got {}", self.ld)));
        }
        if !(self.lq > 0.0 && self.lq.is_finite()) {
            return Err(Error::invalid("Lq", format!("must be positive, got {}", self.lq)));
        }
        if self.pole_pairs < 1 {
            return Err(Error::invalid("pole_pairs", "must be at least 1"));
        }
        if !self.phi_m.is_finite() || self.sat.as_array().iter().any(|a| !a.is_finite()) {
            return Err(Error::invalid("alpha", "coefficients must be finite"));
        }
        Ok(())
    }

    /// Same motor with every saturation coefficient set to zero.
    pub fn unsaturated(&self) -> Self {
        MotorParams {
            sat: SaturationCoeffs::ZERO,
            ..*self
        }
    }

    pub fn with_saturation(&self, sat: SaturationCoeffs) -> Self {
        MotorParams { sat, ..*self }
    }

    /// Magnetic energy `H(phi_d, phi_q)`; zero at the origin.
    pub fn energy(&self, f: FluxLinkage) -> f64 {
        let s = &self.sat;
        let (d, q) = (f.d, f.q);
        let (d2, q2) = (d * d, q * q);
        d2 / (2.0 * self.ld)
            + q2 / (2.0 * self.lq)
            + s.a30 * d2 * d
            + s.a12 * d * q2
            + s.a40 * d2 * d2
            + s.a22 * d2 * q2
            + s.a04 * q2 * q2
    }

    /// Currents as the gradient of the energy function.
    pub fn currents_from_flux(&self, f: FluxLinkage) -> Currents {
        let s = &self.sat;
        let (d, q) = (f.d, f.q);
        let (d2, q2) = (d * d, q * q);
        Currents {
            d: d / self.ld
                + 3.0 * s.a30 * d2
                + s.a12 * q2
                + 4.0 * s.a40 * d2 * d
                + 2.0 * s.a22 * d * q2,
            q: q / self.lq + 2.0 * s.a12 * d * q + 2.0 * s.a22 * d2 * q + 4.0 * s.a04 * q2 * q,
        }
    }

    /// Hessian of the energy function, the Jacobian of [`Self::currents_from_flux`].
    pub fn energy_hessian(&self, f: FluxLinkage) -> EnergyHessian {
        let s = &self.sat;
        let (d, q) = (f.d, f.q);
        EnergyHessian {
            dd: 1.0 / self.ld + 6.0 * s.a30 * d + 12.0 * s.a40 * d * d + 2.0 * s.a22 * q * q,
            dq: 2.0 * s.a12 * q + 4.0 * s.a22 * d * q,
            qq: 1.0 / self.lq
                + 2.0 * s.a12 * d
                + 2.0 * s.a22 * d * d
                + 12.0 * s.a04 * q * q,
        }
    }

    /// Explicit inversion of the current map, first order in the saturation
    /// coefficients.
    pub fn flux_from_currents_first_order(&self, i: Currents) -> FluxLinkage {
        let s = &self.sat;
        let (ld, lq) = (self.ld, self.lq);
        let (id, iq) = (i.d, i.q);
        FluxLinkage {
            d: ld
                * (id
                    - 3.0 * s.a30 * ld * ld * id * id
                    - s.a12 * lq * lq * iq * iq
                    - 4.0 * s.a40 * ld * ld * ld * id * id * id
                    - 2.0 * s.a22 * ld * lq * lq * id * iq * iq),
            q: lq
                * (iq
                    - 2.0 * s.a12 * ld * lq * id * iq
                    - 2.0 * s.a22 * ld * ld * lq * id * id * iq
                    - 4.0 * s.a04 * lq * lq * lq * iq * iq * iq),
        }
    }

    /// Numerical inversion of the current map by damped Newton iteration,
    /// seeded with the first-order inversion.
    ///
    /// On success `|currents_from_flux(f) - i| <= tol` holds component-wise.
    pub fn flux_from_currents_exact(&self, i: Currents, tol: f64) -> Result<FluxLinkage> {
        if !(tol > 0.0) {
            return Err(Error::invalid("tol", "must be positive"));
        }
        if !i.is_finite() {
            return Err(Error::invalid("currents", "must be finite"));
        }
        let residual = |f: FluxLinkage| {
            let c = self.currents_from_flux(f);
            (c.d - i.d, c.q - i.q)
        };
        let norm = |r: (f64, f64)| r.0.abs().max(r.1.abs());

        let mut f = self.flux_from_currents_first_order(i);
        let mut r = residual(f);
        let fail = |iterations, r| Error::NonConvergence {
            i_d: i.d,
            i_q: i.q,
            iterations,
            residual: norm(r),
        };
        for iter in 0..NEWTON_MAX_ITER {
            if norm(r) <= tol {
                return Ok(f);
            }
            let h = self.energy_hessian(f);
            let det = h.determinant();
            if det == 0.0 || !det.is_finite() {
                return Err(fail(iter, r));
            }
            let step_d = (h.qq * r.0 - h.dq * r.1) / det;
            let step_q = (h.dd * r.1 - h.dq * r.0) / det;

            let mut lambda = 1.0;
            let mut accepted = false;
            for _ in 0..30 {
                let trial = FluxLinkage::new(f.d - lambda * step_d, f.q - lambda * step_q);
                let rt = residual(trial);
                if norm(rt).is_finite() && norm(rt) < norm(r) {
                    f = trial;
                    r = rt;
                    accepted = true;
                    break;
                }
                lambda *= 0.5;
            }
            if !accepted {
                return Err(fail(iter + 1, r));
            }
        }
        if norm(r) <= tol {
            Ok(f)
        } else {
            Err(fail(NEWTON_MAX_ITER, r))
        }
    }

    /// Differential inductances from the first-order closed forms.
    pub fn inductance_matrix(&self, i: Currents) -> InductanceMatrix {
        let s = &self.sat;
        let (ld, lq) = (self.ld, self.lq);
        let (id, iq) = (i.d, i.q);
        InductanceMatrix {
            dd: ld
                * (1.0
                    - 6.0 * s.a30 * ld * id
                    - 12.0 * s.a40 * ld * ld * id * id
                    - 2.0 * s.a22 * lq * lq * iq * iq),
            dq: -2.0 * ld * lq * lq * iq * (s.a12 + 2.0 * s.a22 * ld * id),
            qq: lq
                * (1.0
                    - 2.0 * s.a12 * ld * id
                    - 2.0 * s.a22 * ld * ld * id * id
                    - 12.0 * s.a04 * lq * lq * iq * iq),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::presets;

    fn linear(ld: f64, lq: f64) -> MotorParams {
        MotorParams::new(1.0, ld, lq, 0.0, 1, SaturationCoeffs::ZERO).unwrap()
    }

    #[test]
    fn energy_vanishes_at_origin() {
        assert_eq!(presets::ipm().energy(FluxLinkage::ZERO), 0.0);
        assert_eq!(presets::spm().energy(FluxLinkage::ZERO), 0.0);
    }

    #[test]
    fn quadratic_energy() {
        let p = linear(0.1, 0.05);
        let e = p.energy(FluxLinkage::new(0.2, 0.1));
        assert!((e - 0.3).abs() < 1e-15, "{e}");
    }

    #[test]
    fn linear_motor_currents() {
        let p = linear(0.1, 0.05);
        assert_eq!(p.currents_from_flux(FluxLinkage::ZERO), Currents::ZERO);
        let i = p.currents_from_flux(FluxLinkage::new(0.1, 0.0));
        assert!((i.d - 1.0).abs() < 1e-15);
        assert_eq!(i.q, 0.0);
    }

    #[test]
    fn first_order_inversion_linear_and_origin() {
        let p = linear(0.1, 0.05);
        let f = p.flux_from_currents_first_order(Currents::new(2.0, -3.0));
        assert!((f.d - 0.2).abs() < 1e-15 && (f.q + 0.15).abs() < 1e-15);
        let f0 = presets::ipm().flux_from_currents_first_order(Currents::ZERO);
        assert_eq!(f0, FluxLinkage::ZERO);
    }

    #[test]
    fn exact_inversion_linear_single_step() {
        let p = linear(0.1, 0.05);
        let f = p.flux_from_currents_exact(Currents::new(2.0, -3.0), 1e-12).unwrap();
        assert!((f.d - 0.2).abs() < 1e-15 && (f.q + 0.15).abs() < 1e-15, "{f:?}");
    }

    #[test]
    fn exact_inversion_round_trip() {
        let p = presets::ipm();
        let f0 = FluxLinkage::new(0.08, 0.03);
        let i = p.currents_from_flux(f0);
        let f = p.flux_from_currents_exact(i, 1e-12).unwrap();
        assert!((f.d - f0.d).abs() < 1e-11 && (f.q - f0.q).abs() < 1e-11);
    }

    #[test]
    fn exact_inversion_rejects_bad_tolerance() {
        let p = presets::ipm();
        assert!(matches!(
            p.flux_from_currents_exact(Currents::ZERO, 0.0),
            Err(Error::InvalidParameter { .. })
        ));
    }

    #[test]
    fn exact_inversion_reports_nonconvergence() {
        // The first-order seed of a huge current lies so far out that the
        // cubic tail cannot be walked back within the iteration budget.
        let p = presets::ipm();
        let err = p.flux_from_currents_exact(Currents::new(1e6, 1e6), 1e-10);
        assert!(matches!(err, Err(Error::NonConvergence { .. })), "{err:?}");
    }

    #[test]
    fn exact_inversion_far_branch_meets_tolerance() {
        // Past the local extremum of i_d(phi_d) the iteration lands on the outer branch.
        let p = presets::spm();
        let i = Currents::new(-2.0, 0.0);
        let f = p.flux_from_currents_exact(i, 1e-10).unwrap();
        let c = p.currents_from_flux(f);
        assert!((c.d - i.d).abs() <= 1e-10 && (c.q - i.q).abs() <= 1e-10);
    }

    #[test]
    fn inductance_limits() {
        let p = presets::ipm();
        let l = p.inductance_matrix(Currents::ZERO);
        assert_eq!((l.dd, l.dq, l.qq), (p.ld, 0.0, p.lq));
        let lin = linear(0.1, 0.05).inductance_matrix(Currents::new(1.5, -0.7));
        assert_eq!(lin.dd, 0.1);
        assert_eq!(lin.qq, 0.05);
        assert!(lin.dq == 0.0);
        assert_eq!(l.qd(), l.dq);
    }

    #[test]
    fn validation_rejects_nonpositive() {
        assert!(MotorParams::new(0.0, 0.1, 0.1, 0.0, 1, SaturationCoeffs::ZERO).is_err());
        assert!(MotorParams::new(1.0, -0.1, 0.1, 0.0, 1, SaturationCoeffs::ZERO).is_err());
        assert!(MotorParams::new(1.0, 0.1, 0.0, 0.0, 1, SaturationCoeffs::ZERO).is_err());
        assert!(MotorParams::new(1.0, 0.1, 0.1, 0.0, 0, SaturationCoeffs::ZERO).is_err());
    }
}
