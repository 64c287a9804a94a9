//! Energy model against frozen reference values and independent oracles.

use pmsm_sat::{presets, Currents, FluxLinkage, InjectionSpec, MotorParams, SaturationCoeffs, Waveform};
use proptest::prelude::*;
use std::f64::consts::TAU;

// Reference values computed with 30-digit arithmetic for the IPM fixture.
const ENERGY_AT_0P1_0P05: f64 = 0.093274915510617673473;
const CURRENTS_AT_0P1_0P05: (f64, f64) = (1.4212842818280739935, 1.170693056768558952);
const FIRST_ORDER_FLUX_AT_1_1: (f64, f64) = (0.066612903198695928, 0.042834938103449648);
const EXACT_FLUX_AT_2_2: (f64, f64) = (0.12751505849965022581, 0.082980307349672289855);
const INDUCTANCE_AT_1_1: (f64, f64, f64) = (-0.48771295673512, -0.003634422496454688, -0.02402731117896);
const RIPPLE_IQ_1A_UD_30V: (f64, f64) = (0.10479822184592208346, 0.0046797282846968536948);

fn close(a: f64, b: f64, rel: f64) -> bool {
    (a - b).abs() <= rel * b.abs().max(1e-300)
}

// Current map written out independently of the library.
fn oracle_currents(p: &MotorParams, eps: f64, d: f64, q: f64) -> (f64, f64) {
    let [a30, a12, a40, a22, a04] = p.sat.as_array().map(|a| a * eps);
    (
        d / p.ld + 3.0 * a30 * d.powi(2) + a12 * q.powi(2) + 4.0 * a40 * d.powi(3) + 2.0 * a22 * d * q.powi(2),
        q / p.lq + 2.0 * a12 * d * q + 2.0 * a22 * d.powi(2) * q + 4.0 * a04 * q.powi(3),
    )
}

// Continuation in the saturation strength from the linear solution, with a
// finite-difference Newton corrector at each step.
fn oracle_inverse(p: &MotorParams, id: f64, iq: f64) -> (f64, f64) {
    let (mut d, mut q) = (p.ld * id, p.lq * iq);
    let steps = 200;
    for k in 1..=steps {
        let eps = k as f64 / steps as f64;
        for _ in 0..30 {
            let (fd, fq) = oracle_currents(p, eps, d, q);
            let (rd, rq) = (fd - id, fq - iq);
            if rd.hypot(rq) < 1e-15 {
                break;
            }
            let h = 1e-7;
            let (ad, aq) = oracle_currents(p, eps, d + h, q);
            let (bd, bq) = oracle_currents(p, eps, d, q + h);
            let (j11, j21, j12, j22) = ((ad - fd) / h, (aq - fq) / h, (bd - fd) / h, (bq - fq) / h);
            let det = j11 * j22 - j12 * j21;
            d -= (j22 * rd - j12 * rq) / det;
            q -= (j11 * rq - j21 * rd) / det;
        }
    }
    (d, q)
}

#[test]
fn energy_and_currents_match_reference() {
    let p = presets::ipm();
    let f = FluxLinkage::new(0.1, 0.05);
    assert!(close(p.energy(f), ENERGY_AT_0P1_0P05, 1e-14));
    let i = p.currents_from_flux(f);
    assert!(close(i.d, CURRENTS_AT_0P1_0P05.0, 1e-14));
    assert!(close(i.q, CURRENTS_AT_0P1_0P05.1, 1e-14));
    let o = oracle_currents(&p, 1.0, 0.1, 0.05);
    assert!(close(o.0, CURRENTS_AT_0P1_0P05.0, 1e-14) && close(o.1, CURRENTS_AT_0P1_0P05.1, 1e-14));
}

#[test]
fn first_order_inversion_matches_reference() {
    let f = presets::ipm().flux_from_currents_first_order(Currents::new(1.0, 1.0));
    assert!(close(f.d, FIRST_ORDER_FLUX_AT_1_1.0, 1e-13));
    assert!(close(f.q, FIRST_ORDER_FLUX_AT_1_1.1, 1e-13));
}

#[test]
fn exact_inversion_matches_reference_and_oracle() {
    let p = presets::ipm();
    let f = p.flux_from_currents_exact(Currents::new(2.0, 2.0), 1e-10).unwrap();
    assert!(close(f.d, EXACT_FLUX_AT_2_2.0, 1e-9) && close(f.q, EXACT_FLUX_AT_2_2.1, 1e-9));
    let (d, q) = oracle_inverse(&p, 2.0, 2.0);
    assert!(close(d, EXACT_FLUX_AT_2_2.0, 1e-9) && close(q, EXACT_FLUX_AT_2_2.1, 1e-9));
}

#[test]
fn inductance_matrix_matches_reference() {
    let l = presets::ipm().inductance_matrix(Currents::new(1.0, 1.0));
    assert!(close(l.dd, INDUCTANCE_AT_1_1.0, 1e-12));
    assert!(close(l.dq, INDUCTANCE_AT_1_1.1, 1e-12));
    assert!(close(l.qq, INDUCTANCE_AT_1_1.2, 1e-12));
    assert_eq!(l.dq, l.qd());
}

#[test]
fn ripple_prediction_matches_reference() {
    let p = presets::ipm();
    let spec = InjectionSpec::new((0.0, p.r * 1.0), (30.0, 0.0), TAU * 500.0, Waveform::Square).unwrap();
    let (d, q) = pmsm_sat::estimator::predict_ripple(&p, &spec);
    assert!(close(d, RIPPLE_IQ_1A_UD_30V.0, 1e-13));
    assert!(close(q, RIPPLE_IQ_1A_UD_30V.1, 1e-13));
}

#[test]
fn first_order_error_is_quadratic_in_saturation() {
    let p = presets::ipm();
    let i = Currents::new(0.1, -0.1);
    let gap = |eps: f64| {
        let q = p.with_saturation(p.sat.scaled(eps));
        let e = q.flux_from_currents_exact(i, 1e-15).unwrap();
        let a = q.flux_from_currents_first_order(i);
        (e.d - a.d).hypot(e.q - a.q)
    };
    let r = gap(0.1) / gap(0.05);
    assert!((3.8..4.2).contains(&r), "{r}");
}

fn motor() -> impl Strategy<Value = MotorParams> {
    (
        0.02..0.2_f64,
        0.02..0.2_f64,
        (-10.0..10.0_f64, -10.0..10.0_f64, 0.0..25.0_f64, 0.0..25.0_f64, 0.0..25.0_f64),
    )
        .prop_map(|(ld, lq, (a30, a12, a40, a22, a04))| MotorParams {
            r: 5.0,
            ld,
            lq,
            phi_m: 0.0,
            pole_pairs: 1,
            sat: SaturationCoeffs { a30, a12, a40, a22, a04 },
        })
}

proptest! {
    #[test]
    fn currents_are_energy_gradient(p in motor(), d in -0.2..0.2_f64, q in -0.2..0.2_f64) {
        let h = 1e-6;
        let e = |d: f64, q: f64| p.energy(FluxLinkage::new(d, q));
        let gd = (e(d + h, q) - e(d - h, q)) / (2.0 * h);
        let gq = (e(d, q + h) - e(d, q - h)) / (2.0 * h);
        let i = p.currents_from_flux(FluxLinkage::new(d, q));
        let scale = i.d.hypot(i.q).max(1.0);
        prop_assert!((gd - i.d).abs() <= 1e-6 * scale);
        prop_assert!((gq - i.q).abs() <= 1e-6 * scale);
    }

    #[test]
    fn hessian_matches_current_jacobian(p in motor(), d in -0.2..0.2_f64, q in -0.2..0.2_f64) {
        let h = 1e-6;
        let c = |d: f64, q: f64| p.currents_from_flux(FluxLinkage::new(d, q));
        let hs = p.energy_hessian(FluxLinkage::new(d, q));
        let jdq = (c(d, q + h).d - c(d, q - h).d) / (2.0 * h);
        let jqd = (c(d + h, q).q - c(d - h, q).q) / (2.0 * h);
        let scale = hs.dd.abs().max(hs.qq.abs());
        prop_assert!((jdq - hs.dq).abs() <= 1e-7 * scale);
        prop_assert!((jqd - hs.dq).abs() <= 1e-7 * scale);
    }

    #[test]
    fn mirror_symmetry_is_exact(p in motor(), d in -0.3..0.3_f64, q in -0.3..0.3_f64) {
        let f = FluxLinkage::new(d, q);
        prop_assert_eq!(p.energy(f.mirrored()), p.energy(f));
        prop_assert_eq!(p.currents_from_flux(f.mirrored()), p.currents_from_flux(f).mirrored());
    }

    #[test]
    fn exact_inversion_round_trips(p in motor(), id in -0.5..0.5_f64, iq in -0.5..0.5_f64) {
        let i = Currents::new(id, iq);
        let f = p.flux_from_currents_exact(i, 1e-12);
        // Strong negative a30 can leave no root nearby; success must be a true root.
        if let Ok(f) = f {
            let back = p.currents_from_flux(f);
            prop_assert!((back.d - id).abs() <= 1e-12 && (back.q - iq).abs() <= 1e-12);
        }
    }

    #[test]
    fn linear_motor_inverts_exactly(ld in 0.01..0.3_f64, lq in 0.01..0.3_f64, id in -5.0..5.0_f64, iq in -5.0..5.0_f64) {
        let p = MotorParams { ld, lq, ..presets::ipm() }.unsaturated();
        let i = Currents::new(id, iq);
        let a = p.flux_from_currents_first_order(i);
        prop_assert!((a.d - ld * id).abs() <= 1e-15 * (1.0 + a.d.abs()));
        prop_assert!((a.q - lq * iq).abs() <= 1e-15 * (1.0 + a.q.abs()));
    }
}
