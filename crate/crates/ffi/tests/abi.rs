use std::ffi::{CStr, CString};
use std::f64::consts::TAU;
use std::ptr;

use pmsm_sat_ffi::*;

fn ipm() -> *mut PmsmMotor {
    let sat = PmsmSaturation {
        a30: 7.70,
        a12: 5.35,
        a40: 19.42,
        a22: 22.18,
        a04: 6.62,
    };
    let mut m = ptr::null_mut();
    let st = unsafe { pmsm_motor_new(2.0, 0.0919, 0.0458, 0.0, 1, &sat, &mut m) };
    assert_eq!(st, PmsmStatus::Ok);
    m
}

fn last_error() -> String {
    unsafe { CStr::from_ptr(pmsm_last_error_message()) }.to_str().unwrap().to_owned()
}

fn square(u_bar_d: f64, u_tilde_d: f64) -> PmsmInjection {
    PmsmInjection {
        u_bar_d,
        u_bar_q: 0.0,
        u_tilde_d,
        u_tilde_q: 0.0,
        omega: TAU * 500.0,
        kind: PmsmWaveformKind::Square,
        sampled: ptr::null(),
    }
}

#[test]
fn flux_round_trip_through_abi() {
    let m = ipm();
    let mut f = PmsmPair::default();
    let mut i = PmsmPair::default();
    unsafe {
        assert_eq!(pmsm_flux_exact(m, PmsmPair { d: 1.2, q: -0.7 }, 1e-12, &mut f), PmsmStatus::Ok);
        assert_eq!(pmsm_currents_from_flux(m, f, &mut i), PmsmStatus::Ok);
        pmsm_motor_free(m);
    }
    assert!((i.d - 1.2).abs() < 1e-11 && (i.q + 0.7).abs() < 1e-11);
    assert_eq!(last_error(), "");
}

#[test]
fn inductance_and_energy_match_reference() {
    let m = ipm();
    let mut l = PmsmInductance::default();
    let mut e = 0.0;
    unsafe {
        assert_eq!(pmsm_inductance_matrix(m, PmsmPair { d: 1.0, q: 1.0 }, &mut l), PmsmStatus::Ok);
        assert_eq!(pmsm_energy(m, PmsmPair { d: 0.1, q: 0.05 }, &mut e), PmsmStatus::Ok);
        pmsm_motor_free(m);
    }
    assert!((l.dd + 0.48771295673512).abs() < 1e-12);
    assert!((l.dq + 0.003634422496454688).abs() < 1e-14);
    assert!((l.qq + 0.02402731117896).abs() < 1e-12);
    assert!((e - 0.093274915510617673).abs() < 1e-15);
}

#[test]
fn simulate_and_extract_ripple() {
    let m = ipm();
    let inj = square(0.0, 30.0);
    let mut pred = PmsmPair::default();
    let mut tr = ptr::null_mut();
    let mut r = PmsmRipple::default();
    let mut n = 0usize;
    let mut data: *const f64 = ptr::null();
    unsafe {
        assert_eq!(pmsm_predict_ripple(m, &inj, &mut pred), PmsmStatus::Ok);
        let dt = 1.0 / 500.0 / 200.0;
        assert_eq!(pmsm_simulate(m, &inj, dt, 0.4, 0.0, 1, &mut tr), PmsmStatus::Ok);
        assert_eq!(pmsm_trace_len(tr, &mut n), PmsmStatus::Ok);
        assert_eq!(pmsm_trace_column(tr, PmsmColumn::CurrentD, &mut data, &mut n), PmsmStatus::Ok);
        assert_eq!(pmsm_extract_ripple(tr, &inj, 0.3, &mut r), PmsmStatus::Ok);
        pmsm_trace_free(tr);
        pmsm_motor_free(m);
    }
    assert!(n > 80_000 / 2);
    assert!(!data.is_null());
    assert!(r.periods_used >= 40);
    assert!((r.i_tilde.d / pred.d - 1.0).abs() < 1e-2, "{} vs {}", r.i_tilde.d, pred.d);
}

#[test]
fn trace_csv_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let path = CString::new(dir.path().join("t.csv").to_str().unwrap()).unwrap();
    let m = ipm();
    let inj = square(4.0, 10.0);
    let (mut a, mut b) = (ptr::null_mut(), ptr::null_mut());
    let (mut pa, mut pb): (*const f64, *const f64) = (ptr::null(), ptr::null());
    let (mut na, mut nb) = (0, 0);
    unsafe {
        assert_eq!(pmsm_simulate(m, &inj, 1e-5, 0.01, 0.01, 7, &mut a), PmsmStatus::Ok);
        assert_eq!(pmsm_trace_save_csv(a, path.as_ptr()), PmsmStatus::Ok);
        assert_eq!(pmsm_trace_load_csv(path.as_ptr(), &mut b), PmsmStatus::Ok);
        pmsm_trace_column(a, PmsmColumn::CurrentQ, &mut pa, &mut na);
        pmsm_trace_column(b, PmsmColumn::CurrentQ, &mut pb, &mut nb);
        assert_eq!(na, nb);
        assert_eq!(std::slice::from_raw_parts(pa, na), std::slice::from_raw_parts(pb, nb));
        pmsm_trace_free(a);
        pmsm_trace_free(b);
        pmsm_motor_free(m);
    }
}

#[test]
fn missing_trace_is_io_error() {
    let path = CString::new("/nonexistent/dir/trace.csv").unwrap();
    let mut t = ptr::null_mut();
    let st = unsafe { pmsm_trace_load_csv(path.as_ptr(), &mut t) };
    assert_eq!(st, PmsmStatus::Io);
    assert!(t.is_null());
    assert!(last_error().contains("/nonexistent/dir/trace.csv"));
}

#[test]
fn sampled_waveform_must_be_zero_mean() {
    let mut w = ptr::null_mut();
    let bad = [1.0, 1.0, -0.5];
    assert_eq!(unsafe { pmsm_waveform_sampled(bad.as_ptr(), 3, &mut w) }, PmsmStatus::NonZeroMean);
    let good = [1.0, 0.0, -1.0, 0.0];
    assert_eq!(unsafe { pmsm_waveform_sampled(good.as_ptr(), 4, &mut w) }, PmsmStatus::Ok);
    let m = ipm();
    let inj = PmsmInjection {
        kind: PmsmWaveformKind::Sampled,
        sampled: w,
        ..square(0.0, 30.0)
    };
    let mut pred = PmsmPair::default();
    unsafe {
        assert_eq!(pmsm_predict_ripple(m, &inj, &mut pred), PmsmStatus::Ok);
        let no_handle = PmsmInjection { sampled: ptr::null(), ..inj };
        assert_eq!(pmsm_predict_ripple(m, &no_handle, &mut pred), PmsmStatus::NullPointer);
        pmsm_waveform_free(w);
        pmsm_motor_free(m);
    }
}

#[test]
fn null_handles_are_rejected() {
    let mut out = PmsmPair::default();
    let st = unsafe { pmsm_currents_from_flux(ptr::null(), out, &mut out) };
    assert_eq!(st, PmsmStatus::NullPointer);
    assert!(last_error().contains("motor"));
    unsafe {
        pmsm_motor_free(ptr::null_mut());
        pmsm_trace_free(ptr::null_mut());
        pmsm_waveform_free(ptr::null_mut());
    }
}

#[test]
fn identify_recovers_ipm() {
    let m = ipm();
    let plan = PmsmPlan {
        omega: TAU * 500.0,
        kind: PmsmWaveformKind::Square,
        sampled: ptr::null(),
        u_tilde: 30.0,
        id_max: 2.0,
        id_step: 0.3,
        iq_max: 2.0,
        iq_step: 0.3,
        steps_per_period: 0,
        measure_periods: 0,
        noise_amp: 0.0,
    };
    let mut fr = PmsmEstimate::default();
    let mut fo = PmsmEstimate::default();
    let st = unsafe { pmsm_identify(m, &plan, 3, &mut fr, &mut fo) };
    unsafe { pmsm_motor_free(m) };
    assert_eq!(st, PmsmStatus::Ok, "{}", last_error());
    assert!((fr.ld / 0.0919 - 1.0).abs() < 1e-3);
    assert!((fr.lq / 0.0458 - 1.0).abs() < 1e-3);
    assert!((fr.sat.a22 / 22.18 - 1.0).abs() < 1e-2);
    assert!(fo.ld > 0.0);
}

#[test]
fn version_matches_package() {
    let v = unsafe { CStr::from_ptr(pmsm_version()) };
    assert_eq!(v.to_str().unwrap(), env!("CARGO_PKG_VERSION"));
}
