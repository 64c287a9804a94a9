//! C ABI over the `pmsm-sat` library.
//!
//! Every function returns a [`PmsmStatus`]; on failure a message describing it
//! is available from [`pmsm_last_error_message`] on the calling thread. Objects
//! are opaque handles created by `*_new`/`*_load` style functions and released
//! by the matching `*_free`. Panics never cross the boundary.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;

use pmsm_sat::estimator::{self, ExperimentPlan, RunSettings};
use pmsm_sat::{ripple, simulator, Currents, Error, FluxLinkage, InjectionSpec, MotorParams, SaturationCoeffs, SimConfig, Trace, Waveform};

/// Result code of every call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PmsmStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    NonConvergence = 3,
    StepTooLarge = 4,
    TooShort = 5,
    Unresolved = 6,
    ZeroRipple = 7,
    RankDeficient = 8,
    NonZeroMean = 9,
    Unsettled = 10,
    Io = 11,
    Panic = 12,
}

/// Motor parameters (opaque).
pub struct PmsmMotor(MotorParams);

/// Injection waveform (opaque); only needed for sampled waveforms.
pub struct PmsmWaveform(Waveform);

/// Sampled run: time, voltages, currents and optional fluxes (opaque).
pub struct PmsmTrace(Trace);

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct PmsmSaturation {
    pub a30: f64,
    pub a12: f64,
    pub a40: f64,
    pub a22: f64,
    pub a04: f64,
}

/// A d-q pair: flux (Wb), current (A) or ripple amplitude (A).
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct PmsmPair {
    pub d: f64,
    pub q: f64,
}

/// Symmetric 2x2 differential inductance (H).
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct PmsmInductance {
    pub dd: f64,
    pub dq: f64,
    pub qq: f64,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PmsmWaveformKind {
    Square = 0,
    Sine = 1,
    /// Uses the `sampled` handle of the injection.
    Sampled = 2,
}

/// `u = u_bar + u_tilde * f(omega * t)` on both axes.
#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct PmsmInjection {
    pub u_bar_d: f64,
    pub u_bar_q: f64,
    pub u_tilde_d: f64,
    pub u_tilde_q: f64,
    /// rad/s
    pub omega: f64,
    pub kind: PmsmWaveformKind,
    /// Required when `kind` is sampled, ignored otherwise; not owned.
    pub sampled: *const PmsmWaveform,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PmsmColumn {
    Time = 0,
    VoltageD = 1,
    VoltageQ = 2,
    CurrentD = 3,
    CurrentQ = 4,
    FluxD = 5,
    FluxQ = 6,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct PmsmRipple {
    pub i_bar: PmsmPair,
    pub i_tilde: PmsmPair,
    pub residual_rms: PmsmPair,
    pub periods_used: usize,
    /// Standard deviation of `i_tilde` per unit current-noise standard deviation.
    pub tilde_sensitivity: f64,
}

/// Identification experiment on a symmetric bias grid `k * step`, `|k * step| <= max`.
#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct PmsmPlan {
    /// rad/s
    pub omega: f64,
    pub kind: PmsmWaveformKind,
    pub sampled: *const PmsmWaveform,
    pub u_tilde: f64,
    pub id_max: f64,
    pub id_step: f64,
    pub iq_max: f64,
    pub iq_step: f64,
    /// 0 selects the default.
    pub steps_per_period: u32,
    /// 0 selects the default.
    pub measure_periods: u32,
    /// Half-width of uniform current noise (A).
    pub noise_amp: f64,
}

/// Identified inductances (H) and saturation coefficients with 1-sigma values.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct PmsmEstimate {
    pub ld: f64,
    pub lq: f64,
    pub sat: PmsmSaturation,
    pub sigma_ld: f64,
    pub sigma_lq: f64,
    pub sigma_sat: PmsmSaturation,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(msg: &str) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = c);
}

enum Fail {
    Null(&'static str),
    Core(Error),
}

impl From<Error> for Fail {
    fn from(e: Error) -> Self {
        Fail::Core(e)
    }
}

fn status_of(e: &Error) -> PmsmStatus {
    match e.root() {
        Error::NonConvergence { .. } => PmsmStatus::NonConvergence,
        Error::StepTooLarge { .. } => PmsmStatus::StepTooLarge,
        Error::TooShort { .. } => PmsmStatus::TooShort,
        Error::Unresolved { .. } => PmsmStatus::Unresolved,
        Error::ZeroRipple { .. } => PmsmStatus::ZeroRipple,
        Error::RankDeficient { .. } => PmsmStatus::RankDeficient,
        Error::NonZeroMean { .. } => PmsmStatus::NonZeroMean,
        Error::Unsettled { .. } => PmsmStatus::Unsettled,
        Error::Io { .. } | Error::MissingFile(_) => PmsmStatus::Io,
        _ => PmsmStatus::InvalidArgument,
    }
}

fn guard<F: FnOnce() -> Result<(), Fail>>(f: F) -> PmsmStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            set_error("");
            PmsmStatus::Ok
        }
        Ok(Err(Fail::Null(what))) => {
            set_error(&format!("null pointer passed for `{what}`"));
            PmsmStatus::NullPointer
        }
        Ok(Err(Fail::Core(e))) => {
            set_error(&e.to_string());
            status_of(&e)
        }
        Err(_) => {
            set_error("internal panic");
            PmsmStatus::Panic
        }
    }
}

unsafe fn get<'a, T>(p: *const T, what: &'static str) -> Result<&'a T, Fail> {
    p.as_ref().ok_or(Fail::Null(what))
}

unsafe fn put<T>(p: *mut T, what: &'static str, v: T) -> Result<(), Fail> {
    if p.is_null() {
        return Err(Fail::Null(what));
    }
    p.write(v);
    Ok(())
}

unsafe fn waveform(kind: PmsmWaveformKind, sampled: *const PmsmWaveform) -> Result<Waveform, Fail> {
    Ok(match kind {
        PmsmWaveformKind::Square => Waveform::Square,
        PmsmWaveformKind::Sine => Waveform::Sine,
        PmsmWaveformKind::Sampled => get(sampled, "sampled")?.0.clone(),
    })
}

unsafe fn injection(inj: *const PmsmInjection) -> Result<InjectionSpec, Fail> {
    let i = get(inj, "injection")?;
    Ok(InjectionSpec::new(
        (i.u_bar_d, i.u_bar_q),
        (i.u_tilde_d, i.u_tilde_q),
        i.omega,
        waveform(i.kind, i.sampled)?,
    )?)
}

fn pair(d: f64, q: f64) -> PmsmPair {
    PmsmPair { d, q }
}

/// Message of the last failed call on this thread; empty after a success.
/// The pointer stays valid until the next call on the same thread.
#[no_mangle]
pub extern "C" fn pmsm_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Creates a motor. `sat` may be null for an unsaturated motor.
///
/// # Safety
/// `sat` must be null or valid; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn pmsm_motor_new(
    r: f64,
    ld: f64,
    lq: f64,
    phi_m: f64,
    pole_pairs: u32,
    sat: *const PmsmSaturation,
    out: *mut *mut PmsmMotor,
) -> PmsmStatus {
    guard(|| {
        let s = sat.as_ref().copied().unwrap_or_default();
        let coeffs = SaturationCoeffs {
            a30: s.a30,
            a12: s.a12,
            a40: s.a40,
            a22: s.a22,
            a04: s.a04,
        };
        let p = MotorParams::new(r, ld, lq, phi_m, pole_pairs, coeffs)?;
        put(out, "out", Box::into_raw(Box::new(PmsmMotor(p))))
    })
}

/// # Safety
/// `m` must be null or a handle from [`pmsm_motor_new`] not yet freed.
#[no_mangle]
pub unsafe extern "C" fn pmsm_motor_free(m: *mut PmsmMotor) {
    if !m.is_null() {
        drop(Box::from_raw(m));
    }
}

/// Magnetic energy at `flux`.
///
/// # Safety
/// `m` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn pmsm_energy(m: *const PmsmMotor, flux: PmsmPair, out: *mut f64) -> PmsmStatus {
    guard(|| {
        let p = &get(m, "motor")?.0;
        put(out, "out", p.energy(FluxLinkage::new(flux.d, flux.q)))
    })
}

/// # Safety
/// `m` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn pmsm_currents_from_flux(m: *const PmsmMotor, flux: PmsmPair, out: *mut PmsmPair) -> PmsmStatus {
    guard(|| {
        let i = get(m, "motor")?.0.currents_from_flux(FluxLinkage::new(flux.d, flux.q));
        put(out, "out", pair(i.d, i.q))
    })
}

/// Closed-form inversion, first order in the saturation coefficients.
///
/// # Safety
/// `m` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn pmsm_flux_first_order(m: *const PmsmMotor, currents: PmsmPair, out: *mut PmsmPair) -> PmsmStatus {
    guard(|| {
        let f = get(m, "motor")?
            .0
            .flux_from_currents_first_order(Currents::new(currents.d, currents.q));
        put(out, "out", pair(f.d, f.q))
    })
}

/// Newton inversion to `tol` amperes per component.
///
/// # Safety
/// `m` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn pmsm_flux_exact(m: *const PmsmMotor, currents: PmsmPair, tol: f64, out: *mut PmsmPair) -> PmsmStatus {
    guard(|| {
        let f = get(m, "motor")?
            .0
            .flux_from_currents_exact(Currents::new(currents.d, currents.q), tol)?;
        put(out, "out", pair(f.d, f.q))
    })
}

/// # Safety
/// `m` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn pmsm_inductance_matrix(
    m: *const PmsmMotor,
    currents: PmsmPair,
    out: *mut PmsmInductance,
) -> PmsmStatus {
    guard(|| {
        let l = get(m, "motor")?.0.inductance_matrix(Currents::new(currents.d, currents.q));
        put(
            out,
            "out",
            PmsmInductance {
                dd: l.dd,
                dq: l.dq,
                qq: l.qq,
            },
        )
    })
}

/// First-order ripple prediction with the bias `i_bar = u_bar / R`.
///
/// # Safety
/// Pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn pmsm_predict_ripple(
    m: *const PmsmMotor,
    inj: *const PmsmInjection,
    out: *mut PmsmPair,
) -> PmsmStatus {
    guard(|| {
        let (d, q) = estimator::predict_ripple(&get(m, "motor")?.0, &injection(inj)?);
        put(out, "out", pair(d, q))
    })
}

/// Sampled waveform from one period of `n` uniformly spaced values.
///
/// # Safety
/// `samples` must point to `n` doubles; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn pmsm_waveform_sampled(samples: *const f64, n: usize, out: *mut *mut PmsmWaveform) -> PmsmStatus {
    guard(|| {
        if samples.is_null() {
            return Err(Fail::Null("samples"));
        }
        let v = std::slice::from_raw_parts(samples, n).to_vec();
        let w = Waveform::sampled(v)?;
        put(out, "out", Box::into_raw(Box::new(PmsmWaveform(w))))
    })
}

/// # Safety
/// `w` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn pmsm_waveform_free(w: *mut PmsmWaveform) {
    if !w.is_null() {
        drop(Box::from_raw(w));
    }
}

/// Locked-rotor simulation from rest with step `dt`, duration `t_end`, output
/// every step and uniform current noise of half-width `noise_amp`.
///
/// # Safety
/// Pointers must be valid; `out` receives a handle to free with [`pmsm_trace_free`].
#[no_mangle]
pub unsafe extern "C" fn pmsm_simulate(
    m: *const PmsmMotor,
    inj: *const PmsmInjection,
    dt: f64,
    t_end: f64,
    noise_amp: f64,
    seed: u64,
    out: *mut *mut PmsmTrace,
) -> PmsmStatus {
    guard(|| {
        let p = &get(m, "motor")?.0;
        let spec = injection(inj)?;
        let cfg = SimConfig {
            noise_amp,
            ..SimConfig::locked_rotor(dt, t_end)
        };
        let tr = simulator::simulate(p, &spec, &cfg, seed)?;
        put(out, "out", Box::into_raw(Box::new(PmsmTrace(tr))))
    })
}

/// # Safety
/// `t` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn pmsm_trace_free(t: *mut PmsmTrace) {
    if !t.is_null() {
        drop(Box::from_raw(t));
    }
}

/// Number of samples.
///
/// # Safety
/// `t` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn pmsm_trace_len(t: *const PmsmTrace, out: *mut usize) -> PmsmStatus {
    guard(|| put(out, "out", get(t, "trace")?.0.len()))
}

/// Borrows one column; the data stays valid while the trace lives.
///
/// # Safety
/// `t` must be a live handle; `data` and `len` must be writable.
#[no_mangle]
pub unsafe extern "C" fn pmsm_trace_column(
    t: *const PmsmTrace,
    column: PmsmColumn,
    data: *mut *const f64,
    len: *mut usize,
) -> PmsmStatus {
    guard(|| {
        let tr = &get(t, "trace")?.0;
        let col: &[f64] = match column {
            PmsmColumn::Time => &tr.t,
            PmsmColumn::VoltageD => &tr.u_d,
            PmsmColumn::VoltageQ => &tr.u_q,
            PmsmColumn::CurrentD => &tr.i_d,
            PmsmColumn::CurrentQ => &tr.i_q,
            PmsmColumn::FluxD | PmsmColumn::FluxQ => {
                let c = if column == PmsmColumn::FluxD { &tr.phi_d } else { &tr.phi_q };
                c.as_deref()
                    .ok_or_else(|| Fail::Core(Error::Trace("trace has no flux columns".into())))?
            }
        };
        put(len, "len", col.len())?;
        put(data, "data", col.as_ptr())
    })
}

unsafe fn path_arg<'a>(p: *const c_char) -> Result<&'a Path, Fail> {
    if p.is_null() {
        return Err(Fail::Null("path"));
    }
    let s = CStr::from_ptr(p)
        .to_str()
        .map_err(|_| Fail::Core(Error::Trace("path is not valid UTF-8".into())))?;
    Ok(Path::new(s))
}

/// # Safety
/// `t` must be a live handle and `path` a NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn pmsm_trace_save_csv(t: *const PmsmTrace, path: *const c_char) -> PmsmStatus {
    guard(|| Ok(get(t, "trace")?.0.save(path_arg(path)?)?))
}

/// # Safety
/// `path` must be a NUL-terminated string and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn pmsm_trace_load_csv(path: *const c_char, out: *mut *mut PmsmTrace) -> PmsmStatus {
    guard(|| {
        let tr = Trace::load(path_arg(path)?)?;
        put(out, "out", Box::into_raw(Box::new(PmsmTrace(tr))))
    })
}

/// Mean and `F(omega t)` coefficient of both currents after `discard` seconds.
///
/// # Safety
/// Pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn pmsm_extract_ripple(
    t: *const PmsmTrace,
    inj: *const PmsmInjection,
    discard: f64,
    out: *mut PmsmRipple,
) -> PmsmStatus {
    guard(|| {
        let m = ripple::extract_ripple(&get(t, "trace")?.0, &injection(inj)?, discard)?;
        put(
            out,
            "out",
            PmsmRipple {
                i_bar: pair(m.i_bar_d, m.i_bar_q),
                i_tilde: pair(m.i_tilde_d, m.i_tilde_q),
                residual_rms: pair(m.residual_rms_d, m.residual_rms_q),
                periods_used: m.n_periods_used,
                tilde_sensitivity: m.tilde_sensitivity,
            },
        )
    })
}

fn estimate_of(e: &estimator::EstimationResult) -> PmsmEstimate {
    let sat = |s: &SaturationCoeffs| PmsmSaturation {
        a30: s.a30,
        a12: s.a12,
        a40: s.a40,
        a22: s.a22,
        a04: s.a04,
    };
    PmsmEstimate {
        ld: e.params.ld,
        lq: e.params.lq,
        sat: sat(&e.params.sat),
        sigma_ld: e.sigma.ld,
        sigma_lq: e.sigma.lq,
        sigma_sat: sat(&e.sigma.sat),
    }
}

/// Simulates the identification plan on motor `m` and estimates its
/// parameters. `flux_referenced` receives the flux-referenced estimate;
/// `first_order` may be null.
///
/// # Safety
/// Pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn pmsm_identify(
    m: *const PmsmMotor,
    plan: *const PmsmPlan,
    seed: u64,
    flux_referenced: *mut PmsmEstimate,
    first_order: *mut PmsmEstimate,
) -> PmsmStatus {
    guard(|| {
        let p = &get(m, "motor")?.0;
        let pl = get(plan, "plan")?;
        if flux_referenced.is_null() {
            return Err(Fail::Null("flux_referenced"));
        }
        let grid = |max: f64, step: f64| if step > 0.0 { estimator::symmetric_grid(max, step) } else { Vec::new() };
        let ep = ExperimentPlan {
            omega: pl.omega,
            waveform: waveform(pl.kind, pl.sampled)?,
            u_tilde: pl.u_tilde,
            id_grid: grid(pl.id_max, pl.id_step),
            iq_grid: grid(pl.iq_max, pl.iq_step),
        };
        let defaults = RunSettings::default();
        let settings = RunSettings {
            steps_per_period: if pl.steps_per_period > 0 { pl.steps_per_period } else { defaults.steps_per_period },
            measure_periods: if pl.measure_periods > 0 { pl.measure_periods } else { defaults.measure_periods },
            noise_amp: pl.noise_amp,
            ..defaults
        };
        let id = estimator::identify(p, &ep, &settings, seed)?;
        put(flux_referenced, "flux_referenced", estimate_of(&id.flux_referenced))?;
        if !first_order.is_null() {
            first_order.write(estimate_of(&id.first_order));
        }
        Ok(())
    })
}

/// Library version as a NUL-terminated string with static lifetime.
#[no_mangle]
pub extern "C" fn pmsm_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}
