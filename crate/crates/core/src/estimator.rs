//! Locked-rotor identification of the seven magnetic parameters.
//!
//! Four families of pulsating-voltage runs are planned: zero-bias runs for the
//! unsaturated inductances, a d-axis bias sweep with d-axis injection, and a
//! q-axis bias sweep with injection on either axis. Ripple amplitudes of those
//! runs enter linear regressions for the saturation coefficients.
//!
//! Two regressions are available for the coefficients. The first-order one
//! expresses the ripple through the bias currents (`phi_bar ~ L * i_bar`) and
//! is exact only to first order in the coefficients. The flux-referenced one
//! uses the mean flux of each run, obtained by integrating `u - R i`, and is
//! exact in the coefficients up to the averaging remainder.

use std::f64::consts::TAU;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::lsq::{self, LsqFit};
use crate::magnetics::{FluxLinkage, MotorParams, SaturationCoeffs};
use crate::ripple::{self, RippleMeasurement};
use crate::signal::{InjectionSpec, Waveform};
use crate::simulator::{self, SimConfig};
use crate::trace::Trace;

/// Smallest ripple treated as distinguishable from zero when the run is noise free (A).
pub const MIN_RIPPLE_FLOOR: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentPlan {
    /// Injection pulsation (rad/s).
    pub omega: f64,
    pub waveform: Waveform,
    /// Injection amplitude on the excited axis (V).
    pub u_tilde: f64,
    /// Target d-axis bias currents of the d-axis sweep (A).
    pub id_grid: Vec<f64>,
    /// Target q-axis bias currents of the q-axis sweeps (A).
    pub iq_grid: Vec<f64>,
}

impl ExperimentPlan {
    pub fn validate(&self) -> Result<()> {
        if !(self.omega > 0.0 && self.omega.is_finite()) {
            return Err(Error::invalid("omega", "must be positive"));
        }
        if !(self.u_tilde > 0.0 && self.u_tilde.is_finite()) {
            return Err(Error::invalid("u_tilde", "must be positive"));
        }
        if self.id_grid.iter().chain(&self.iq_grid).any(|v| !v.is_finite()) {
            return Err(Error::invalid("grid", "bias currents must be finite"));
        }
        Ok(())
    }
}

/// `{k * step : |k * step| <= max}`, symmetric about zero.
pub fn symmetric_grid(max: f64, step: f64) -> Vec<f64> {
    if !(step > 0.0) || !(max >= 0.0) {
        return Vec::new();
    }
    let n = (max / step + 1e-9).floor() as i64;
    (-n..=n).map(|k| k as f64 * step).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum RunKind {
    /// No bias, d-axis injection.
    ZeroBiasD,
    /// No bias, q-axis injection.
    ZeroBiasQ,
    /// d-axis bias, d-axis injection.
    DSweep,
    /// q-axis bias, d-axis injection.
    QBiasDInjection,
    /// q-axis bias, q-axis injection.
    QBiasQInjection,
}

impl RunKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            RunKind::ZeroBiasD => "zero_bias_d",
            RunKind::ZeroBiasQ => "zero_bias_q",
            RunKind::DSweep => "d_sweep",
            RunKind::QBiasDInjection => "q_bias_d_injection",
            RunKind::QBiasQInjection => "q_bias_q_injection",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        [
            RunKind::ZeroBiasD,
            RunKind::ZeroBiasQ,
            RunKind::DSweep,
            RunKind::QBiasDInjection,
            RunKind::QBiasQInjection,
        ]
        .into_iter()
        .find(|k| k.as_str() == s)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PlannedRun {
    pub kind: RunKind,
    /// Target bias current on the biased axis (A); zero for the zero-bias runs.
    pub i_bar_target: f64,
    pub spec: InjectionSpec,
}

impl PlannedRun {
    pub fn label(&self, index: usize) -> String {
        format!("run_{index:03}_{}", self.kind.as_str())
    }
}

/// Lays out the injection runs of the identification procedure, biasing with
/// `u_bar = R * i_bar`.
pub fn plan_runs(plan: &ExperimentPlan, r: f64) -> Vec<PlannedRun> {
    let u = plan.u_tilde;
    let mk = |kind, target: f64, u_bar: (f64, f64), u_tilde: (f64, f64)| PlannedRun {
        kind,
        i_bar_target: target,
        spec: InjectionSpec {
            u_bar_d: u_bar.0,
            u_bar_q: u_bar.1,
            u_tilde_d: u_tilde.0,
            u_tilde_q: u_tilde.1,
            omega: plan.omega,
            waveform: plan.waveform.clone(),
        },
    };
    let mut runs = vec![
        mk(RunKind::ZeroBiasD, 0.0, (0.0, 0.0), (u, 0.0)),
        mk(RunKind::ZeroBiasQ, 0.0, (0.0, 0.0), (0.0, u)),
    ];
    runs.extend(
        plan.id_grid
            .iter()
            .map(|&i| mk(RunKind::DSweep, i, (r * i, 0.0), (u, 0.0))),
    );
    runs.extend(
        plan.iq_grid
            .iter()
            .map(|&i| mk(RunKind::QBiasDInjection, i, (0.0, r * i), (u, 0.0))),
    );
    runs.extend(
        plan.iq_grid
            .iter()
            .map(|&i| mk(RunKind::QBiasQInjection, i, (0.0, r * i), (0.0, u))),
    );
    runs
}

/// Ripple amplitudes predicted to first order in the saturation coefficients,
/// with `i_bar = u_bar / R`.
pub fn predict_ripple(p: &MotorParams, spec: &InjectionSpec) -> (f64, f64) {
    let s = &p.sat;
    let (ld, lq) = (p.ld, p.lq);
    let (ubd, ubq) = (spec.u_tilde_d, spec.u_tilde_q);
    let id = spec.u_bar_d / p.r;
    let iq = spec.u_bar_q / p.r;
    let w = spec.omega;
    let i_tilde_d = (ubd / ld
        + 2.0 * s.a22 * lq * iq * (2.0 * ld * id * ubq + lq * iq * ubd)
        + 12.0 * s.a40 * ld * ld * id * id * ubd
        + 6.0 * s.a30 * ld * id * ubd
        + 2.0 * s.a12 * lq * iq * ubq)
        / w;
    let i_tilde_q = (ubq / lq
        + 2.0 * s.a22 * ld * id * (2.0 * lq * iq * ubd + ld * id * ubq)
        + 12.0 * s.a04 * lq * lq * iq * iq * ubq
        + 2.0 * s.a12 * (ld * id * ubq + lq * iq * ubd))
        / w;
    (i_tilde_d, i_tilde_q)
}

/// Ripple amplitudes from the exact energy Hessian at the mean flux `phi_bar`.
pub fn hessian_ripple(p: &MotorParams, phi_bar: FluxLinkage, spec: &InjectionSpec) -> (f64, f64) {
    let h = p.energy_hessian(phi_bar);
    (
        (h.dd * spec.u_tilde_d + h.dq * spec.u_tilde_q) / spec.omega,
        (h.dq * spec.u_tilde_d + h.qq * spec.u_tilde_q) / spec.omega,
    )
}

/// Standard deviations entering the coefficient regressions.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Uncertainty {
    /// Of each measured ripple amplitude (A).
    pub i_tilde: f64,
    /// Of the inductances fixed before the coefficient regressions (H).
    pub ld: f64,
    pub lq: f64,
}

/// Unsaturated inductances and their standard deviations.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InductanceEstimate {
    pub ld: f64,
    pub lq: f64,
    pub sigma_ld: f64,
    pub sigma_lq: f64,
}

fn ripple_floor(sigma_i_tilde: f64) -> f64 {
    10.0 * sigma_i_tilde.max(MIN_RIPPLE_FLOOR)
}

/// `L = u_tilde / (omega * i_tilde)` on each axis from the zero-bias runs.
///
/// `u_tilde` is read per axis from `u_tilde_dq`; a zero amplitude or a ripple
/// below ten times the noise floor is rejected.
pub fn estimate_l(
    meas_d: &RippleMeasurement,
    meas_q: &RippleMeasurement,
    u_tilde_dq: (f64, f64),
    plan: &ExperimentPlan,
    sigma_i_tilde: f64,
) -> Result<InductanceEstimate> {
    let floor = ripple_floor(sigma_i_tilde);
    let axis = |axis: char, u: f64, it: f64| -> Result<(f64, f64)> {
        if u == 0.0 || !(it.abs() >= floor) {
            return Err(Error::ZeroRipple {
                axis,
                i_tilde: it,
                floor,
            });
        }
        let l = u / (plan.omega * it);
        Ok((l, (l * sigma_i_tilde / it).abs()))
    };
    let (ld, sigma_ld) = axis('d', u_tilde_dq.0, meas_d.i_tilde_d)?;
    let (lq, sigma_lq) = axis('q', u_tilde_dq.1, meas_q.i_tilde_q)?;
    Ok(InductanceEstimate {
        ld,
        lq,
        sigma_ld,
        sigma_lq,
    })
}

/// Fitted coefficients with one-sigma uncertainties.
#[derive(Debug, Clone, PartialEq)]
pub struct CoefficientFit {
    pub values: Vec<f64>,
    pub sigma: Vec<f64>,
    /// RMS residual of each regression, in the regression's own units (1/H).
    pub rms: Vec<(&'static str, f64)>,
}

fn distinct_count(v: impl Iterator<Item = f64>) -> usize {
    let mut xs: Vec<f64> = v.collect();
    xs.sort_by(f64::total_cmp);
    xs.dedup_by(|a, b| (*a - *b).abs() <= 1e-12 * (1.0 + b.abs()));
    xs.len()
}

// Central-difference propagation of the inductance uncertainties.
fn add_inductance_sigma<F>(values: &[f64], sigma: &mut [f64], ld: f64, lq: f64, unc: &Uncertainty, refit: F) -> Result<()>
where
    F: Fn(f64, f64) -> Result<Vec<f64>>,
{
    for (l_is_d, s) in [(true, unc.ld), (false, unc.lq)] {
        if s == 0.0 {
            continue;
        }
        let base = if l_is_d { ld } else { lq };
        let h = 1e-6 * base;
        let (plus, minus) = if l_is_d {
            (refit(ld + h, lq)?, refit(ld - h, lq)?)
        } else {
            (refit(ld, lq + h)?, refit(ld, lq - h)?)
        };
        for j in 0..values.len() {
            let dj = (plus[j] - minus[j]) / (2.0 * h) * s;
            sigma[j] = sigma[j].hypot(dj);
        }
    }
    Ok(())
}

fn d_axis_fit(meas: &[(f64, f64)], ld: f64, w: f64, u: f64) -> Result<LsqFit> {
    let x = lsq::design(meas.iter().map(|&(ib, _)| [6.0 * ld * ib, 12.0 * ld * ld * ib * ib]));
    let y: Vec<f64> = meas.iter().map(|&(_, it)| w * it / u - 1.0 / ld).collect();
    lsq::solve(&x, &y, "d-axis saturation (a30, a40)")
}

/// Joint fit of `a30`, `a40` from the d-axis sweep: `(i_bar_d, i_tilde_d)` pairs.
pub fn estimate_d_axis(meas: &[(f64, f64)], ld: f64, plan: &ExperimentPlan, unc: &Uncertainty) -> Result<CoefficientFit> {
    if distinct_count(meas.iter().map(|m| m.0)) < 3 {
        return Err(Error::RankDeficient {
            what: "d-axis saturation (a30, a40)",
        });
    }
    let (w, u) = (plan.omega, plan.u_tilde);
    let fit = d_axis_fit(meas, ld, w, u)?;
    let sigma_y = w * unc.i_tilde / u;
    let mut sigma: Vec<f64> = (0..2).map(|j| fit.std_err(j, sigma_y)).collect();
    add_inductance_sigma(&fit.coef, &mut sigma, ld, ld, &Uncertainty { lq: 0.0, ..*unc }, |ld, _| {
        Ok(d_axis_fit(meas, ld, w, u)?.coef)
    })?;
    Ok(CoefficientFit {
        values: fit.coef,
        sigma,
        rms: vec![("d_axis", fit.rms)],
    })
}

/// One run of a q-axis bias sweep.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CrossPoint {
    pub i_bar_q: f64,
    pub i_tilde_d: f64,
    pub i_tilde_q: f64,
}

struct CrossFits {
    a22: LsqFit,
    a12: LsqFit,
    a04: LsqFit,
}

fn cross_fits(meas_c: &[CrossPoint], meas_d: &[CrossPoint], ld: f64, lq: f64, w: f64, u: f64) -> Result<CrossFits> {
    // d-axis injection, d-axis ripple.
    let x22 = lsq::design(meas_c.iter().map(|m| [2.0 * lq * lq * m.i_bar_q * m.i_bar_q]));
    let y22: Vec<f64> = meas_c.iter().map(|m| w * m.i_tilde_d / u - 1.0 / ld).collect();
    let a22 = lsq::solve(&x22, &y22, "cross saturation a22")?;

    // q-axis ripple under d-axis injection stacked with d-axis ripple under q-axis injection.
    let x12 = lsq::design(
        meas_c
            .iter()
            .chain(meas_d)
            .map(|m| [2.0 * lq * m.i_bar_q]),
    );
    let y12: Vec<f64> = meas_c
        .iter()
        .map(|m| w * m.i_tilde_q / u)
        .chain(meas_d.iter().map(|m| w * m.i_tilde_d / u))
        .collect();
    let a12 = lsq::solve(&x12, &y12, "cross saturation a12")?;

    // q-axis injection, q-axis ripple.
    let x04 = lsq::design(meas_d.iter().map(|m| [12.0 * lq * lq * m.i_bar_q * m.i_bar_q]));
    let y04: Vec<f64> = meas_d.iter().map(|m| w * m.i_tilde_q / u - 1.0 / lq).collect();
    let a04 = lsq::solve(&x04, &y04, "q-axis saturation a04")?;
    Ok(CrossFits { a22, a12, a04 })
}

/// Separate fits of `a22`, `a12`, `a04` from the q-axis bias sweeps with d-axis
/// injection (`meas_c`) and q-axis injection (`meas_d`). Values are ordered
/// `[a22, a12, a04]`.
pub fn estimate_cross(
    meas_c: &[CrossPoint],
    meas_d: &[CrossPoint],
    ld: f64,
    lq: f64,
    plan: &ExperimentPlan,
    unc: &Uncertainty,
) -> Result<CoefficientFit> {
    for (what, m) in [("cross saturation (d-axis injection)", meas_c), ("cross saturation (q-axis injection)", meas_d)] {
        if distinct_count(m.iter().map(|p| p.i_bar_q)) < 3 {
            return Err(Error::RankDeficient { what });
        }
    }
    let (w, u) = (plan.omega, plan.u_tilde);
    let fits = cross_fits(meas_c, meas_d, ld, lq, w, u)?;
    let sigma_y = w * unc.i_tilde / u;
    let values = vec![fits.a22.coef[0], fits.a12.coef[0], fits.a04.coef[0]];
    let mut sigma = vec![
        fits.a22.std_err(0, sigma_y),
        fits.a12.std_err(0, sigma_y),
        fits.a04.std_err(0, sigma_y),
    ];
    add_inductance_sigma(&values, &mut sigma, ld, lq, unc, |ld, lq| {
        let f = cross_fits(meas_c, meas_d, ld, lq, w, u)?;
        Ok(vec![f.a22.coef[0], f.a12.coef[0], f.a04.coef[0]])
    })?;
    Ok(CoefficientFit {
        values,
        sigma,
        rms: vec![("a22", fits.a22.rms), ("a12", fits.a12.rms), ("a04", fits.a04.rms)],
    })
}

/// One run in flux-referenced form: the `F(omega t)` coefficients of the
/// measured currents and of each flux monomial of the current map.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FluxPoint {
    /// Regressors of `i_tilde_d` in `[1/Ld, 1/Lq, a30, a12, a40, a22, a04]`.
    pub row_d: [f64; 7],
    /// Regressors of `i_tilde_q`.
    pub row_q: [f64; 7],
    pub i_tilde_d: f64,
    pub i_tilde_q: f64,
}

/// Builds the regressors of a run from its flux samples.
///
/// The current map is linear in the unknowns for a given flux, and so is the
/// `F` projection, so `i_tilde = row * theta` holds exactly for the recorded
/// trajectory, with no small-ripple or first-order approximation.
pub fn flux_point(
    t: &[f64],
    phi_d: &[f64],
    phi_q: &[f64],
    spec: &InjectionSpec,
    window: (usize, usize),
    i_tilde: (f64, f64),
) -> Result<FluxPoint> {
    let proj = |g: &dyn Fn(f64, f64) -> f64| -> Result<f64> {
        let series: Vec<f64> = phi_d.iter().zip(phi_q).map(|(&d, &q)| g(d, q)).collect();
        Ok(ripple::project(t, &series, spec, window)?.1)
    };
    let d1 = proj(&|d, _| d)?;
    let q1 = proj(&|_, q| q)?;
    let d2 = proj(&|d, _| d * d)?;
    let q2 = proj(&|_, q| q * q)?;
    let dq = proj(&|d, q| d * q)?;
    let d3 = proj(&|d, _| d * d * d)?;
    let q3 = proj(&|_, q| q * q * q)?;
    let dq2 = proj(&|d, q| d * q * q)?;
    let d2q = proj(&|d, q| d * d * q)?;
    Ok(FluxPoint {
        row_d: [d1, 0.0, 3.0 * d2, q2, 4.0 * d3, 2.0 * dq2, 0.0],
        row_q: [0.0, q1, 0.0, 2.0 * dq, 0.0, 2.0 * d2q, 4.0 * q3],
        i_tilde_d: i_tilde.0,
        i_tilde_q: i_tilde.1,
    })
}

/// Joint fit of both inductances and all five coefficients from the measured
/// flux and current ripple of every run. Values are ordered
/// `[Ld, Lq, a30, a12, a40, a22, a04]`.
pub fn estimate_flux_referenced(points: &[FluxPoint], sigma_i_tilde: f64) -> Result<CoefficientFit> {
    let mut rows = Vec::with_capacity(2 * points.len());
    let mut y = Vec::with_capacity(2 * points.len());
    for p in points {
        rows.push(p.row_d);
        y.push(p.i_tilde_d);
        rows.push(p.row_q);
        y.push(p.i_tilde_q);
    }
    let fit = lsq::solve(&lsq::design(rows), &y, "flux-referenced fit")?;
    let mut values = fit.coef.clone();
    let mut sigma: Vec<f64> = (0..7).map(|j| fit.std_err(j, sigma_i_tilde)).collect();
    for j in 0..2 {
        if !(values[j] > 0.0) {
            return Err(Error::invalid("inductance", "flux-referenced fit gave a non-positive inverse inductance"));
        }
        values[j] = 1.0 / fit.coef[j];
        sigma[j] *= values[j] * values[j];
    }
    Ok(CoefficientFit {
        values,
        sigma,
        rms: vec![("flux_referenced", fit.rms)],
    })
}

/// One-sigma uncertainties of the seven magnetic parameters, in SI units.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct ParamSigma {
    pub ld: f64,
    pub lq: f64,
    pub sat: SaturationCoeffs,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EstimationResult {
    /// Resistance, magnet flux and pole pairs are passed through from the nominal motor.
    pub params: MotorParams,
    pub sigma: ParamSigma,
    pub fit_residuals: Vec<(&'static str, f64)>,
}

/// Timing and noise settings shared by every run of a plan.
#[derive(Debug, Clone, PartialEq)]
pub struct RunSettings {
    pub steps_per_period: u32,
    /// Output sampling, in integration steps.
    pub sample_every: u32,
    /// Whole waveform periods kept for ripple fitting.
    pub measure_periods: u32,
    /// Transient discard in units of `max(Ld, Lq) / R`.
    pub settle_time_constants: f64,
    /// Current-noise half-width (A).
    pub noise_amp: f64,
    /// Flux at the start of the settling pre-run, or of the run itself when not settling.
    pub initial_flux: FluxLinkage,
    /// Run each bias point to a periodic steady state before recording.
    pub settle: bool,
}

impl Default for RunSettings {
    fn default() -> Self {
        RunSettings {
            steps_per_period: simulator::DEFAULT_STEPS_PER_PERIOD,
            sample_every: 1,
            measure_periods: 50,
            settle_time_constants: 7.0,
            noise_amp: 0.0,
            initial_flux: FluxLinkage::ZERO,
            settle: true,
        }
    }
}

impl RunSettings {
    /// Current-noise standard deviation of the uniform model (A).
    pub fn noise_std(&self) -> f64 {
        self.noise_amp / 3.0_f64.sqrt()
    }

    /// Transient discard, rounded up to whole waveform periods.
    pub fn discard(&self, p: &MotorParams, omega: f64) -> f64 {
        let period = TAU / omega;
        let settle = self.settle_time_constants * p.ld.max(p.lq) / p.r;
        (settle / period - 1e-9).ceil().max(0.0) * period
    }

    pub fn sim_config(&self, p: &MotorParams, spec: &InjectionSpec) -> SimConfig {
        let period = spec.period();
        let dt = period / self.steps_per_period as f64;
        let discard = self.discard(p, spec.omega);
        SimConfig {
            dt,
            t_end: discard + self.measure_periods as f64 * period,
            theta_dot: 0.0,
            initial_flux: self.initial_flux,
            sample_period: dt * self.sample_every as f64,
            noise_amp: self.noise_amp,
        }
    }
}

/// Planned run together with its recorded trace.
#[derive(Debug, Clone, PartialEq)]
pub struct RunData {
    pub run: PlannedRun,
    pub trace: Trace,
    pub initial_flux: FluxLinkage,
}

/// Per-run ripple and mean-flux measurement.
#[derive(Debug, Clone, PartialEq)]
pub struct RunResult {
    pub run: PlannedRun,
    pub ripple: RippleMeasurement,
    pub phi_bar: FluxLinkage,
    pub phi_tilde: FluxLinkage,
    pub flux_point: FluxPoint,
}

/// Seed of run `index` derived from the plan seed.
pub fn run_seed(seed: u64, index: usize) -> u64 {
    seed.wrapping_add((index as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15))
}

/// Simulates every planned run of `plan` on motor `p` (in parallel, ordered output).
pub fn simulate_plan(p: &MotorParams, plan: &ExperimentPlan, settings: &RunSettings, seed: u64) -> Result<Vec<RunData>> {
    plan.validate()?;
    let runs = plan_runs(plan, p.r);
    runs.into_par_iter()
        .enumerate()
        .map(|(k, run)| {
            let mut cfg = settings.sim_config(p, &run.spec);
            if settings.settle {
                cfg.initial_flux = simulator::settle(p, &run.spec, &cfg, simulator::SETTLE_TOL)
                    .map_err(|e| e.in_run(run.label(k)))?;
            }
            let trace = simulator::simulate(p, &run.spec, &cfg, run_seed(seed, k)).map_err(|e| e.in_run(run.label(k)))?;
            Ok(RunData {
                run,
                trace,
                initial_flux: cfg.initial_flux,
            })
        })
        .collect()
}

/// Ripple extraction and mean-flux measurement for one run.
pub fn measure_run(data: &RunData, nominal: &MotorParams, settings: &RunSettings) -> Result<RunResult> {
    let discard = settings.discard(nominal, data.run.spec.omega);
    let ripple = ripple::extract_ripple(&data.trace, &data.run.spec, discard)?;
    let (pd, pq) = data.trace.integrated_flux(nominal.r, data.initial_flux);
    let (bd, td) = ripple::project(&data.trace.t, &pd, &data.run.spec, ripple.window)?;
    let (bq, tq) = ripple::project(&data.trace.t, &pq, &data.run.spec, ripple.window)?;
    let flux_point = flux_point(
        &data.trace.t,
        &pd,
        &pq,
        &data.run.spec,
        ripple.window,
        (ripple.i_tilde_d, ripple.i_tilde_q),
    )?;
    Ok(RunResult {
        run: data.run.clone(),
        ripple,
        phi_bar: FluxLinkage::new(bd, bq),
        phi_tilde: FluxLinkage::new(td, tq),
        flux_point,
    })
}

/// Both coefficient estimates plus the per-run measurements behind them.
#[derive(Debug, Clone, PartialEq)]
pub struct Identification {
    pub first_order: EstimationResult,
    pub flux_referenced: EstimationResult,
    pub runs: Vec<RunResult>,
}

/// Runs ripple extraction and all regressions on recorded runs.
///
/// `nominal` supplies the resistance used for biasing and flux integration and
/// the inductances used to size the transient discard.
pub fn estimate_from_runs(
    nominal: &MotorParams,
    plan: &ExperimentPlan,
    settings: &RunSettings,
    data: &[RunData],
) -> Result<Identification> {
    let runs: Vec<RunResult> = data
        .par_iter()
        .enumerate()
        .map(|(k, d)| measure_run(d, nominal, settings).map_err(|e| e.in_run(d.run.label(k))))
        .collect::<Result<_>>()?;

    let find = |kind| runs.iter().find(|r| r.run.kind == kind);
    let (zd, zq) = match (find(RunKind::ZeroBiasD), find(RunKind::ZeroBiasQ)) {
        (Some(d), Some(q)) => (d, q),
        _ => return Err(Error::invalid("runs", "both zero-bias runs are required")),
    };
    let sigma_it = settings.noise_std() * zd.ripple.tilde_sensitivity.max(zq.ripple.tilde_sensitivity);
    let l = estimate_l(
        &zd.ripple,
        &zq.ripple,
        (zd.run.spec.u_tilde_d, zq.run.spec.u_tilde_q),
        plan,
        sigma_it,
    )
    .map_err(|e| e.in_run("zero-bias"))?;
    let unc = Uncertainty {
        i_tilde: sigma_it,
        ld: l.sigma_ld,
        lq: l.sigma_lq,
    };

    let of_kind = |kind| runs.iter().filter(move |r| r.run.kind == kind);
    let d_sweep: Vec<(f64, f64)> = of_kind(RunKind::DSweep)
        .map(|r| (r.run.i_bar_target, r.ripple.i_tilde_d))
        .collect();
    let cross = |kind| -> Vec<CrossPoint> {
        of_kind(kind)
            .map(|r| CrossPoint {
                i_bar_q: r.run.i_bar_target,
                i_tilde_d: r.ripple.i_tilde_d,
                i_tilde_q: r.ripple.i_tilde_q,
            })
            .collect()
    };
    let meas_c = cross(RunKind::QBiasDInjection);
    let meas_d = cross(RunKind::QBiasQInjection);

    let dfit = estimate_d_axis(&d_sweep, l.ld, plan, &unc).map_err(|e| e.in_run("d-axis sweep"))?;
    let cfit = estimate_cross(&meas_c, &meas_d, l.ld, l.lq, plan, &unc).map_err(|e| e.in_run("q-axis sweeps"))?;
    let first_order_sat = SaturationCoeffs {
        a30: dfit.values[0],
        a40: dfit.values[1],
        a22: cfit.values[0],
        a12: cfit.values[1],
        a04: cfit.values[2],
    };
    let first_order_sigma = SaturationCoeffs {
        a30: dfit.sigma[0],
        a40: dfit.sigma[1],
        a22: cfit.sigma[0],
        a12: cfit.sigma[1],
        a04: cfit.sigma[2],
    };
    let with_l = MotorParams {
        ld: l.ld,
        lq: l.lq,
        ..*nominal
    };
    let first_order = EstimationResult {
        params: with_l.with_saturation(first_order_sat),
        sigma: ParamSigma {
            ld: l.sigma_ld,
            lq: l.sigma_lq,
            sat: first_order_sigma,
        },
        fit_residuals: dfit.rms.iter().chain(&cfit.rms).copied().collect(),
    };

    let points: Vec<FluxPoint> = runs.iter().map(|r| r.flux_point).collect();
    let ffit = estimate_flux_referenced(&points, sigma_it).map_err(|e| e.in_run("flux-referenced fit"))?;
    let v = &ffit.values;
    let sg = &ffit.sigma;
    let flux_referenced = EstimationResult {
        params: MotorParams {
            ld: v[0],
            lq: v[1],
            ..*nominal
        }
        .with_saturation(SaturationCoeffs::from_array([v[2], v[3], v[4], v[5], v[6]])),
        sigma: ParamSigma {
            ld: sg[0],
            lq: sg[1],
            sat: SaturationCoeffs::from_array([sg[2], sg[3], sg[4], sg[5], sg[6]]),
        },
        fit_residuals: ffit.rms.clone(),
    };
    Ok(Identification {
        first_order,
        flux_referenced,
        runs,
    })
}

/// Simulates the plan on `truth` and identifies its parameters.
pub fn identify(truth: &MotorParams, plan: &ExperimentPlan, settings: &RunSettings, seed: u64) -> Result<Identification> {
    let data = simulate_plan(truth, plan, settings, seed)?;
    estimate_from_runs(truth, plan, settings, &data)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::presets;

    fn plan(id: Vec<f64>, iq: Vec<f64>) -> ExperimentPlan {
        ExperimentPlan {
            omega: TAU * 500.0,
            waveform: Waveform::Square,
            u_tilde: 30.0,
            id_grid: id,
            iq_grid: iq,
        }
    }

    #[test]
    fn grid_is_symmetric() {
        let g = symmetric_grid(2.0, 0.3);
        assert_eq!(g.len(), 13);
        assert!((g[0] + 1.8).abs() < 1e-12 && (g[12] - 1.8).abs() < 1e-12);
        assert_eq!(g[6], 0.0);
        assert_eq!(symmetric_grid(8.0, 0.5).len(), 33);
    }

    #[test]
    fn plan_layout() {
        let grid = symmetric_grid(2.0, 0.3);
        let runs = plan_runs(&plan(grid.clone(), vec![]), 12.15);
        assert_eq!(runs.len(), 2 + grid.len());
        for (run, i) in runs[2..].iter().zip(&grid) {
            assert_eq!(run.spec.u_bar_d, 12.15 * i);
            assert_eq!(run.spec.u_tilde_q, 0.0);
        }
        let only_zero = plan_runs(&plan(vec![], vec![]), 12.15);
        assert_eq!(only_zero.len(), 2);
        assert_eq!(only_zero[0].spec.u_tilde_d, 30.0);
        assert_eq!(only_zero[1].spec.u_tilde_q, 30.0);

        let runs = plan_runs(&plan(vec![], vec![1.0]), 1.0);
        assert_eq!(runs.len(), 4);
        let c = &runs[2];
        assert_eq!(c.kind, RunKind::QBiasDInjection);
        assert_eq!((c.spec.u_bar_d, c.spec.u_bar_q), (0.0, 1.0));
        assert_eq!((c.spec.u_tilde_d, c.spec.u_tilde_q), (30.0, 0.0));
        let d = &runs[3];
        assert_eq!((d.spec.u_tilde_d, d.spec.u_tilde_q), (0.0, 30.0));
    }

    #[test]
    fn inductance_from_constructed_ripple() {
        let pl = plan(vec![], vec![]);
        let it = 30.0 / (pl.omega * 0.0919);
        let m = RippleMeasurement {
            i_bar_d: 0.0,
            i_bar_q: 0.0,
            i_tilde_d: it,
            i_tilde_q: 30.0 / (pl.omega * 0.0458),
            residual_rms_d: 0.0,
            residual_rms_q: 0.0,
            n_periods_used: 10,
            tilde_sensitivity: 0.0,
            window: (0, 0),
        };
        let l = estimate_l(&m, &m, (30.0, 30.0), &pl, 0.0).unwrap();
        assert!((l.ld - 0.0919).abs() < 1e-15);
        assert!((l.lq - 0.0458).abs() < 1e-15);
        assert!(matches!(
            estimate_l(&m, &m, (0.0, 30.0), &pl, 0.0),
            Err(Error::ZeroRipple { axis: 'd', .. })
        ));
    }

    #[test]
    fn linear_limit_prediction() {
        let p = presets::ipm();
        let spec = InjectionSpec::new((0.0, 0.0), (30.0, 20.0), TAU * 500.0, Waveform::Square).unwrap();
        let (d, q) = predict_ripple(&p, &spec);
        assert!((d - 30.0 / (spec.omega * p.ld)).abs() < 1e-15);
        assert!((q - 20.0 / (spec.omega * p.lq)).abs() < 1e-15);
        let lin = p.unsaturated();
        let biased = InjectionSpec { u_bar_d: 12.0, u_bar_q: -7.0, ..spec.clone() };
        let (d, q) = predict_ripple(&lin, &biased);
        assert!((d - 30.0 / (spec.omega * p.ld)).abs() < 1e-15);
        assert!((q - 20.0 / (spec.omega * p.lq)).abs() < 1e-15);
    }

    #[test]
    fn d_axis_needs_three_levels() {
        let pl = plan(vec![], vec![]);
        let meas = [(1.0, 0.1), (1.0, 0.1), (1.0, 0.1), (-1.0, 0.1)];
        assert!(matches!(
            estimate_d_axis(&meas, 0.0919, &pl, &Uncertainty::default()),
            Err(Error::RankDeficient { .. })
        ));
    }

    #[test]
    fn odd_regressor_on_even_data() {
        // q-axis ripple even in i_bar_q carries no a12 component.
        let pl = plan(vec![], vec![]);
        let (ld, lq) = (0.0919, 0.0458);
        let grid = symmetric_grid(1.5, 0.5);
        let pts: Vec<CrossPoint> = grid
            .iter()
            .map(|&i| CrossPoint {
                i_bar_q: i,
                i_tilde_d: 30.0 / pl.omega * (1.0 / ld + 0.3 * i * i),
                i_tilde_q: 30.0 / pl.omega * (0.2 * i * i),
            })
            .collect();
        let fit = estimate_cross(&pts, &pts, ld, lq, &pl, &Uncertainty::default()).unwrap();
        assert!(fit.values[1].abs() < 1e-10, "{:?}", fit.values);
    }

    #[test]
    fn seeds_differ_per_run() {
        assert_ne!(run_seed(1, 0), run_seed(1, 1));
        assert_eq!(run_seed(5, 0), 5);
    }
}
