//! Validation experiments on a known motor: ripple versus bias along a current
//! angle, large-step responses with and without saturation, flux obtained by
//! integrating voltages and currents, and magnetization curves.

use std::io::Write;
use std::path::Path;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::estimator::{predict_ripple, RunSettings};
use crate::magnetics::{Currents, FluxLinkage, MotorParams};
use crate::ripple;
use crate::signal::{InjectionSpec, Waveform};
use crate::simulator::{self, SimConfig};
use crate::trace::{fmt, Trace};

#[derive(Debug, Clone, PartialEq)]
pub struct SweepSpec {
    /// Current-vector angle from the d axis (degree).
    pub angle_deg: f64,
    /// Current-vector magnitudes (A).
    pub magnitudes: Vec<f64>,
    pub omega: f64,
    pub waveform: Waveform,
    pub u_tilde_d: f64,
    pub u_tilde_q: f64,
}

impl SweepSpec {
    pub fn validate(&self) -> Result<()> {
        if self.magnitudes.iter().any(|m| !(*m >= 0.0) || !m.is_finite()) {
            return Err(Error::invalid("magnitudes", "must be finite and non-negative"));
        }
        if !self.angle_deg.is_finite() {
            return Err(Error::invalid("angle", "must be finite"));
        }
        Ok(())
    }

    pub fn bias(&self, magnitude: f64) -> Currents {
        let a = self.angle_deg.to_radians();
        Currents::new(magnitude * a.cos(), magnitude * a.sin())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SweepRow {
    pub magnitude: f64,
    pub i_bar: Currents,
    /// First-order prediction `(i_tilde_d, i_tilde_q)`.
    pub predicted: (f64, f64),
    /// Ripple extracted from a settled simulation.
    pub simulated: (f64, f64),
}

/// Ripple along a current angle: first-order prediction next to simulation.
pub fn angle_sweep(p: &MotorParams, s: &SweepSpec, settings: &RunSettings) -> Result<Vec<SweepRow>> {
    s.validate()?;
    s.magnitudes
        .par_iter()
        .map(|&m| {
            let i_bar = s.bias(m);
            let spec = InjectionSpec::new(
                (p.r * i_bar.d, p.r * i_bar.q),
                (s.u_tilde_d, s.u_tilde_q),
                s.omega,
                s.waveform.clone(),
            )?;
            let mut cfg = settings.sim_config(p, &spec);
            if settings.settle {
                cfg.initial_flux = simulator::settle(p, &spec, &cfg, simulator::SETTLE_TOL)?;
            }
            let tr = simulator::simulate(p, &spec, &cfg, 0)?;
            let m_r = ripple::extract_ripple(&tr, &spec, settings.discard(p, spec.omega))?;
            Ok(SweepRow {
                magnitude: m,
                i_bar,
                predicted: predict_ripple(p, &spec),
                simulated: (m_r.i_tilde_d, m_r.i_tilde_q),
            })
        })
        .collect::<Result<_>>()
        .map_err(|e: Error| e.in_run(format!("angle sweep at {} deg", s.angle_deg)))
}

/// d-axis voltage step from rest on the full model and on the same motor with
/// all saturation coefficients zeroed.
pub fn step_response(p: &MotorParams, u_step: f64, t_end: f64, dt: f64) -> Result<(Trace, Trace)> {
    let spec = InjectionSpec::constant(u_step, 0.0, 1.0)?;
    let cfg = SimConfig::locked_rotor(dt, t_end);
    let sat = simulator::simulate(p, &spec, &cfg, 0)?;
    let lin = simulator::simulate(&p.unsaturated(), &spec, &cfg, 0)?;
    Ok((sat, lin))
}

/// `(i_d, phi_d)` pairs with `phi_d` integrated from the voltage and current
/// channels, starting from the recorded flux when the trace has one and from
/// zero otherwise.
pub fn flux_by_integration(trace: &Trace, p: &MotorParams) -> Vec<(f64, f64)> {
    let (d, _) = integrate_flux(trace, p);
    trace.i_d.iter().copied().zip(d).collect()
}

/// Both flux channels integrated from the voltages and currents.
pub fn integrate_flux(trace: &Trace, p: &MotorParams) -> (Vec<f64>, Vec<f64>) {
    let initial = match (&trace.phi_d, &trace.phi_q) {
        (Some(d), Some(q)) if !d.is_empty() => FluxLinkage::new(d[0], q[0]),
        _ => FluxLinkage::ZERO,
    };
    trace.integrated_flux(p.r, initial)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Curve {
    /// Current held fixed on the other axis (A).
    pub level: f64,
    /// `(current, exact flux, first-order flux)` along the swept axis.
    pub points: Vec<(f64, f64, f64)>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MagnetizationCurves {
    /// `phi_d(i_d)` at each fixed `i_q`.
    pub d: Vec<Curve>,
    /// `phi_q(i_q)` at each fixed `i_d`.
    pub q: Vec<Curve>,
}

/// Flux-current curves by exact inversion of the current map: `phi_d` over
/// `grid` at each `i_q` in `levels`, and `phi_q` over `grid` at each `i_d`.
pub fn magnetization_curves(p: &MotorParams, grid: &[f64], levels: &[f64], tol: f64) -> Result<MagnetizationCurves> {
    let curve = |level: f64, d_axis: bool| -> Result<Curve> {
        let points = grid
            .iter()
            .map(|&x| {
                let i = if d_axis { Currents::new(x, level) } else { Currents::new(level, x) };
                let exact = p.flux_from_currents_exact(i, tol)?;
                let approx = p.flux_from_currents_first_order(i);
                Ok(if d_axis { (x, exact.d, approx.d) } else { (x, exact.q, approx.q) })
            })
            .collect::<Result<_>>()?;
        Ok(Curve { level, points })
    };
    let d = levels.par_iter().map(|&l| curve(l, true)).collect::<Result<_>>()?;
    let q = levels.par_iter().map(|&l| curve(l, false)).collect::<Result<_>>()?;
    Ok(MagnetizationCurves { d, q })
}

fn create(path: &Path) -> Result<std::io::BufWriter<std::fs::File>> {
    let f = std::fs::File::create(path).map_err(|e| Error::io(format!("creating {}", path.display()), e))?;
    Ok(std::io::BufWriter::new(f))
}

/// Writes `x,y_model,y_measured` rows.
pub fn write_xy_csv(path: &Path, rows: &[(f64, f64, f64)]) -> Result<()> {
    let mut w = create(path)?;
    let io = |e| Error::io(format!("writing {}", path.display()), e);
    writeln!(w, "x,y_model,y_measured").map_err(io)?;
    for &(x, a, b) in rows {
        writeln!(w, "{},{},{}", fmt(x), fmt(a), fmt(b)).map_err(io)?;
    }
    w.flush().map_err(io)
}

/// Writes `t,i_sat,i_lin` rows from two traces on the same time grid.
pub fn write_step_csv(path: &Path, sat: &Trace, lin: &Trace) -> Result<()> {
    if sat.t != lin.t {
        return Err(Error::Trace("step traces are on different time grids".into()));
    }
    let mut w = create(path)?;
    let io = |e| Error::io(format!("writing {}", path.display()), e);
    writeln!(w, "t,i_sat,i_lin").map_err(io)?;
    for k in 0..sat.len() {
        writeln!(w, "{},{},{}", fmt(sat.t[k]), fmt(sat.i_d[k]), fmt(lin.i_d[k])).map_err(io)?;
    }
    w.flush().map_err(io)
}
