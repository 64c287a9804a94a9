//! Fixed-step RK4 integration of the d-q electrical dynamics in flux coordinates.
//!
//! ```text
//! dphi_d/dt = u_d - R i_d + theta_dot * phi_q
//! dphi_q/dt = u_q - R i_q - theta_dot * (phi_d + phi_m)
//! ```
//!
//! with `(i_d, i_q)` given by the energy-based current map.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::magnetics::{FluxLinkage, MotorParams};
use crate::signal::InjectionSpec;
use crate::trace::Trace;

/// Default number of integration steps per waveform period.
pub const DEFAULT_STEPS_PER_PERIOD: u32 = 200;
/// Coarsest step accepted relative to the waveform period.
pub const MIN_STEPS_PER_PERIOD: f64 = 50.0;

#[derive(Debug, Clone, PartialEq)]
pub struct SimConfig {
    /// Integration step (s).
    pub dt: f64,
    /// Duration (s).
    pub t_end: f64,
    /// Electrical speed (rad/s); 0 for a locked rotor.
    pub theta_dot: f64,
    pub initial_flux: FluxLinkage,
    /// Output sampling interval (s), rounded to a whole number of steps.
    pub sample_period: f64,
    /// Half-width of the uniform current measurement noise (A).
    pub noise_amp: f64,
}

impl SimConfig {
    /// Locked rotor, de-energized start, sampling every step, no noise.
    pub fn locked_rotor(dt: f64, t_end: f64) -> Self {
        SimConfig {
            dt,
            t_end,
            theta_dot: 0.0,
            initial_flux: FluxLinkage::ZERO,
            sample_period: dt,
            noise_amp: 0.0,
        }
    }

    /// Locked-rotor configuration with the default step for `spec`'s waveform.
    pub fn for_injection(spec: &InjectionSpec, t_end: f64) -> Self {
        Self::locked_rotor(spec.period() / DEFAULT_STEPS_PER_PERIOD as f64, t_end)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(Error::invalid("dt", "must be positive"));
        }
        if !(self.t_end > 0.0 && self.t_end.is_finite()) {
            return Err(Error::invalid("t_end", "must be positive"));
        }
        if !(self.sample_period >= self.dt * (1.0 - 1e-9)) {
            return Err(Error::invalid("sample_period", "must be at least dt"));
        }
        if !(self.noise_amp >= 0.0) {
            return Err(Error::invalid("noise_amp", "must be non-negative"));
        }
        if !self.theta_dot.is_finite() || !self.initial_flux.is_finite() {
            return Err(Error::invalid("theta_dot", "state and speed must be finite"));
        }
        Ok(())
    }
}

/// Integration grid actually used after aligning the step with the waveform.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepGrid {
    pub dt: f64,
    pub steps: usize,
    pub sample_every: usize,
}

impl StepGrid {
    /// Shrinks `cfg.dt` so that a whole number of steps fits in half a period
    /// (square-wave switching instants then fall on step boundaries).
    pub fn new(spec: &InjectionSpec, cfg: &SimConfig) -> Result<Self> {
        cfg.validate()?;
        spec.validate()?;
        let dt = if spec.has_injection() {
            let period = spec.period();
            if cfg.dt > period / MIN_STEPS_PER_PERIOD * (1.0 + 1e-12) {
                return Err(Error::StepTooLarge { dt: cfg.dt, period });
            }
            let half = 0.5 * period;
            let n = (half / cfg.dt * (1.0 - 1e-12)).ceil().max(1.0);
            half / n
        } else {
            cfg.dt
        };
        let steps = (cfg.t_end / dt).round().max(1.0) as usize;
        let sample_every = (cfg.sample_period / dt).round().max(1.0) as usize;
        Ok(StepGrid {
            dt,
            steps,
            sample_every,
        })
    }
}

struct Dynamics<'a> {
    p: &'a MotorParams,
    theta_dot: f64,
}

impl Dynamics<'_> {
    #[inline]
    fn rhs(&self, f: FluxLinkage, u: (f64, f64)) -> FluxLinkage {
        let i = self.p.currents_from_flux(f);
        FluxLinkage {
            d: u.0 - self.p.r * i.d + self.theta_dot * f.q,
            q: u.1 - self.p.r * i.q - self.theta_dot * (f.d + self.p.phi_m),
        }
    }

    #[inline]
    fn rk4_step(&self, f: FluxLinkage, dt: f64, u: [(f64, f64); 3]) -> FluxLinkage {
        let axpy = |a: FluxLinkage, h: f64, k: FluxLinkage| FluxLinkage::new(a.d + h * k.d, a.q + h * k.q);
        let k1 = self.rhs(f, u[0]);
        let k2 = self.rhs(axpy(f, 0.5 * dt, k1), u[1]);
        let k3 = self.rhs(axpy(f, 0.5 * dt, k2), u[1]);
        let k4 = self.rhs(axpy(f, dt, k3), u[2]);
        FluxLinkage::new(
            f.d + dt / 6.0 * (k1.d + 2.0 * k2.d + 2.0 * k3.d + k4.d),
            f.q + dt / 6.0 * (k1.q + 2.0 * k2.q + 2.0 * k3.q + k4.q),
        )
    }
}

/// Voltages seen by the three distinct RK4 stage times of the step starting at `t`.
fn stage_voltages(spec: &InjectionSpec, t: f64, dt: f64) -> [(f64, f64); 3] {
    if spec.waveform.is_square() {
        // Constant over the step; evaluating inside it avoids picking the far
        // side of a switching instant at the step ends.
        let u = spec.voltage_at(t + 0.5 * dt);
        [u; 3]
    } else {
        [
            spec.voltage_at(t),
            spec.voltage_at(t + 0.5 * dt),
            spec.voltage_at(t + dt),
        ]
    }
}

/// Integrates the electrical dynamics under the pulsating-voltage input `spec`.
///
/// Currents in the returned trace carry uniform noise in `[-noise_amp, noise_amp]`
/// drawn from a generator seeded with `seed`; flux channels are noise free.
pub fn simulate(p: &MotorParams, spec: &InjectionSpec, cfg: &SimConfig, seed: u64) -> Result<Trace> {
    p.validate()?;
    let grid = StepGrid::new(spec, cfg)?;
    let dynamics = Dynamics {
        p,
        theta_dot: cfg.theta_dot,
    };
    let n_samples = grid.steps / grid.sample_every + 1;
    let sample_dt = grid.dt * grid.sample_every as f64;
    let mut tr = Trace {
        t: Vec::with_capacity(n_samples),
        u_d: Vec::with_capacity(n_samples),
        u_q: Vec::with_capacity(n_samples),
        i_d: Vec::with_capacity(n_samples),
        i_q: Vec::with_capacity(n_samples),
        phi_d: Some(Vec::with_capacity(n_samples)),
        phi_q: Some(Vec::with_capacity(n_samples)),
    };
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let noise = |rng: &mut ChaCha8Rng| {
        if cfg.noise_amp > 0.0 {
            rng.random_range(-cfg.noise_amp..=cfg.noise_amp)
        } else {
            0.0
        }
    };

    let mut f = cfg.initial_flux;
    let record = |k: usize, f: FluxLinkage, tr: &mut Trace, rng: &mut ChaCha8Rng| {
        let t = k as f64 * grid.dt;
        let i = p.currents_from_flux(f);
        let (ud, uq) = spec.mean_voltage(t, t + sample_dt);
        tr.t.push(t);
        tr.u_d.push(ud);
        tr.u_q.push(uq);
        tr.i_d.push(i.d + noise(rng));
        tr.i_q.push(i.q + noise(rng));
        tr.phi_d.as_mut().unwrap().push(f.d);
        tr.phi_q.as_mut().unwrap().push(f.q);
    };
    record(0, f, &mut tr, &mut rng);
    for k in 0..grid.steps {
        let t = k as f64 * grid.dt;
        f = dynamics.rk4_step(f, grid.dt, stage_voltages(spec, t, grid.dt));
        if (k + 1) % grid.sample_every == 0 {
            record(k + 1, f, &mut tr, &mut rng);
        }
    }
    Ok(tr)
}

/// Integrates the averaged locked-rotor system driven by the mean voltages only.
///
/// Its equilibrium is the mean flux `phi_bar` with `u_bar = R * i(phi_bar)`.
pub fn simulate_averaged(p: &MotorParams, u_bar_d: f64, u_bar_q: f64, cfg: &SimConfig) -> Result<Trace> {
    if cfg.theta_dot != 0.0 {
        return Err(Error::invalid("theta_dot", "averaged system is defined for a locked rotor"));
    }
    let quiet = SimConfig {
        noise_amp: 0.0,
        ..cfg.clone()
    };
    // Any pulsation works here: without injection it only names the time grid.
    let spec = InjectionSpec::constant(u_bar_d, u_bar_q, 1.0)?;
    simulate(p, &spec, &quiet, 0)
}

/// Stroboscopic flux increment per period below which a run counts as settled (Wb).
pub const SETTLE_TOL: f64 = 1e-12;
/// Longest pre-run accepted while settling, in waveform periods.
pub const SETTLE_MAX_PERIODS: usize = 50_000;
const SETTLE_BLOCK_PERIODS: usize = 50;

/// Integrates whole waveform periods from `cfg.initial_flux` until the flux
/// sampled once per period moves by at most `tol`, and returns that state.
///
/// Starting a run from the returned flux at `t = 0` continues the settled
/// trajectory because the waveform is periodic.
pub fn settle(p: &MotorParams, spec: &InjectionSpec, cfg: &SimConfig, tol: f64) -> Result<FluxLinkage> {
    if !(tol > 0.0) {
        return Err(Error::invalid("tol", "must be positive"));
    }
    let period = spec.period();
    let mut f = cfg.initial_flux;
    let mut done = 0;
    let mut drift = f64::INFINITY;
    while done < SETTLE_MAX_PERIODS {
        let block = SimConfig {
            t_end: SETTLE_BLOCK_PERIODS as f64 * period,
            initial_flux: f,
            sample_period: period,
            noise_amp: 0.0,
            ..cfg.clone()
        };
        let tr = simulate(p, spec, &block, 0)?;
        let (pd, pq) = (tr.phi_d.unwrap(), tr.phi_q.unwrap());
        let n = pd.len();
        f = FluxLinkage::new(pd[n - 1], pq[n - 1]);
        if !f.is_finite() {
            break;
        }
        drift = (pd[n - 1] - pd[n - 2]).abs().max((pq[n - 1] - pq[n - 2]).abs());
        done += SETTLE_BLOCK_PERIODS;
        if drift <= tol {
            return Ok(f);
        }
    }
    Err(Error::Unsettled { periods: done, drift })
}
