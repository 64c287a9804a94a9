//! Zero-mean periodic injection waveforms and the pulsating-voltage generator.
//!
//! Waveforms are functions of scaled time `tau = omega * t` with period 2π.
//! Each waveform `f` comes with its zero-mean primitive `F`.

use std::f64::consts::{FRAC_PI_2, PI, TAU};
use std::path::Path;

use crate::error::{Error, Result};

/// Relative tolerance on the mean of user-sampled waveforms.
pub const ZERO_MEAN_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub enum Waveform {
    /// +1 on `[0, π)`, -1 on `[π, 2π)`.
    Square,
    /// `sin(tau)`.
    Sine,
    /// One period of uniformly spaced samples, linearly interpolated.
    Sampled(SampledWaveform),
}

impl Waveform {
    /// Builds a user-sampled waveform. Samples cover one period starting at `tau = 0`.
    pub fn sampled(samples: Vec<f64>) -> Result<Self> {
        SampledWaveform::new(samples).map(Waveform::Sampled)
    }

    /// Reads a sampled waveform: one value per line, blank lines and `#` comments ignored.
    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::io(format!("reading waveform {}", path.display()), e))?;
        let mut samples = Vec::new();
        for (n, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let v: f64 = line.parse().map_err(|_| Error::Config {
                path: path.to_path_buf(),
                message: format!("line {}: `{line}` is not a number", n + 1),
            })?;
            samples.push(v);
        }
        Self::sampled(samples)
    }

    /// Waveform value `f(tau)`.
    pub fn f_eval(&self, tau: f64) -> f64 {
        let tau = tau.rem_euclid(TAU);
        match self {
            Waveform::Square => {
                if tau < PI {
                    1.0
                } else {
                    -1.0
                }
            }
            Waveform::Sine => tau.sin(),
            Waveform::Sampled(s) => s.value(tau),
        }
    }

    /// Zero-mean primitive `F(tau)`, with `F' = f`.
    #[allow(non_snake_case)]
    pub fn F_eval(&self, tau: f64) -> f64 {
        let tau = tau.rem_euclid(TAU);
        match self {
            Waveform::Square => {
                if tau < PI {
                    tau - FRAC_PI_2
                } else {
                    3.0 * FRAC_PI_2 - tau
                }
            }
            Waveform::Sine => -tau.cos(),
            Waveform::Sampled(s) => s.primitive(tau),
        }
    }

    /// Mean of `f` over `[tau_a, tau_b]`. Zero mean makes the primitive
    /// periodic, so the integral is a difference of `F` values.
    pub fn mean_over(&self, tau_a: f64, tau_b: f64) -> f64 {
        let span = tau_b - tau_a;
        if span <= 0.0 {
            return self.f_eval(tau_a);
        }
        (self.F_eval(tau_b) - self.F_eval(tau_a)) / span
    }

    /// True when the waveform is piecewise constant with jumps at multiples of π.
    pub fn is_square(&self) -> bool {
        matches!(self, Waveform::Square)
    }

    /// Peak absolute value of `f`.
    pub fn peak(&self) -> f64 {
        match self {
            Waveform::Square | Waveform::Sine => 1.0,
            Waveform::Sampled(s) => s.peak(),
        }
    }

    pub fn kind_name(&self) -> &'static str {
        match self {
            Waveform::Square => "square",
            Waveform::Sine => "sine",
            Waveform::Sampled(_) => "sampled",
        }
    }
}

/// Uniformly sampled periodic waveform with a precomputed primitive.
#[derive(Debug, Clone, PartialEq)]
pub struct SampledWaveform {
    samples: Vec<f64>,
    // Cumulative integral at each node, shifted so the primitive has zero mean.
    nodes: Vec<f64>,
}

impl SampledWaveform {
    pub fn new(samples: Vec<f64>) -> Result<Self> {
        if samples.len() < 2 {
            return Err(Error::invalid("waveform", "need at least 2 samples per period"));
        }
        if samples.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("waveform", "samples must be finite"));
        }
        let n = samples.len();
        let peak = samples.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
        let mean = samples.iter().sum::<f64>() / n as f64;
        if peak == 0.0 || mean.abs() > ZERO_MEAN_TOL * peak {
            return Err(Error::NonZeroMean { mean, peak });
        }
        let h = TAU / n as f64;
        let next = |k: usize| samples[(k + 1) % n];

        let mut nodes = Vec::with_capacity(n + 1);
        nodes.push(0.0);
        for k in 0..n {
            nodes.push(nodes[k] + 0.5 * h * (samples[k] + next(k)));
        }
        // Exact integral of the piecewise quadratic cumulative integral.
        let integral: f64 = (0..n)
            .map(|k| nodes[k] * h + samples[k] * h * h / 2.0 + (next(k) - samples[k]) * h * h / 6.0)
            .sum();
        let offset = integral / TAU;
        for g in nodes.iter_mut() {
            *g -= offset;
        }
        Ok(SampledWaveform { samples, nodes })
    }

    pub fn samples(&self) -> &[f64] {
        &self.samples
    }

    fn locate(&self, tau: f64) -> (usize, f64, f64) {
        let n = self.samples.len();
        let h = TAU / n as f64;
        let pos = tau / h;
        let k = (pos.floor() as usize).min(n - 1);
        let x = tau - k as f64 * h;
        (k, x, h)
    }

    fn value(&self, tau: f64) -> f64 {
        let n = self.samples.len();
        let (k, x, h) = self.locate(tau);
        let a = self.samples[k];
        let b = self.samples[(k + 1) % n];
        a + (b - a) * x / h
    }

    fn primitive(&self, tau: f64) -> f64 {
        let n = self.samples.len();
        let (k, x, h) = self.locate(tau);
        let a = self.samples[k];
        let b = self.samples[(k + 1) % n];
        self.nodes[k] + a * x + (b - a) * x * x / (2.0 * h)
    }

    fn peak(&self) -> f64 {
        self.samples.iter().fold(0.0_f64, |m, v| m.max(v.abs()))
    }
}

/// Pulsating-voltage injection `u = u_bar + u_tilde * f(omega t)` on both axes.
#[derive(Debug, Clone, PartialEq)]
pub struct InjectionSpec {
    pub u_bar_d: f64,
    pub u_bar_q: f64,
    pub u_tilde_d: f64,
    pub u_tilde_q: f64,
    /// Angular pulsation (rad/s).
    pub omega: f64,
    pub waveform: Waveform,
}

impl InjectionSpec {
    pub fn new(
        u_bar: (f64, f64),
        u_tilde: (f64, f64),
        omega: f64,
        waveform: Waveform,
    ) -> Result<Self> {
        let spec = InjectionSpec {
            u_bar_d: u_bar.0,
            u_bar_q: u_bar.1,
            u_tilde_d: u_tilde.0,
            u_tilde_q: u_tilde.1,
            omega,
            waveform,
        };
        spec.validate()?;
        Ok(spec)
    }

    /// Constant voltage, no injection. `omega` still fixes the time grid.
    pub fn constant(u_d: f64, u_q: f64, omega: f64) -> Result<Self> {
        Self::new((u_d, u_q), (0.0, 0.0), omega, Waveform::Square)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.omega > 0.0 && self.omega.is_finite()) {
            return Err(Error::invalid("omega", "must be positive"));
        }
        for (name, v) in [
            ("u_bar_d", self.u_bar_d),
            ("u_bar_q", self.u_bar_q),
            ("u_tilde_d", self.u_tilde_d),
            ("u_tilde_q", self.u_tilde_q),
        ] {
            if !v.is_finite() {
                return Err(Error::invalid(name, "must be finite"));
            }
        }
        Ok(())
    }

    /// Waveform period (s).
    pub fn period(&self) -> f64 {
        TAU / self.omega
    }

    pub fn has_injection(&self) -> bool {
        self.u_tilde_d != 0.0 || self.u_tilde_q != 0.0
    }

    /// Instantaneous voltages `(u_d, u_q)` at time `t`.
    pub fn voltage_at(&self, t: f64) -> (f64, f64) {
        let f = self.waveform.f_eval(self.omega * t);
        (self.u_bar_d + self.u_tilde_d * f, self.u_bar_q + self.u_tilde_q * f)
    }

    /// Voltages averaged over `[t_a, t_b]`.
    pub fn mean_voltage(&self, t_a: f64, t_b: f64) -> (f64, f64) {
        let m = self.waveform.mean_over(self.omega * t_a, self.omega * t_b);
        (self.u_bar_d + self.u_tilde_d * m, self.u_bar_q + self.u_tilde_q * m)
    }
}
