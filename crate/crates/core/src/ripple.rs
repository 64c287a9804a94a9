//! Ripple extraction: per-axis least-squares projection of the post-transient
//! currents onto `{1, F(omega t)}` over whole waveform periods.

use crate::error::{Error, Result};
use crate::lsq;
use crate::signal::InjectionSpec;
use crate::trace::Trace;

pub const MIN_SAMPLES_PER_PERIOD: f64 = 16.0;
pub const MIN_PERIODS: usize = 2;

/// Mean currents and ripple amplitudes recovered from one run.
#[derive(Debug, Clone, PartialEq)]
pub struct RippleMeasurement {
    pub i_bar_d: f64,
    pub i_bar_q: f64,
    /// Coefficient of `F(omega t)` in the d-axis current (A).
    pub i_tilde_d: f64,
    pub i_tilde_q: f64,
    pub residual_rms_d: f64,
    pub residual_rms_q: f64,
    pub n_periods_used: usize,
    /// Standard deviation of `i_tilde` per unit of current-noise standard deviation.
    pub tilde_sensitivity: f64,
    /// Sample index range `[start, end)` of the fitting window.
    pub window: (usize, usize),
}

/// Transient discard used by default: seven electrical time constants,
/// rounded up to whole waveform periods.
pub fn default_discard(ld: f64, lq: f64, r: f64, period: f64) -> f64 {
    let tau = ld.max(lq) / r;
    (7.0 * tau / period).ceil() * period
}

pub fn extract_ripple(trace: &Trace, spec: &InjectionSpec, discard: f64) -> Result<RippleMeasurement> {
    if trace.len() < 2 {
        return Err(Error::TooShort { available: 0.0 });
    }
    let ds = trace.sample_interval();
    let period = spec.period();
    let spp = period / ds;
    if spp < MIN_SAMPLES_PER_PERIOD {
        return Err(Error::Unresolved {
            samples_per_period: spp,
        });
    }
    let t0 = trace.t[0];
    let start = trace
        .t
        .iter()
        .position(|&t| t >= t0 + discard.max(0.0) - 1e-9 * ds)
        .unwrap_or(trace.len());
    if start >= trace.len() {
        return Err(Error::TooShort { available: 0.0 });
    }
    let t_start = trace.t[start];
    // Every sample stands for one sampling interval.
    let available = (trace.t[trace.len() - 1] + ds - t_start) / period;
    let periods = (available + 1e-9).floor() as usize;
    if periods < MIN_PERIODS {
        return Err(Error::TooShort { available });
    }
    let t_stop = t_start + periods as f64 * period - 0.5 * ds;
    let end = start + trace.t[start..].iter().take_while(|&&t| t < t_stop).count();

    let x = basis(&trace.t[start..end], spec);
    let fit_d = lsq::solve(&x, &trace.i_d[start..end], "ripple d-axis")?;
    let fit_q = lsq::solve(&x, &trace.i_q[start..end], "ripple q-axis")?;
    Ok(RippleMeasurement {
        i_bar_d: fit_d.coef[0],
        i_bar_q: fit_q.coef[0],
        i_tilde_d: fit_d.coef[1],
        i_tilde_q: fit_q.coef[1],
        residual_rms_d: fit_d.rms,
        residual_rms_q: fit_q.rms,
        n_periods_used: periods,
        tilde_sensitivity: fit_d.std_err(1, 1.0),
        window: (start, end),
    })
}

fn basis(t: &[f64], spec: &InjectionSpec) -> nalgebra::DMatrix<f64> {
    lsq::design(t.iter().map(|&t| [1.0, spec.waveform.F_eval(spec.omega * t)]))
}

/// Mean and `F(omega t)` coefficient of an arbitrary sampled series over a
/// window returned by [`extract_ripple`].
pub fn project(t: &[f64], series: &[f64], spec: &InjectionSpec, window: (usize, usize)) -> Result<(f64, f64)> {
    let (a, b) = window;
    let fit = lsq::solve(&basis(&t[a..b], spec), &series[a..b], "ripple projection")?;
    Ok((fit.coef[0], fit.coef[1]))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::signal::Waveform;
    use std::f64::consts::TAU;

    fn synthetic(spec: &InjectionSpec, n_periods: usize, spp: usize, id: impl Fn(f64) -> f64, iq: impl Fn(f64) -> f64) -> Trace {
        let ds = spec.period() / spp as f64;
        let n = n_periods * spp;
        let t: Vec<f64> = (0..n).map(|k| k as f64 * ds).collect();
        Trace {
            u_d: vec![0.0; n],
            u_q: vec![0.0; n],
            i_d: t.iter().map(|&t| id(t)).collect(),
            i_q: t.iter().map(|&t| iq(t)).collect(),
            t,
            phi_d: None,
            phi_q: None,
        }
    }

    fn spec(w: Waveform) -> InjectionSpec {
        InjectionSpec::new((0.0, 0.0), (1.0, 0.0), TAU * 500.0, w).unwrap()
    }

    #[test]
    fn recovers_exact_model() {
        for w in [Waveform::Square, Waveform::Sine] {
            let s = spec(w);
            let om = s.omega;
            let wf = s.waveform.clone();
            let tr = synthetic(&s, 10, 100, |t| 2.0 + 0.3 * wf.F_eval(om * t), |_| -1.25);
            let m = extract_ripple(&tr, &s, 0.0).unwrap();
            assert!((m.i_bar_d - 2.0).abs() < 1e-12);
            assert!((m.i_tilde_d - 0.3).abs() < 1e-12);
            assert!((m.i_bar_q + 1.25).abs() < 1e-12);
            assert!(m.i_tilde_q.abs() < 1e-12);
            assert!(m.residual_rms_d < 1e-12);
            assert_eq!(m.n_periods_used, 10);
        }
    }

    #[test]
    fn whole_periods_only() {
        let s = spec(Waveform::Square);
        let om = s.omega;
        let tr = synthetic(&s, 7, 64, |t| 0.5 * Waveform::Square.F_eval(om * t), |_| 0.0);
        let discard = 0.37 * s.period();
        let m = extract_ripple(&tr, &s, discard).unwrap();
        assert_eq!(m.n_periods_used, 6);
        assert_eq!(m.window.1 - m.window.0, 6 * 64);
    }

    #[test]
    fn errors() {
        let s = spec(Waveform::Square);
        let short = synthetic(&s, 3, 32, |_| 0.0, |_| 0.0);
        assert!(matches!(
            extract_ripple(&short, &s, 1.5 * s.period()),
            Err(Error::TooShort { .. })
        ));
        let coarse = synthetic(&s, 10, 8, |_| 0.0, |_| 0.0);
        assert!(matches!(extract_ripple(&coarse, &s, 0.0), Err(Error::Unresolved { .. })));
    }

    #[test]
    fn default_discard_is_whole_periods() {
        let d = default_discard(0.0919, 0.0458, 12.15, 2e-3);
        assert!(d >= 7.0 * 0.0919 / 12.15);
        assert!(((d / 2e-3) - (d / 2e-3).round()).abs() < 1e-9);
    }
}
