//! Project configuration in TOML with explicit units in field names
//! (`Ld_mH`, `omega_Hz`, ...), converted to SI on load.

use std::f64::consts::TAU;
use std::path::{Path, PathBuf};

use serde::Deserialize;

use crate::error::{Error, Result};
use crate::estimator::{symmetric_grid, ExperimentPlan, RunSettings};
use crate::magnetics::{FluxLinkage, MotorParams, SaturationCoeffs};
use crate::signal::Waveform;
use crate::simulator::DEFAULT_STEPS_PER_PERIOD;
use crate::validation::SweepSpec;

#[allow(non_snake_case)]
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawMotor {
    R_ohm: f64,
    Ld_mH: f64,
    Lq_mH: f64,
    #[serde(default)]
    phi_m_mWb: f64,
    #[serde(default = "one")]
    pole_pairs: u32,
    #[serde(default)]
    a30: f64,
    #[serde(default)]
    a12: f64,
    #[serde(default)]
    a40: f64,
    #[serde(default)]
    a22: f64,
    #[serde(default)]
    a04: f64,
}

fn one() -> u32 {
    1
}

#[allow(non_snake_case)]
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawGrid {
    max_A: Option<f64>,
    step_A: Option<f64>,
    values_A: Option<Vec<f64>>,
}

#[allow(non_snake_case)]
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawPlan {
    omega_Hz: f64,
    #[serde(default = "square")]
    waveform: String,
    waveform_file: Option<PathBuf>,
    u_tilde_V: f64,
    id: Option<RawGrid>,
    iq: Option<RawGrid>,
}

fn square() -> String {
    "square".into()
}

#[allow(non_snake_case)]
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSim {
    steps_per_period: Option<u32>,
    sample_every: Option<u32>,
    measure_periods: Option<u32>,
    settle_time_constants: Option<f64>,
    settle: Option<bool>,
    noise_mA: Option<f64>,
    phi_d0_mWb: Option<f64>,
    phi_q0_mWb: Option<f64>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawPaths {
    out: Option<PathBuf>,
    ingest: Option<PathBuf>,
}

#[allow(non_snake_case)]
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawValidate {
    sweep_angle_deg: Option<f64>,
    sweep_magnitudes_A: Option<Vec<f64>>,
    sweep_axis: Option<String>,
    step_voltages_V: Option<Vec<f64>>,
    step_t_end_ms: Option<f64>,
    step_dt_us: Option<f64>,
    curve_max_A: Option<f64>,
    curve_step_A: Option<f64>,
    curve_levels_A: Option<Vec<f64>>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct Raw {
    seed: Option<u64>,
    motor: RawMotor,
    plan: RawPlan,
    #[serde(default)]
    sim: RawSim,
    #[serde(default)]
    paths: RawPaths,
    #[serde(default)]
    validate: RawValidate,
}

/// Step-response and curve settings of `validate` and `curves`.
#[derive(Debug, Clone, PartialEq)]
pub struct ValidationConfig {
    pub sweep: SweepSpec,
    /// d-axis step voltages (V).
    pub step_voltages: Vec<f64>,
    pub step_t_end: f64,
    pub step_dt: f64,
    /// Swept current of the magnetization curves (A).
    pub curve_grid: Vec<f64>,
    /// Currents held on the other axis (A).
    pub curve_levels: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProjectConfig {
    /// Directory holding the config; relative paths resolve against it.
    pub base_dir: PathBuf,
    pub seed: u64,
    pub motor: MotorParams,
    pub plan: ExperimentPlan,
    pub settings: RunSettings,
    pub out_dir: PathBuf,
    pub ingest: Option<PathBuf>,
    pub validation: ValidationConfig,
}

impl ProjectConfig {
    pub fn load(path: &Path) -> Result<Self> {
        if !path.exists() {
            return Err(Error::MissingFile(path.to_path_buf()));
        }
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(format!("reading {}", path.display()), e))?;
        let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Self::parse(&text, &base).map_err(|e| match e {
            Error::Config { message, .. } => Error::Config {
                path: path.to_path_buf(),
                message,
            },
            other => other,
        })
    }

    /// Parses config text; `base_dir` anchors relative paths.
    pub fn parse(text: &str, base_dir: &Path) -> Result<Self> {
        let cfg_err = |message: String| Error::Config {
            path: PathBuf::from("<config>"),
            message,
        };
        let raw: Raw = toml::from_str(text).map_err(|e| cfg_err(e.to_string().trim_end().to_string()))?;
        let field = |name: &str, e: Error| cfg_err(format!("field `{name}`: {e}"));
        let resolve = |p: &Path| if p.is_absolute() { p.to_path_buf() } else { base_dir.join(p) };

        let m = &raw.motor;
        let motor = MotorParams::new(
            m.R_ohm,
            m.Ld_mH * 1e-3,
            m.Lq_mH * 1e-3,
            m.phi_m_mWb * 1e-3,
            m.pole_pairs,
            SaturationCoeffs {
                a30: m.a30,
                a12: m.a12,
                a40: m.a40,
                a22: m.a22,
                a04: m.a04,
            },
        )
        .map_err(|e| field("motor", e))?;

        let waveform = match (raw.plan.waveform.as_str(), &raw.plan.waveform_file) {
            ("square", None) => Waveform::Square,
            ("sine", None) => Waveform::Sine,
            ("sampled", Some(f)) => Waveform::from_file(&resolve(f)).map_err(|e| field("plan.waveform_file", e))?,
            ("sampled", None) => return Err(cfg_err("field `plan.waveform_file`: required for a sampled waveform".into())),
            (w, Some(_)) if w != "sampled" => {
                return Err(cfg_err("field `plan.waveform_file`: only valid with waveform = \"sampled\"".into()))
            }
            (w, _) => {
                return Err(cfg_err(format!(
                    "field `plan.waveform`: unknown waveform `{w}` (expected square, sine or sampled)"
                )))
            }
        };
        let grid = |name: &str, g: &Option<RawGrid>| -> Result<Vec<f64>> {
            match g {
                None => Ok(Vec::new()),
                Some(RawGrid {
                    values_A: Some(v),
                    max_A: None,
                    step_A: None,
                }) => Ok(v.clone()),
                Some(RawGrid {
                    values_A: None,
                    max_A: Some(max),
                    step_A: Some(step),
                }) => {
                    if !(*step > 0.0) || !(*max >= 0.0) {
                        return Err(cfg_err(format!("field `plan.{name}`: max_A must be >= 0 and step_A > 0")));
                    }
                    Ok(symmetric_grid(*max, *step))
                }
                Some(_) => Err(cfg_err(format!(
                    "field `plan.{name}`: give either values_A or both max_A and step_A"
                ))),
            }
        };
        let plan = ExperimentPlan {
            omega: TAU * raw.plan.omega_Hz,
            waveform,
            u_tilde: raw.plan.u_tilde_V,
            id_grid: grid("id", &raw.plan.id)?,
            iq_grid: grid("iq", &raw.plan.iq)?,
        };
        plan.validate().map_err(|e| field("plan", e))?;

        let s = &raw.sim;
        let defaults = RunSettings::default();
        let settings = RunSettings {
            steps_per_period: s.steps_per_period.unwrap_or(DEFAULT_STEPS_PER_PERIOD),
            sample_every: s.sample_every.unwrap_or(1),
            measure_periods: s.measure_periods.unwrap_or(defaults.measure_periods),
            settle_time_constants: s.settle_time_constants.unwrap_or(defaults.settle_time_constants),
            noise_amp: s.noise_mA.unwrap_or(0.0) * 1e-3,
            initial_flux: FluxLinkage::new(s.phi_d0_mWb.unwrap_or(0.0) * 1e-3, s.phi_q0_mWb.unwrap_or(0.0) * 1e-3),
            settle: s.settle.unwrap_or(true),
        };
        if settings.steps_per_period < 50 {
            return Err(cfg_err("field `sim.steps_per_period`: must be at least 50".into()));
        }
        if settings.sample_every == 0 {
            return Err(cfg_err("field `sim.sample_every`: must be at least 1".into()));
        }
        if settings.measure_periods < 2 {
            return Err(cfg_err("field `sim.measure_periods`: must be at least 2".into()));
        }
        if !(settings.settle_time_constants >= 0.0) {
            return Err(cfg_err("field `sim.settle_time_constants`: must be non-negative".into()));
        }
        if !(settings.noise_amp >= 0.0) {
            return Err(cfg_err("field `sim.noise_mA`: must be non-negative".into()));
        }

        let v = &raw.validate;
        let (ud, uq) = match v.sweep_axis.as_deref().unwrap_or("d") {
            "d" => (plan.u_tilde, 0.0),
            "q" => (0.0, plan.u_tilde),
            other => return Err(cfg_err(format!("field `validate.sweep_axis`: expected d or q, got `{other}`"))),
        };
        let id_max = plan.id_grid.iter().fold(0.0_f64, |a, b| a.max(b.abs()));
        let default_magnitudes = plan.id_grid.iter().copied().filter(|x| *x >= 0.0).collect::<Vec<_>>();
        let sweep = SweepSpec {
            angle_deg: v.sweep_angle_deg.unwrap_or(60.0),
            magnitudes: v.sweep_magnitudes_A.clone().unwrap_or(default_magnitudes),
            omega: plan.omega,
            waveform: plan.waveform.clone(),
            u_tilde_d: ud,
            u_tilde_q: uq,
        };
        sweep.validate().map_err(|e| field("validate.sweep_magnitudes_A", e))?;
        let curve_max = v.curve_max_A.unwrap_or(if id_max > 0.0 { id_max } else { 1.0 });
        let curve_step = v.curve_step_A.unwrap_or(curve_max / 20.0);
        if !(curve_step > 0.0) {
            return Err(cfg_err("field `validate.curve_step_A`: must be positive".into()));
        }
        let default_step = (motor.r * id_max.max(1.0)).abs();
        let validation = ValidationConfig {
            sweep,
            step_voltages: v.step_voltages_V.clone().unwrap_or(vec![0.1 * default_step, default_step]),
            step_t_end: v.step_t_end_ms.unwrap_or(1e3 * 7.0 * motor.ld.max(motor.lq) / motor.r) * 1e-3,
            step_dt: v.step_dt_us.unwrap_or(10.0) * 1e-6,
            curve_grid: symmetric_grid(curve_max, curve_step),
            curve_levels: v.curve_levels_A.clone().unwrap_or(vec![0.0, 0.5 * curve_max, curve_max]),
        };
        if !(validation.step_t_end > 0.0) || !(validation.step_dt > 0.0) {
            return Err(cfg_err("field `validate.step_t_end_ms`/`validate.step_dt_us`: must be positive".into()));
        }

        Ok(ProjectConfig {
            base_dir: base_dir.to_path_buf(),
            seed: raw.seed.unwrap_or(0),
            motor,
            plan,
            settings,
            out_dir: resolve(raw.paths.out.as_deref().unwrap_or(Path::new("out"))),
            ingest: raw.paths.ingest.as_deref().map(resolve),
            validation,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const IPM: &str = r#"
seed = 3

[motor]
R_ohm = 12.15
Ld_mH = 91.9
Lq_mH = 45.8
pole_pairs = 6
a30 = 7.70
a12 = 5.35
a40 = 19.42
a22 = 22.18
a04 = 6.62

[plan]
omega_Hz = 500
u_tilde_V = 30
id = { max_A = 2.0, step_A = 0.3 }
iq = { values_A = [-1.0, 0.0, 1.0] }

[sim]
noise_mA = 10
"#;

    #[test]
    fn parses_units() {
        let c = ProjectConfig::parse(IPM, Path::new("/tmp")).unwrap();
        assert_eq!(c.seed, 3);
        assert!((c.motor.ld - 0.0919).abs() < 1e-15);
        assert!((c.plan.omega - TAU * 500.0).abs() < 1e-9);
        assert_eq!(c.plan.id_grid.len(), 13);
        assert_eq!(c.plan.iq_grid, vec![-1.0, 0.0, 1.0]);
        assert!((c.settings.noise_amp - 0.01).abs() < 1e-15);
        assert_eq!(c.out_dir, Path::new("/tmp/out"));
    }

    #[test]
    fn unknown_field_names_line() {
        let text = IPM.replace("Lq_mH = 45.8", "Lq_mH = 45.8\nLq_uH = 1");
        let e = ProjectConfig::parse(&text, Path::new(".")).unwrap_err();
        let msg = e.to_string();
        assert!(msg.contains("Lq_uH") && msg.contains("line"), "{msg}");
        assert!(e.is_config_error());
    }

    #[test]
    fn bad_value_names_field() {
        let text = IPM.replace("Ld_mH = 91.9", "Ld_mH = -1");
        let msg = ProjectConfig::parse(&text, Path::new(".")).unwrap_err().to_string();
        assert!(msg.contains("motor") && msg.contains("Ld"), "{msg}");
    }

    #[test]
    fn conflicting_grid_is_rejected() {
        let text = IPM.replace("values_A = [-1.0, 0.0, 1.0]", "values_A = [1.0], max_A = 1.0");
        let msg = ProjectConfig::parse(&text, Path::new(".")).unwrap_err().to_string();
        assert!(msg.contains("plan.iq"), "{msg}");
    }

    #[test]
    fn empty_grids_allowed() {
        let text = IPM.replace("id = { max_A = 2.0, step_A = 0.3 }\n", "").replace("iq = { values_A = [-1.0, 0.0, 1.0] }\n", "");
        let c = ProjectConfig::parse(&text, Path::new(".")).unwrap();
        assert!(c.plan.id_grid.is_empty() && c.plan.iq_grid.is_empty());
    }
}
