//! Run manifests (recorded traces plus the injection that produced them) and
//! estimation reports, both as TOML.

use std::collections::BTreeMap;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimator::{EstimationResult, ExperimentPlan, Identification, PlannedRun, RunData, RunKind};
use crate::magnetics::FluxLinkage;
use crate::signal::{InjectionSpec, Waveform};
use crate::trace::{fmt, Trace};

pub const MANIFEST_NAME: &str = "manifest.toml";
const WAVEFORM_NAME: &str = "waveform.txt";

#[allow(non_snake_case)]
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ManifestRun {
    pub label: String,
    pub kind: String,
    /// Target bias on the biased axis.
    pub i_bar_A: f64,
    pub u_bar_d_V: f64,
    pub u_bar_q_V: f64,
    pub u_tilde_d_V: f64,
    pub u_tilde_q_V: f64,
    pub omega_rad_s: f64,
    /// Trace CSV, relative to the manifest.
    pub trace: PathBuf,
    #[serde(default)]
    pub phi_d0_Wb: f64,
    #[serde(default)]
    pub phi_q0_Wb: f64,
}

#[allow(non_snake_case)]
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Manifest {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    /// Injection amplitude of the plan.
    pub u_tilde_V: f64,
    pub waveform: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub waveform_file: Option<PathBuf>,
    /// Half-width of the uniform current noise assumed for uncertainties.
    #[serde(default)]
    pub noise_mA: f64,
    #[serde(rename = "run", default)]
    pub runs: Vec<ManifestRun>,
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).map_err(|e| Error::io(format!("writing {}", path.display()), e))
}

/// Writes one trace CSV per run and the manifest describing them into `dir`.
/// Returns the manifest path.
pub fn write_simulation(dir: &Path, plan: &ExperimentPlan, noise_amp: f64, data: &[RunData], seed: u64) -> Result<PathBuf> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(format!("creating {}", dir.display()), e))?;
    let waveform_file = match &plan.waveform {
        Waveform::Sampled(s) => {
            let text: String = s.samples().iter().map(|v| fmt(*v) + "\n").collect();
            write_text(&dir.join(WAVEFORM_NAME), &text)?;
            Some(PathBuf::from(WAVEFORM_NAME))
        }
        _ => None,
    };
    let mut runs = Vec::with_capacity(data.len());
    for (k, d) in data.iter().enumerate() {
        let label = d.run.label(k);
        let name = PathBuf::from(format!("{label}.csv"));
        d.trace.save(&dir.join(&name))?;
        let s = &d.run.spec;
        runs.push(ManifestRun {
            label,
            kind: d.run.kind.as_str().to_string(),
            i_bar_A: d.run.i_bar_target,
            u_bar_d_V: s.u_bar_d,
            u_bar_q_V: s.u_bar_q,
            u_tilde_d_V: s.u_tilde_d,
            u_tilde_q_V: s.u_tilde_q,
            omega_rad_s: s.omega,
            trace: name,
            phi_d0_Wb: d.initial_flux.d,
            phi_q0_Wb: d.initial_flux.q,
        });
    }
    let m = Manifest {
        seed: Some(seed),
        u_tilde_V: plan.u_tilde,
        waveform: plan.waveform.kind_name().to_string(),
        waveform_file,
        noise_mA: noise_amp * 1e3,
        runs,
    };
    let text = toml::to_string(&m).map_err(|e| Error::Trace(format!("serializing manifest: {e}")))?;
    let path = dir.join(MANIFEST_NAME);
    write_text(&path, &text)?;
    Ok(path)
}

/// Recorded runs read back from a manifest.
#[derive(Debug, Clone, PartialEq)]
pub struct LoadedRuns {
    pub plan: ExperimentPlan,
    pub noise_amp: f64,
    pub runs: Vec<RunData>,
}

pub fn load(path: &Path) -> Result<LoadedRuns> {
    if !path.exists() {
        return Err(Error::MissingFile(path.to_path_buf()));
    }
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(format!("reading {}", path.display()), e))?;
    let cfg_err = |message: String| Error::Config {
        path: path.to_path_buf(),
        message,
    };
    let m: Manifest = toml::from_str(&text).map_err(|e| cfg_err(e.to_string().trim_end().to_string()))?;
    let base = path.parent().unwrap_or(Path::new(""));
    let resolve = |p: &Path| if p.is_absolute() { p.to_path_buf() } else { base.join(p) };

    let waveform = match (m.waveform.as_str(), &m.waveform_file) {
        ("square", None) => Waveform::Square,
        ("sine", None) => Waveform::Sine,
        ("sampled", Some(f)) => Waveform::from_file(&resolve(f))?,
        (w, _) => return Err(cfg_err(format!("field `waveform`: unsupported `{w}` or misplaced waveform_file"))),
    };
    if m.runs.is_empty() {
        return Err(cfg_err("no [[run]] entries".into()));
    }
    let mut runs = Vec::with_capacity(m.runs.len());
    let mut id_grid = Vec::new();
    let mut iq_grid = Vec::new();
    for (n, r) in m.runs.iter().enumerate() {
        let kind = RunKind::parse(&r.kind)
            .ok_or_else(|| cfg_err(format!("run {} (`{}`): unknown kind `{}`", n + 1, r.label, r.kind)))?;
        let spec = InjectionSpec {
            u_bar_d: r.u_bar_d_V,
            u_bar_q: r.u_bar_q_V,
            u_tilde_d: r.u_tilde_d_V,
            u_tilde_q: r.u_tilde_q_V,
            omega: r.omega_rad_s,
            waveform: waveform.clone(),
        };
        spec.validate()
            .map_err(|e| cfg_err(format!("run {} (`{}`): {e}", n + 1, r.label)))?;
        match kind {
            RunKind::DSweep => id_grid.push(r.i_bar_A),
            RunKind::QBiasDInjection => iq_grid.push(r.i_bar_A),
            _ => {}
        }
        let trace = Trace::load(&resolve(&r.trace))?;
        runs.push(RunData {
            run: PlannedRun {
                kind,
                i_bar_target: r.i_bar_A,
                spec,
            },
            trace,
            initial_flux: FluxLinkage::new(r.phi_d0_Wb, r.phi_q0_Wb),
        });
    }
    let omega = runs[0].run.spec.omega;
    if runs.iter().any(|r| r.run.spec.omega != omega) {
        return Err(cfg_err("all runs must share one injection pulsation".into()));
    }
    Ok(LoadedRuns {
        plan: ExperimentPlan {
            omega,
            waveform,
            u_tilde: m.u_tilde_V,
            id_grid,
            iq_grid,
        },
        noise_amp: m.noise_mA * 1e-3,
        runs,
    })
}

#[allow(non_snake_case)]
#[derive(Debug, Clone, PartialEq, Serialize)]
struct ParamTable {
    Ld_mH: f64,
    Lq_mH: f64,
    a30: f64,
    a12: f64,
    a40: f64,
    a22: f64,
    a04: f64,
}

impl ParamTable {
    fn values(e: &EstimationResult) -> Self {
        let s = &e.params.sat;
        ParamTable {
            Ld_mH: e.params.ld * 1e3,
            Lq_mH: e.params.lq * 1e3,
            a30: s.a30,
            a12: s.a12,
            a40: s.a40,
            a22: s.a22,
            a04: s.a04,
        }
    }

    fn sigma(e: &EstimationResult) -> Self {
        let s = &e.sigma.sat;
        ParamTable {
            Ld_mH: e.sigma.ld * 1e3,
            Lq_mH: e.sigma.lq * 1e3,
            a30: s.a30,
            a12: s.a12,
            a40: s.a40,
            a22: s.a22,
            a04: s.a04,
        }
    }
}

#[allow(non_snake_case)]
#[derive(Debug, Clone, PartialEq, Serialize)]
struct ReportRun {
    label: String,
    kind: &'static str,
    i_bar_d_A: f64,
    i_bar_q_A: f64,
    i_tilde_d_A: f64,
    i_tilde_q_A: f64,
    phi_bar_d_Wb: f64,
    phi_bar_q_Wb: f64,
    residual_rms_d_A: f64,
    residual_rms_q_A: f64,
    periods_used: usize,
}

#[allow(non_snake_case)]
#[derive(Debug, Clone, PartialEq, Serialize)]
struct Report {
    uncertainty: &'static str,
    estimator: &'static str,
    R_ohm: f64,
    noise_mA: f64,
    estimate: ParamTable,
    sigma: ParamTable,
    first_order: ParamTable,
    first_order_sigma: ParamTable,
    residuals: BTreeMap<String, f64>,
    #[serde(rename = "run")]
    runs: Vec<ReportRun>,
}

/// Renders the estimation report: the flux-referenced estimate with 1-sigma
/// uncertainties, the first-order estimate, fit residuals and per-run ripple.
pub fn report_toml(ident: &Identification, noise_amp: f64) -> Result<String> {
    let mut residuals = BTreeMap::new();
    for (k, v) in &ident.first_order.fit_residuals {
        residuals.insert(format!("first_order_{k}"), *v);
    }
    for (k, v) in &ident.flux_referenced.fit_residuals {
        residuals.insert((*k).to_string(), *v);
    }
    let runs = ident
        .runs
        .iter()
        .enumerate()
        .map(|(k, r)| ReportRun {
            label: r.run.label(k),
            kind: r.run.kind.as_str(),
            i_bar_d_A: r.ripple.i_bar_d,
            i_bar_q_A: r.ripple.i_bar_q,
            i_tilde_d_A: r.ripple.i_tilde_d,
            i_tilde_q_A: r.ripple.i_tilde_q,
            phi_bar_d_Wb: r.phi_bar.d,
            phi_bar_q_Wb: r.phi_bar.q,
            residual_rms_d_A: r.ripple.residual_rms_d,
            residual_rms_q_A: r.ripple.residual_rms_q,
            periods_used: r.ripple.n_periods_used,
        })
        .collect();
    let rep = Report {
        uncertainty: "1-sigma",
        estimator: "flux_referenced",
        R_ohm: ident.flux_referenced.params.r,
        noise_mA: noise_amp * 1e3,
        estimate: ParamTable::values(&ident.flux_referenced),
        sigma: ParamTable::sigma(&ident.flux_referenced),
        first_order: ParamTable::values(&ident.first_order),
        first_order_sigma: ParamTable::sigma(&ident.first_order),
        residuals,
        runs,
    };
    toml::to_string(&rep).map_err(|e| Error::Trace(format!("serializing report: {e}")))
}

pub fn write_report(path: &Path, ident: &Identification, noise_amp: f64) -> Result<()> {
    let text = report_toml(ident, noise_amp)?;
    let mut f = std::fs::File::create(path).map_err(|e| Error::io(format!("creating {}", path.display()), e))?;
    f.write_all(text.as_bytes())
        .map_err(|e| Error::io(format!("writing {}", path.display()), e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::estimator::{plan_runs, simulate_plan, RunSettings};
    use crate::presets;
    use std::f64::consts::TAU;

    #[test]
    fn manifest_round_trip() {
        let p = presets::ipm();
        let plan = ExperimentPlan {
            omega: TAU * 500.0,
            waveform: Waveform::sampled(vec![0.0, 1.0, 0.0, -1.0]).unwrap(),
            u_tilde: 30.0,
            id_grid: vec![0.5],
            iq_grid: vec![],
        };
        let settings = RunSettings {
            measure_periods: 3,
            settle: false,
            ..RunSettings::default()
        };
        let data = simulate_plan(&p, &plan, &settings, 9).unwrap();
        assert_eq!(data.len(), plan_runs(&plan, p.r).len());
        let dir = tempfile::tempdir().unwrap();
        let path = write_simulation(dir.path(), &plan, 0.002, &data, 9).unwrap();
        let back = load(&path).unwrap();
        assert_eq!(back.runs, data);
        assert_eq!(back.plan.waveform, plan.waveform);
        assert_eq!(back.plan.omega, plan.omega);
        assert!((back.noise_amp - 0.002).abs() < 1e-18);
    }

    #[test]
    fn missing_trace_is_named() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join(MANIFEST_NAME);
        std::fs::write(
            &path,
            r#"u_tilde_V = 30.0
waveform = "square"

[[run]]
label = "a"
kind = "zero_bias_d"
i_bar_A = 0.0
u_bar_d_V = 0.0
u_bar_q_V = 0.0
u_tilde_d_V = 30.0
u_tilde_q_V = 0.0
omega_rad_s = 3141.59
trace = "nowhere.csv"
"#,
        )
        .unwrap();
        let e = load(&path).unwrap_err();
        assert!(matches!(e, Error::MissingFile(ref f) if f.ends_with("nowhere.csv")), "{e}");
    }
}
