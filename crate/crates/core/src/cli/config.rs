//! Experiment configuration, presets and command-line overrides.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::analytic::{AnalyticModel, MeanFieldMode};
use crate::error::{Error, Result};
use crate::hybrid::InitMode;
use crate::params::PhysicalParams;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Preset {
    Fig1b,
    Fig1c,
    Thermal,
    Damping,
    Sweep,
    ThetaTrace,
    Custom,
}

impl Preset {
    pub const ALL: [Preset; 7] = [
        Preset::Fig1b,
        Preset::Fig1c,
        Preset::Thermal,
        Preset::Damping,
        Preset::Sweep,
        Preset::ThetaTrace,
        Preset::Custom,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Preset::Fig1b => "fig1b",
            Preset::Fig1c => "fig1c",
            Preset::Thermal => "thermal",
            Preset::Damping => "damping",
            Preset::Sweep => "sweep",
            Preset::ThetaTrace => "theta_trace",
            Preset::Custom => "custom",
        }
    }

    pub fn summary(self) -> &'static str {
        match self {
            Preset::Fig1b => "closed forms Q, C, SC1, SC2, SC3 at alpha = 20, k = 0.01 over [0, 10], [2450, 2550], [4950, 5050] tau",
            Preset::Fig1c => "hybrid measurement model (k = 0, zero and thermal init, kappa = 1) and lossy quantum model at alpha = 2, k = 0.1",
            Preset::Thermal => "quantum variance for thermal oscillator occupations 0, 1, 10, 100 and the Kerr-medium curve",
            Preset::Damping => "master equation with mechanical damping at alpha = 2, k = 0.1 through the first revival",
            Preset::Sweep => "log10 Var_0(tau) over an (alpha, k) grid with reference points",
            Preset::ThetaTrace => "minimizing angle against time for the quantum and the hybrid measurement model",
            Preset::Custom => "everything taken from the configuration document",
        }
    }
}

impl FromStr for Preset {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Preset::ALL
            .into_iter()
            .find(|p| p.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown preset `{s}`")))
    }
}

impl fmt::Display for Preset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Which description produces a curve.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Model {
    Quantum,
    Classical,
    Sc1,
    Sc2,
    Sc3,
    Kerr,
    /// Monte Carlo ensemble of the classical description.
    ClassicalMc,
    /// Truncated Fock-space closed evolution.
    FockClosed,
    /// Master equation with the damping and loss rates in the curve's parameters.
    MasterEquation,
    /// Hybrid measurement ensemble; writes `<label>-cond.csv` (mean conditional
    /// variance) and `<label>-state.csv` (variance of the averaged state).
    Hybrid {
        init: InitMode,
        #[serde(default)]
        cavity_decay: bool,
    },
}

impl Model {
    pub fn analytic(self) -> Option<AnalyticModel> {
        Some(match self {
            Model::Quantum => AnalyticModel::Quantum,
            Model::Classical => AnalyticModel::Classical,
            Model::Sc1 => AnalyticModel::MeanField(MeanFieldMode::Constant),
            Model::Sc2 => AnalyticModel::MeanField(MeanFieldMode::Poisson),
            Model::Sc3 => AnalyticModel::MeanField(MeanFieldMode::Gaussian),
            Model::Kerr => AnalyticModel::Kerr,
            _ => return None,
        })
    }
}

/// Evenly spaced times `start, start + step, ..., stop` in periods.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Window {
    pub start: f64,
    pub stop: f64,
    pub step: f64,
}

/// Union of windows and explicit values, in periods.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TimeGrid {
    pub windows: Vec<Window>,
    pub values: Vec<f64>,
}

impl TimeGrid {
    pub fn window(start: f64, stop: f64, step: f64) -> Self {
        TimeGrid {
            windows: vec![Window { start, stop, step }],
            values: Vec::new(),
        }
    }

    /// Sorted, de-duplicated sample times.
    pub fn expand(&self) -> Result<Vec<f64>> {
        let mut out = Vec::new();
        for w in &self.windows {
            if !(w.start.is_finite() && w.stop.is_finite() && w.step.is_finite()) {
                return Err(Error::Config("time window bounds must be finite".into()));
            }
            if w.step <= 0.0 || w.stop < w.start || w.start < 0.0 {
                return Err(Error::Config(format!(
                    "time window [{}, {}] step {} must satisfy 0 <= start <= stop, step > 0",
                    w.start, w.stop, w.step
                )));
            }
            let n = ((w.stop - w.start) / w.step + 1e-9).floor() as usize;
            out.extend((0..=n).map(|i| w.start + i as f64 * w.step));
        }
        for &v in &self.values {
            if !(v.is_finite() && v >= 0.0) {
                return Err(Error::Config(format!("time {v} must be finite and non-negative")));
            }
            out.push(v);
        }
        if out.is_empty() {
            return Err(Error::Config("empty time grid".into()));
        }
        out.sort_by(|a, b| a.partial_cmp(b).expect("finite"));
        out.dedup_by(|a, b| (*a - *b).abs() <= 1e-12 * b.abs().max(1.0));
        Ok(out)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CurveSpec {
    /// Also the output file stem.
    pub label: String,
    pub model: Model,
    /// Defaults to the top-level parameters.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub params: Option<PhysicalParams>,
    /// Defaults to the top-level time grid.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub times: Option<TimeGrid>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EnsembleSettings {
    /// Samples of the classical Monte Carlo.
    pub n_samples: usize,
    /// Trajectories of the hybrid measurement model.
    pub n_traj: usize,
    pub dt_over_tau: f64,
    pub sample_stride: f64,
    /// Photon cutoff of the hybrid field; default `ceil(alpha^2 + 8 alpha + 10)`.
    pub np: Option<usize>,
}

impl Default for EnsembleSettings {
    fn default() -> Self {
        EnsembleSettings {
            n_samples: 100_000,
            n_traj: 500,
            dt_over_tau: 1e-3,
            sample_stride: 0.1,
            np: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MasterSettings {
    /// Largest step in units of `1/omega`.
    pub dt: f64,
    pub step_fraction: f64,
    pub verify_step: bool,
    pub np: Option<usize>,
    pub nm: Option<usize>,
}

impl Default for MasterSettings {
    fn default() -> Self {
        MasterSettings {
            dt: 0.05,
            step_fraction: 0.5,
            verify_step: true,
            np: None,
            nm: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SweepSettings {
    pub alpha_grid: Vec<f64>,
    pub k_grid: Vec<f64>,
    pub theta: f64,
    /// `(alpha, k)` points written to the companion file.
    pub reference_points: Vec<(f64, f64)>,
}

impl Default for SweepSettings {
    fn default() -> Self {
        SweepSettings {
            alpha_grid: (1..=50).map(f64::from).collect(),
            k_grid: (0..=50).map(|i| i as f64 * 1e-3).collect(),
            theta: 0.0,
            reference_points: REFERENCE_POINTS.to_vec(),
        }
    }
}

/// Equal-`alpha k` parameter pairs used across the presets.
pub const REFERENCE_POINTS: [(f64, f64); 4] = [(2.0, 0.1), (10.0, 0.02), (20.0, 0.01), (40.0, 0.005)];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExperimentConfig {
    pub preset: Preset,
    pub params: PhysicalParams,
    pub curves: Vec<CurveSpec>,
    pub times: TimeGrid,
    pub theta_grid: usize,
    pub master_seed: u64,
    pub ensemble: EnsembleSettings,
    pub master_equation: MasterSettings,
    pub sweep: Option<SweepSettings>,
    /// Falls back to the `OPTOSQUEEZE_OUT` environment variable, then `out`.
    pub output_dir: Option<String>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            preset: Preset::Custom,
            params: PhysicalParams::default(),
            curves: Vec::new(),
            times: TimeGrid::default(),
            theta_grid: crate::analytic::DEFAULT_THETA_GRID,
            master_seed: 2024,
            ensemble: EnsembleSettings::default(),
            master_equation: MasterSettings::default(),
            sweep: None,
            output_dir: None,
        }
    }
}

fn curve(label: &str, model: Model, params: PhysicalParams) -> CurveSpec {
    CurveSpec {
        label: label.to_string(),
        model,
        params: Some(params),
        times: None,
    }
}

impl ExperimentConfig {
    /// The configuration a preset stands for, before user overrides.
    pub fn preset(preset: Preset) -> Self {
        let mut c = ExperimentConfig {
            preset,
            ..Default::default()
        };
        let big = PhysicalParams::closed(20.0, 0.01);
        let small = PhysicalParams {
            alpha: 2.0,
            k: 0.1,
            gamma_meas: 0.01,
            ..PhysicalParams::default()
        };
        match preset {
            Preset::Fig1b => {
                c.params = big;
                c.times = TimeGrid {
                    windows: vec![
                        Window { start: 0.0, stop: 10.0, step: 0.05 },
                        Window { start: 2450.0, stop: 2550.0, step: 0.05 },
                        Window { start: 4950.0, stop: 5050.0, step: 0.05 },
                    ],
                    values: Vec::new(),
                };
                c.curves = vec![
                    curve("Q", Model::Quantum, big),
                    curve("C", Model::Classical, big),
                    curve("SC1", Model::Sc1, big),
                    curve("SC2", Model::Sc2, big),
                    curve("SC3", Model::Sc3, big),
                ];
            }
            Preset::Fig1c => {
                c.params = small;
                c.times = TimeGrid::window(0.0, 10.0, 0.1);
                let init = InitMode::Zero;
                c.curves = vec![
                    curve("HM-k0", Model::Hybrid { init, cavity_decay: false }, PhysicalParams { k: 0.0, ..small }),
                    curve("HM-zero", Model::Hybrid { init, cavity_decay: false }, small),
                    curve(
                        "HM-thermal",
                        Model::Hybrid {
                            init: InitMode::ThermalMatched,
                            cavity_decay: false,
                        },
                        small,
                    ),
                    curve(
                        "HM-kappa1",
                        Model::Hybrid { init, cavity_decay: true },
                        PhysicalParams { kappa: 1.0, ..small },
                    ),
                    curve("Q-kappa0.3", Model::MasterEquation, PhysicalParams { kappa: 0.3, ..small }),
                ];
            }
            Preset::Thermal => {
                c.params = big;
                c.times = TimeGrid::window(0.0, 5.0, 0.01);
                c.curves = [0.0, 1.0, 10.0, 100.0]
                    .iter()
                    .map(|&n| curve(&format!("Q-nth{n}"), Model::Quantum, PhysicalParams { nbar_q: n, ..big }))
                    .collect();
                c.curves.push(curve("Kerr", Model::Kerr, big));
            }
            Preset::Damping => {
                let p = PhysicalParams { gamma_meas: 0.0, ..small };
                c.params = p;
                c.times = TimeGrid::window(0.0, 30.0, 0.05);
                c.curves = vec![
                    curve("ME-gamma0", Model::MasterEquation, p),
                    curve("ME-gamma0.01", Model::MasterEquation, PhysicalParams { gamma_m: 0.01, ..p }),
                    curve(
                        "ME-gamma0.01-nbar0.5",
                        Model::MasterEquation,
                        PhysicalParams {
                            gamma_m: 0.01,
                            nbar_bath: 0.5,
                            ..p
                        },
                    ),
                ];
            }
            Preset::Sweep => {
                c.sweep = Some(SweepSettings::default());
            }
            Preset::ThetaTrace => {
                c.params = big;
                c.curves = vec![
                    CurveSpec {
                        times: Some(TimeGrid {
                            windows: vec![
                                Window { start: 0.0, stop: 10.0, step: 0.01 },
                                Window { start: 4990.0, stop: 5010.0, step: 0.01 },
                            ],
                            values: Vec::new(),
                        }),
                        ..curve("Q-theta", Model::Quantum, big)
                    },
                    CurveSpec {
                        times: Some(TimeGrid::window(0.0, 10.0, 0.1)),
                        ..curve("HM-theta", Model::Hybrid { init: InitMode::Zero, cavity_decay: false }, small)
                    },
                    CurveSpec {
                        times: Some(TimeGrid::window(0.0, 10.0, 0.1)),
                        ..curve(
                            "HM-theta-k0",
                            Model::Hybrid { init: InitMode::Zero, cavity_decay: false },
                            PhysicalParams { k: 0.0, ..small },
                        )
                    },
                ];
            }
            Preset::Custom => {}
        }
        c
    }

    /// Fill every per-curve default and check the document.
    pub fn expanded(mut self) -> Result<Self> {
        self.params.validate()?;
        for c in &mut self.curves {
            if c.params.is_none() {
                c.params = Some(self.params);
            }
            if c.times.is_none() {
                c.times = Some(self.times.clone());
            }
        }
        self.validate()?;
        Ok(self)
    }

    pub fn validate(&self) -> Result<()> {
        if self.theta_grid < 16 {
            return Err(Error::Config(format!("theta_grid must be at least 16, got {}", self.theta_grid)));
        }
        if self.curves.is_empty() && self.sweep.is_none() {
            return Err(Error::Config("nothing to run: no curves and no sweep".into()));
        }
        let mut seen = std::collections::HashSet::new();
        for c in &self.curves {
            check_label(&c.label)?;
            if !seen.insert(c.label.as_str()) {
                return Err(Error::Config(format!("duplicate curve label `{}`", c.label)));
            }
            let p = c.params.as_ref().unwrap_or(&self.params);
            p.validate()?;
            c.times.as_ref().unwrap_or(&self.times).expand()?;
        }
        if let Some(s) = &self.sweep {
            if s.alpha_grid.is_empty() || s.k_grid.is_empty() {
                return Err(Error::Config("sweep grids must be nonempty".into()));
            }
        }
        Ok(())
    }
}

fn check_label(label: &str) -> Result<()> {
    let ok = !label.is_empty()
        && !label.starts_with('.')
        && label.chars().all(|c| c.is_ascii_alphanumeric() || matches!(c, '-' | '_' | '.'));
    if ok {
        Ok(())
    } else {
        Err(Error::Config(format!(
            "curve label `{label}` must be nonempty and use only letters, digits, '-', '_' and '.'"
        )))
    }
}

/// Set `path` (dot separated) in a JSON document. The value is parsed as JSON
/// when possible and taken as a string otherwise.
pub fn apply_override(doc: &mut Value, path: &str, raw: &str) -> Result<()> {
    let value = serde_json::from_str(raw).unwrap_or_else(|_| Value::String(raw.to_string()));
    let mut cur = doc;
    let parts: Vec<&str> = path.split('.').collect();
    if parts.iter().any(|p| p.is_empty()) {
        return Err(Error::Config(format!("malformed override path `{path}`")));
    }
    for (i, part) in parts.iter().enumerate() {
        if cur.is_null() {
            *cur = Value::Object(Default::default());
        }
        let obj = cur
            .as_object_mut()
            .ok_or_else(|| Error::Config(format!("override `{path}`: `{}` is not an object", parts[..i].join("."))))?;
        if i + 1 == parts.len() {
            obj.insert(part.to_string(), value);
            return Ok(());
        }
        cur = obj.entry(part.to_string()).or_insert(Value::Null);
    }
    unreachable!("path has at least one part")
}

/// Build the effective configuration: the preset (or `custom`), then the
/// JSON document, then the overrides, in that order of precedence.
pub fn resolve(preset: Option<Preset>, document: Option<Value>, overrides: &[(String, String)]) -> Result<ExperimentConfig> {
    let doc_preset = match document.as_ref().and_then(|d| d.get("preset")) {
        Some(v) => Some(serde_json::from_value::<Preset>(v.clone())?),
        None => None,
    };
    let override_preset = overrides
        .iter()
        .rev()
        .find(|(k, _)| k == "preset")
        .map(|(_, v)| v.trim_matches('"').parse::<Preset>())
        .transpose()?;
    let chosen = override_preset.or(preset).or(doc_preset).unwrap_or(Preset::Custom);
    let mut merged = serde_json::to_value(ExperimentConfig::preset(chosen))?;
    if let Some(doc) = document {
        let map = doc
            .as_object()
            .ok_or_else(|| Error::Config("configuration must be a JSON object".into()))?;
        for (k, v) in map {
            merge(&mut merged, k, v.clone());
        }
    }
    for (k, v) in overrides {
        apply_override(&mut merged, k, v)?;
    }
    merged["preset"] = Value::String(chosen.name().to_string());
    let cfg: ExperimentConfig = serde_json::from_value(merged).map_err(|e| Error::Config(e.to_string()))?;
    cfg.expanded()
}

/// Objects merge key by key, anything else replaces.
fn merge(target: &mut Value, key: &str, value: Value) {
    match (target.get_mut(key), value) {
        (Some(Value::Object(t)), Value::Object(v)) => {
            for (k, x) in v {
                let mut inner = Value::Object(std::mem::take(t));
                merge(&mut inner, &k, x);
                *t = match inner {
                    Value::Object(m) => m,
                    _ => unreachable!(),
                };
            }
        }
        (_, v) => {
            target[key] = v;
        }
    }
}
