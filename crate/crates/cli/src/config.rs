use serde::{Deserialize, Serialize};
use std::fmt;
use std::path::{Path, PathBuf};

use heatid_core::elliptic::Gauge;
use heatid_core::harness::{
    CurveSpec, DesignOptions, EquilibriumOptions, PerturbationMode, StudySetup,
};
use heatid_core::inverse::InverseOptions;
use heatid_core::parabolic::{NewtonOptions, Ramp};
use heatid_core::{BuiltinLaw, ConductionLaw, KirchhoffTransform, LawBounds, LinearSolverOptions};

#[derive(Debug)]
pub enum ConfigError {
    Parse(String),
    Validation(String),
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ConfigError::Parse(m) => write!(f, "config parse error: {m}"),
            ConfigError::Validation(m) => write!(f, "config validation error: {m}"),
        }
    }
}

impl std::error::Error for ConfigError {}

fn invalid(msg: impl Into<String>) -> ConfigError {
    ConfigError::Validation(msg.into())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LawConfig {
    /// `const:<k>`, `tanh:<amp>,<rate>` or `sin:<amp>,<freq>`.
    pub builtin: Option<String>,
    /// `s,a` table; bounds from the sidecar JSON or the samples.
    pub file: Option<PathBuf>,
    pub s_range: (f64, f64),
    pub samples: usize,
}

impl Default for LawConfig {
    fn default() -> Self {
        Self {
            builtin: None,
            file: None,
            s_range: heatid_core::kirchhoff::BUILTIN_RANGE,
            samples: heatid_core::kirchhoff::BUILTIN_SAMPLES,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ScheduleConfig {
    pub t_final: f64,
    pub dt: f64,
    pub ramp: Ramp,
}

impl Default for ScheduleConfig {
    fn default() -> Self {
        Self {
            t_final: 2.0,
            dt: 0.02,
            ramp: Ramp::Cosine { t_ramp: 1.0 },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DesignConfig {
    /// Previously written design JSON; takes precedence over the fields below.
    pub file: Option<PathBuf>,
    pub target: (f64, f64),
    pub eps: f64,
    /// Defaults to the bounds of the configured law.
    pub bounds: Option<LawBounds>,
    pub c1: f64,
    pub n_validate: usize,
    pub ramp_steps: usize,
    pub hold_steps: usize,
    pub initial_t_ramp: f64,
    pub max_doublings: usize,
}

impl Default for DesignConfig {
    fn default() -> Self {
        let d = DesignOptions::default();
        Self {
            file: None,
            target: (-0.3, 0.3),
            eps: 0.1,
            bounds: None,
            c1: d.c1,
            n_validate: d.n_validate,
            ramp_steps: d.ramp_steps,
            hold_steps: d.hold_steps,
            initial_t_ramp: d.initial_t_ramp,
            max_doublings: d.max_doublings,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct NewtonConfig {
    pub tol: f64,
    pub max_iterations: usize,
    pub max_halvings: usize,
    pub forcing: f64,
}

impl Default for NewtonConfig {
    fn default() -> Self {
        let d = NewtonOptions::default();
        Self {
            tol: d.tol,
            max_iterations: d.max_iterations,
            max_halvings: d.max_halvings,
            forcing: d.forcing,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct InverseConfig {
    pub c_min: f64,
    pub trim: usize,
    pub smoothing_window: usize,
}

impl Default for InverseConfig {
    fn default() -> Self {
        let d = InverseOptions::default();
        Self {
            c_min: d.c_min,
            trim: d.trim,
            smoothing_window: d.smoothing_window,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields, default)]
pub struct InputConfig {
    /// `s,g` trace for `reconstruct`.
    pub trace: Option<PathBuf>,
    /// `t,s,g` traces for `reconstruct-parabolic`.
    pub traces: Option<PathBuf>,
    /// Measurement window; defaults to the design window or the whole run.
    pub window: Option<(f64, f64)>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct StabilityConfig {
    pub modes: Vec<PerturbationMode>,
    pub deltas: Vec<f64>,
}

impl Default for StabilityConfig {
    fn default() -> Self {
        Self {
            modes: vec![
                PerturbationMode::Flux,
                PerturbationMode::Source,
                PerturbationMode::Measurement,
            ],
            deltas: vec![0.0, 1e-2, 1e-3, 1e-4],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ConvergenceConfig {
    pub sizes: Vec<usize>,
}

impl Default for ConvergenceConfig {
    fn default() -> Self {
        Self {
            sizes: vec![33, 65, 129],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EquilibriumConfig {
    pub ut_tol: f64,
    pub max_steps: usize,
}

impl Default for EquilibriumConfig {
    fn default() -> Self {
        let d = EquilibriumOptions::default();
        Self {
            ut_tol: d.ut_tol,
            max_steps: d.max_steps,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputConfig {
    pub dir: PathBuf,
}

impl Default for OutputConfig {
    fn default() -> Self {
        Self {
            dir: PathBuf::from("heatid-out"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    /// Nodes per side of the grid.
    pub n: usize,
    /// Amplitude of the dipole flux (`+q` left, `−q` right).
    pub flux_amplitude: f64,
    pub law: LawConfig,
    pub curve: CurveSpec,
    pub gauge: Gauge,
    pub schedule: ScheduleConfig,
    pub design: DesignConfig,
    pub solver: LinearSolverOptions,
    pub newton: NewtonConfig,
    pub inverse: InverseConfig,
    pub input: InputConfig,
    pub stability: StabilityConfig,
    pub convergence: ConvergenceConfig,
    pub equilibrium: EquilibriumConfig,
    pub output: OutputConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            n: 65,
            flux_amplitude: 1.0,
            law: LawConfig::default(),
            curve: CurveSpec::default(),
            gauge: Gauge::default(),
            schedule: ScheduleConfig::default(),
            design: DesignConfig::default(),
            solver: LinearSolverOptions::default(),
            newton: NewtonConfig::default(),
            inverse: InverseConfig::default(),
            input: InputConfig::default(),
            stability: StabilityConfig::default(),
            convergence: ConvergenceConfig::default(),
            equilibrium: EquilibriumConfig::default(),
            output: OutputConfig::default(),
        }
    }
}

/// Parses TOML text, applies `key.path=value` overrides and validates.
/// Relative paths are resolved against `base`.
pub fn parse_config(
    text: &str,
    overrides: &[String],
    base: &Path,
) -> Result<RunConfig, ConfigError> {
    let mut cfg: RunConfig = if overrides.is_empty() {
        toml::from_str(text).map_err(|e| ConfigError::Parse(e.to_string()))?
    } else {
        let mut table: toml::Table =
            toml::from_str(text).map_err(|e| ConfigError::Parse(e.to_string()))?;
        for ov in overrides {
            apply_override(&mut table, ov)?;
        }
        let merged = toml::to_string(&table).map_err(|e| ConfigError::Parse(e.to_string()))?;
        toml::from_str(&merged).map_err(|e| ConfigError::Parse(e.to_string()))?
    };
    cfg.resolve_paths(base);
    cfg.validate()?;
    Ok(cfg)
}

fn apply_override(table: &mut toml::Table, ov: &str) -> Result<(), ConfigError> {
    let (key, raw) = ov.split_once('=').ok_or_else(|| {
        ConfigError::Parse(format!("override `{ov}` is not of the form key=value"))
    })?;
    let value: toml::Value = toml::from_str::<toml::Table>(&format!("v = {raw}"))
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| toml::Value::String(raw.to_string()));
    let mut parts: Vec<&str> = key.trim().split('.').collect();
    let last = parts
        .pop()
        .filter(|k| !k.is_empty())
        .ok_or_else(|| ConfigError::Parse(format!("empty key in `{ov}`")))?;
    let mut cur = table;
    for p in parts {
        cur = cur
            .entry(p)
            .or_insert_with(|| toml::Value::Table(toml::Table::new()))
            .as_table_mut()
            .ok_or_else(|| {
                ConfigError::Parse(format!("override key `{key}`: `{p}` is not a section"))
            })?;
    }
    cur.insert(last.to_string(), value);
    Ok(())
}

fn positive(name: &str, v: f64) -> Result<(), ConfigError> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(invalid(format!("{name} must be positive, got {v}")))
    }
}

fn exists(name: &str, p: &Option<PathBuf>) -> Result<(), ConfigError> {
    match p {
        Some(p) if !p.exists() => Err(invalid(format!("{name} `{}` does not exist", p.display()))),
        _ => Ok(()),
    }
}

impl RunConfig {
    fn resolve_paths(&mut self, base: &Path) {
        for p in [
            &mut self.law.file,
            &mut self.design.file,
            &mut self.input.trace,
            &mut self.input.traces,
        ]
        .into_iter()
        .flatten()
        {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        }
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.n < heatid_core::grid::MIN_NODES {
            return Err(invalid(format!(
                "n must be at least {}, got {}",
                heatid_core::grid::MIN_NODES,
                self.n
            )));
        }
        if !self.flux_amplitude.is_finite() {
            return Err(invalid("flux_amplitude must be finite"));
        }
        if self.law.builtin.is_some() && self.law.file.is_some() {
            return Err(invalid("law.builtin and law.file are mutually exclusive"));
        }
        if let Some(b) = &self.law.builtin {
            b.parse::<BuiltinLaw>()
                .map_err(|e| invalid(format!("law.builtin: {e}")))?;
        }
        let (lo, hi) = self.law.s_range;
        if !(lo < hi) || self.law.samples < 2 {
            return Err(invalid(
                "law.s_range must be increasing and law.samples at least 2",
            ));
        }
        if !(0.0..=1.0).contains(&self.curve.start)
            || !(self.curve.start < self.curve.end)
            || self.curve.end > 1.0
        {
            return Err(invalid("curve needs 0 <= start < end <= 1"));
        }
        positive("schedule.t_final", self.schedule.t_final)?;
        positive("schedule.dt", self.schedule.dt)?;
        match self.schedule.ramp {
            Ramp::Cosine { t_ramp } | Ramp::Linear { t_ramp } => {
                positive("schedule.ramp.t_ramp", t_ramp)?
            }
            Ramp::Step => {}
        }
        let (g1, g2) = self.design.target;
        if !(g1 < g2) {
            return Err(invalid(format!(
                "design.target needs g1 < g2, got [{g1}, {g2}]"
            )));
        }
        positive("design.eps", self.design.eps)?;
        positive("design.c1", self.design.c1)?;
        positive("design.initial_t_ramp", self.design.initial_t_ramp)?;
        if self.design.ramp_steps == 0 {
            return Err(invalid("design.ramp_steps must be positive"));
        }
        positive("solver.tol", self.solver.tol)?;
        positive("solver.tol_compat", self.solver.tol_compat)?;
        if self.solver.max_iter_factor == 0 || self.newton.max_iterations == 0 {
            return Err(invalid("iteration caps must be positive"));
        }
        positive("newton.tol", self.newton.tol)?;
        positive("newton.forcing", self.newton.forcing)?;
        positive("inverse.c_min", self.inverse.c_min)?;
        if self.inverse.smoothing_window == 0 {
            return Err(invalid("inverse.smoothing_window must be at least 1"));
        }
        if let Some((t1, t2)) = self.input.window {
            if !(t1 <= t2) {
                return Err(invalid("input.window needs t1 <= t2"));
            }
        }
        if self.stability.deltas.is_empty() || self.stability.deltas.iter().any(|d| !(*d >= 0.0)) {
            return Err(invalid(
                "stability.deltas must be non-empty and non-negative",
            ));
        }
        let sizes = &self.convergence.sizes;
        if sizes.len() < 3 || sizes.iter().any(|&n| n < heatid_core::grid::MIN_NODES) {
            return Err(invalid(
                "convergence.sizes needs at least 3 grids of at least 9 nodes",
            ));
        }
        if sizes.windows(2).any(|w| w[0] == w[1]) {
            return Err(invalid("convergence.sizes contains a repeated size"));
        }
        positive("equilibrium.ut_tol", self.equilibrium.ut_tol)?;
        exists("law.file", &self.law.file)?;
        exists("design.file", &self.design.file)?;
        exists("input.trace", &self.input.trace)?;
        exists("input.traces", &self.input.traces)?;
        Ok(())
    }

    pub fn load_law(&self) -> heatid_core::Result<Option<KirchhoffTransform>> {
        let law: Option<ConductionLaw> = if let Some(b) = &self.law.builtin {
            let b: BuiltinLaw = b.parse()?;
            Some(b.tabulate(self.law.s_range.0, self.law.s_range.1, self.law.samples)?)
        } else if let Some(p) = &self.law.file {
            Some(heatid_core::io::read_law_csv(p, None)?)
        } else {
            None
        };
        law.map(KirchhoffTransform::new).transpose()
    }

    pub fn linear(&self) -> LinearSolverOptions {
        self.solver
    }

    pub fn newton_options(&self) -> NewtonOptions {
        NewtonOptions {
            tol: self.newton.tol,
            max_iterations: self.newton.max_iterations,
            max_halvings: self.newton.max_halvings,
            forcing: self.newton.forcing,
            linear: self.solver,
        }
    }

    pub fn inverse_options(&self) -> InverseOptions {
        InverseOptions {
            c_min: self.inverse.c_min,
            trim: self.inverse.trim,
            smoothing_window: self.inverse.smoothing_window,
            linear: self.solver,
        }
    }

    pub fn design_options(&self) -> DesignOptions {
        DesignOptions {
            c1: self.design.c1,
            c_min: self.inverse.c_min,
            n_validate: self.design.n_validate,
            ramp_steps: self.design.ramp_steps,
            hold_steps: self.design.hold_steps,
            initial_t_ramp: self.design.initial_t_ramp,
            max_doublings: self.design.max_doublings,
            curve: self.curve,
            newton: self.newton_options(),
            ..DesignOptions::default()
        }
    }

    pub fn study_setup(&self) -> StudySetup {
        StudySetup {
            n: self.n,
            flux_amplitude: self.flux_amplitude,
            curve: self.curve,
            inverse: self.inverse_options(),
        }
    }

    pub fn equilibrium_options(&self) -> EquilibriumOptions {
        EquilibriumOptions {
            ut_tol: self.equilibrium.ut_tol,
            max_steps: self.equilibrium.max_steps,
            newton: self.newton_options(),
        }
    }
}
