use serde_json::{json, Map, Value};
use std::path::{Path, PathBuf};

use heatid_core::elliptic::solve_elliptic;
use heatid_core::grid::trace_extract;
use heatid_core::harness::{
    convergence_study, design_ramp, equilibrium_mode, stability_study, ExperimentDesign,
};
use heatid_core::inverse::{
    error_sup, reconstruct_elliptic, reconstruct_parabolic, ReconstructionResult,
};
use heatid_core::io;
use heatid_core::parabolic::{simulate, ut_norm_between, Schedule};
use heatid_core::{FluxData, HeatError, KirchhoffTransform, Result, SourceField, StructuredGrid};

use crate::config::RunConfig;

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum, serde::Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Command {
    ForwardElliptic,
    ForwardParabolic,
    Reconstruct,
    ReconstructParabolic,
    Design,
    Stability,
    Convergence,
    Equilibrium,
}

/// Files written and scalar results of one run.
#[derive(Debug, Default)]
pub struct Outcome {
    pub outputs: Vec<String>,
    pub metrics: Map<String, Value>,
}

impl Outcome {
    fn file(&mut self, path: &Path) {
        self.outputs
            .push(path.file_name().unwrap().to_string_lossy().into_owned());
    }

    fn metric(&mut self, key: &str, value: impl Into<Value>) {
        self.metrics.insert(key.to_string(), value.into());
    }

    fn result_metrics(&mut self, r: &ReconstructionResult, truth: Option<&KirchhoffTransform>) {
        let d = r.diagnostics();
        self.metric("interval", json!([d.interval.0, d.interval.1]));
        self.metric("min_slope", d.min_slope);
        self.metric("samples", r.v().len());
        if let Some(t) = truth {
            self.metric("sup_error", error_sup(r, t.law()));
        }
    }
}

fn require_law(cfg: &RunConfig) -> Result<KirchhoffTransform> {
    cfg.load_law()?
        .ok_or_else(|| HeatError::InvalidInput("this command needs a [law] section".into()))
}

fn dipole(cfg: &RunConfig, grid: StructuredGrid) -> (SourceField, FluxData) {
    (
        SourceField::zeros(grid),
        FluxData::dipole(grid, cfg.flux_amplitude),
    )
}

fn load_design(cfg: &RunConfig, law: Option<&KirchhoffTransform>) -> Result<ExperimentDesign> {
    if let Some(p) = &cfg.design.file {
        return io::read_json(p);
    }
    let bounds = match (cfg.design.bounds, law) {
        (Some(b), _) => b,
        (None, Some(t)) => t.law().bounds(),
        (None, None) => {
            return Err(HeatError::InvalidInput(
                "design needs design.bounds or a [law] section".into(),
            ))
        }
    };
    design_ramp(
        bounds,
        cfg.design.target,
        cfg.design.eps,
        &cfg.design_options(),
    )
}

/// Schedule from the design file if one is configured, else from `[schedule]`.
fn schedule(cfg: &RunConfig, grid: StructuredGrid) -> Result<(Schedule, Option<ExperimentDesign>)> {
    if cfg.design.file.is_some() {
        let d = load_design(cfg, None)?;
        return Ok((d.schedule(grid)?, Some(d)));
    }
    let (f, j) = dipole(cfg, grid);
    let s = &cfg.schedule;
    Ok((Schedule::new(s.t_final, s.dt, s.ramp, f, j)?, None))
}

pub fn run(cmd: Command, cfg: &RunConfig, out: &Path) -> Result<Outcome> {
    let mut o = Outcome::default();
    let path = |name: &str| -> PathBuf { out.join(name) };
    match cmd {
        Command::ForwardElliptic => {
            let law = require_law(cfg)?;
            let grid = StructuredGrid::new(cfg.n)?;
            let (f, j) = dipole(cfg, grid);
            let u = solve_elliptic(&law, &f, &j, cfg.gauge, &cfg.linear())?;
            let trace = trace_extract(&u, &cfg.curve.on(&grid)?)?;
            io::write_field_csv(&path("field.csv"), &u)?;
            o.file(&path("field.csv"));
            io::write_trace_csv(&path("trace.csv"), &trace)?;
            o.file(&path("trace.csv"));
            let (lo, hi) = trace.range();
            o.metric("trace_range", json!([lo, hi]));
            o.metric("max_abs_u", u.max_abs());
        }
        Command::ForwardParabolic => {
            let law = require_law(cfg)?;
            let grid = StructuredGrid::new(cfg.n)?;
            let (sched, _) = schedule(cfg, grid)?;
            let traj = simulate(&law, &sched, &cfg.curve.on(&grid)?, &cfg.newton_options())?;
            let rows: Vec<_> = traj
                .fields()
                .windows(2)
                .enumerate()
                .map(|(k, w)| UtRow {
                    step: k + 1,
                    t: traj.time(k + 1),
                    ut_norm: ut_norm_between(&w[0], &w[1], traj.dt()),
                })
                .collect();
            io::write_trace_series_csv(&path("traces.csv"), traj.traces())?;
            o.file(&path("traces.csv"));
            io::write_field_csv(&path("field.csv"), traj.last())?;
            o.file(&path("field.csv"));
            io::write_csv(&path("ut_norm.csv"), &rows)?;
            o.file(&path("ut_norm.csv"));
            o.metric("steps", traj.steps());
            o.metric(
                "max_ut_norm",
                rows.iter().map(|r| r.ut_norm).fold(0.0, f64::max),
            );
        }
        Command::Reconstruct => {
            let trace_path =
                cfg.input.trace.as_ref().ok_or_else(|| {
                    HeatError::InvalidInput("reconstruct needs input.trace".into())
                })?;
            let grid = StructuredGrid::new(cfg.n)?;
            let trace = io::read_trace_csv(trace_path, &cfg.curve.on(&grid)?)?;
            let (f, j) = dipole(cfg, grid);
            let r = reconstruct_elliptic(&f, &j, &trace, &cfg.inverse_options())?;
            io::write_result(&path("result.csv"), &r)?;
            o.file(&path("result.csv"));
            o.file(&path("result.diagnostics.json"));
            o.result_metrics(&r, cfg.load_law()?.as_ref());
        }
        Command::ReconstructParabolic => {
            let traces_path = cfg.input.traces.as_ref().ok_or_else(|| {
                HeatError::InvalidInput("reconstruct-parabolic needs input.traces".into())
            })?;
            let grid = StructuredGrid::new(cfg.n)?;
            let traces = io::read_trace_series_csv(traces_path, &cfg.curve.on(&grid)?)?;
            let (sched, design) = schedule(cfg, grid)?;
            let window = cfg
                .input
                .window
                .or(design.map(|d| d.window))
                .unwrap_or((0.0, sched.t_final()));
            let r = reconstruct_parabolic(&sched, &traces, window, &cfg.inverse_options())?;
            io::write_result(&path("result.csv"), &r)?;
            o.file(&path("result.csv"));
            o.file(&path("result.diagnostics.json"));
            o.metric("window", json!([window.0, window.1]));
            o.result_metrics(&r, cfg.load_law()?.as_ref());
        }
        Command::Design => {
            let law = cfg.load_law()?;
            let d = load_design(cfg, law.as_ref())?;
            io::write_json(&path("design.json"), &d)?;
            o.file(&path("design.json"));
            o.metric("t_ramp", d.t_ramp());
            o.metric("flux_amplitude", d.flux_amplitude);
            o.metric("validated_max_ut", d.validated_max_ut);
            o.metric("ut_budget", d.ut_budget());
        }
        Command::Stability => {
            let law = require_law(cfg)?;
            let setup = cfg.study_setup();
            let mut slopes = Map::new();
            for &mode in &cfg.stability.modes {
                let table = stability_study(&law, &setup, &cfg.stability.deltas, mode)?;
                let name = format!("stability_{}.csv", json!(mode).as_str().unwrap());
                io::write_csv(&path(&name), &table.rows)?;
                o.file(&path(&name));
                slopes.insert(
                    json!(mode).as_str().unwrap().to_string(),
                    json!(table.slope),
                );
            }
            o.metric("slopes", slopes);
        }
        Command::Convergence => {
            let law = require_law(cfg)?;
            let table = convergence_study(&law, &cfg.convergence.sizes, &cfg.study_setup())?;
            io::write_csv(&path("convergence.csv"), &table.rows)?;
            o.file(&path("convergence.csv"));
            o.metric("poisson_orders", json!(table.poisson_orders));
            o.metric("forward_orders", json!(table.forward_orders));
            o.metric("reconstruction_orders", json!(table.reconstruction_orders));
        }
        Command::Equilibrium => {
            let law = require_law(cfg)?;
            let d = load_design(cfg, Some(&law))?;
            let run = equilibrium_mode(
                &law,
                &d,
                cfg.n,
                &cfg.equilibrium_options(),
                &cfg.inverse_options(),
            )?;
            io::write_result(&path("result.csv"), &run.result)?;
            o.file(&path("result.csv"));
            o.file(&path("result.diagnostics.json"));
            o.metric("steps", run.steps);
            o.metric("final_ut_norm", run.final_ut);
            o.result_metrics(&run.result, Some(&law));
        }
    }
    Ok(o)
}

#[derive(serde::Serialize)]
struct UtRow {
    step: usize,
    t: f64,
    ut_norm: f64,
}

/// Process exit status for a failed run.
pub fn exit_code(e: &HeatError) -> i32 {
    match e {
        HeatError::EmptyIdentifiableInterval(_) => 4,
        HeatError::InvalidInput(_) | HeatError::Io { .. } | HeatError::Format { .. } => 2,
        _ => 3,
    }
}

pub fn error_kind(e: &HeatError) -> &'static str {
    match e {
        HeatError::CompatibilityViolation { .. } => "CompatibilityViolation",
        HeatError::SolverDivergence { .. } => "SolverDivergence",
        HeatError::NewtonDivergence { .. } => "NewtonDivergence",
        HeatError::EmptyIdentifiableInterval(_) => "EmptyIdentifiableInterval",
        HeatError::DesignInfeasible(_) => "DesignInfeasible",
        HeatError::EquilibriumNotReached { .. } => "EquilibriumNotReached",
        HeatError::CurveOffBoundary { .. } => "CurveOffBoundary",
        HeatError::SizeMismatch { .. } => "SizeMismatch",
        HeatError::InvalidInput(_) => "InvalidInput",
        HeatError::Io { .. } => "Io",
        HeatError::Format { .. } => "Format",
    }
}
