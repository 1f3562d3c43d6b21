//! Experiment design and verification studies.
//!
//! All experiments use the dipole flux (`+q` on the left edge, `−q` on the
//! right edge, no source), which is compatible by antisymmetry and drives a
//! monotone temperature profile along the bottom and top edges.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use crate::elliptic::{solve_elliptic, stationary_trace, Gauge};
use crate::error::{HeatError, Result};
use crate::grid::{
    monotonicity_check, trace_extract, BoundaryCurve, Edge, NodalField, StructuredGrid,
};
use crate::inverse::{
    error_sup, reconstruct_elliptic, reconstruct_parabolic, InverseOptions, ReconstructionResult,
};
use crate::kirchhoff::{ConductionLaw, KirchhoffTransform, LawBounds};
use crate::parabolic::{
    max_ut_norm, simulate, step, ut_norm_between, NewtonOptions, Ramp, Schedule, Trajectory,
};
use crate::poisson::{
    project_compatible, solve_neumann, FluxData, LinearSolverOptions, SourceField,
};

/// Measurement curve given independently of the grid resolution.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CurveSpec {
    pub edge: Edge,
    pub start: f64,
    pub end: f64,
}

impl Default for CurveSpec {
    fn default() -> Self {
        Self {
            edge: Edge::Bottom,
            start: 0.0,
            end: 1.0,
        }
    }
}

impl CurveSpec {
    pub fn on(&self, grid: &StructuredGrid) -> Result<BoundaryCurve> {
        BoundaryCurve::grid_aligned(grid, self.edge, self.start, self.end)
    }
}

/// Compactly supported cosine bump `(1 + cos(π(t − c)/w))/2` on `|t − c| < w`.
pub fn cosine_bump(t: f64, center: f64, half_width: f64) -> f64 {
    let z = (t - center) / half_width;
    if z.abs() >= 1.0 {
        0.0
    } else {
        0.5 * (1.0 + (PI * z).cos())
    }
}

pub fn cosine_bump_derivative(t: f64, center: f64, half_width: f64) -> f64 {
    let z = (t - center) / half_width;
    if z.abs() >= 1.0 {
        0.0
    } else {
        -0.5 * PI / half_width * (PI * z).sin()
    }
}

/// `∫ bump² = 3w/4`.
pub fn cosine_bump_l2_squared(half_width: f64) -> f64 {
    0.75 * half_width
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentDesign {
    /// Amplitude `q` of the dipole flux.
    pub flux_amplitude: f64,
    pub ramp: Ramp,
    pub t_hold: f64,
    pub dt: f64,
    pub curve: CurveSpec,
    /// Target temperature interval `[g₁, g₂]`.
    pub target: (f64, f64),
    pub eps: f64,
    pub c1: f64,
    pub c_min: f64,
    /// Measurement window `[t₁, t₂]`.
    pub window: (f64, f64),
    /// Grid and constant conductivity used by the validation replay.
    pub n_validate: usize,
    pub validation_kappa: f64,
    /// `max_n ‖u_t‖` observed by the validation replay.
    pub validated_max_ut: f64,
}

impl ExperimentDesign {
    pub fn t_ramp(&self) -> f64 {
        self.ramp.duration()
    }

    pub fn t_final(&self) -> f64 {
        self.t_ramp() + self.t_hold
    }

    pub fn ut_budget(&self) -> f64 {
        self.c1 * self.eps * self.eps
    }

    pub fn source(&self, grid: StructuredGrid) -> SourceField {
        SourceField::zeros(grid)
    }

    pub fn flux(&self, grid: StructuredGrid) -> FluxData {
        FluxData::dipole(grid, self.flux_amplitude)
    }

    pub fn schedule(&self, grid: StructuredGrid) -> Result<Schedule> {
        Schedule::new(
            self.t_final(),
            self.dt,
            self.ramp,
            self.source(grid),
            self.flux(grid),
        )
    }

    /// Same design with every time scale stretched by `factor`.
    pub fn stretched(&self, factor: f64) -> Self {
        let ramp = match self.ramp {
            Ramp::Cosine { t_ramp } => Ramp::Cosine {
                t_ramp: t_ramp * factor,
            },
            Ramp::Linear { t_ramp } => Ramp::Linear {
                t_ramp: t_ramp * factor,
            },
            Ramp::Step => Ramp::Step,
        };
        Self {
            ramp,
            t_hold: self.t_hold * factor,
            dt: self.dt * factor,
            window: (self.window.0 * factor, self.window.1 * factor),
            ..self.clone()
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DesignOptions {
    pub c1: f64,
    pub c_min: f64,
    pub n_validate: usize,
    /// Implicit Euler steps spent on the ramp; the step grows with the ramp.
    pub ramp_steps: usize,
    pub hold_steps: usize,
    pub initial_t_ramp: f64,
    pub max_doublings: usize,
    /// Factor by which the stationary trace range must exceed the target.
    pub coverage_margin: f64,
    pub curve: CurveSpec,
    pub newton: NewtonOptions,
}

impl Default for DesignOptions {
    fn default() -> Self {
        Self {
            c1: 1.0,
            c_min: 1e-3,
            n_validate: 33,
            ramp_steps: 32,
            hold_steps: 16,
            initial_t_ramp: 1.0,
            max_doublings: 30,
            coverage_margin: 1.1,
            curve: CurveSpec::default(),
            newton: NewtonOptions::default(),
        }
    }
}

/// Chooses the dipole amplitude so that the stationary trace of the mid-range
/// constant law covers `target`, then doubles the ramp duration until the
/// validation replay keeps `‖u_t‖ <= c₁ε²` at every step.
///
/// The measurement window is the second half of the ramp plus the hold phase.
pub fn design_ramp(
    bounds: LawBounds,
    target: (f64, f64),
    eps: f64,
    opts: &DesignOptions,
) -> Result<ExperimentDesign> {
    let (g1, g2) = target;
    if !(g1 < g2) || !(eps > 0.0) {
        return Err(HeatError::invalid(format!(
            "design needs g1 < g2 and eps > 0, got [{g1}, {g2}] and {eps}"
        )));
    }
    if opts.ramp_steps == 0 || !(opts.initial_t_ramp > 0.0) || !(opts.c1 > 0.0) {
        return Err(HeatError::invalid(
            "ramp_steps, initial_t_ramp and c1 must be positive",
        ));
    }
    let grid = StructuredGrid::new(opts.n_validate)?;
    let curve = opts.curve.on(&grid)?;
    let kappa = bounds.midpoint();
    let law = KirchhoffTransform::new(ConductionLaw::constant(kappa, -1.0, 1.0)?)?;
    let linear = opts.newton.linear;

    let mut amplitude = 2.0 * kappa * g1.abs().max(g2.abs()) * opts.coverage_margin;
    let mut covered = false;
    for _ in 0..40 {
        let trace = stationary_trace(
            &law,
            &SourceField::zeros(grid),
            &FluxData::dipole(grid, amplitude),
            Gauge::default(),
            &curve,
            &linear,
        )?;
        let (lo, hi) = trace.range();
        let mono = monotonicity_check(&trace, opts.c_min)?;
        if !mono.passed {
            return Err(HeatError::DesignInfeasible(format!(
                "dipole flux does not produce a monotone trace on the {:?} edge",
                opts.curve.edge
            )));
        }
        if lo <= g1 && hi >= g2 {
            covered = true;
            break;
        }
        amplitude *= 1.25;
    }
    if !covered {
        return Err(HeatError::DesignInfeasible(format!(
            "no flux amplitude up to {amplitude:.3e} covers [{g1}, {g2}]"
        )));
    }

    let budget = opts.c1 * eps * eps;
    let mut t_ramp = opts.initial_t_ramp;
    for _ in 0..=opts.max_doublings {
        let dt = t_ramp / opts.ramp_steps as f64;
        let mut design = ExperimentDesign {
            flux_amplitude: amplitude,
            ramp: Ramp::Cosine { t_ramp },
            t_hold: dt * opts.hold_steps as f64,
            dt,
            curve: opts.curve,
            target,
            eps,
            c1: opts.c1,
            c_min: opts.c_min,
            window: (0.5 * t_ramp, t_ramp + dt * opts.hold_steps as f64),
            n_validate: opts.n_validate,
            validation_kappa: kappa,
            validated_max_ut: f64::NAN,
        };
        let max_ut = validate_design(&design, &opts.newton)?;
        if max_ut <= budget {
            design.validated_max_ut = max_ut;
            return Ok(design);
        }
        t_ramp *= 2.0;
    }
    Err(HeatError::DesignInfeasible(format!(
        "u_t budget {budget:.3e} not met after {} ramp doublings",
        opts.max_doublings
    )))
}

/// Replays the design with the constant validation law and returns `max_n ‖u_t‖`.
pub fn validate_design(design: &ExperimentDesign, newton: &NewtonOptions) -> Result<f64> {
    let grid = StructuredGrid::new(design.n_validate)?;
    let law =
        KirchhoffTransform::new(ConductionLaw::constant(design.validation_kappa, -1.0, 1.0)?)?;
    let traj = simulate(
        &law,
        &design.schedule(grid)?,
        &design.curve.on(&grid)?,
        newton,
    )?;
    Ok(max_ut_norm(&traj))
}

/// Outcome of running a design against a conduction law.
#[derive(Debug, Clone)]
pub struct DesignRun {
    pub trajectory: Trajectory,
    pub max_ut: f64,
    pub result: ReconstructionResult,
}

/// Simulates the design with `truth` on an `n × n` grid and reconstructs from
/// the traces inside the measurement window.
pub fn run_design(
    truth: &KirchhoffTransform,
    design: &ExperimentDesign,
    n: usize,
    newton: &NewtonOptions,
    inverse: &InverseOptions,
) -> Result<DesignRun> {
    let grid = StructuredGrid::new(n)?;
    let schedule = design.schedule(grid)?;
    let trajectory = simulate(truth, &schedule, &design.curve.on(&grid)?, newton)?;
    let max_ut = max_ut_norm(&trajectory);
    let opts = InverseOptions {
        c_min: design.c_min,
        ..*inverse
    };
    let result = reconstruct_parabolic(&schedule, trajectory.traces(), design.window, &opts)?;
    Ok(DesignRun {
        trajectory,
        max_ut,
        result,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RampRow {
    pub t_ramp: f64,
    pub max_ut: f64,
    pub error: f64,
}

/// Runs the design stretched by each factor; rows follow the input order.
pub fn ramp_study(
    truth: &KirchhoffTransform,
    design: &ExperimentDesign,
    factors: &[f64],
    n: usize,
    newton: &NewtonOptions,
    inverse: &InverseOptions,
) -> Result<Vec<RampRow>> {
    factors
        .par_iter()
        .map(|&factor| {
            let d = design.stretched(factor);
            let run = run_design(truth, &d, n, newton, inverse)?;
            Ok(RampRow {
                t_ramp: d.t_ramp(),
                max_ut: run.max_ut,
                error: error_sup(&run.result, truth.law()),
            })
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EquilibriumOptions {
    /// Stop once `‖u_t‖` falls to this level.
    pub ut_tol: f64,
    pub max_steps: usize,
    pub newton: NewtonOptions,
}

impl Default for EquilibriumOptions {
    fn default() -> Self {
        Self {
            ut_tol: 1e-8,
            max_steps: 10_000,
            newton: NewtonOptions::default(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct EquilibriumRun {
    pub steps: usize,
    pub final_ut: f64,
    pub field: NodalField,
    pub result: ReconstructionResult,
}

/// Switches the design's full data on at `t = 0⁺`, waits until the temperature
/// is stationary and reconstructs from the final trace with the elliptic formula.
pub fn equilibrium_mode(
    truth: &KirchhoffTransform,
    design: &ExperimentDesign,
    n: usize,
    opts: &EquilibriumOptions,
    inverse: &InverseOptions,
) -> Result<EquilibriumRun> {
    let grid = StructuredGrid::new(n)?;
    let curve = design.curve.on(&grid)?;
    let f = design.source(grid);
    let j = design.flux(grid);
    let mut u = NodalField::zeros(grid);
    let mut last_ut = f64::INFINITY;
    let mut steps = 0;
    while steps < opts.max_steps {
        let next = step(truth, &u, &f, &j, design.dt, &opts.newton)?;
        last_ut = ut_norm_between(&u, &next, design.dt);
        u = next;
        steps += 1;
        if last_ut <= opts.ut_tol {
            let trace = trace_extract(&u, &curve)?;
            let inv = InverseOptions {
                c_min: design.c_min,
                ..*inverse
            };
            let result = reconstruct_elliptic(&f, &j, &trace, &inv)?;
            return Ok(EquilibriumRun {
                steps,
                final_ut: last_ut,
                field: u,
                result,
            });
        }
    }
    Err(HeatError::EquilibriumNotReached {
        steps,
        ut_norm: last_ut,
    })
}

/// Parameters shared by the stationary studies.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct StudySetup {
    pub n: usize,
    pub flux_amplitude: f64,
    pub curve: CurveSpec,
    pub inverse: InverseOptions,
}

impl Default for StudySetup {
    fn default() -> Self {
        Self {
            n: 129,
            flux_amplitude: 1.0,
            curve: CurveSpec::default(),
            inverse: InverseOptions::default(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PerturbationMode {
    /// `‖j − j̃‖_{L²(∂Ω)} = δ`, applied when generating the trace.
    Flux,
    /// `‖f − f̃‖_{L²(Ω)} = δ`, applied when generating the trace.
    Source,
    /// `‖g − g̃‖_{W^{1,∞}(γ)} = δ`, added to the measured trace.
    Measurement,
}

impl std::str::FromStr for PerturbationMode {
    type Err = HeatError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "flux" => Ok(Self::Flux),
            "source" => Ok(Self::Source),
            "measurement" => Ok(Self::Measurement),
            other => Err(HeatError::invalid(format!(
                "unknown perturbation mode `{other}`"
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct StabilityRow {
    pub delta: f64,
    pub error: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StabilityTable {
    pub mode: PerturbationMode,
    pub rows: Vec<StabilityRow>,
    /// Least-squares slope of `ln error` against `ln δ` over rows with `δ > 0`.
    pub slope: Option<f64>,
}

const BUMP_HALF_WIDTH: f64 = 0.2;

fn opposite(edge: Edge) -> Edge {
    match edge {
        Edge::Bottom => Edge::Top,
        Edge::Top => Edge::Bottom,
        Edge::Left => Edge::Right,
        Edge::Right => Edge::Left,
    }
}

/// Zero-mean pair of flux bumps on the edge opposite the curve, unit `L²(∂Ω)` norm.
fn flux_perturbation(grid: StructuredGrid, curve_edge: Edge) -> FluxData {
    let w = BUMP_HALF_WIDTH;
    let norm = (2.0 * cosine_bump_l2_squared(w)).sqrt();
    let target = opposite(curve_edge);
    FluxData::from_fn(grid, |e, x, y| {
        if e != target {
            return 0.0;
        }
        let t = match e {
            Edge::Bottom | Edge::Top => x,
            Edge::Left | Edge::Right => y,
        };
        (cosine_bump(t, 0.3, w) - cosine_bump(t, 0.7, w)) / norm
    })
}

/// Zero-mean pair of source bumps, unit `L²(Ω)` norm.
fn source_perturbation(grid: StructuredGrid) -> SourceField {
    let w = BUMP_HALF_WIDTH;
    let norm = (2.0 * cosine_bump_l2_squared(w).powi(2)).sqrt();
    SourceField::from_fn(grid, |x, y| {
        (cosine_bump(x, 0.3, w) - cosine_bump(x, 0.7, w)) * cosine_bump(y, 0.5, w) / norm
    })
}

/// Bump along the curve with unit `W^{1,∞}` norm (`‖ψ‖∞ + ‖ψ'‖∞` in arclength).
fn measurement_perturbation(curve: &BoundaryCurve) -> Vec<f64> {
    let len = curve.arclength();
    let w = 0.25 * len;
    let norm = 1.0 + 0.5 * PI / w;
    curve
        .params()
        .iter()
        .map(|s| cosine_bump(s * len, 0.5 * len, w) / norm)
        .collect()
}

/// Perturbs one datum by a fixed bump scaled to norm `δ`, reconstructs with the
/// nominal data and records the sup error against `truth`.
pub fn stability_study(
    truth: &KirchhoffTransform,
    setup: &StudySetup,
    deltas: &[f64],
    mode: PerturbationMode,
) -> Result<StabilityTable> {
    if deltas.is_empty() || deltas.iter().any(|d| !(*d >= 0.0) || !d.is_finite()) {
        return Err(HeatError::invalid(
            "perturbation levels must be finite and non-negative",
        ));
    }
    let grid = StructuredGrid::new(setup.n)?;
    let curve = setup.curve.on(&grid)?;
    let f = SourceField::zeros(grid);
    let j = FluxData::dipole(grid, setup.flux_amplitude);
    let linear = setup.inverse.linear;
    let nominal = stationary_trace(truth, &f, &j, Gauge::default(), &curve, &linear)?;

    let rows = deltas
        .par_iter()
        .map(|&delta| {
            let trace = match mode {
                PerturbationMode::Flux => {
                    let jp = j.plus(&flux_perturbation(grid, curve.edge()).scaled(delta))?;
                    let (fp, jp) = project_compatible(&f, &jp)?;
                    stationary_trace(truth, &fp, &jp, Gauge::default(), &curve, &linear)?
                }
                PerturbationMode::Source => {
                    let fp = f.plus(&source_perturbation(grid).scaled(delta))?;
                    let (fp, jp) = project_compatible(&fp, &j)?;
                    stationary_trace(truth, &fp, &jp, Gauge::default(), &curve, &linear)?
                }
                PerturbationMode::Measurement => {
                    let bump = measurement_perturbation(&curve);
                    let values = nominal
                        .values()
                        .iter()
                        .zip(&bump)
                        .map(|(g, b)| g + delta * b)
                        .collect();
                    nominal.with_values(values)?
                }
            };
            let result = reconstruct_elliptic(&f, &j, &trace, &setup.inverse)?;
            Ok(StabilityRow {
                delta,
                error: error_sup(&result, truth.law()),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let slope = loglog_slope(rows.iter().map(|r| (r.delta, r.error)));
    Ok(StabilityTable { mode, rows, slope })
}

/// Least-squares slope of `ln y` against `ln x` over points with positive coordinates.
pub fn loglog_slope(points: impl IntoIterator<Item = (f64, f64)>) -> Option<f64> {
    let pts: Vec<(f64, f64)> = points
        .into_iter()
        .filter(|(x, y)| *x > 0.0 && *y > 0.0)
        .map(|(x, y)| (x.ln(), y.ln()))
        .collect();
    if pts.len() < 2 {
        return None;
    }
    let m = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / m;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / m;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    (sxx > 0.0).then(|| sxy / sxx)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ConvergenceRow {
    pub n: usize,
    pub h: f64,
    /// Manufactured Neumann problem, max-norm error of `U`.
    pub poisson_error: f64,
    /// Manufactured quasilinear problem with the study law, max-norm error of `u`.
    pub forward_error: f64,
    /// Sup error of the dipole-experiment reconstruction.
    pub reconstruction_error: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConvergenceTable {
    pub rows: Vec<ConvergenceRow>,
    pub poisson_orders: Vec<f64>,
    pub forward_orders: Vec<f64>,
    pub reconstruction_orders: Vec<f64>,
}

/// Observed orders `ln(e_i/e_{i+1}) / ln(h_i/h_{i+1})` between successive entries.
pub fn observed_orders(h: &[f64], errors: &[f64]) -> Result<Vec<f64>> {
    h.windows(2)
        .zip(errors.windows(2))
        .map(|(hw, ew)| {
            let denom = (hw[0] / hw[1]).ln();
            if denom == 0.0 || !denom.is_finite() {
                return Err(HeatError::invalid(
                    "repeated grid sizes give a zero order denominator",
                ));
            }
            Ok((ew[0] / ew[1]).ln() / denom)
        })
        .collect()
}

fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).fold(0.0, |m, (x, y)| m.max((x - y).abs()))
}

/// Manufactured Neumann problem `U* = cos(πx)cos(πy)`; returns `max |U − U*|`.
pub fn poisson_manufactured_error(n: usize, linear: &LinearSolverOptions) -> Result<f64> {
    let grid = StructuredGrid::new(n)?;
    let exact = |x: f64, y: f64| (PI * x).cos() * (PI * y).cos();
    let f = SourceField::from_fn(grid, |x, y| 2.0 * PI * PI * exact(x, y));
    let u = solve_neumann(&f, &FluxData::zeros(grid), linear)?;
    Ok(max_abs_diff(
        u.values(),
        NodalField::from_fn(grid, exact).values(),
    ))
}

/// The same manufactured `U*` pushed through `A⁻¹`; the gauge pins `u` at the
/// centre of the square. Returns `max |u − A⁻¹(U*)|`.
pub fn elliptic_manufactured_error(
    t: &KirchhoffTransform,
    n: usize,
    linear: &LinearSolverOptions,
) -> Result<f64> {
    let grid = StructuredGrid::new(n)?;
    let exact = |x: f64, y: f64| (PI * x).cos() * (PI * y).cos();
    let f = SourceField::from_fn(grid, |x, y| 2.0 * PI * PI * exact(x, y));
    let gauge = Gauge::PointValue {
        x: 0.5,
        y: 0.5,
        value: t.invert(exact(0.5, 0.5)),
    };
    let u = solve_elliptic(t, &f, &FluxData::zeros(grid), gauge, linear)?;
    let reference = NodalField::from_fn(grid, |x, y| t.invert(exact(x, y)));
    Ok(max_abs_diff(u.values(), reference.values()))
}

/// Sup error of the stationary dipole experiment reconstruction on an `n × n` grid.
pub fn reconstruction_error(
    truth: &KirchhoffTransform,
    setup: &StudySetup,
    n: usize,
) -> Result<f64> {
    let grid = StructuredGrid::new(n)?;
    let curve = setup.curve.on(&grid)?;
    let f = SourceField::zeros(grid);
    let j = FluxData::dipole(grid, setup.flux_amplitude);
    let trace = stationary_trace(
        truth,
        &f,
        &j,
        Gauge::default(),
        &curve,
        &setup.inverse.linear,
    )?;
    let result = reconstruct_elliptic(&f, &j, &trace, &setup.inverse)?;
    Ok(error_sup(&result, truth.law()))
}

pub fn convergence_study(
    truth: &KirchhoffTransform,
    sizes: &[usize],
    setup: &StudySetup,
) -> Result<ConvergenceTable> {
    if sizes.len() < 3 {
        return Err(HeatError::invalid(
            "a convergence study needs at least 3 grid sizes",
        ));
    }
    if sizes.windows(2).any(|w| w[0] == w[1]) {
        return Err(HeatError::invalid(
            "repeated grid sizes give a zero order denominator",
        ));
    }
    let linear = setup.inverse.linear;
    let rows = sizes
        .par_iter()
        .map(|&n| {
            Ok(ConvergenceRow {
                n,
                h: StructuredGrid::new(n)?.h(),
                poisson_error: poisson_manufactured_error(n, &linear)?,
                forward_error: elliptic_manufactured_error(truth, n, &linear)?,
                reconstruction_error: reconstruction_error(truth, setup, n)?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let h: Vec<f64> = rows.iter().map(|r| r.h).collect();
    let col = |f: fn(&ConvergenceRow) -> f64| rows.iter().map(f).collect::<Vec<_>>();
    Ok(ConvergenceTable {
        poisson_orders: observed_orders(&h, &col(|r| r.poisson_error))?,
        forward_orders: observed_orders(&h, &col(|r| r.forward_error))?,
        reconstruction_orders: observed_orders(&h, &col(|r| r.reconstruction_error))?,
        rows,
    })
}
