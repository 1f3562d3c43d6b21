//! Instationary problem `u_t − div(a(u)∇u) = f`, `a(u)∂ₙu = j`, `u(·,0) = 0`.
//!
//! Implicit Euler in time with the same symmetrised stencil as the Neumann
//! solver. Each step is solved by damped Newton iteration in the Kirchhoff
//! variable `V = A(u)`, where the step equation reads
//!
//! ```text
//! h²W (A⁻¹(V) − uⁿ)/dt + K V = h²W f + h q j
//! ```
//!
//! and the Jacobian `h²W diag(1/a(u))/dt + K` is symmetric positive definite.

use serde::{Deserialize, Serialize};

use crate::cg::{pcg, CgSettings};
use crate::error::{HeatError, Result};
use crate::grid::{trace_extract, BoundaryCurve, NodalField, TraceMeasurement};
use crate::kirchhoff::KirchhoffTransform;
use crate::poisson::{
    accurate_sum, apply_stiffness, dirichlet_form, load_vector, stiffness_diagonal, FluxData,
    LinearSolverOptions, SourceField,
};

/// Time profile `ρ(t)` multiplying the spatial data patterns.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum Ramp {
    /// `(1 − cos(πt/t_ramp))/2` up to `t_ramp`, then 1.
    Cosine { t_ramp: f64 },
    /// `t/t_ramp` up to `t_ramp`, then 1.
    Linear { t_ramp: f64 },
    /// 0 at `t = 0`, 1 afterwards (data switched on and frozen).
    Step,
}

impl Ramp {
    pub fn value(&self, t: f64) -> f64 {
        match *self {
            Ramp::Cosine { t_ramp } => {
                if t >= t_ramp {
                    1.0
                } else if t <= 0.0 {
                    0.0
                } else {
                    0.5 * (1.0 - (std::f64::consts::PI * t / t_ramp).cos())
                }
            }
            Ramp::Linear { t_ramp } => (t / t_ramp).clamp(0.0, 1.0),
            Ramp::Step => {
                if t > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
        }
    }

    pub fn duration(&self) -> f64 {
        match *self {
            Ramp::Cosine { t_ramp } | Ramp::Linear { t_ramp } => t_ramp,
            Ramp::Step => 0.0,
        }
    }
}

/// Time-dependent data `ρ(t)·(f, j)` on `[0, t_final]` with uniform step `dt`.
#[derive(Debug, Clone, PartialEq)]
pub struct Schedule {
    t_final: f64,
    dt: f64,
    ramp: Ramp,
    source: SourceField,
    flux: FluxData,
}

impl Schedule {
    pub fn new(
        t_final: f64,
        dt: f64,
        ramp: Ramp,
        source: SourceField,
        flux: FluxData,
    ) -> Result<Self> {
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(HeatError::invalid(format!(
                "time step must be positive, got {dt}"
            )));
        }
        if !(t_final >= dt && t_final.is_finite()) {
            return Err(HeatError::invalid(format!(
                "time horizon {t_final} must be at least one step ({dt})"
            )));
        }
        if let Ramp::Cosine { t_ramp } | Ramp::Linear { t_ramp } = ramp {
            if !(t_ramp > 0.0 && t_ramp.is_finite()) {
                return Err(HeatError::invalid(format!(
                    "ramp duration must be positive, got {t_ramp}"
                )));
            }
        }
        if source.grid() != flux.grid() {
            return Err(HeatError::SizeMismatch {
                expected: source.grid().len(),
                actual: flux.grid().len(),
            });
        }
        debug_assert_eq!(ramp.value(0.0), 0.0);
        Ok(Self {
            t_final,
            dt,
            ramp,
            source,
            flux,
        })
    }

    pub fn t_final(&self) -> f64 {
        self.t_final
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn ramp(&self) -> Ramp {
        self.ramp
    }

    pub fn steps(&self) -> usize {
        (self.t_final / self.dt).round() as usize
    }

    pub fn time(&self, n: usize) -> f64 {
        n as f64 * self.dt
    }

    pub fn source_pattern(&self) -> &SourceField {
        &self.source
    }

    pub fn flux_pattern(&self) -> &FluxData {
        &self.flux
    }

    pub fn source_at(&self, t: f64) -> SourceField {
        self.source.scaled(self.ramp.value(t))
    }

    pub fn flux_at(&self, t: f64) -> FluxData {
        self.flux.scaled(self.ramp.value(t))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct NewtonOptions {
    /// Residual target relative to the size of the step equation's data.
    pub tol: f64,
    pub max_iterations: usize,
    /// Step halvings tried when the residual does not decrease.
    pub max_halvings: usize,
    /// Relative accuracy of each inner linear solve.
    pub forcing: f64,
    pub linear: LinearSolverOptions,
}

impl Default for NewtonOptions {
    fn default() -> Self {
        Self {
            tol: 1e-10,
            max_iterations: 50,
            max_halvings: 8,
            forcing: 1e-6,
            linear: LinearSolverOptions::default(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepReport {
    pub newton_iterations: usize,
    pub residual: f64,
    pub scale: f64,
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// One implicit Euler step from `u_prev` with data `(f_next, j_next)`.
pub fn step(
    t: &KirchhoffTransform,
    u_prev: &NodalField,
    f_next: &SourceField,
    j_next: &FluxData,
    dt: f64,
    opts: &NewtonOptions,
) -> Result<NodalField> {
    step_detailed(t, u_prev, f_next, j_next, dt, opts).map(|(u, _)| u)
}

pub fn step_detailed(
    t: &KirchhoffTransform,
    u_prev: &NodalField,
    f_next: &SourceField,
    j_next: &FluxData,
    dt: f64,
    opts: &NewtonOptions,
) -> Result<(NodalField, StepReport)> {
    let grid = u_prev.grid();
    if f_next.grid() != grid || j_next.grid() != grid {
        return Err(HeatError::SizeMismatch {
            expected: grid.len(),
            actual: f_next.grid().len(),
        });
    }
    if !(dt > 0.0) {
        return Err(HeatError::invalid(format!(
            "time step must be positive, got {dt}"
        )));
    }
    let len = grid.len();
    let mass: Vec<f64> = grid.quadrature_weights().iter().map(|w| w / dt).collect();
    let load = load_vector(f_next, j_next);
    let prev = u_prev.values();
    let mass_prev: Vec<f64> = mass.iter().zip(prev).map(|(m, u)| m * u).collect();
    let scale = norm(&mass_prev) + norm(&load);
    let target = opts.tol * scale;
    let k_diag = stiffness_diagonal(&grid);

    let mut kv = vec![0.0; len];
    let evaluate = |v: &[f64], u: &mut [f64], res: &mut [f64], kv: &mut [f64]| {
        apply_stiffness(&grid, v, kv);
        for k in 0..len {
            u[k] = t.invert(v[k]);
            res[k] = mass[k] * (u[k] - prev[k]) + kv[k] - load[k];
        }
        norm(res)
    };

    let mut v: Vec<f64> = prev.iter().map(|&u| t.principal(u)).collect();
    let mut u = vec![0.0; len];
    let mut res = vec![0.0; len];
    let mut res_norm = evaluate(&v, &mut u, &mut res, &mut kv);

    let mut trial_v = vec![0.0; len];
    let mut trial_u = vec![0.0; len];
    let mut trial_res = vec![0.0; len];
    let mut jac_diag = vec![0.0; len];
    let mut inv_diag = vec![0.0; len];
    let mut delta = vec![0.0; len];
    let mut rhs = vec![0.0; len];

    for iteration in 0..=opts.max_iterations {
        if res_norm <= target {
            let report = StepReport {
                newton_iterations: iteration,
                residual: res_norm,
                scale,
            };
            return Ok((NodalField::new(grid, u)?, report));
        }
        if iteration == opts.max_iterations {
            break;
        }
        for k in 0..len {
            jac_diag[k] = mass[k] / t.conductivity(u[k]);
            inv_diag[k] = 1.0 / (jac_diag[k] + k_diag[k]);
            rhs[k] = -res[k];
            delta[k] = 0.0;
        }
        pcg(
            |p, out| {
                apply_stiffness(&grid, p, out);
                out.iter_mut()
                    .zip(&jac_diag)
                    .zip(p)
                    .for_each(|((o, d), p)| *o += d * p);
            },
            &rhs,
            &mut delta,
            CgSettings {
                tol: opts.forcing,
                max_iter: opts.linear.max_iter(&grid),
                inv_diag: Some(&inv_diag),
                deflate_constants: false,
            },
        );

        let mut lambda = 1.0;
        let mut accepted = false;
        for _ in 0..=opts.max_halvings {
            for k in 0..len {
                trial_v[k] = v[k] + lambda * delta[k];
            }
            let trial_norm = evaluate(&trial_v, &mut trial_u, &mut trial_res, &mut kv);
            if trial_norm < res_norm {
                std::mem::swap(&mut v, &mut trial_v);
                std::mem::swap(&mut u, &mut trial_u);
                std::mem::swap(&mut res, &mut trial_res);
                res_norm = trial_norm;
                accepted = true;
                break;
            }
            lambda *= 0.5;
        }
        if !accepted {
            return Err(HeatError::NewtonDivergence {
                iterations: iteration + 1,
                residual: res_norm,
            });
        }
    }
    Err(HeatError::NewtonDivergence {
        iterations: opts.max_iterations,
        residual: res_norm,
    })
}

/// Temperature fields `uⁿ` at `tₙ = n·dt` and their traces on the measurement curve.
#[derive(Debug, Clone)]
pub struct Trajectory {
    dt: f64,
    fields: Vec<NodalField>,
    traces: Vec<TraceMeasurement>,
}

impl Trajectory {
    /// Assembles a trajectory from precomputed fields (trace recorded on `curve`).
    pub fn from_fields(dt: f64, fields: Vec<NodalField>, curve: &BoundaryCurve) -> Result<Self> {
        if fields.is_empty() {
            return Err(HeatError::invalid("a trajectory needs at least one field"));
        }
        let traces = fields
            .iter()
            .enumerate()
            .map(|(n, u)| trace_extract(u, curve).map(|tr| tr.with_time(n as f64 * dt)))
            .collect::<Result<_>>()?;
        Ok(Self { dt, fields, traces })
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn steps(&self) -> usize {
        self.fields.len() - 1
    }

    pub fn time(&self, n: usize) -> f64 {
        n as f64 * self.dt
    }

    pub fn fields(&self) -> &[NodalField] {
        &self.fields
    }

    pub fn traces(&self) -> &[TraceMeasurement] {
        &self.traces
    }

    pub fn last(&self) -> &NodalField {
        self.fields.last().unwrap()
    }
}

/// Runs the schedule from `u⁰ ≡ 0`.
pub fn simulate(
    t: &KirchhoffTransform,
    schedule: &Schedule,
    curve: &BoundaryCurve,
    opts: &NewtonOptions,
) -> Result<Trajectory> {
    simulate_from(
        t,
        schedule,
        curve,
        NodalField::zeros(schedule.source.grid()),
        opts,
    )
}

/// Runs the schedule from an arbitrary initial field.
pub fn simulate_from(
    t: &KirchhoffTransform,
    schedule: &Schedule,
    curve: &BoundaryCurve,
    initial: NodalField,
    opts: &NewtonOptions,
) -> Result<Trajectory> {
    let steps = schedule.steps();
    let mut fields = Vec::with_capacity(steps + 1);
    let mut traces = Vec::with_capacity(steps + 1);
    traces.push(trace_extract(&initial, curve)?.with_time(0.0));
    fields.push(initial);
    for n in 1..=steps {
        let time = schedule.time(n);
        let next = step(
            t,
            fields.last().unwrap(),
            &schedule.source_at(time),
            &schedule.flux_at(time),
            schedule.dt,
            opts,
        )?;
        traces.push(trace_extract(&next, curve)?.with_time(time));
        fields.push(next);
    }
    Ok(Trajectory {
        dt: schedule.dt,
        fields,
        traces,
    })
}

/// Trapezoidal `L²(Ω)` norm of `(next − prev)/dt`.
pub fn ut_norm_between(prev: &NodalField, next: &NodalField, dt: f64) -> f64 {
    let w = prev.grid().quadrature_weights();
    accurate_sum(
        w.iter()
            .zip(prev.values().iter().zip(next.values()))
            .map(|(w, (a, b))| w * ((b - a) / dt).powi(2)),
    )
    .sqrt()
}

/// `‖(uⁿ − uⁿ⁻¹)/dt‖_{L²(Ω)}` for `1 <= n <= N`.
pub fn ut_norm(trajectory: &Trajectory, n: usize) -> Result<f64> {
    if n == 0 || n > trajectory.steps() {
        return Err(HeatError::invalid(format!(
            "step index {n} outside 1..={}",
            trajectory.steps()
        )));
    }
    Ok(ut_norm_between(
        &trajectory.fields[n - 1],
        &trajectory.fields[n],
        trajectory.dt,
    ))
}

/// Largest `ut_norm` over all steps.
pub fn max_ut_norm(trajectory: &Trajectory) -> f64 {
    (1..=trajectory.steps())
        .map(|n| {
            ut_norm_between(
                &trajectory.fields[n - 1],
                &trajectory.fields[n],
                trajectory.dt,
            )
        })
        .fold(0.0, f64::max)
}

/// Both sides of the energy identity for two laws driven by identical data:
/// `(u_t − ũ_t, φ)_h = −(∇φ, ∇φ)_h` with `φ = A(u) − Ã(ũ)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EnergyIdentity {
    /// `(u_t − ũ_t, φ)_h`.
    pub time_term: f64,
    /// `(∇φ, ∇φ)_h`.
    pub gradient_term: f64,
    /// `|time_term + gradient_term| / max(|time_term|, gradient_term)`.
    pub relative_defect: f64,
}

pub fn energy_identity(
    first: (&KirchhoffTransform, &NodalField, &NodalField),
    second: (&KirchhoffTransform, &NodalField, &NodalField),
    dt: f64,
) -> EnergyIdentity {
    let (ta, a_prev, a_next) = first;
    let (tb, b_prev, b_next) = second;
    let grid = a_prev.grid();
    let w = grid.quadrature_weights();
    let phi: Vec<f64> = a_next
        .values()
        .iter()
        .zip(b_next.values())
        .map(|(u, v)| ta.principal(*u) - tb.principal(*v))
        .collect();
    let time_term = accurate_sum((0..grid.len()).map(|k| {
        let ut = (a_next.values()[k] - a_prev.values()[k]) / dt;
        let vt = (b_next.values()[k] - b_prev.values()[k]) / dt;
        w[k] * (ut - vt) * phi[k]
    }));
    let gradient_term = dirichlet_form(&grid, &phi, &phi);
    let denom = time_term.abs().max(gradient_term);
    let relative_defect = if denom > 0.0 {
        (time_term + gradient_term).abs() / denom
    } else {
        0.0
    };
    EnergyIdentity {
        time_term,
        gradient_term,
        relative_defect,
    }
}
