//! Stationary quasilinear problem `−div(a(u)∇u) = f`, `a(u)∂ₙu = j`.
//!
//! With `U = A(u)` the problem is the Neumann problem of [`crate::poisson`];
//! the temperature is `u = A⁻¹(U + c)` where the constant `c` is fixed by a gauge.

use serde::{Deserialize, Serialize};

use crate::error::{HeatError, Result};
use crate::grid::{trace_extract, BoundaryCurve, NodalField, TraceMeasurement};
use crate::kirchhoff::KirchhoffTransform;
use crate::poisson::{accurate_sum, solve_neumann, FluxData, LinearSolverOptions, SourceField};

/// Rule fixing the free additive constant of the Kirchhoff variable.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum Gauge {
    /// Trapezoidal mean of `u` equals `value`.
    MeanTemperature { value: f64 },
    /// `u(x, y) = value` (bilinear interpolation off the nodes).
    PointValue { x: f64, y: f64, value: f64 },
}

impl Default for Gauge {
    fn default() -> Self {
        Gauge::MeanTemperature { value: 0.0 }
    }
}

/// Maps a Kirchhoff field `U` to the temperature `A⁻¹(U + c)` satisfying `gauge`.
pub fn apply_gauge(
    t: &KirchhoffTransform,
    kirchhoff: &NodalField,
    gauge: Gauge,
) -> Result<NodalField> {
    let c = gauge_constant(t, kirchhoff, gauge)?;
    Ok(kirchhoff.map(|v| t.invert(v + c)))
}

/// The constant `c` with `A⁻¹(U + c)` satisfying the gauge.
pub fn gauge_constant(t: &KirchhoffTransform, kirchhoff: &NodalField, gauge: Gauge) -> Result<f64> {
    match gauge {
        Gauge::PointValue { x, y, value } => {
            if !((0.0..=1.0).contains(&x) && (0.0..=1.0).contains(&y)) {
                return Err(HeatError::invalid(format!(
                    "gauge point ({x}, {y}) lies outside the closed unit square"
                )));
            }
            Ok(t.principal(value) - kirchhoff.interpolate(x, y))
        }
        Gauge::MeanTemperature { value } => mean_gauge_constant(t, kirchhoff, value),
    }
}

/// Root of `c ↦ mean(A⁻¹(U + c)) − m₀`, which is strictly increasing.
fn mean_gauge_constant(t: &KirchhoffTransform, kirchhoff: &NodalField, target: f64) -> Result<f64> {
    let weights = kirchhoff.grid().quadrature_weights();
    let values = kirchhoff.values();
    let (u_min, u_max) = values
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| {
            (lo.min(v), hi.max(v))
        });
    let a_target = t.principal(target);
    // c = A(m0) - max U puts every node at or below m0, c = A(m0) - min U at or above.
    let (mut lo, mut hi) = (a_target - u_max, a_target - u_min);
    let mean_at = |c: f64| {
        let mut deriv = 0.0;
        let mean = accurate_sum(weights.iter().zip(values).map(|(w, &v)| {
            let u = t.invert(v + c);
            deriv += w / t.conductivity(u);
            w * u
        }));
        (mean - target, deriv)
    };
    let tol = 1e-13 * target.abs().max(1.0);
    let mut c = 0.5 * (lo + hi);
    for _ in 0..200 {
        let (r, d) = mean_at(c);
        if r.abs() <= tol {
            return Ok(c);
        }
        if r > 0.0 {
            hi = c;
        } else {
            lo = c;
        }
        let newton = c - r / d;
        c = if newton > lo && newton < hi {
            newton
        } else {
            0.5 * (lo + hi)
        };
        if hi - lo <= f64::EPSILON * c.abs().max(1.0) {
            break;
        }
    }
    let (r, _) = mean_at(c);
    if r.abs() <= 1e-10 * target.abs().max(1.0) {
        Ok(c)
    } else {
        Err(HeatError::invalid(format!(
            "mean-temperature gauge residual {r:e} not reached"
        )))
    }
}

/// Solves the stationary problem. The data must already satisfy the
/// compatibility condition; see [`crate::poisson::project_compatible`].
pub fn solve_elliptic(
    t: &KirchhoffTransform,
    f: &SourceField,
    j: &FluxData,
    gauge: Gauge,
    opts: &LinearSolverOptions,
) -> Result<NodalField> {
    let kirchhoff = solve_neumann(f, j, opts)?;
    apply_gauge(t, &kirchhoff, gauge)
}

/// Stationary temperature restricted to `curve`.
pub fn stationary_trace(
    t: &KirchhoffTransform,
    f: &SourceField,
    j: &FluxData,
    gauge: Gauge,
    curve: &BoundaryCurve,
    opts: &LinearSolverOptions,
) -> Result<TraceMeasurement> {
    let u = solve_elliptic(t, f, j, gauge, opts)?;
    trace_extract(&u, curve)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{monotonicity_check, Edge, StructuredGrid};
    use crate::kirchhoff::{BuiltinLaw, ConductionLaw};
    use crate::poisson::solve_neumann;
    use std::f64::consts::PI;

    fn transform(law: BuiltinLaw) -> KirchhoffTransform {
        KirchhoffTransform::new(law.tabulate_default().unwrap()).unwrap()
    }

    fn rough_data(grid: StructuredGrid) -> (SourceField, FluxData) {
        crate::poisson::project_compatible(
            &SourceField::from_fn(grid, |x, y| (2.0 * x).sin() * y),
            &FluxData::from_fn(grid, |_, x, y| x * x - 0.5 * y),
        )
        .unwrap()
    }

    #[test]
    fn identity_law_returns_kirchhoff_field() {
        let g = StructuredGrid::new(17).unwrap();
        let (f, j) = rough_data(g);
        let opts = LinearSolverOptions::default();
        let big_u = solve_neumann(&f, &j, &opts).unwrap();
        let t = transform(BuiltinLaw::Constant(1.0));
        let u = solve_elliptic(&t, &f, &j, Gauge::default(), &opts).unwrap();
        for (a, b) in u.values().iter().zip(big_u.values()) {
            assert!((a - b).abs() < 1e-13);
        }
        let t2 = transform(BuiltinLaw::Constant(2.0));
        let u2 = solve_elliptic(&t2, &f, &j, Gauge::default(), &opts).unwrap();
        for (a, b) in u2.values().iter().zip(big_u.values()) {
            assert!((a - 0.5 * b).abs() < 1e-13);
        }
    }

    fn manufactured_error(n: usize) -> f64 {
        let grid = StructuredGrid::new(n).unwrap();
        let t = transform(BuiltinLaw::Sin {
            amp: 0.5,
            freq: 1.0,
        });
        let exact_u = |x: f64, y: f64| (PI * x).cos() * (PI * y).cos();
        let f = SourceField::from_fn(grid, |x, y| 2.0 * PI * PI * exact_u(x, y));
        let gauge = Gauge::PointValue {
            x: 0.5,
            y: 0.5,
            value: t.invert(exact_u(0.5, 0.5)),
        };
        let u = solve_elliptic(&t, &f, &FluxData::zeros(grid), gauge, &Default::default()).unwrap();
        let exact = NodalField::from_fn(grid, |x, y| t.invert(exact_u(x, y)));
        u.values()
            .iter()
            .zip(exact.values())
            .fold(0.0, |m, (a, b)| m.max((a - b).abs()))
    }

    #[test]
    fn manufactured_solution_through_transform() {
        let errs: Vec<f64> = [17, 33, 65]
            .iter()
            .map(|&n| manufactured_error(n))
            .collect();
        for w in errs.windows(2) {
            assert!((w[0] / w[1]).log2() > 1.8, "errors {errs:?}");
        }
    }

    #[test]
    fn gauges_are_met() {
        let g = StructuredGrid::new(17).unwrap();
        let (f, j) = rough_data(g);
        let t = transform(BuiltinLaw::Tanh {
            amp: 0.5,
            rate: 2.0,
        });
        let opts = LinearSolverOptions::default();
        let u = solve_elliptic(&t, &f, &j, Gauge::MeanTemperature { value: 0.3 }, &opts).unwrap();
        assert!((u.mean() - 0.3).abs() < 1e-10);
        let gauge = Gauge::PointValue {
            x: 0.25,
            y: 1.0,
            value: -0.4,
        };
        let u = solve_elliptic(&t, &f, &j, gauge, &opts).unwrap();
        assert!((u.interpolate(0.25, 1.0) + 0.4).abs() < 1e-10);
        let bad = Gauge::PointValue {
            x: 1.5,
            y: 0.0,
            value: 0.0,
        };
        assert!(solve_elliptic(&t, &f, &j, bad, &opts).is_err());
    }

    #[test]
    fn transform_consistency() {
        let g = StructuredGrid::new(17).unwrap();
        let (f, j) = rough_data(g);
        let t = transform(BuiltinLaw::Tanh {
            amp: 0.5,
            rate: 2.0,
        });
        let opts = LinearSolverOptions::default();
        let big_u = solve_neumann(&f, &j, &opts).unwrap();
        let u = solve_elliptic(&t, &f, &j, Gauge::MeanTemperature { value: 0.2 }, &opts).unwrap();
        let diffs: Vec<f64> = u
            .values()
            .iter()
            .zip(big_u.values())
            .map(|(u, bu)| t.principal(*u) - bu)
            .collect();
        let spread = diffs.iter().cloned().fold(f64::NEG_INFINITY, f64::max)
            - diffs.iter().cloned().fold(f64::INFINITY, f64::min);
        assert!(spread < 1e-9);
    }

    #[test]
    fn scaling_covariance_for_constant_laws() {
        let g = StructuredGrid::new(17).unwrap();
        let (f, j) = rough_data(g);
        let opts = LinearSolverOptions::default();
        let t1 = transform(BuiltinLaw::Constant(1.0));
        let t3 = transform(BuiltinLaw::Constant(3.0));
        let u1 = solve_elliptic(&t1, &f, &j, Gauge::default(), &opts).unwrap();
        let u3 =
            solve_elliptic(&t3, &f.scaled(3.0), &j.scaled(3.0), Gauge::default(), &opts).unwrap();
        for (a, b) in u1.values().iter().zip(u3.values()) {
            assert!((a - b).abs() < 1e-9);
        }
    }

    #[test]
    fn dipole_trace_is_monotone_and_zero_data_constant() {
        let g = StructuredGrid::new(33).unwrap();
        let curve = BoundaryCurve::full_edge(&g, Edge::Bottom);
        let t = transform(BuiltinLaw::Constant(1.0));
        let opts = LinearSolverOptions::default();
        let f = SourceField::zeros(g);
        let tr = stationary_trace(
            &t,
            &f,
            &FluxData::dipole(g, 1.0),
            Gauge::default(),
            &curve,
            &opts,
        )
        .unwrap();
        assert!(monotonicity_check(&tr, 0.5).unwrap().passed);

        let gauge = Gauge::MeanTemperature { value: 0.7 };
        let tr0 = stationary_trace(&t, &f, &FluxData::zeros(g), gauge, &curve, &opts).unwrap();
        assert!(tr0.values().iter().all(|v| (v - 0.7).abs() < 1e-12));

        let tr2 = stationary_trace(
            &t,
            &f,
            &FluxData::dipole(g, 2.0),
            Gauge::default(),
            &curve,
            &opts,
        )
        .unwrap();
        let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
        let (m1, m2) = (mean(tr.values()), mean(tr2.values()));
        for (a, b) in tr.values().iter().zip(tr2.values()) {
            assert!(((b - m2) - 2.0 * (a - m1)).abs() < 1e-9);
        }
    }

    #[test]
    fn outputs_bounded_by_data() {
        let g = StructuredGrid::new(17).unwrap();
        let t = KirchhoffTransform::new(ConductionLaw::constant(0.5, -1.0, 1.0).unwrap()).unwrap();
        let u = solve_elliptic(
            &t,
            &SourceField::zeros(g),
            &FluxData::dipole(g, 1.0),
            Gauge::default(),
            &Default::default(),
        )
        .unwrap();
        // U = 1/2 - x, u = U / 0.5
        assert!(u.max_abs() <= 1.0 + 1e-9);
    }
}
