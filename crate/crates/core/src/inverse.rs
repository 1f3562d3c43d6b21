//! Direct reconstruction of the conduction law from boundary traces.
//!
//! Two solutions with identical flux data share their Kirchhoff field up to a
//! constant, so along the measurement curve `A(g) = U∘γ + c`. Differentiating
//! in the tangential direction removes `c`:
//!
//! ```text
//! a(g(s)) = ∂τ(U∘γ)(s) / ∂τg(s)
//! ```
//!
//! where `U` solves the Neumann problem with the known data. The samples
//! `(g(s_k), a_k)` are then resampled onto a uniform temperature grid.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{HeatError, Result};
use crate::grid::{differentiate, monotonicity_check, trace_extract, TraceMeasurement};
use crate::kirchhoff::ConductionLaw;
use crate::parabolic::Schedule;
use crate::poisson::{
    project_compatible, solve_neumann, FluxData, LinearSolverOptions, SourceField,
};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct InverseOptions {
    /// Floor on `|∂τg|` below which the trace is considered uninformative.
    pub c_min: f64,
    /// Samples dropped at each curve end.
    pub trim: usize,
    /// Moving-average window applied to `g` before differentiation (1 = off).
    pub smoothing_window: usize,
    pub linear: LinearSolverOptions,
}

impl Default for InverseOptions {
    fn default() -> Self {
        Self {
            c_min: 1e-3,
            trim: 2,
            smoothing_window: 1,
            linear: LinearSolverOptions::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimeDiagnostics {
    pub time: f64,
    pub interval: Option<(f64, f64)>,
    pub min_slope: f64,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Diagnostics {
    /// Identified interval `[g₁, g₂]`.
    pub interval: (f64, f64),
    /// Smallest `|∂τg|` over the trace (over all used times in the parabolic case).
    pub min_slope: f64,
    pub per_time: Vec<TimeDiagnostics>,
}

/// Estimated `â(v)` on a strictly increasing temperature grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReconstructionResult {
    v: Vec<f64>,
    a_hat: Vec<f64>,
    /// `|∂τg|` at the temperatures `v`.
    slope: Vec<f64>,
    diagnostics: Diagnostics,
}

impl ReconstructionResult {
    pub fn new(
        v: Vec<f64>,
        a_hat: Vec<f64>,
        slope: Vec<f64>,
        diagnostics: Diagnostics,
    ) -> Result<Self> {
        if v.len() < 2 || a_hat.len() != v.len() || slope.len() != v.len() {
            return Err(HeatError::invalid(
                "reconstruction needs at least 2 points and matching array lengths",
            ));
        }
        if v.windows(2).any(|w| w[1] <= w[0]) {
            return Err(HeatError::invalid(
                "reconstruction temperatures must be strictly increasing",
            ));
        }
        if a_hat.iter().chain(&slope).chain(&v).any(|x| !x.is_finite()) {
            return Err(HeatError::invalid(
                "reconstruction contains non-finite values",
            ));
        }
        Ok(Self {
            v,
            a_hat,
            slope,
            diagnostics,
        })
    }

    pub fn v(&self) -> &[f64] {
        &self.v
    }

    pub fn a_hat(&self) -> &[f64] {
        &self.a_hat
    }

    pub fn slope(&self) -> &[f64] {
        &self.slope
    }

    pub fn diagnostics(&self) -> &Diagnostics {
        &self.diagnostics
    }

    pub fn interval(&self) -> (f64, f64) {
        (self.v[0], *self.v.last().unwrap())
    }

    /// `â` at `v` by linear interpolation (`None` outside the identified interval).
    pub fn eval(&self, v: f64) -> Option<f64> {
        let (lo, hi) = self.interval();
        (lo..=hi)
            .contains(&v)
            .then(|| interp_linear(&self.v, &self.a_hat, v))
    }
}

/// Piecewise-linear interpolation on strictly increasing `xs`, clamped at the ends.
pub(crate) fn interp_linear(xs: &[f64], ys: &[f64], x: f64) -> f64 {
    let last = xs.len() - 1;
    if x <= xs[0] {
        return ys[0];
    }
    if x >= xs[last] {
        return ys[last];
    }
    let k = xs.partition_point(|&p| p <= x).clamp(1, last) - 1;
    let t = (x - xs[k]) / (xs[k + 1] - xs[k]);
    ys[k] + t * (ys[k + 1] - ys[k])
}

fn uniform_grid(lo: f64, hi: f64, count: usize) -> Vec<f64> {
    let step = (hi - lo) / (count - 1) as f64;
    (0..count)
        .map(|k| {
            if k == count - 1 {
                hi
            } else {
                lo + k as f64 * step
            }
        })
        .collect()
}

/// Centred moving average; the window shrinks symmetrically near the ends.
pub fn smooth(values: &[f64], window: usize) -> Vec<f64> {
    if window <= 1 {
        return values.to_vec();
    }
    let half = window / 2;
    let m = values.len();
    (0..m)
        .map(|k| {
            let r = half.min(k).min(m - 1 - k);
            let slice = &values[k - r..=k + r];
            slice.iter().sum::<f64>() / slice.len() as f64
        })
        .collect()
}

/// Reconstruction from the Kirchhoff-field trace `U∘γ` and the measured trace `g`
/// sampled on the same curve.
pub fn reconstruct_from_traces(
    kirchhoff_trace: &[f64],
    g: &TraceMeasurement,
    opts: &InverseOptions,
) -> Result<ReconstructionResult> {
    let m = g.values().len();
    if kirchhoff_trace.len() != m {
        return Err(HeatError::SizeMismatch {
            expected: m,
            actual: kirchhoff_trace.len(),
        });
    }
    let smoothed = g.with_values(smooth(g.values(), opts.smoothing_window))?;
    let report = monotonicity_check(&smoothed, opts.c_min)?;
    if !report.passed {
        return Err(HeatError::EmptyIdentifiableInterval(format!(
            "trace is not strictly monotone (min |dg/dτ| = {:.3e}, threshold {:.3e}, sign consistent: {})",
            report.min_abs_slope, opts.c_min, report.sign_consistent
        )));
    }
    if m < 2 * opts.trim + 2 {
        return Err(HeatError::EmptyIdentifiableInterval(format!(
            "{m} samples leave fewer than 2 after trimming {} at each end",
            opts.trim
        )));
    }
    let spacing = g.curve().param_spacing() * g.curve().arclength();
    let d_kirchhoff = differentiate(kirchhoff_trace, spacing)?;
    let d_g = differentiate(smoothed.values(), spacing)?;

    let mut samples: Vec<(f64, f64, f64)> = (opts.trim..m - opts.trim)
        .map(|k| (smoothed.values()[k], d_kirchhoff[k] / d_g[k], d_g[k].abs()))
        .collect();
    if samples[0].0 > samples.last().unwrap().0 {
        samples.reverse();
    }
    if samples.windows(2).any(|w| w[1].0 <= w[0].0) {
        return Err(HeatError::EmptyIdentifiableInterval(
            "trimmed trace samples are not strictly monotone".into(),
        ));
    }
    let gs: Vec<f64> = samples.iter().map(|s| s.0).collect();
    let ratios: Vec<f64> = samples.iter().map(|s| s.1).collect();
    let slopes: Vec<f64> = samples.iter().map(|s| s.2).collect();
    let (lo, hi) = (gs[0], *gs.last().unwrap());
    let v = uniform_grid(lo, hi, gs.len());
    let a_hat = v.iter().map(|&x| interp_linear(&gs, &ratios, x)).collect();
    let slope = v.iter().map(|&x| interp_linear(&gs, &slopes, x)).collect();
    let diagnostics = Diagnostics {
        interval: (lo, hi),
        min_slope: report.min_abs_slope,
        per_time: Vec::new(),
    };
    ReconstructionResult::new(v, a_hat, slope, diagnostics)
}

/// Reconstructs `a` from a stationary trace and the data `(f, j)` that produced it.
pub fn reconstruct_elliptic(
    f: &SourceField,
    j: &FluxData,
    g: &TraceMeasurement,
    opts: &InverseOptions,
) -> Result<ReconstructionResult> {
    // cheap rejection of uninformative traces before the linear solve
    let smoothed = g.with_values(smooth(g.values(), opts.smoothing_window))?;
    let report = monotonicity_check(&smoothed, opts.c_min)?;
    if !report.passed {
        return Err(HeatError::EmptyIdentifiableInterval(format!(
            "trace is not strictly monotone (min |dg/dτ| = {:.3e}, threshold {:.3e})",
            report.min_abs_slope, opts.c_min
        )));
    }
    let kirchhoff = solve_neumann(f, j, &opts.linear)?;
    let u_trace = trace_extract(&kirchhoff, g.curve())?;
    reconstruct_from_traces(u_trace.values(), g, opts)
}

/// Quasi-stationary reconstruction from time-stamped traces: each trace with
/// time in `window` is treated as a stationary measurement with the
/// instantaneous (compatibility-projected) data, and the per-time estimates
/// are averaged with weights `|∂τg|`.
pub fn reconstruct_parabolic(
    schedule: &Schedule,
    traces: &[TraceMeasurement],
    window: (f64, f64),
    opts: &InverseOptions,
) -> Result<ReconstructionResult> {
    let (t1, t2) = window;
    if !(t1 <= t2) {
        return Err(HeatError::invalid(format!(
            "empty time window [{t1}, {t2}]"
        )));
    }
    let slack = 1e-9 * schedule.dt();
    let mut selected = Vec::new();
    for tr in traces {
        let time = tr.time().ok_or_else(|| {
            HeatError::invalid("parabolic reconstruction needs time-stamped traces")
        })?;
        if time >= t1 - slack && time <= t2 + slack {
            selected.push((time, tr));
        }
    }
    if selected.is_empty() {
        return Err(HeatError::EmptyIdentifiableInterval(format!(
            "no trace falls into the time window [{t1}, {t2}]"
        )));
    }

    let outcomes: Vec<(f64, Result<ReconstructionResult>)> = selected
        .par_iter()
        .map(|&(time, tr)| {
            let result = project_compatible(&schedule.source_at(time), &schedule.flux_at(time))
                .and_then(|(f, j)| reconstruct_elliptic(&f, &j, tr, opts));
            (time, result)
        })
        .collect();

    let mut per_time = Vec::with_capacity(outcomes.len());
    let mut good = Vec::new();
    for (time, outcome) in outcomes {
        match outcome {
            Ok(r) => {
                per_time.push(TimeDiagnostics {
                    time,
                    interval: Some(r.interval()),
                    min_slope: r.diagnostics.min_slope,
                    error: None,
                });
                good.push(r);
            }
            Err(e @ HeatError::EmptyIdentifiableInterval(_)) => per_time.push(TimeDiagnostics {
                time,
                interval: None,
                min_slope: 0.0,
                error: Some(e.to_string()),
            }),
            Err(e) => return Err(e),
        }
    }
    if good.is_empty() {
        return Err(HeatError::EmptyIdentifiableInterval(format!(
            "none of the {} selected times yields a monotone trace",
            per_time.len()
        )));
    }

    let lo = good.iter().map(|r| r.v[0]).fold(f64::INFINITY, f64::min);
    let hi = good
        .iter()
        .map(|r| *r.v.last().unwrap())
        .fold(f64::NEG_INFINITY, f64::max);
    let count = good.iter().map(|r| r.v.len()).max().unwrap();
    let eps = 1e-12 * (hi - lo).abs().max(1.0);
    let (mut v, mut a_hat, mut slope) = (Vec::new(), Vec::new(), Vec::new());
    if lo < hi {
        for x in uniform_grid(lo, hi, count) {
            let (mut num, mut den, mut best) = (0.0, 0.0, 0.0f64);
            for r in &good {
                let (a, b) = r.interval();
                if x < a - eps || x > b + eps {
                    continue;
                }
                let w = interp_linear(&r.v, &r.slope, x);
                num += w * interp_linear(&r.v, &r.a_hat, x);
                den += w;
                best = best.max(w);
            }
            if den > 0.0 {
                v.push(x);
                a_hat.push(num / den);
                slope.push(best);
            }
        }
    }
    if v.len() < 2 {
        return Err(HeatError::EmptyIdentifiableInterval(
            "merged temperature interval is degenerate".into(),
        ));
    }
    let min_slope = good
        .iter()
        .map(|r| r.diagnostics.min_slope)
        .fold(f64::INFINITY, f64::min);
    let diagnostics = Diagnostics {
        interval: (v[0], *v.last().unwrap()),
        min_slope,
        per_time,
    };
    ReconstructionResult::new(v, a_hat, slope, diagnostics)
}

/// Tabulated principal `Â` on the identified interval, anchored at `Â(g₁) = 0`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RecoveredPrincipal {
    pub v: Vec<f64>,
    pub values: Vec<f64>,
}

pub fn recover_principal(result: &ReconstructionResult) -> RecoveredPrincipal {
    let mut values = Vec::with_capacity(result.v.len());
    let mut acc = 0.0;
    values.push(acc);
    for k in 1..result.v.len() {
        acc += 0.5 * (result.v[k] - result.v[k - 1]) * (result.a_hat[k] + result.a_hat[k - 1]);
        values.push(acc);
    }
    RecoveredPrincipal {
        v: result.v.clone(),
        values,
    }
}

/// `max_v |â(v) − a(v)|` over the reconstruction grid.
pub fn error_sup(result: &ReconstructionResult, truth: &ConductionLaw) -> f64 {
    result
        .v
        .iter()
        .zip(&result.a_hat)
        .map(|(&v, &a)| (a - truth.eval(v)).abs())
        .fold(0.0, f64::max)
}

/// `sup |â₁ − â₂|` over the nodes of either result lying in both intervals;
/// `None` when the intervals do not overlap.
pub fn sup_distance(a: &ReconstructionResult, b: &ReconstructionResult) -> Option<f64> {
    let mut out: Option<f64> = None;
    for (x, y) in [(a, b), (b, a)] {
        for (&v, &av) in x.v.iter().zip(&x.a_hat) {
            if let Some(bv) = y.eval(v) {
                out = Some(out.unwrap_or(0.0).max((av - bv).abs()));
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::elliptic::{stationary_trace, Gauge};
    use crate::grid::{BoundaryCurve, Edge, StructuredGrid};
    use crate::kirchhoff::{BuiltinLaw, KirchhoffTransform};
    use crate::parabolic::{simulate, Ramp};

    fn transform(law: BuiltinLaw) -> KirchhoffTransform {
        KirchhoffTransform::new(law.tabulate_default().unwrap()).unwrap()
    }

    fn dipole_experiment(
        law: BuiltinLaw,
        n: usize,
    ) -> (KirchhoffTransform, SourceField, FluxData, TraceMeasurement) {
        let g = StructuredGrid::new(n).unwrap();
        let t = transform(law);
        let f = SourceField::zeros(g);
        let j = FluxData::dipole(g, 1.0);
        let curve = BoundaryCurve::full_edge(&g, Edge::Bottom);
        let tr =
            stationary_trace(&t, &f, &j, Gauge::default(), &curve, &Default::default()).unwrap();
        (t, f, j, tr)
    }

    #[test]
    fn constant_laws_are_recovered() {
        for kappa in [1.0, 2.5, 0.4] {
            let (t, f, j, tr) = dipole_experiment(BuiltinLaw::Constant(kappa), 33);
            let r = reconstruct_elliptic(&f, &j, &tr, &Default::default()).unwrap();
            assert!(
                r.a_hat().iter().all(|a| (a - kappa).abs() < 1e-8),
                "{kappa}"
            );
            assert!(error_sup(&r, t.law()) < 1e-8);
        }
    }

    #[test]
    fn tanh_law_converges_under_refinement() {
        let errs: Vec<f64> = [33, 65, 129]
            .iter()
            .map(|&n| {
                let (t, f, j, tr) = dipole_experiment(
                    BuiltinLaw::Tanh {
                        amp: 0.5,
                        rate: 2.0,
                    },
                    n,
                );
                let r = reconstruct_elliptic(&f, &j, &tr, &Default::default()).unwrap();
                let (lo, hi) = r.interval();
                let (glo, ghi) = tr.range();
                assert!(lo >= glo && hi <= ghi);
                error_sup(&r, t.law())
            })
            .collect();
        for w in errs.windows(2) {
            assert!(w[1] < w[0] && (w[0] / w[1]).log2() >= 1.0, "{errs:?}");
        }
    }

    #[test]
    fn zero_flux_has_empty_interval() {
        let g = StructuredGrid::new(17).unwrap();
        let t = transform(BuiltinLaw::Constant(1.0));
        let f = SourceField::zeros(g);
        let j = FluxData::zeros(g);
        let curve = BoundaryCurve::full_edge(&g, Edge::Bottom);
        let tr =
            stationary_trace(&t, &f, &j, Gauge::default(), &curve, &Default::default()).unwrap();
        let err = reconstruct_elliptic(&f, &j, &tr, &Default::default()).unwrap_err();
        assert!(matches!(err, HeatError::EmptyIdentifiableInterval(_)));
    }

    #[test]
    fn non_monotone_trace_is_rejected() {
        let g = StructuredGrid::new(17).unwrap();
        let curve = BoundaryCurve::full_edge(&g, Edge::Bottom);
        let values = curve.params().iter().map(|s| (6.0 * s).sin()).collect();
        let tr = TraceMeasurement::new(curve, values, None).unwrap();
        let err = reconstruct_elliptic(
            &SourceField::zeros(g),
            &FluxData::dipole(g, 1.0),
            &tr,
            &Default::default(),
        )
        .unwrap_err();
        assert!(matches!(err, HeatError::EmptyIdentifiableInterval(_)));
    }

    #[test]
    fn incompatible_data_are_reported() {
        let (_, _, _, tr) = dipole_experiment(BuiltinLaw::Constant(1.0), 17);
        let g = StructuredGrid::new(17).unwrap();
        let err = reconstruct_elliptic(
            &SourceField::uniform(g, 1.0),
            &FluxData::dipole(g, 1.0),
            &tr,
            &Default::default(),
        )
        .unwrap_err();
        assert!(matches!(err, HeatError::CompatibilityViolation { .. }));
    }

    #[test]
    fn gauge_independence() {
        let (_, f, j, tr) = dipole_experiment(
            BuiltinLaw::Tanh {
                amp: 0.5,
                rate: 2.0,
            },
            33,
        );
        let opts = InverseOptions::default();
        let kirchhoff = solve_neumann(&f, &j, &opts.linear).unwrap();
        let u_trace = trace_extract(&kirchhoff, tr.curve()).unwrap();
        let base = reconstruct_from_traces(u_trace.values(), &tr, &opts).unwrap();

        let shifted_u: Vec<f64> = u_trace.values().iter().map(|v| v + 0.37).collect();
        let r = reconstruct_from_traces(&shifted_u, &tr, &opts).unwrap();
        assert_eq!(r.v(), base.v());
        for (a, b) in r.a_hat().iter().zip(base.a_hat()) {
            assert!((a - b).abs() < 1e-12);
        }

        let shifted_g = tr
            .with_values(tr.values().iter().map(|v| v - 0.25).collect())
            .unwrap();
        let r = reconstruct_from_traces(u_trace.values(), &shifted_g, &opts).unwrap();
        for k in 0..r.v().len() {
            assert!((r.v()[k] - (base.v()[k] - 0.25)).abs() < 1e-12);
            assert!((r.a_hat()[k] - base.a_hat()[k]).abs() < 1e-9);
        }
    }

    fn diag(lo: f64, hi: f64) -> Diagnostics {
        Diagnostics {
            interval: (lo, hi),
            min_slope: 1.0,
            per_time: vec![],
        }
    }

    fn result_from(v: Vec<f64>, a: impl Fn(f64) -> f64) -> ReconstructionResult {
        let a_hat = v.iter().map(|&x| a(x)).collect();
        let slope = vec![1.0; v.len()];
        let (lo, hi) = (v[0], *v.last().unwrap());
        ReconstructionResult::new(v, a_hat, slope, diag(lo, hi)).unwrap()
    }

    #[test]
    fn principal_recovery() {
        let v = uniform_grid(-0.3, 0.9, 41);
        let p = recover_principal(&result_from(v.clone(), |_| 1.0));
        for (x, val) in p.v.iter().zip(&p.values) {
            assert!((val - (x + 0.3)).abs() < 1e-14);
        }
        let p = recover_principal(&result_from(v.clone(), |_| 2.0));
        assert!((p.values.last().unwrap() - 2.0 * 1.2).abs() < 1e-13);

        // centred difference of Â reproduces â to O(Δv²)
        let a = |x: f64| 1.0 + 0.5 * (2.0 * x).tanh();
        for count in [41, 81] {
            let v = uniform_grid(-0.3, 0.9, count);
            let dv = v[1] - v[0];
            let p = recover_principal(&result_from(v.clone(), a));
            let err = (1..count - 1)
                .map(|k| ((p.values[k + 1] - p.values[k - 1]) / (2.0 * dv) - a(v[k])).abs())
                .fold(0.0, f64::max);
            assert!(err < 2.0 * dv * dv, "count {count}: {err}");
        }
    }

    #[test]
    fn error_sup_examples() {
        let law = BuiltinLaw::Sin {
            amp: 0.5,
            freq: 1.0,
        }
        .tabulate_default()
        .unwrap();
        let v = uniform_grid(-1.0, 1.0, 51);
        assert_eq!(
            error_sup(&result_from(v.clone(), |x| law.eval(x)), &law),
            0.0
        );
        let e = error_sup(&result_from(v.clone(), |x| law.eval(x) + 0.1), &law);
        assert!((e - 0.1).abs() < 1e-14);
        let bumps: Vec<f64> = (0..51)
            .map(|k| 0.03 * ((k * 7919) % 13) as f64 / 12.0)
            .collect();
        let a_hat = v
            .iter()
            .zip(&bumps)
            .map(|(&x, b)| law.eval(x) - b)
            .collect();
        let r =
            ReconstructionResult::new(v.clone(), a_hat, vec![1.0; 51], diag(-1.0, 1.0)).unwrap();
        assert!((error_sup(&r, &law) - 0.03).abs() < 1e-14);
    }

    #[test]
    fn result_invariants_enforced() {
        assert!(ReconstructionResult::new(
            vec![0.0, 0.0],
            vec![1.0; 2],
            vec![1.0; 2],
            diag(0.0, 0.0)
        )
        .is_err());
        assert!(ReconstructionResult::new(
            vec![0.0, 1.0],
            vec![f64::NAN, 1.0],
            vec![1.0; 2],
            diag(0.0, 1.0)
        )
        .is_err());
    }

    #[test]
    fn smoothing_window() {
        let x: Vec<f64> = (0..10).map(|k| k as f64 * 0.5).collect();
        assert_eq!(smooth(&x, 1), x);
        let s = smooth(&x, 5);
        for (a, b) in s.iter().zip(&x) {
            assert!((a - b).abs() < 1e-14);
        }
        let noisy: Vec<f64> = (0..10)
            .map(|k| if k % 2 == 0 { 1.0 } else { -1.0 })
            .collect();
        let s = smooth(&noisy, 3);
        assert!(s[1..9].iter().all(|v| v.abs() <= 1.0 / 3.0 + 1e-15));
    }

    #[test]
    fn parabolic_equilibrium_matches_elliptic() {
        let n = 17;
        let g = StructuredGrid::new(n).unwrap();
        let t = transform(BuiltinLaw::Tanh {
            amp: 0.5,
            rate: 2.0,
        });
        let curve = BoundaryCurve::full_edge(&g, Edge::Bottom);
        let f = SourceField::zeros(g);
        let j = FluxData::dipole(g, 1.0);
        let s =
            Schedule::new(6.0, 0.1, Ramp::Cosine { t_ramp: 0.5 }, f.clone(), j.clone()).unwrap();
        let traj = simulate(&t, &s, &curve, &Default::default()).unwrap();
        let opts = InverseOptions::default();
        let late = reconstruct_parabolic(&s, traj.traces(), (5.0, 6.0), &opts).unwrap();
        assert_eq!(late.diagnostics().per_time.len(), 11);
        let last = traj.traces().last().unwrap();
        let ell = reconstruct_elliptic(&f, &j, last, &opts).unwrap();
        assert_eq!(late.v().len(), ell.v().len());
        for k in 0..ell.v().len() {
            assert!((late.v()[k] - ell.v()[k]).abs() < 1e-6);
            assert!((late.a_hat()[k] - ell.a_hat()[k]).abs() < 1e-6);
        }
    }

    #[test]
    fn parabolic_unit_law_error_shrinks_with_ramp_rate() {
        let g = StructuredGrid::new(17).unwrap();
        let t = transform(BuiltinLaw::Constant(1.0));
        let curve = BoundaryCurve::full_edge(&g, Edge::Bottom);
        let errs: Vec<f64> = [1.0, 2.0, 4.0, 8.0]
            .iter()
            .map(|&t_ramp| {
                let s = Schedule::new(
                    t_ramp,
                    t_ramp / 16.0,
                    Ramp::Cosine { t_ramp },
                    SourceField::zeros(g),
                    FluxData::dipole(g, 1.0),
                )
                .unwrap();
                let traj = simulate(&t, &s, &curve, &Default::default()).unwrap();
                let r = reconstruct_parabolic(
                    &s,
                    traj.traces(),
                    (0.5 * t_ramp, t_ramp),
                    &Default::default(),
                )
                .unwrap();
                error_sup(&r, t.law())
            })
            .collect();
        for w in errs.windows(2) {
            assert!(w[1] < w[0], "{errs:?}");
        }
    }

    #[test]
    fn parabolic_reports_per_time_failures() {
        let g = StructuredGrid::new(17).unwrap();
        let t = transform(BuiltinLaw::Constant(1.0));
        let curve = BoundaryCurve::full_edge(&g, Edge::Bottom);
        let s = Schedule::new(
            1.0,
            0.25,
            Ramp::Linear { t_ramp: 1.0 },
            SourceField::zeros(g),
            FluxData::dipole(g, 1.0),
        )
        .unwrap();
        let traj = simulate(&t, &s, &curve, &Default::default()).unwrap();
        // t = 0 has a flat trace and fails; the others succeed
        let r = reconstruct_parabolic(&s, traj.traces(), (0.0, 1.0), &Default::default()).unwrap();
        let d = &r.diagnostics().per_time;
        assert_eq!(d.len(), 5);
        assert!(d[0].error.is_some());
        assert!(d[1..].iter().all(|p| p.error.is_none()));

        let err = reconstruct_parabolic(&s, &traj.traces()[..1], (0.0, 1.0), &Default::default())
            .unwrap_err();
        assert!(matches!(err, HeatError::EmptyIdentifiableInterval(_)));
    }
}
