//! Neumann problem `−ΔU = f` in Ω, `∂ₙU = j` on ∂Ω, gauged to zero mean.
//!
//! The five-point stencil with ghost-node elimination of the flux condition
//! is symmetrised by the trapezoidal node weights. In that form the operator is
//! the edge sum `Σ ω_e (v_a − v_b)²` (ω = 1/2 on boundary edges, 1 elsewhere), the
//! load is `h²·w·f` plus `h·q·j` on boundary nodes, and the discrete
//! compatibility condition is exactly the trapezoidal `∫f + ∫j = 0`.

use serde::{Deserialize, Serialize};

use crate::cg::{pcg, CgOutcome, CgSettings};
use crate::error::{HeatError, Result};
use crate::grid::{Edge, NodalField, StructuredGrid};

/// Nodal source density `f`.
#[derive(Debug, Clone, PartialEq)]
pub struct SourceField(NodalField);

impl SourceField {
    pub fn new(field: NodalField) -> Result<Self> {
        if field.values().iter().any(|v| !v.is_finite()) {
            return Err(HeatError::invalid(
                "source field contains non-finite values",
            ));
        }
        Ok(Self(field))
    }

    pub fn zeros(grid: StructuredGrid) -> Self {
        Self(NodalField::zeros(grid))
    }

    pub fn uniform(grid: StructuredGrid, c: f64) -> Self {
        Self(NodalField::from_fn(grid, |_, _| c))
    }

    pub fn from_fn(grid: StructuredGrid, f: impl Fn(f64, f64) -> f64) -> Self {
        Self(NodalField::from_fn(grid, f))
    }

    pub fn field(&self) -> &NodalField {
        &self.0
    }

    pub fn grid(&self) -> StructuredGrid {
        self.0.grid()
    }

    pub fn values(&self) -> &[f64] {
        self.0.values()
    }

    pub fn scaled(&self, c: f64) -> Self {
        Self(self.0.map(|v| c * v))
    }

    pub fn shifted(&self, c: f64) -> Self {
        Self(self.0.map(|v| v + c))
    }

    pub fn plus(&self, other: &SourceField) -> Result<Self> {
        check_grids(self.grid(), other.grid())?;
        let values = self
            .values()
            .iter()
            .zip(other.values())
            .map(|(a, b)| a + b)
            .collect();
        Ok(Self(NodalField::new(self.grid(), values)?))
    }

    pub fn max_abs(&self) -> f64 {
        self.0.max_abs()
    }
}

/// Boundary flux `j` as nodal values per edge, ordered by increasing edge
/// coordinate. Corner nodes carry one value for each of their two edges.
#[derive(Debug, Clone, PartialEq)]
pub struct FluxData {
    grid: StructuredGrid,
    edges: [Vec<f64>; 4],
}

impl FluxData {
    pub fn new(grid: StructuredGrid, edges: [Vec<f64>; 4]) -> Result<Self> {
        for e in &edges {
            if e.len() != grid.n() {
                return Err(HeatError::SizeMismatch {
                    expected: grid.n(),
                    actual: e.len(),
                });
            }
            if e.iter().any(|v| !v.is_finite()) {
                return Err(HeatError::invalid("flux data contain non-finite values"));
            }
        }
        Ok(Self { grid, edges })
    }

    pub fn zeros(grid: StructuredGrid) -> Self {
        Self::uniform(grid, 0.0)
    }

    pub fn uniform(grid: StructuredGrid, c: f64) -> Self {
        Self {
            grid,
            edges: std::array::from_fn(|_| vec![c; grid.n()]),
        }
    }

    /// `j(edge, x, y)` sampled at the boundary nodes of every edge.
    pub fn from_fn(grid: StructuredGrid, f: impl Fn(Edge, f64, f64) -> f64) -> Self {
        let edges = Edge::ALL.map(|e| {
            (0..grid.n())
                .map(|k| {
                    let [x, y] = e.point(grid.coord(k));
                    f(e, x, y)
                })
                .collect()
        });
        Self { grid, edges }
    }

    /// `+amplitude` on the left edge, `−amplitude` on the right edge, zero elsewhere.
    pub fn dipole(grid: StructuredGrid, amplitude: f64) -> Self {
        Self::from_fn(grid, |e, _, _| match e {
            Edge::Left => amplitude,
            Edge::Right => -amplitude,
            _ => 0.0,
        })
    }

    pub fn grid(&self) -> StructuredGrid {
        self.grid
    }

    pub fn edge(&self, e: Edge) -> &[f64] {
        &self.edges[e.slot()]
    }

    pub fn edge_mut(&mut self, e: Edge) -> &mut [f64] {
        &mut self.edges[e.slot()]
    }

    pub fn scaled(&self, c: f64) -> Self {
        Self {
            grid: self.grid,
            edges: self
                .edges
                .clone()
                .map(|e| e.into_iter().map(|v| c * v).collect()),
        }
    }

    pub fn plus(&self, other: &FluxData) -> Result<Self> {
        check_grids(self.grid, other.grid)?;
        let mut out = self.clone();
        for (a, b) in out.edges.iter_mut().zip(&other.edges) {
            a.iter_mut().zip(b).for_each(|(a, b)| *a += b);
        }
        Ok(out)
    }

    pub fn max_abs(&self) -> f64 {
        self.edges.iter().flatten().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Trapezoidal `L²(∂Ω)` norm.
    pub fn l2_norm(&self) -> f64 {
        let n = self.grid.n();
        let h = self.grid.h();
        self.edges
            .iter()
            .map(|e| {
                e.iter()
                    .enumerate()
                    .map(|(k, v)| trapezoid_factor(k, n) * h * v * v)
                    .sum::<f64>()
            })
            .sum::<f64>()
            .sqrt()
    }
}

fn check_grids(a: StructuredGrid, b: StructuredGrid) -> Result<()> {
    if a != b {
        return Err(HeatError::SizeMismatch {
            expected: a.len(),
            actual: b.len(),
        });
    }
    Ok(())
}

#[inline]
fn trapezoid_factor(k: usize, n: usize) -> f64 {
    if k == 0 || k == n - 1 {
        0.5
    } else {
        1.0
    }
}

/// Neumaier-compensated sum.
pub(crate) fn accurate_sum(values: impl IntoIterator<Item = f64>) -> f64 {
    let (mut sum, mut comp) = (0.0f64, 0.0f64);
    for v in values {
        let t = sum + v;
        if sum.abs() >= v.abs() {
            comp += (sum - t) + v;
        } else {
            comp += (v - t) + sum;
        }
        sum = t;
    }
    sum + comp
}

/// Writes the symmetrised stiffness `K v` into `out`.
pub(crate) fn apply_stiffness(grid: &StructuredGrid, v: &[f64], out: &mut [f64]) {
    let n = grid.n();
    out.iter_mut().for_each(|o| *o = 0.0);
    for j in 0..n {
        let row = j * n;
        let w = if j == 0 || j == n - 1 { 0.5 } else { 1.0 };
        for i in 0..n - 1 {
            let d = w * (v[row + i] - v[row + i + 1]);
            out[row + i] += d;
            out[row + i + 1] -= d;
        }
    }
    for j in 0..n - 1 {
        let row = j * n;
        for i in 0..n {
            let w = if i == 0 || i == n - 1 { 0.5 } else { 1.0 };
            let d = w * (v[row + i] - v[row + n + i]);
            out[row + i] += d;
            out[row + n + i] -= d;
        }
    }
}

/// Diagonal of the stiffness: 4 inside, 2 on edges, 1 at corners.
pub(crate) fn stiffness_diagonal(grid: &StructuredGrid) -> Vec<f64> {
    let n = grid.n();
    let mut d = Vec::with_capacity(grid.len());
    for j in 0..n {
        for i in 0..n {
            d.push(4.0 * grid.node_factor(i, j));
        }
    }
    d
}

/// Discrete Dirichlet form `(∇v, ∇w)_h` matching the stiffness.
pub fn dirichlet_form(grid: &StructuredGrid, v: &[f64], w: &[f64]) -> f64 {
    let mut kw = vec![0.0; grid.len()];
    apply_stiffness(grid, w, &mut kw);
    accurate_sum(v.iter().zip(&kw).map(|(a, b)| a * b))
}

/// Right-hand side `h²·w·f + h·q·j`.
pub(crate) fn load_vector(f: &SourceField, j: &FluxData) -> Vec<f64> {
    let grid = f.grid();
    let (n, h) = (grid.n(), grid.h());
    let mut b: Vec<f64> = grid
        .quadrature_weights()
        .iter()
        .zip(f.values())
        .map(|(w, f)| w * f)
        .collect();
    for e in Edge::ALL {
        for (k, v) in j.edge(e).iter().enumerate() {
            b[grid.edge_node(e, k)] += h * trapezoid_factor(k, n) * v;
        }
    }
    b
}

/// Trapezoidal `∫_Ω f dx + ∫_∂Ω j ds`.
pub fn compatibility_residual(f: &SourceField, j: &FluxData) -> Result<f64> {
    check_grids(f.grid(), j.grid())?;
    Ok(accurate_sum(load_vector(f, j)))
}

/// Sum of absolute contributions to the residual, used to scale tolerances.
fn compatibility_scale(f: &SourceField, j: &FluxData) -> f64 {
    accurate_sum(load_vector(f, j).into_iter().map(f64::abs))
}

/// Shifts `f` by a constant so that the pair satisfies the compatibility condition.
pub fn project_compatible(f: &SourceField, j: &FluxData) -> Result<(SourceField, FluxData)> {
    let area = accurate_sum(f.grid().quadrature_weights());
    let mut f_proj = f.clone();
    // the second pass removes what rounding left of the first shift
    for _ in 0..2 {
        let r = compatibility_residual(&f_proj, j)?;
        f_proj = f_proj.shifted(-r / area);
    }
    Ok((f_proj, j.clone()))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LinearSolverOptions {
    /// Relative residual target of the CG iteration.
    pub tol: f64,
    /// Iteration cap as a multiple of the nodes per side.
    pub max_iter_factor: usize,
    /// Admissible compatibility residual relative to the data scale.
    pub tol_compat: f64,
}

impl Default for LinearSolverOptions {
    fn default() -> Self {
        Self {
            tol: 1e-10,
            max_iter_factor: 20,
            tol_compat: 1e-10,
        }
    }
}

impl LinearSolverOptions {
    pub fn max_iter(&self, grid: &StructuredGrid) -> usize {
        self.max_iter_factor * grid.n()
    }
}

/// Solves the Neumann problem; the returned field has trapezoidal mean zero.
pub fn solve_neumann(
    f: &SourceField,
    j: &FluxData,
    opts: &LinearSolverOptions,
) -> Result<NodalField> {
    solve_neumann_detailed(f, j, opts).map(|(u, _)| u)
}

pub fn solve_neumann_detailed(
    f: &SourceField,
    j: &FluxData,
    opts: &LinearSolverOptions,
) -> Result<(NodalField, CgOutcome)> {
    let grid = f.grid();
    check_grids(grid, j.grid())?;
    let b = load_vector(f, j);
    let residual = accurate_sum(b.iter().copied());
    let tolerance = opts.tol_compat * compatibility_scale(f, j);
    if residual.abs() > tolerance {
        return Err(HeatError::CompatibilityViolation {
            residual,
            tolerance,
        });
    }
    let inv_diag: Vec<f64> = stiffness_diagonal(&grid).iter().map(|d| 1.0 / d).collect();
    let mut x = vec![0.0; grid.len()];
    let outcome = pcg(
        |v, out| apply_stiffness(&grid, v, out),
        &b,
        &mut x,
        CgSettings {
            tol: opts.tol,
            max_iter: opts.max_iter(&grid),
            inv_diag: Some(&inv_diag),
            deflate_constants: true,
        },
    );
    if !outcome.converged {
        return Err(HeatError::SolverDivergence {
            iterations: outcome.iterations,
            residual: outcome.relative_residual,
        });
    }
    let weights = grid.quadrature_weights();
    let mean = accurate_sum(weights.iter().zip(&x).map(|(w, v)| w * v));
    x.iter_mut().for_each(|v| *v -= mean);
    Ok((NodalField::new(grid, x)?, outcome))
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn manufactured_error(n: usize) -> f64 {
        let grid = StructuredGrid::new(n).unwrap();
        let exact = |x: f64, y: f64| (PI * x).cos() * (PI * y).cos();
        let f = SourceField::from_fn(grid, |x, y| 2.0 * PI * PI * exact(x, y));
        let u = solve_neumann(&f, &FluxData::zeros(grid), &LinearSolverOptions::default()).unwrap();
        let ex = NodalField::from_fn(grid, exact);
        u.values()
            .iter()
            .zip(ex.values())
            .fold(0.0, |m, (a, b)| m.max((a - b).abs()))
    }

    #[test]
    fn compatibility_residual_examples() {
        let g = StructuredGrid::new(11).unwrap();
        let r = compatibility_residual(&SourceField::uniform(g, 1.0), &FluxData::zeros(g)).unwrap();
        assert!((r - 1.0).abs() < 1e-14);
        let r = compatibility_residual(&SourceField::zeros(g), &FluxData::uniform(g, 1.0)).unwrap();
        assert!((r - 4.0).abs() < 1e-14);
        let r = compatibility_residual(&SourceField::uniform(g, 1.0), &FluxData::uniform(g, -0.25))
            .unwrap();
        assert!(r.abs() < 1e-15);
    }

    #[test]
    fn projection_examples() {
        let g = StructuredGrid::new(13).unwrap();
        let (f, _) =
            project_compatible(&SourceField::uniform(g, 1.0), &FluxData::zeros(g)).unwrap();
        assert!(f.max_abs() < 1e-14);
        let (f, _) =
            project_compatible(&SourceField::zeros(g), &FluxData::uniform(g, 1.0)).unwrap();
        assert!(f.values().iter().all(|v| (v + 4.0).abs() < 1e-13));
        let src = SourceField::uniform(g, 1.0);
        let flux = FluxData::uniform(g, -0.25);
        let (f, j) = project_compatible(&src, &flux).unwrap();
        assert!(f
            .values()
            .iter()
            .zip(src.values())
            .all(|(a, b)| (a - b).abs() < 1e-15));
        assert_eq!(j, flux);
    }

    #[test]
    fn projection_tolerance_on_rough_data() {
        let g = StructuredGrid::new(65).unwrap();
        let f = SourceField::from_fn(g, |x, y| 3.0 * (7.0 * x).sin() + y * y * 10.0);
        let j = FluxData::from_fn(g, |_, x, y| (x - 2.0 * y).exp());
        let (fp, jp) = project_compatible(&f, &j).unwrap();
        let r = compatibility_residual(&fp, &jp).unwrap();
        assert!(r.abs() <= 1e-13 * (f.max_abs() + j.max_abs() + 1.0));
    }

    #[test]
    fn zero_data_give_zero() {
        let g = StructuredGrid::new(9).unwrap();
        let u = solve_neumann(
            &SourceField::zeros(g),
            &FluxData::zeros(g),
            &Default::default(),
        )
        .unwrap();
        assert!(u.values().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn incompatible_data_are_rejected() {
        let g = StructuredGrid::new(9).unwrap();
        let err = solve_neumann(
            &SourceField::uniform(g, 1.0),
            &FluxData::zeros(g),
            &Default::default(),
        )
        .unwrap_err();
        assert!(matches!(err, HeatError::CompatibilityViolation { .. }));
    }

    #[test]
    fn iteration_cap_reports_divergence() {
        let g = StructuredGrid::new(33).unwrap();
        let f = SourceField::from_fn(g, |x, y| (PI * x).cos() * (PI * y).cos());
        let opts = LinearSolverOptions {
            max_iter_factor: 0,
            ..Default::default()
        };
        let err = solve_neumann(&f, &FluxData::zeros(g), &opts).unwrap_err();
        assert!(matches!(err, HeatError::SolverDivergence { .. }));
    }

    #[test]
    fn dipole_gives_affine_solution() {
        let g = StructuredGrid::new(17).unwrap();
        let u = solve_neumann(
            &SourceField::zeros(g),
            &FluxData::dipole(g, 1.0),
            &Default::default(),
        )
        .unwrap();
        let exact = NodalField::from_fn(g, |x, _| 0.5 - x);
        for (a, b) in u.values().iter().zip(exact.values()) {
            assert!((a - b).abs() < 1e-9);
        }
    }

    #[test]
    fn manufactured_solution_second_order() {
        let errs: Vec<f64> = [17, 33, 65]
            .iter()
            .map(|&n| manufactured_error(n))
            .collect();
        for w in errs.windows(2) {
            let order = (w[0] / w[1]).log2();
            assert!(order > 1.9, "errors {errs:?}");
        }
    }

    #[test]
    fn gauge_and_linearity() {
        let g = StructuredGrid::new(21).unwrap();
        let opts = LinearSolverOptions::default();
        let (f1, j1) = project_compatible(
            &SourceField::from_fn(g, |x, y| x * y + (3.0 * x).sin()),
            &FluxData::from_fn(g, |_, x, y| x - y * y),
        )
        .unwrap();
        let (f2, j2) = project_compatible(
            &SourceField::from_fn(g, |x, y| (x - y).cos()),
            &FluxData::from_fn(g, |e, x, _| if e == Edge::Top { x } else { -0.3 }),
        )
        .unwrap();
        let u1 = solve_neumann(&f1, &j1, &opts).unwrap();
        let u2 = solve_neumann(&f2, &j2, &opts).unwrap();
        assert!(u1.mean().abs() < 1e-12);
        let (a, b) = (1.5, -0.7);
        let f = f1.scaled(a).plus(&f2.scaled(b)).unwrap();
        let j = j1.scaled(a).plus(&j2.scaled(b)).unwrap();
        let u = solve_neumann(&f, &j, &opts).unwrap();
        assert!(u.mean().abs() < 1e-12);
        let scale = u.max_abs().max(1.0);
        for k in 0..g.len() {
            let lin = a * u1.values()[k] + b * u2.values()[k];
            assert!((u.values()[k] - lin).abs() < 1e-7 * scale);
        }
    }

    #[test]
    fn stiffness_annihilates_constants_and_is_symmetric() {
        let g = StructuredGrid::new(9).unwrap();
        let ones = vec![1.0; g.len()];
        let mut out = vec![0.0; g.len()];
        apply_stiffness(&g, &ones, &mut out);
        assert!(out.iter().all(|v| v.abs() < 1e-15));
        let v: Vec<f64> = (0..g.len()).map(|k| (k as f64 * 0.37).sin()).collect();
        let w: Vec<f64> = (0..g.len()).map(|k| (k as f64 * 0.11).cos()).collect();
        assert!((dirichlet_form(&g, &v, &w) - dirichlet_form(&g, &w, &v)).abs() < 1e-12);
    }
}
