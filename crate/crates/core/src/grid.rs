//! Unit-square grid, boundary measurement curves and traces.

use serde::{Deserialize, Serialize};

use crate::error::{HeatError, Result};

/// Uniform grid of `n × n` nodes on `[0,1]²`; node `(i, j)` sits at `(i·h, j·h)`
/// and is stored at index `j·n + i`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StructuredGrid {
    n: usize,
    h: f64,
}

pub const MIN_NODES: usize = 9;

impl StructuredGrid {
    pub fn new(n: usize) -> Result<Self> {
        if n < MIN_NODES {
            return Err(HeatError::invalid(format!(
                "grid needs at least {MIN_NODES} nodes per side, got {n}"
            )));
        }
        Ok(Self {
            n,
            h: 1.0 / (n - 1) as f64,
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn h(&self) -> f64 {
        self.h
    }

    pub fn len(&self) -> usize {
        self.n * self.n
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    #[inline]
    pub fn index(&self, i: usize, j: usize) -> usize {
        j * self.n + i
    }

    #[inline]
    pub fn coord(&self, i: usize) -> f64 {
        if i == self.n - 1 {
            1.0
        } else {
            i as f64 * self.h
        }
    }

    /// Trapezoidal factor of a node: 1 inside, 1/2 on edges, 1/4 at corners.
    #[inline]
    pub fn node_factor(&self, i: usize, j: usize) -> f64 {
        let edge = |k: usize| if k == 0 || k == self.n - 1 { 0.5 } else { 1.0 };
        edge(i) * edge(j)
    }

    /// Trapezoidal quadrature weights `h²·factor`; they sum to `|Ω| = 1`.
    pub fn quadrature_weights(&self) -> Vec<f64> {
        let h2 = self.h * self.h;
        let mut w = Vec::with_capacity(self.len());
        for j in 0..self.n {
            for i in 0..self.n {
                w.push(h2 * self.node_factor(i, j));
            }
        }
        w
    }

    /// Grid index of the `k`-th node along `edge`, ordered by increasing edge coordinate.
    #[inline]
    pub fn edge_node(&self, edge: Edge, k: usize) -> usize {
        let last = self.n - 1;
        match edge {
            Edge::Bottom => self.index(k, 0),
            Edge::Top => self.index(k, last),
            Edge::Left => self.index(0, k),
            Edge::Right => self.index(last, k),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Edge {
    Bottom,
    Right,
    Top,
    Left,
}

impl Edge {
    pub const ALL: [Edge; 4] = [Edge::Bottom, Edge::Right, Edge::Top, Edge::Left];

    pub fn slot(self) -> usize {
        match self {
            Edge::Bottom => 0,
            Edge::Right => 1,
            Edge::Top => 2,
            Edge::Left => 3,
        }
    }

    /// Physical point at edge coordinate `t ∈ [0,1]`.
    pub fn point(self, t: f64) -> [f64; 2] {
        match self {
            Edge::Bottom => [t, 0.0],
            Edge::Top => [t, 1.0],
            Edge::Left => [0.0, t],
            Edge::Right => [1.0, t],
        }
    }
}

impl std::str::FromStr for Edge {
    type Err = HeatError;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "bottom" => Ok(Edge::Bottom),
            "right" => Ok(Edge::Right),
            "top" => Ok(Edge::Top),
            "left" => Ok(Edge::Left),
            other => Err(HeatError::invalid(format!("unknown edge `{other}`"))),
        }
    }
}

/// Scalar field with one value per grid node.
#[derive(Debug, Clone, PartialEq)]
pub struct NodalField {
    grid: StructuredGrid,
    values: Vec<f64>,
}

impl NodalField {
    pub fn new(grid: StructuredGrid, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(HeatError::SizeMismatch {
                expected: grid.len(),
                actual: values.len(),
            });
        }
        Ok(Self { grid, values })
    }

    pub fn zeros(grid: StructuredGrid) -> Self {
        Self {
            grid,
            values: vec![0.0; grid.len()],
        }
    }

    pub fn from_fn(grid: StructuredGrid, f: impl Fn(f64, f64) -> f64) -> Self {
        let mut values = Vec::with_capacity(grid.len());
        for j in 0..grid.n() {
            for i in 0..grid.n() {
                values.push(f(grid.coord(i), grid.coord(j)));
            }
        }
        Self { grid, values }
    }

    pub fn grid(&self) -> StructuredGrid {
        self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        Self {
            grid: self.grid,
            values: self.values.iter().map(|&v| f(v)).collect(),
        }
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Trapezoidal integral over the unit square.
    pub fn integral(&self) -> f64 {
        let w = self.grid.quadrature_weights();
        w.iter().zip(&self.values).map(|(w, v)| w * v).sum()
    }

    /// Trapezoidal mean (equal to the integral since `|Ω| = 1`).
    pub fn mean(&self) -> f64 {
        self.integral()
    }

    /// Bilinear interpolation at `(x, y) ∈ [0,1]²`.
    pub fn interpolate(&self, x: f64, y: f64) -> f64 {
        let n = self.grid.n;
        let cell = |c: f64| {
            let t = c.clamp(0.0, 1.0) * (n - 1) as f64;
            let k = (t.floor() as usize).min(n - 2);
            (k, t - k as f64)
        };
        let (i, tx) = cell(x);
        let (j, ty) = cell(y);
        let v = |i, j| self.values[self.grid.index(i, j)];
        (1.0 - ty) * ((1.0 - tx) * v(i, j) + tx * v(i + 1, j))
            + ty * ((1.0 - tx) * v(i, j + 1) + tx * v(i + 1, j + 1))
    }
}

/// Straight measurement curve `γ` along a sub-interval `[start, end]` of one edge,
/// sampled at uniform parameters `s_k ∈ [0,1]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundaryCurve {
    edge: Edge,
    start: f64,
    end: f64,
    samples: usize,
}

pub const MIN_CURVE_SAMPLES: usize = 9;

impl BoundaryCurve {
    pub fn new(edge: Edge, start: f64, end: f64, samples: usize) -> Result<Self> {
        if !(0.0..=1.0).contains(&start) || !(0.0..=1.0).contains(&end) || start >= end {
            return Err(HeatError::invalid(format!(
                "curve interval [{start}, {end}] must satisfy 0 <= start < end <= 1"
            )));
        }
        if samples < MIN_CURVE_SAMPLES {
            return Err(HeatError::invalid(format!(
                "curve needs at least {MIN_CURVE_SAMPLES} samples, got {samples}"
            )));
        }
        Ok(Self {
            edge,
            start,
            end,
            samples,
        })
    }

    /// Curve whose samples coincide with the grid nodes covered by `[start, end]`.
    pub fn grid_aligned(grid: &StructuredGrid, edge: Edge, start: f64, end: f64) -> Result<Self> {
        let steps = ((end - start) / grid.h()).round();
        let aligned = |t: f64| ((t / grid.h()).round() * grid.h() - t).abs() < 1e-9;
        if !aligned(start) || !aligned(end) || steps < 1.0 {
            return Err(HeatError::invalid(format!(
                "curve interval [{start}, {end}] is not aligned with grid spacing {}",
                grid.h()
            )));
        }
        Self::new(edge, start, end, steps as usize + 1)
    }

    /// Whole edge, one sample per boundary node.
    pub fn full_edge(grid: &StructuredGrid, edge: Edge) -> Self {
        Self {
            edge,
            start: 0.0,
            end: 1.0,
            samples: grid.n(),
        }
    }

    pub fn edge(&self) -> Edge {
        self.edge
    }

    pub fn start(&self) -> f64 {
        self.start
    }

    pub fn end(&self) -> f64 {
        self.end
    }

    pub fn samples(&self) -> usize {
        self.samples
    }

    /// Physical length per unit of curve parameter.
    pub fn arclength(&self) -> f64 {
        self.end - self.start
    }

    pub fn param_spacing(&self) -> f64 {
        1.0 / (self.samples - 1) as f64
    }

    pub fn params(&self) -> Vec<f64> {
        let ds = self.param_spacing();
        (0..self.samples)
            .map(|k| {
                if k == self.samples - 1 {
                    1.0
                } else {
                    k as f64 * ds
                }
            })
            .collect()
    }

    pub fn points(&self) -> Vec<[f64; 2]> {
        self.params()
            .into_iter()
            .map(|s| self.edge.point(self.start + s * self.arclength()))
            .collect()
    }
}

/// Temperature samples `g_k` along a curve, optionally stamped with a time.
#[derive(Debug, Clone, PartialEq)]
pub struct TraceMeasurement {
    curve: BoundaryCurve,
    values: Vec<f64>,
    time: Option<f64>,
}

impl TraceMeasurement {
    pub fn new(curve: BoundaryCurve, values: Vec<f64>, time: Option<f64>) -> Result<Self> {
        if values.len() != curve.samples() {
            return Err(HeatError::SizeMismatch {
                expected: curve.samples(),
                actual: values.len(),
            });
        }
        Ok(Self {
            curve,
            values,
            time,
        })
    }

    pub fn curve(&self) -> &BoundaryCurve {
        &self.curve
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn time(&self) -> Option<f64> {
        self.time
    }

    pub fn with_time(mut self, t: f64) -> Self {
        self.time = Some(t);
        self
    }

    pub fn with_values(&self, values: Vec<f64>) -> Result<Self> {
        Self::new(self.curve.clone(), values, self.time)
    }

    pub fn range(&self) -> (f64, f64) {
        self.values
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| {
                (lo.min(v), hi.max(v))
            })
    }
}

/// Restricts `field` to `curve` by bilinear interpolation (exact for affine fields).
pub fn trace_extract(field: &NodalField, curve: &BoundaryCurve) -> Result<TraceMeasurement> {
    let on_boundary = |c: f64| c.abs() < 1e-12 || (c - 1.0).abs() < 1e-12;
    let inside = |c: f64| (-1e-12..=1.0 + 1e-12).contains(&c);
    let points = curve.points();
    let mut values = Vec::with_capacity(points.len());
    for [x, y] in points {
        if !(inside(x) && inside(y) && (on_boundary(x) || on_boundary(y))) {
            return Err(HeatError::CurveOffBoundary { x, y });
        }
        values.push(field.interpolate(x, y));
    }
    TraceMeasurement::new(curve.clone(), values, None)
}

/// Derivative along the curve per unit arclength: centred differences inside,
/// second-order one-sided stencils at the two ends.
pub fn tangential_derivative(g: &TraceMeasurement) -> Result<Vec<f64>> {
    differentiate(
        g.values(),
        g.curve().param_spacing() * g.curve().arclength(),
    )
}

pub(crate) fn differentiate(values: &[f64], spacing: f64) -> Result<Vec<f64>> {
    let m = values.len();
    if m < 3 {
        return Err(HeatError::invalid(
            "tangential derivative needs at least 3 samples",
        ));
    }
    let inv = 1.0 / (2.0 * spacing);
    let mut d = Vec::with_capacity(m);
    d.push((-3.0 * values[0] + 4.0 * values[1] - values[2]) * inv);
    for k in 1..m - 1 {
        d.push((values[k + 1] - values[k - 1]) * inv);
    }
    d.push((3.0 * values[m - 1] - 4.0 * values[m - 2] + values[m - 3]) * inv);
    Ok(d)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MonotonicityReport {
    pub passed: bool,
    pub min_abs_slope: f64,
    /// `false` when the tangential derivative changes sign along the curve.
    pub sign_consistent: bool,
    /// `[min g, max g]`.
    pub interval: (f64, f64),
}

/// Checks `|∂τg| >= c_min` at every sample with a single sign throughout.
pub fn monotonicity_check(g: &TraceMeasurement, c_min: f64) -> Result<MonotonicityReport> {
    let d = tangential_derivative(g)?;
    let min_abs_slope = d.iter().fold(f64::INFINITY, |m, v| m.min(v.abs()));
    let sign_consistent = d.iter().all(|&v| v > 0.0) || d.iter().all(|&v| v < 0.0);
    Ok(MonotonicityReport {
        passed: sign_consistent && min_abs_slope >= c_min,
        min_abs_slope,
        sign_consistent,
        interval: g.range(),
    })
}
