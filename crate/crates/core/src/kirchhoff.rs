//! Conduction laws and the Kirchhoff transform.
//!
//! A law is tabulated on a uniform grid over `[s_lo, s_hi]` and interpolated
//! piecewise linearly, with constant extension outside the table. The
//! principal `A(s) = ∫₀ˢ a` is then piecewise quadratic and integrated exactly.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{HeatError, Result};

/// Admissibility constants: `0 < a_lower <= a(s) <= a_upper`, `|a'| <= lipschitz`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LawBounds {
    pub a_lower: f64,
    pub a_upper: f64,
    pub lipschitz: f64,
}

impl LawBounds {
    pub fn midpoint(&self) -> f64 {
        0.5 * (self.a_lower + self.a_upper)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConductionLaw {
    s_lo: f64,
    s_hi: f64,
    values: Vec<f64>,
    bounds: LawBounds,
}

impl ConductionLaw {
    /// Builds a law from samples on a uniform grid. Only the structure is
    /// checked here; see [`ConductionLaw::check_admissible`] for the bounds.
    pub fn new(s_lo: f64, s_hi: f64, values: Vec<f64>, bounds: LawBounds) -> Result<Self> {
        if values.len() < 2 {
            return Err(HeatError::invalid(
                "a conduction law needs at least 2 samples",
            ));
        }
        if !(s_lo.is_finite() && s_hi.is_finite() && s_hi > s_lo) {
            return Err(HeatError::invalid(format!(
                "invalid tabulation range [{s_lo}, {s_hi}]"
            )));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(HeatError::invalid(format!("law sample {i} is not finite")));
        }
        let LawBounds {
            a_lower,
            a_upper,
            lipschitz,
        } = bounds;
        if !(a_lower.is_finite() && a_upper.is_finite() && lipschitz.is_finite()) {
            return Err(HeatError::invalid("law bounds must be finite"));
        }
        if a_lower <= 0.0 || a_upper < a_lower || lipschitz < 0.0 {
            return Err(HeatError::invalid(format!(
                "law bounds must satisfy 0 < a_lower <= a_upper and lipschitz >= 0, got {bounds:?}"
            )));
        }
        Ok(Self {
            s_lo,
            s_hi,
            values,
            bounds,
        })
    }

    /// Tabulates `a` at `samples` uniform points of `[s_lo, s_hi]`.
    pub fn from_fn(
        s_lo: f64,
        s_hi: f64,
        samples: usize,
        bounds: LawBounds,
        a: impl Fn(f64) -> f64,
    ) -> Result<Self> {
        if samples < 2 {
            return Err(HeatError::invalid(
                "a conduction law needs at least 2 samples",
            ));
        }
        let ds = (s_hi - s_lo) / (samples - 1) as f64;
        let values = (0..samples).map(|i| a(s_lo + i as f64 * ds)).collect();
        Self::new(s_lo, s_hi, values, bounds)
    }

    /// Constant law `a ≡ kappa`.
    pub fn constant(kappa: f64, s_lo: f64, s_hi: f64) -> Result<Self> {
        let bounds = LawBounds {
            a_lower: kappa,
            a_upper: kappa,
            lipschitz: 0.0,
        };
        Self::new(s_lo, s_hi, vec![kappa, kappa], bounds)
    }

    pub fn s_lo(&self) -> f64 {
        self.s_lo
    }

    pub fn s_hi(&self) -> f64 {
        self.s_hi
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn bounds(&self) -> LawBounds {
        self.bounds
    }

    pub fn spacing(&self) -> f64 {
        (self.s_hi - self.s_lo) / (self.values.len() - 1) as f64
    }

    pub fn sample_point(&self, i: usize) -> f64 {
        self.s_lo + i as f64 * self.spacing()
    }

    /// Segment index and local offset of `s`, assuming `s` lies in the table.
    fn locate(&self, s: f64) -> (usize, f64) {
        let ds = self.spacing();
        let last = self.values.len() - 2;
        let k = (((s - self.s_lo) / ds).floor().max(0.0) as usize).min(last);
        (k, s - self.sample_point(k))
    }

    /// Piecewise-linear interpolant with constant extension.
    pub fn eval(&self, s: f64) -> f64 {
        if s <= self.s_lo {
            return self.values[0];
        }
        if s >= self.s_hi {
            return *self.values.last().unwrap();
        }
        let (k, tau) = self.locate(s);
        let (a0, a1) = (self.values[k], self.values[k + 1]);
        a0 + (a1 - a0) * tau / self.spacing()
    }

    /// Piecewise-constant slope of the interpolant (zero outside the table).
    pub fn slope(&self, s: f64) -> f64 {
        if s < self.s_lo || s > self.s_hi {
            return 0.0;
        }
        let (k, _) = self.locate(s);
        (self.values[k + 1] - self.values[k]) / self.spacing()
    }

    /// Lists every violated admissibility bound.
    pub fn check_admissible(&self) -> AdmissibilityReport {
        let LawBounds {
            a_lower,
            a_upper,
            lipschitz,
        } = self.bounds;
        let ds = self.spacing();
        let mut violations = Vec::new();
        if a_lower <= 0.0 {
            violations.push(Violation::NonPositiveLowerBound { a_lower });
        }
        for (index, &value) in self.values.iter().enumerate() {
            if value < a_lower || value <= 0.0 {
                violations.push(Violation::LowerBound { index, value });
            }
            if value > a_upper {
                violations.push(Violation::UpperBound { index, value });
            }
        }
        for (index, w) in self.values.windows(2).enumerate() {
            let slope = (w[1] - w[0]).abs() / ds;
            // relative slack absorbs rounding in tabulated analytic laws
            if slope > lipschitz * (1.0 + 1e-12) + 1e-12 {
                violations.push(Violation::Lipschitz { index, slope });
            }
        }
        AdmissibilityReport { violations }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub enum Violation {
    NonPositiveLowerBound { a_lower: f64 },
    LowerBound { index: usize, value: f64 },
    UpperBound { index: usize, value: f64 },
    Lipschitz { index: usize, slope: f64 },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::NonPositiveLowerBound { a_lower } => {
                write!(f, "lower bound: a_lower = {a_lower} is not positive")
            }
            Violation::LowerBound { index, value } => {
                write!(f, "lower bound: sample {index} has a = {value}")
            }
            Violation::UpperBound { index, value } => {
                write!(f, "upper bound: sample {index} has a = {value}")
            }
            Violation::Lipschitz { index, slope } => {
                write!(
                    f,
                    "Lipschitz: slope {slope} between samples {index} and {}",
                    index + 1
                )
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AdmissibilityReport {
    pub violations: Vec<Violation>,
}

impl AdmissibilityReport {
    pub fn passed(&self) -> bool {
        self.violations.is_empty()
    }
}

/// The principal `A` of an admissible law together with its inverse.
#[derive(Debug, Clone)]
pub struct KirchhoffTransform {
    law: ConductionLaw,
    /// `∫_{s_lo}^{s_k} a` at the sample points.
    cumulative: Vec<f64>,
    /// `∫_{s_lo}^{0} a`, subtracted so that `A(0) = 0`.
    offset: f64,
}

impl KirchhoffTransform {
    pub fn new(law: ConductionLaw) -> Result<Self> {
        let report = law.check_admissible();
        if !report.passed() {
            let list: Vec<String> = report
                .violations
                .iter()
                .take(5)
                .map(|v| v.to_string())
                .collect();
            return Err(HeatError::invalid(format!(
                "conduction law is not admissible: {}",
                list.join("; ")
            )));
        }
        let ds = law.spacing();
        let mut cumulative = Vec::with_capacity(law.values.len());
        let mut acc = 0.0;
        cumulative.push(acc);
        for w in law.values.windows(2) {
            acc += 0.5 * ds * (w[0] + w[1]);
            cumulative.push(acc);
        }
        let mut t = Self {
            law,
            cumulative,
            offset: 0.0,
        };
        t.offset = t.raw_principal(0.0);
        Ok(t)
    }

    pub fn law(&self) -> &ConductionLaw {
        &self.law
    }

    /// `∫_{s_lo}^{s} a`.
    fn raw_principal(&self, s: f64) -> f64 {
        let law = &self.law;
        if s <= law.s_lo {
            return law.values[0] * (s - law.s_lo);
        }
        if s >= law.s_hi {
            return self.cumulative.last().unwrap() + law.values.last().unwrap() * (s - law.s_hi);
        }
        let (k, tau) = law.locate(s);
        let (a0, a1) = (law.values[k], law.values[k + 1]);
        self.cumulative[k] + a0 * tau + 0.5 * (a1 - a0) * tau * tau / law.spacing()
    }

    /// `A(s) = ∫₀ˢ a(r) dr`.
    pub fn principal(&self, s: f64) -> f64 {
        self.raw_principal(s) - self.offset
    }

    pub fn conductivity(&self, s: f64) -> f64 {
        self.law.eval(s)
    }

    /// `A⁻¹(U)`: table bisection for the segment, closed-form root of the
    /// segment quadratic, then Newton polish.
    pub fn invert(&self, u_principal: f64) -> f64 {
        let law = &self.law;
        let target = u_principal + self.offset;
        let total = *self.cumulative.last().unwrap();
        if target <= 0.0 {
            return law.s_lo + target / law.values[0];
        }
        if target >= total {
            return law.s_hi + (target - total) / law.values.last().unwrap();
        }
        // largest k with cumulative[k] <= target
        let (mut lo, mut hi) = (0usize, self.cumulative.len() - 1);
        while hi - lo > 1 {
            let mid = (lo + hi) / 2;
            if self.cumulative[mid] <= target {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        let k = lo;
        let ds = law.spacing();
        let a0 = law.values[k];
        let curvature = 0.5 * (law.values[k + 1] - a0) / ds;
        let rem = target - self.cumulative[k];
        let disc = (a0 * a0 + 4.0 * curvature * rem).max(0.0);
        let mut tau = (2.0 * rem / (a0 + disc.sqrt())).clamp(0.0, ds);
        let s_k = law.sample_point(k);
        for _ in 0..3 {
            let s = s_k + tau;
            let resid = self.raw_principal(s) - target;
            let slope = law.eval(s);
            let next = (tau - resid / slope).clamp(0.0, ds);
            if next == tau {
                break;
            }
            tau = next;
        }
        s_k + tau
    }
}

/// Analytic laws available without a law file:
/// `const:<kappa>`, `tanh:<amp>,<rate>` for `1 + amp·tanh(rate·s)` and
/// `sin:<amp>,<freq>` for `1 + amp·sin(freq·s)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum BuiltinLaw {
    Constant(f64),
    Tanh { amp: f64, rate: f64 },
    Sin { amp: f64, freq: f64 },
}

/// Default tabulation used for builtin laws.
pub const BUILTIN_RANGE: (f64, f64) = (-8.0, 8.0);
pub const BUILTIN_SAMPLES: usize = 16_001;

impl BuiltinLaw {
    pub fn eval(&self, s: f64) -> f64 {
        match *self {
            BuiltinLaw::Constant(k) => k,
            BuiltinLaw::Tanh { amp, rate } => 1.0 + amp * (rate * s).tanh(),
            BuiltinLaw::Sin { amp, freq } => 1.0 + amp * (freq * s).sin(),
        }
    }

    pub fn bounds(&self) -> LawBounds {
        match *self {
            BuiltinLaw::Constant(k) => LawBounds {
                a_lower: k,
                a_upper: k,
                lipschitz: 0.0,
            },
            BuiltinLaw::Tanh { amp, rate } => LawBounds {
                a_lower: 1.0 - amp.abs(),
                a_upper: 1.0 + amp.abs(),
                lipschitz: (amp * rate).abs(),
            },
            BuiltinLaw::Sin { amp, freq } => LawBounds {
                a_lower: 1.0 - amp.abs(),
                a_upper: 1.0 + amp.abs(),
                lipschitz: (amp * freq).abs(),
            },
        }
    }

    pub fn tabulate(&self, s_lo: f64, s_hi: f64, samples: usize) -> Result<ConductionLaw> {
        if let BuiltinLaw::Constant(k) = *self {
            return ConductionLaw::constant(k, s_lo, s_hi);
        }
        ConductionLaw::from_fn(s_lo, s_hi, samples, self.bounds(), |s| self.eval(s))
    }

    pub fn tabulate_default(&self) -> Result<ConductionLaw> {
        self.tabulate(BUILTIN_RANGE.0, BUILTIN_RANGE.1, BUILTIN_SAMPLES)
    }
}

impl FromStr for BuiltinLaw {
    type Err = HeatError;

    fn from_str(spec: &str) -> Result<Self> {
        let (kind, args) = spec.split_once(':').ok_or_else(|| {
            HeatError::invalid(format!("builtin law `{spec}` lacks `kind:` prefix"))
        })?;
        let nums: Vec<f64> = args
            .split(',')
            .map(|x| x.trim().parse::<f64>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|e| HeatError::invalid(format!("builtin law `{spec}`: {e}")))?;
        let law = match (kind.trim(), nums.as_slice()) {
            ("const", [k]) => BuiltinLaw::Constant(*k),
            ("tanh", [amp, rate]) => BuiltinLaw::Tanh { amp: *amp, rate: *rate },
            ("sin", [amp, freq]) => BuiltinLaw::Sin { amp: *amp, freq: *freq },
            _ => {
                return Err(HeatError::invalid(format!(
                    "unknown builtin law `{spec}` (expected const:<k>, tanh:<amp>,<rate> or sin:<amp>,<freq>)"
                )))
            }
        };
        let b = law.bounds();
        if !(b.a_lower > 0.0 && b.a_upper.is_finite() && b.lipschitz.is_finite()) {
            return Err(HeatError::invalid(format!(
                "builtin law `{spec}` is not uniformly positive"
            )));
        }
        Ok(law)
    }
}

impl fmt::Display for BuiltinLaw {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            BuiltinLaw::Constant(k) => write!(f, "const:{k}"),
            BuiltinLaw::Tanh { amp, rate } => write!(f, "tanh:{amp},{rate}"),
            BuiltinLaw::Sin { amp, freq } => write!(f, "sin:{amp},{freq}"),
        }
    }
}
