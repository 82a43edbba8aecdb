//! Symmetric log-convex densities `f = e^ψ` on the real line.
//!
//! Densities are described by their log-density `ψ` so that large
//! arguments can be handled without overflow; `f` itself is only formed
//! on demand by [`LogDensity::eval`]. Kinks are exposed through one-sided
//! slopes and are never smoothed.

use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use serde::Serialize;

use crate::error::{Error, Result};

/// Largest `ψ` for which `e^ψ` is finite.
pub const MAX_LOG_DENSITY: f64 = 709.782_712_893_384;

/// Smallest smoothing radius for which the smoothed exponential density
/// has a triple region that disappears at large `V1`.
pub fn smoothed_exp_threshold() -> f64 {
    2.0 * 2f64.ln().sqrt()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize)]
pub enum Side {
    Left,
    Right,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize)]
pub enum Smoothness {
    PiecewiseC1,
    C1,
    C2,
}

/// The concrete density families.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub enum Family {
    /// `f = c`.
    Constant(f64),
    /// `ψ = x²`.
    Borell,
    /// `ψ = |x|^p`, `p ≥ 1`.
    Power(f64),
    /// `ψ = |x|`.
    ExpAbs,
    /// `ψ = e^{|x|}`.
    DoubleExp,
    /// `ψ = x²` for `|x| < a`, `a(2|x| − a)` beyond.
    SmoothedExp(f64),
}

/// A symmetric density `f = e^ψ` together with the regularity flags the
/// solvers dispatch on.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct LogDensity {
    family: Family,
    smoothness: Smoothness,
    strictly_log_convex: bool,
    slope_unbounded: bool,
}

impl LogDensity {
    pub fn new(family: Family) -> Result<Self> {
        let (smoothness, strict, unbounded) = match family {
            Family::Constant(c) => {
                if !(c > 0.0 && c.is_finite()) {
                    return Err(Error::precondition(format!(
                        "constant density needs c > 0, got {c}"
                    )));
                }
                (Smoothness::C2, false, false)
            }
            Family::Borell => (Smoothness::C2, true, true),
            Family::Power(p) => {
                if !(p >= 1.0 && p.is_finite()) {
                    return Err(Error::precondition(format!(
                        "power density needs p >= 1, got {p}"
                    )));
                }
                if p == 1.0 {
                    (Smoothness::PiecewiseC1, false, false)
                } else if p < 2.0 {
                    (Smoothness::C1, true, true)
                } else {
                    (Smoothness::C2, true, true)
                }
            }
            Family::ExpAbs => (Smoothness::PiecewiseC1, false, false),
            Family::DoubleExp => (Smoothness::PiecewiseC1, true, true),
            Family::SmoothedExp(a) => {
                if !(a > 0.0 && a.is_finite()) {
                    return Err(Error::precondition(format!(
                        "smoothed exponential needs a > 0, got {a}"
                    )));
                }
                (Smoothness::C1, false, false)
            }
        };
        Ok(LogDensity {
            family,
            smoothness,
            strictly_log_convex: strict,
            slope_unbounded: unbounded,
        })
    }

    pub fn constant(c: f64) -> Result<Self> {
        Self::new(Family::Constant(c))
    }

    pub fn borell() -> Self {
        Self::new(Family::Borell).expect("valid family")
    }

    pub fn power(p: f64) -> Result<Self> {
        Self::new(Family::Power(p))
    }

    pub fn exp_abs() -> Self {
        Self::new(Family::ExpAbs).expect("valid family")
    }

    pub fn double_exp() -> Self {
        Self::new(Family::DoubleExp).expect("valid family")
    }

    pub fn smoothed_exp(a: f64) -> Result<Self> {
        Self::new(Family::SmoothedExp(a))
    }

    /// Overrides the regularity flags. The result may be inconsistent with
    /// the family; [`LogDensity::validate`] reports such mismatches.
    pub fn with_flags(
        mut self,
        smoothness: Smoothness,
        strictly_log_convex: bool,
        slope_unbounded: bool,
    ) -> Self {
        self.smoothness = smoothness;
        self.strictly_log_convex = strictly_log_convex;
        self.slope_unbounded = slope_unbounded;
        self
    }

    pub fn family(&self) -> Family {
        self.family
    }

    pub fn smoothness(&self) -> Smoothness {
        self.smoothness
    }

    pub fn is_c1(&self) -> bool {
        self.smoothness >= Smoothness::C1
    }

    pub fn strictly_log_convex(&self) -> bool {
        self.strictly_log_convex
    }

    pub fn slope_unbounded(&self) -> bool {
        self.slope_unbounded
    }

    /// Log-density `ψ(x)`.
    pub fn psi(&self, x: f64) -> f64 {
        let r = x.abs();
        match self.family {
            Family::Constant(c) => c.ln(),
            Family::Borell => r * r,
            Family::Power(p) => r.powf(p),
            Family::ExpAbs => r,
            Family::DoubleExp => r.exp(),
            Family::SmoothedExp(a) => {
                if r < a {
                    r * r
                } else {
                    a * (2.0 * r - a)
                }
            }
        }
    }

    /// One-sided derivative of `ψ` at `x`.
    pub fn log_slope(&self, x: f64, side: Side) -> f64 {
        // Slope on the positive half-line; the density is even, so the
        // slope is odd with sides exchanged.
        let positive = |r: f64, side: Side| -> f64 {
            match self.family {
                Family::Constant(_) => 0.0,
                Family::Borell => 2.0 * r,
                Family::Power(p) => {
                    if r == 0.0 {
                        match (p == 1.0, side) {
                            (true, Side::Right) => 1.0,
                            (true, Side::Left) => -1.0,
                            (false, _) => 0.0,
                        }
                    } else {
                        p * r.powf(p - 1.0)
                    }
                }
                Family::ExpAbs => {
                    if r == 0.0 && side == Side::Left {
                        -1.0
                    } else {
                        1.0
                    }
                }
                Family::DoubleExp => {
                    if r == 0.0 && side == Side::Left {
                        -1.0
                    } else {
                        r.exp()
                    }
                }
                Family::SmoothedExp(a) => {
                    if r < a {
                        2.0 * r
                    } else {
                        2.0 * a
                    }
                }
            }
        };
        if x >= 0.0 {
            positive(x, side)
        } else {
            let mirrored = match side {
                Side::Left => Side::Right,
                Side::Right => Side::Left,
            };
            -positive(-x, mirrored)
        }
    }

    /// `f(x) = e^{ψ(x)}`.
    pub fn eval(&self, x: f64) -> Result<f64> {
        let psi = self.psi(x);
        if !(psi <= MAX_LOG_DENSITY) {
            return Err(Error::Range {
                what: "density overflow",
                arg: x,
            });
        }
        Ok(psi.exp())
    }

    /// Positions where `f` is not smooth; quadrature subdivides there.
    pub fn kinks(&self) -> Vec<f64> {
        match self.family {
            Family::Constant(_) | Family::Borell => Vec::new(),
            Family::Power(_) | Family::ExpAbs | Family::DoubleExp => vec![0.0],
            Family::SmoothedExp(a) => vec![-a, a],
        }
    }

    /// Checks symmetry, log-convexity and the regularity flags on a sorted
    /// grid. Violations are returned as data.
    pub fn validate(&self, grid: &[f64], mode: ValidationMode) -> Vec<Violation> {
        let mut out = Vec::new();
        if let (ValidationMode::SmoothedExpOnset, Family::SmoothedExp(a)) = (mode, self.family) {
            if a <= smoothed_exp_threshold() {
                out.push(Violation {
                    kind: ViolationKind::SmoothingRadiusTooSmall,
                    x: a,
                    detail: format!(
                        "a = {a} must exceed 2*sqrt(ln 2) = {}",
                        smoothed_exp_threshold()
                    ),
                });
            }
        }
        for &x in grid {
            let (p, q) = (self.psi(x), self.psi(-x));
            if (p - q).abs() > 1e-12 * p.abs().max(1.0) {
                out.push(Violation {
                    kind: ViolationKind::Asymmetric,
                    x,
                    detail: format!("psi({x}) = {p} but psi(-x) = {q}"),
                });
            }
            let (l, r) = (
                self.log_slope(x, Side::Left),
                self.log_slope(x, Side::Right),
            );
            if r < l {
                out.push(Violation {
                    kind: ViolationKind::SlopeOrder,
                    x,
                    detail: format!("right slope {r} < left slope {l}"),
                });
            }
            if self.is_c1() && (r - l).abs() > 1e-12 * r.abs().max(1.0) {
                out.push(Violation {
                    kind: ViolationKind::KinkInC1,
                    x,
                    detail: format!("flagged C1 but slopes differ: {l} vs {r}"),
                });
            }
        }
        for w in grid.windows(2) {
            let (x0, x1) = (w[0], w[1]);
            if x1 <= x0 {
                continue;
            }
            let (r0, l1) = (
                self.log_slope(x0, Side::Right),
                self.log_slope(x1, Side::Left),
            );
            if r0 > l1 + 1e-12 * l1.abs().max(1.0) {
                out.push(Violation {
                    kind: ViolationKind::NotMonotone,
                    x: x1,
                    detail: format!("slope decreases from {r0} at {x0} to {l1}"),
                });
            } else if self.strictly_log_convex && r0 >= l1 {
                out.push(Violation {
                    kind: ViolationKind::NotStrict,
                    x: x1,
                    detail: format!(
                        "flagged strictly log-convex but slope is flat on [{x0}, {x1}]"
                    ),
                });
            }
        }
        out
    }
}

impl fmt::Display for LogDensity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.family {
            Family::Constant(c) => write!(f, "constant:{c}"),
            Family::Borell => write!(f, "borell"),
            Family::Power(p) => write!(f, "power:{p}"),
            Family::ExpAbs => write!(f, "exp-abs"),
            Family::DoubleExp => write!(f, "double-exp"),
            Family::SmoothedExp(a) => write!(f, "smooth-exp:{a}"),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum ValidationMode {
    #[default]
    General,
    /// Additionally require the smoothing radius of a smoothed exponential
    /// density to exceed `2√(ln 2)`.
    SmoothedExpOnset,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum ViolationKind {
    Asymmetric,
    SlopeOrder,
    KinkInC1,
    NotMonotone,
    NotStrict,
    SmoothingRadiusTooSmall,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Violation {
    pub kind: ViolationKind,
    pub x: f64,
    pub detail: String,
}

/// A parsed `--density` argument.
#[derive(Clone, Debug, PartialEq)]
pub enum DensitySpec {
    Log(LogDensity),
    VolumeTable(PathBuf),
}

fn parse_param(name: &str, raw: Option<&str>) -> Result<f64> {
    let raw = raw.ok_or_else(|| {
        Error::Parse(format!("density '{name}' needs a parameter, e.g. {name}:2"))
    })?;
    raw.trim()
        .parse::<f64>()
        .map_err(|e| Error::Parse(format!("bad parameter '{raw}' for density '{name}': {e}")))
}

impl FromStr for DensitySpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let (name, param) = match s.split_once(':') {
            Some((n, p)) => (n, Some(p)),
            None => (s, None),
        };
        let no_param = |d: LogDensity| -> Result<DensitySpec> {
            match param {
                None => Ok(DensitySpec::Log(d)),
                Some(_) => Err(Error::Parse(format!("density '{name}' takes no parameter"))),
            }
        };
        match name {
            "constant" => Ok(DensitySpec::Log(LogDensity::constant(parse_param(
                name, param,
            )?)?)),
            "borell" => no_param(LogDensity::borell()),
            "power" => Ok(DensitySpec::Log(LogDensity::power(parse_param(
                name, param,
            )?)?)),
            "exp-abs" => no_param(LogDensity::exp_abs()),
            "double-exp" => no_param(LogDensity::double_exp()),
            "smooth-exp" => Ok(DensitySpec::Log(LogDensity::smoothed_exp(parse_param(
                name, param,
            )?)?)),
            "vol-table" => match param {
                Some(p) if !p.is_empty() => Ok(DensitySpec::VolumeTable(PathBuf::from(p))),
                _ => Err(Error::Parse(
                    "vol-table needs a path, e.g. vol-table:table.csv".into(),
                )),
            },
            other => Err(Error::Parse(format!(
                "unknown density '{other}' (expected constant:<c>, borell, power:<p>, exp-abs, \
                 double-exp, smooth-exp:<a> or vol-table:<path>)"
            ))),
        }
    }
}
