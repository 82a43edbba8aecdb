//! Change of variables between position `x` and signed weighted volume
//! `V = ∫₀ˣ f`.
//!
//! In volume coordinate a log-convex density becomes a convex function
//! `f(V)` whose one-sided slope `df/dV` equals the log-slope `(log f)'(x)`
//! at the corresponding position. Everything downstream (equilibrium,
//! perimeters, tie curve, oracle) works in volume coordinate.

use std::fmt;
use std::path::Path;
use std::sync::RwLock;

use crate::density::{DensitySpec, Family, LogDensity, Side, MAX_LOG_DENSITY};
use crate::error::{Error, Result};
use crate::quadrature::Quadrature;
use crate::roots::safeguarded_newton;

/// Round-trip tolerance `|V(x(V)) − V|`, in volume units.
pub const TOL_ROUNDTRIP: f64 = 1e-10;

/// Default tolerance for direct quadrature of `∫₀ˣ f`.
pub const TOL_QUADRATURE: f64 = 1e-12;

/// Signed weighted volume `∫₀ˣ f` by adaptive quadrature, subdividing at
/// the density's kinks.
pub fn volume_of(d: &LogDensity, x: f64) -> Result<f64> {
    volume_of_with(d, x, &Quadrature::with_tol(TOL_QUADRATURE))
}

pub fn volume_of_with(d: &LogDensity, x: f64, quad: &Quadrature) -> Result<f64> {
    if !x.is_finite() {
        return Err(Error::precondition(format!(
            "position must be finite, got {x}"
        )));
    }
    if x == 0.0 {
        return Ok(0.0);
    }
    let r = x.abs();
    let v = quad.integrate(|t| d.eval(t), 0.0, r, &d.kinks())?.value;
    Ok(v.copysign(x))
}

/// Position with the given signed volume: bracketed Newton iteration on
/// [`volume_of`], using `dV/dx = f`.
pub fn position_of(d: &LogDensity, v: f64) -> Result<f64> {
    if !v.is_finite() {
        return Err(Error::precondition(format!(
            "volume must be finite, got {v}"
        )));
    }
    if v == 0.0 {
        return Ok(0.0);
    }
    let target = v.abs();
    let mut hi = 1.0;
    while volume_of(d, hi)? < target {
        hi *= 2.0;
    }
    let tol = (0.1 * TOL_ROUNDTRIP).max(4.0 * f64::EPSILON * target);
    let x = safeguarded_newton(
        |x| Ok((volume_of(d, x)? - target, d.eval(x)?)),
        0.0,
        hi,
        0.5 * hi,
        tol,
    )?;
    Ok(x.copysign(v))
}

/// Memoized monotone table of `(x, V)` pairs on `x ≥ 0`, grown on demand.
/// Lookups integrate only the short piece between a node and the target.
#[derive(Debug)]
struct BreakpointTable {
    nodes: RwLock<Vec<(f64, f64)>>,
}

impl Clone for BreakpointTable {
    fn clone(&self) -> Self {
        BreakpointTable {
            nodes: RwLock::new(self.nodes.read().expect("poisoned").clone()),
        }
    }
}

const SEGMENT_QUAD: Quadrature = Quadrature {
    abs_tol: 0.0,
    rel_tol: 1e-15,
    max_intervals: 200,
};

impl BreakpointTable {
    fn new() -> Self {
        BreakpointTable {
            nodes: RwLock::new(vec![(0.0, 0.0)]),
        }
    }

    fn step_after(d: &LogDensity, x: f64) -> f64 {
        let slope = d.log_slope(x, Side::Right).max(1e-300);
        (0.25 / slope).clamp(1.0 / 64.0, x.max(1.0) / 4.0)
    }

    fn segment_integral(d: &LogDensity, a: f64, b: f64) -> Result<f64> {
        Ok(SEGMENT_QUAD
            .integrate(|t| d.eval(t), a, b, &d.kinks())?
            .value)
    }

    /// Grows the table until `key(last node) >= target`.
    fn ensure<K: Fn(&(f64, f64)) -> f64>(&self, d: &LogDensity, target: f64, key: K) -> Result<()> {
        if key(self
            .nodes
            .read()
            .expect("poisoned")
            .last()
            .expect("nonempty"))
            >= target
        {
            return Ok(());
        }
        let mut nodes = self.nodes.write().expect("poisoned");
        while key(nodes.last().expect("nonempty")) < target {
            let (x, v) = *nodes.last().expect("nonempty");
            let next = x + Self::step_after(d, x);
            if d.psi(next) > MAX_LOG_DENSITY {
                return Err(Error::Range {
                    what: "volume beyond the representable range of the density",
                    arg: target,
                });
            }
            let dv = Self::segment_integral(d, x, next)?;
            nodes.push((next, v + dv));
        }
        Ok(())
    }

    /// Node `(x_k, V_k)` with `key(node_k) <= target < key(node_{k+1})`.
    fn segment<K: Fn(&(f64, f64)) -> f64>(&self, target: f64, key: K) -> ((f64, f64), (f64, f64)) {
        let nodes = self.nodes.read().expect("poisoned");
        let k = nodes.partition_point(|n| key(n) <= target).max(1) - 1;
        let k = k.min(nodes.len() - 2);
        (nodes[k], nodes[k + 1])
    }

    fn volume(&self, d: &LogDensity, x: f64) -> Result<f64> {
        let r = x.abs();
        self.ensure(d, r, |n| n.0)?;
        let ((x0, v0), _) = self.segment(r, |n| n.0);
        Ok((v0 + Self::segment_integral(d, x0, r)?).copysign(x))
    }

    fn position(&self, d: &LogDensity, v: f64) -> Result<f64> {
        let target = v.abs();
        self.ensure(d, target, |n| n.1)?;
        let ((x0, v0), (x1, v1)) = self.segment(target, |n| n.1);
        if target == v0 {
            return Ok(x0.copysign(v));
        }
        let guess = x0 + (target - v0) / (v1 - v0) * (x1 - x0);
        let tol = 4.0 * f64::EPSILON * target;
        let x = safeguarded_newton(
            |x| Ok((v0 + Self::segment_integral(d, x0, x)? - target, d.eval(x)?)),
            x0,
            x1,
            guess,
            tol,
        )?;
        Ok(x.copysign(v))
    }
}

/// Densities given natively in volume coordinate.
#[derive(Clone, Debug, PartialEq)]
pub enum VolumeTableDensity {
    /// `f(V) = |V| + e^{−|V|}`: strictly convex, `C¹`, bounded slope.
    AbsPlusExpDecay,
    /// `f(V) = 1 + |V|`, the volume form of `e^{|x|}`.
    OnePlusAbs,
    Sampled(SampledTable),
}

/// Piecewise-linear `f(V)` through samples at `V ≥ 0`, mirrored to `V < 0`
/// and extended past the last sample along the last secant.
#[derive(Clone, Debug, PartialEq)]
pub struct SampledTable {
    v: Vec<f64>,
    f: Vec<f64>,
    /// Positions of the sample points.
    x: Vec<f64>,
}

#[derive(serde::Deserialize)]
struct TableRow {
    #[serde(rename = "V")]
    v: f64,
    f: f64,
}

/// `∫ dV / (f0 + s·(V − V0))` over `[V0, V0 + dv]`.
fn linear_reciprocal_integral(f0: f64, s: f64, dv: f64) -> f64 {
    if s == 0.0 {
        dv / f0
    } else {
        (s * dv / f0).ln_1p() / s
    }
}

impl SampledTable {
    /// Builds a table from samples; rows with `V < 0` are ignored and a
    /// row with `V = 0` is required.
    pub fn new(samples: &[(f64, f64)]) -> Result<Self> {
        let rows: Vec<(f64, f64)> = samples.iter().copied().filter(|&(v, _)| v >= 0.0).collect();
        if rows.len() < 2 {
            return Err(Error::Parse(
                "volume table needs at least two rows with V >= 0".into(),
            ));
        }
        if rows[0].0 != 0.0 {
            return Err(Error::Parse(format!(
                "volume table must start at V = 0, found V = {}",
                rows[0].0
            )));
        }
        for (i, w) in rows.windows(2).enumerate() {
            if !(w[1].0 > w[0].0) {
                return Err(Error::Parse(format!(
                    "volume table not strictly increasing in V at row {}",
                    i + 2
                )));
            }
        }
        if let Some(&(v, f)) = rows.iter().find(|&&(_, f)| !(f > 0.0 && f.is_finite())) {
            return Err(Error::Parse(format!(
                "volume table has nonpositive f = {f} at V = {v}"
            )));
        }
        let v: Vec<f64> = rows.iter().map(|r| r.0).collect();
        let f: Vec<f64> = rows.iter().map(|r| r.1).collect();
        let slopes: Vec<f64> = (0..v.len() - 1)
            .map(|k| (f[k + 1] - f[k]) / (v[k + 1] - v[k]))
            .collect();
        // Symmetry puts slope -s0 just left of the origin.
        let mut prev = -slopes[0];
        for (k, &s) in slopes.iter().enumerate() {
            if s < prev - 1e-12 * s.abs().max(1.0) {
                return Err(Error::Parse(format!(
                    "volume table is not convex near V = {}",
                    v[k]
                )));
            }
            prev = s;
        }
        let mut x = vec![0.0];
        for k in 0..v.len() - 1 {
            x.push(x[k] + linear_reciprocal_integral(f[k], slopes[k], v[k + 1] - v[k]));
        }
        Ok(SampledTable { v, f, x })
    }

    /// Reads a CSV file with header `V,f`.
    pub fn from_csv(path: &Path) -> Result<Self> {
        let file = std::fs::File::open(path).map_err(|source| Error::Io {
            path: path.to_owned(),
            source,
        })?;
        let mut reader = csv::ReaderBuilder::new()
            .trim(csv::Trim::All)
            .from_reader(file);
        let headers = reader.headers()?.clone();
        if headers.len() != 2 || &headers[0] != "V" || &headers[1] != "f" {
            return Err(Error::Parse(format!(
                "{}: expected header 'V,f'",
                path.display()
            )));
        }
        let mut samples = Vec::new();
        for row in reader.deserialize() {
            let row: TableRow = row?;
            samples.push((row.v, row.f));
        }
        Self::new(&samples)
    }

    fn segment_of(&self, r: f64) -> usize {
        let k = self.v.partition_point(|&v| v <= r).max(1) - 1;
        k.min(self.v.len() - 2)
    }

    fn secant(&self, k: usize) -> f64 {
        (self.f[k + 1] - self.f[k]) / (self.v[k + 1] - self.v[k])
    }

    fn f(&self, v: f64) -> f64 {
        let r = v.abs();
        let k = self.segment_of(r);
        self.f[k] + self.secant(k) * (r - self.v[k])
    }

    /// Slope on the positive half-line.
    fn slope_positive(&self, r: f64, side: Side) -> f64 {
        let k = self.segment_of(r);
        if r == self.v[k] && side == Side::Left {
            if k == 0 {
                -self.secant(0)
            } else {
                self.secant(k - 1)
            }
        } else {
            self.secant(k)
        }
    }

    fn position(&self, v: f64) -> f64 {
        let r = v.abs();
        let k = self.segment_of(r);
        let x = self.x[k] + linear_reciprocal_integral(self.f[k], self.secant(k), r - self.v[k]);
        x.copysign(v)
    }

    pub fn len(&self) -> usize {
        self.v.len()
    }

    pub fn is_empty(&self) -> bool {
        self.v.is_empty()
    }
}

impl VolumeTableDensity {
    pub fn f(&self, v: f64) -> f64 {
        let r = v.abs();
        match self {
            VolumeTableDensity::AbsPlusExpDecay => r + (-r).exp(),
            VolumeTableDensity::OnePlusAbs => 1.0 + r,
            VolumeTableDensity::Sampled(t) => t.f(v),
        }
    }

    pub fn slope(&self, v: f64, side: Side) -> f64 {
        let positive = |r: f64, side: Side| match self {
            VolumeTableDensity::AbsPlusExpDecay => -(-r).exp_m1(),
            VolumeTableDensity::OnePlusAbs => {
                if r == 0.0 && side == Side::Left {
                    -1.0
                } else {
                    1.0
                }
            }
            VolumeTableDensity::Sampled(t) => t.slope_positive(r, side),
        };
        if v >= 0.0 {
            positive(v, side)
        } else {
            let mirrored = match side {
                Side::Left => Side::Right,
                Side::Right => Side::Left,
            };
            -positive(-v, mirrored)
        }
    }

    /// `x(V) = ∫₀ⱽ 1/f`.
    pub fn position(&self, v: f64) -> Result<f64> {
        match self {
            VolumeTableDensity::Sampled(t) => Ok(t.position(v)),
            VolumeTableDensity::OnePlusAbs => Ok(v.abs().ln_1p().copysign(v)),
            VolumeTableDensity::AbsPlusExpDecay => {
                let quad = Quadrature::with_tol(1e-13);
                Ok(quad.integrate(|u| Ok(1.0 / self.f(u)), 0.0, v, &[])?.value)
            }
        }
    }

    fn is_c1(&self) -> bool {
        matches!(self, VolumeTableDensity::AbsPlusExpDecay)
    }

    fn strictly_convex(&self) -> bool {
        matches!(self, VolumeTableDensity::AbsPlusExpDecay)
    }

    fn strictly_convex_near_origin(&self) -> bool {
        match self {
            VolumeTableDensity::AbsPlusExpDecay => true,
            VolumeTableDensity::OnePlusAbs => false,
            VolumeTableDensity::Sampled(t) => t.v.len() >= 3 && t.secant(0) < t.secant(1),
        }
    }
}

impl fmt::Display for VolumeTableDensity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            VolumeTableDensity::AbsPlusExpDecay => write!(f, "vol-formula:|V|+exp(-|V|)"),
            VolumeTableDensity::OnePlusAbs => write!(f, "vol-formula:1+|V|"),
            VolumeTableDensity::Sampled(t) => write!(f, "vol-table[{} rows]", t.len()),
        }
    }
}

#[derive(Clone, Debug)]
enum Repr {
    Positional {
        base: LogDensity,
        table: BreakpointTable,
    },
    Table(VolumeTableDensity),
}

/// A density viewed as a function of signed volume.
///
/// Cloning is cheap relative to solving; clones carry a snapshot of the
/// breakpoint cache. All methods take `&self` and are safe to call from
/// several threads at once.
#[derive(Clone, Debug)]
pub struct VolumeDensity {
    repr: Repr,
}

impl From<LogDensity> for VolumeDensity {
    fn from(base: LogDensity) -> Self {
        VolumeDensity {
            repr: Repr::Positional {
                base,
                table: BreakpointTable::new(),
            },
        }
    }
}

impl From<VolumeTableDensity> for VolumeDensity {
    fn from(t: VolumeTableDensity) -> Self {
        VolumeDensity {
            repr: Repr::Table(t),
        }
    }
}

impl VolumeDensity {
    pub fn from_spec(spec: &DensitySpec) -> Result<Self> {
        match spec {
            DensitySpec::Log(d) => Ok((*d).into()),
            DensitySpec::VolumeTable(path) => {
                Ok(VolumeTableDensity::Sampled(SampledTable::from_csv(path)?).into())
            }
        }
    }

    /// The positional density this was built from, if any.
    pub fn base(&self) -> Option<&LogDensity> {
        match &self.repr {
            Repr::Positional { base, .. } => Some(base),
            Repr::Table(_) => None,
        }
    }

    pub fn table(&self) -> Option<&VolumeTableDensity> {
        match &self.repr {
            Repr::Table(t) => Some(t),
            Repr::Positional { .. } => None,
        }
    }

    /// Position `x(V)`.
    pub fn position(&self, v: f64) -> Result<f64> {
        if !v.is_finite() {
            return Err(Error::precondition(format!(
                "volume must be finite, got {v}"
            )));
        }
        if v == 0.0 {
            return Ok(0.0);
        }
        match &self.repr {
            Repr::Positional { base, table } => table.position(base, v),
            Repr::Table(t) => t.position(v),
        }
    }

    /// Signed volume `V(x)`.
    pub fn volume(&self, x: f64) -> Result<f64> {
        if !x.is_finite() {
            return Err(Error::precondition(format!(
                "position must be finite, got {x}"
            )));
        }
        if x == 0.0 {
            return Ok(0.0);
        }
        match &self.repr {
            Repr::Positional { base, table } => table.volume(base, x),
            Repr::Table(t) => {
                let target = x.abs();
                let mut hi = 1.0;
                while t.position(hi)? < target {
                    hi *= 2.0;
                    if !hi.is_finite() {
                        return Err(Error::Range {
                            what: "position beyond the table's volume range",
                            arg: x,
                        });
                    }
                }
                let tol = 4.0 * f64::EPSILON * target;
                let v = safeguarded_newton(
                    |v| Ok((t.position(v)? - target, 1.0 / t.f(v))),
                    0.0,
                    hi,
                    0.5 * hi,
                    tol,
                )?;
                Ok(v.copysign(x))
            }
        }
    }

    /// `f` as a function of volume.
    pub fn f(&self, v: f64) -> Result<f64> {
        match &self.repr {
            Repr::Positional { base, .. } => base.eval(self.position(v)?),
            Repr::Table(t) => {
                if !v.is_finite() {
                    return Err(Error::precondition(format!(
                        "volume must be finite, got {v}"
                    )));
                }
                Ok(t.f(v))
            }
        }
    }

    /// One-sided `df/dV`, equal to `(log f)'` at `x(V)`.
    pub fn slope(&self, v: f64, side: Side) -> Result<f64> {
        match &self.repr {
            Repr::Positional { base, .. } => Ok(base.log_slope(self.position(v)?, side)),
            Repr::Table(t) => {
                if !v.is_finite() {
                    return Err(Error::precondition(format!(
                        "volume must be finite, got {v}"
                    )));
                }
                Ok(t.slope(v, side))
            }
        }
    }

    pub fn is_c1(&self) -> bool {
        match &self.repr {
            Repr::Positional { base, .. } => base.is_c1(),
            Repr::Table(t) => t.is_c1(),
        }
    }

    /// Strict convexity of `f(V)`, i.e. strict log-convexity of `f(x)`.
    pub fn is_strict(&self) -> bool {
        match &self.repr {
            Repr::Positional { base, .. } => base.strictly_log_convex(),
            Repr::Table(t) => t.strictly_convex(),
        }
    }

    pub fn slope_unbounded(&self) -> bool {
        match &self.repr {
            Repr::Positional { base, .. } => base.slope_unbounded(),
            Repr::Table(_) => false,
        }
    }

    /// Whether `f(V)` is strictly convex on a neighbourhood of the origin.
    /// This is what makes the double interval beat the triple interval for
    /// comparable volumes, so it gates the tie search.
    pub fn strictly_convex_near_origin(&self) -> bool {
        match &self.repr {
            Repr::Positional { base, .. } => match base.family() {
                Family::Constant(_) | Family::ExpAbs => false,
                Family::Power(p) if p == 1.0 => false,
                Family::SmoothedExp(_) => true,
                _ => base.strictly_log_convex(),
            },
            Repr::Table(t) => t.strictly_convex_near_origin(),
        }
    }

    /// Volume coordinates of the density's kinks.
    pub fn kinks(&self) -> Result<Vec<f64>> {
        match &self.repr {
            Repr::Positional { base, .. } => {
                base.kinks().into_iter().map(|x| self.volume(x)).collect()
            }
            Repr::Table(VolumeTableDensity::AbsPlusExpDecay) => Ok(Vec::new()),
            Repr::Table(VolumeTableDensity::OnePlusAbs) => Ok(vec![0.0]),
            Repr::Table(VolumeTableDensity::Sampled(t)) => Ok(t
                .v
                .iter()
                .rev()
                .map(|v| -v)
                .chain(t.v.iter().skip(1).copied())
                .collect()),
        }
    }
}

impl fmt::Display for VolumeDensity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.repr {
            Repr::Positional { base, .. } => base.fmt(f),
            Repr::Table(t) => t.fmt(f),
        }
    }
}
