//! Double and triple intervals, the equilibrium condition for the double
//! interval, and the perimeter gap `μ = P₃ − P₂`.
//!
//! All quantities are in volume coordinate. A double interval with
//! volumes `V₁` (left) and `V₂` (right) is parameterized by its left
//! endpoint `Ṽ`; its boundary points are `Ṽ`, `Ṽ + V₁`, `Ṽ + V₁ + V₂`.
//! It is in equilibrium when the slopes of `f(V)` at the three points sum
//! to zero, or, at a kink, when the left-slope sum is `≤ 0` and the
//! right-slope sum is `≥ 0`.

use serde::Serialize;

use crate::density::Side;
use crate::error::{Error, Result};
use crate::roots::bisect_predicate;
use crate::volcoord::VolumeDensity;

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct EquilibriumOptions {
    /// Bound on the equilibrium residual, in slope units.
    pub tol_eq: f64,
    /// Relative tie tolerance: `|μ| ≤ tol_tie · max(1, P₂)` counts as a tie.
    pub tol_tie: f64,
}

impl Default for EquilibriumOptions {
    fn default() -> Self {
        EquilibriumOptions {
            tol_eq: 1e-10,
            tol_tie: 1e-9,
        }
    }
}

fn check_volumes(v1: f64, v2: f64) -> Result<()> {
    if !(v1 > 0.0 && v1.is_finite()) {
        return Err(Error::precondition(format!(
            "V1 must be positive and finite, got {v1}"
        )));
    }
    if !(v2 > 0.0 && v2.is_finite()) {
        return Err(Error::precondition(format!(
            "V2 must be positive and finite, got {v2}"
        )));
    }
    Ok(())
}

/// Sum of one-sided slopes at the three boundary points of the double
/// interval with left endpoint `vt`.
pub fn residual(vd: &VolumeDensity, v1: f64, v2: f64, vt: f64, side: Side) -> Result<f64> {
    Ok(vd.slope(vt, side)? + vd.slope(vt + v1, side)? + vd.slope(vt + v1 + v2, side)?)
}

/// Unique equilibrium offset `Ṽ` for a strictly log-convex density, by
/// bisection on the monotone residual.
pub fn solve_equilibrium_offset(
    vd: &VolumeDensity,
    v1: f64,
    v2: f64,
    opts: &EquilibriumOptions,
) -> Result<f64> {
    check_volumes(v1, v2)?;
    if !vd.is_strict() {
        return Err(Error::precondition(format!(
            "{vd} is not strictly log-convex; use solve_equilibrium_set"
        )));
    }
    if v1 == v2 {
        return Ok(-v1);
    }
    let right = |vt: f64| residual(vd, v1, v2, vt, Side::Right);
    let left = |vt: f64| residual(vd, v1, v2, vt, Side::Left);

    let (mut lo, mut hi) = if v1 < v2 {
        (-0.5 * (v1 + v2), -v1)
    } else {
        (-(v1 + v2), 0.0)
    };
    for _ in 0..64 {
        if right(lo)? < 0.0 {
            break;
        }
        lo -= hi - lo;
    }
    for _ in 0..64 {
        if right(hi)? >= 0.0 {
            break;
        }
        hi += hi - lo;
    }
    let (r_lo, r_hi) = (right(lo)?, right(hi)?);
    if !(r_lo < 0.0 && r_hi >= 0.0) {
        return Err(Error::NonConvergence {
            what: "equilibrium bracket",
            bracket: (lo, hi),
            residuals: (r_lo, r_hi),
        });
    }

    let (lo, hi) = bisect_predicate(lo, hi, |vt| Ok(right(vt)? >= 0.0), |_, _| false)?;

    let tol = opts.tol_eq;
    if vd.is_c1() {
        let (r_lo, r_hi) = (right(lo)?, right(hi)?);
        let (best, r) = if r_lo.abs() < r_hi.abs() {
            (lo, r_lo)
        } else {
            (hi, r_hi)
        };
        if r.abs() <= tol {
            return Ok(best);
        }
        Err(Error::NonConvergence {
            what: "equilibrium residual",
            bracket: (lo, hi),
            residuals: (r_lo, r_hi),
        })
    } else {
        let (l, r) = (left(hi)?, right(hi)?);
        if l <= tol && r >= -tol {
            return Ok(hi);
        }
        Err(Error::NonConvergence {
            what: "one-sided equilibrium",
            bracket: (lo, hi),
            residuals: (l, r),
        })
    }
}

/// The set of equilibrium offsets of a (possibly non-strictly) log-convex
/// density. It is always a closed interval in volume coordinate.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub enum EquilibriumSet {
    /// Every offset is an equilibrium (constant density).
    Unconstrained,
    /// `lo ≤ Ṽ ≤ hi`; either end may be infinite.
    Interval {
        lo: f64,
        hi: f64,
    },
    Empty,
}

impl EquilibriumSet {
    /// Canonical member: the smallest offset, or `−V₁` (middle boundary at
    /// the origin) when every offset qualifies.
    pub fn representative(&self, v1: f64) -> Option<f64> {
        match *self {
            EquilibriumSet::Unconstrained => Some(-v1),
            EquilibriumSet::Interval { lo, hi } => Some(if lo.is_finite() { lo } else { hi }),
            EquilibriumSet::Empty => None,
        }
    }

    pub fn contains(&self, vt: f64, tol: f64) -> bool {
        match *self {
            EquilibriumSet::Unconstrained => true,
            EquilibriumSet::Interval { lo, hi } => vt >= lo - tol && vt <= hi + tol,
            EquilibriumSet::Empty => false,
        }
    }

    pub fn is_point(&self, tol: f64) -> bool {
        matches!(*self, EquilibriumSet::Interval { lo, hi } if hi - lo <= tol)
    }
}

/// All offsets `Ṽ` whose left-slope sum is `≤ 0` and right-slope sum is
/// `≥ 0`. Both sums are nondecreasing in `Ṽ`, so each end is found by
/// bisection.
pub fn solve_equilibrium_set(vd: &VolumeDensity, v1: f64, v2: f64) -> Result<EquilibriumSet> {
    check_volumes(v1, v2)?;
    let total = v1 + v2;
    let (a, b) = (-2.0 * total, total);
    let right = |vt: f64| residual(vd, v1, v2, vt, Side::Right);
    let left = |vt: f64| residual(vd, v1, v2, vt, Side::Left);

    let lo = if right(a)? >= 0.0 {
        f64::NEG_INFINITY
    } else if right(b)? < 0.0 {
        return Ok(EquilibriumSet::Empty);
    } else {
        bisect_predicate(a, b, |vt| Ok(right(vt)? >= 0.0), |_, _| false)?.1
    };
    let hi = if left(b)? <= 0.0 {
        f64::INFINITY
    } else if left(a)? > 0.0 {
        return Ok(EquilibriumSet::Empty);
    } else {
        bisect_predicate(a, b, |vt| Ok(left(vt)? > 0.0), |_, _| false)?.0
    };

    if lo == f64::NEG_INFINITY && hi == f64::INFINITY {
        return Ok(EquilibriumSet::Unconstrained);
    }
    if lo > hi {
        // A single crossing of a continuous residual lands the two ends on
        // adjacent floats in reverse order.
        if lo - hi <= 1e-12 * total.max(1.0) {
            return Ok(EquilibriumSet::Interval { lo: hi, hi: lo });
        }
        return Ok(EquilibriumSet::Empty);
    }
    Ok(EquilibriumSet::Interval { lo, hi })
}

/// Equilibrium offset for any log-convex density: the unique root for
/// strict densities, the canonical member of the equilibrium set
/// otherwise. Equal volumes give `−V₁` exactly.
pub fn equilibrium_offset(
    vd: &VolumeDensity,
    v1: f64,
    v2: f64,
    opts: &EquilibriumOptions,
) -> Result<f64> {
    check_volumes(v1, v2)?;
    if v1 == v2 {
        return Ok(-v1);
    }
    if vd.is_strict() {
        return solve_equilibrium_offset(vd, v1, v2, opts);
    }
    solve_equilibrium_set(vd, v1, v2)?
        .representative(v1)
        .ok_or(Error::NonConvergence {
            what: "equilibrium set is empty",
            bracket: (-2.0 * (v1 + v2), v1 + v2),
            residuals: (f64::NAN, f64::NAN),
        })
}

/// `P₂ = f(Ṽ) + f(Ṽ + V₁) + f(Ṽ + V₁ + V₂)`.
pub fn perimeter_double(vd: &VolumeDensity, v1: f64, v2: f64, vt: f64) -> Result<f64> {
    check_volumes(v1, v2)?;
    Ok(vd.f(vt)? + vd.f(vt + v1)? + vd.f(vt + v1 + v2)?)
}

/// `P₃ = 2 [f(V₁/2) + f((V₁ + V₂)/2)]`.
pub fn perimeter_triple(vd: &VolumeDensity, v1: f64, v2: f64) -> Result<f64> {
    check_volumes(v1, v2)?;
    Ok(2.0 * (vd.f(0.5 * v1)? + vd.f(0.5 * (v1 + v2))?))
}

/// A double interval `[x₁, x₂] ∪ [x₂, x₃]` with volumes `V₁`, `V₂`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct DoubleInterval {
    pub v1: f64,
    pub v2: f64,
    pub vtilde: f64,
    /// Boundary points in volume coordinate.
    pub boundary_volumes: [f64; 3],
    /// Boundary points in position.
    pub endpoints: [f64; 3],
    pub p2: f64,
}

pub fn double_interval(vd: &VolumeDensity, v1: f64, v2: f64, vt: f64) -> Result<DoubleInterval> {
    let boundary_volumes = [vt, vt + v1, vt + v1 + v2];
    let endpoints = [
        vd.position(boundary_volumes[0])?,
        vd.position(boundary_volumes[1])?,
        vd.position(boundary_volumes[2])?,
    ];
    Ok(DoubleInterval {
        v1,
        v2,
        vtilde: vt,
        boundary_volumes,
        endpoints,
        p2: perimeter_double(vd, v1, v2, vt)?,
    })
}

/// The symmetric triple interval: `[−y₁, y₁]` holds `V₁`, each flank
/// `V₂/2`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct TripleInterval {
    pub v1: f64,
    pub v2: f64,
    pub y1: f64,
    pub y2: f64,
    pub p3: f64,
}

pub fn triple_interval(vd: &VolumeDensity, v1: f64, v2: f64) -> Result<TripleInterval> {
    Ok(TripleInterval {
        v1,
        v2,
        y1: vd.position(0.5 * v1)?,
        y2: vd.position(0.5 * (v1 + v2))?,
        p3: perimeter_triple(vd, v1, v2)?,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Classification {
    Double,
    Triple,
    Tie,
}

impl Classification {
    pub fn as_str(&self) -> &'static str {
        match self {
            Classification::Double => "double",
            Classification::Triple => "triple",
            Classification::Tie => "tie",
        }
    }
}

/// `μ(V₁, V₂)` together with the quantities it was computed from. Volumes
/// are stored normalized so that `v1 ≤ v2`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct PerimeterGap {
    pub v1: f64,
    pub v2: f64,
    pub vtilde: f64,
    pub p2: f64,
    pub p3: f64,
    pub mu: f64,
    /// The caller passed `V₁ > V₂` and the volumes were exchanged.
    pub swapped: bool,
}

impl PerimeterGap {
    pub fn tie_tolerance(&self, opts: &EquilibriumOptions) -> f64 {
        opts.tol_tie * self.p2.max(1.0)
    }

    pub fn classify(&self, opts: &EquilibriumOptions) -> Classification {
        if self.mu.abs() <= self.tie_tolerance(opts) {
            Classification::Tie
        } else if self.mu < 0.0 {
            Classification::Triple
        } else {
            Classification::Double
        }
    }
}

pub fn mu(vd: &VolumeDensity, v1: f64, v2: f64, opts: &EquilibriumOptions) -> Result<PerimeterGap> {
    check_volumes(v1, v2)?;
    let (v1, v2, swapped) = if v1 <= v2 {
        (v1, v2, false)
    } else {
        (v2, v1, true)
    };
    let vtilde = equilibrium_offset(vd, v1, v2, opts)?;
    let p2 = perimeter_double(vd, v1, v2, vtilde)?;
    let p3 = perimeter_triple(vd, v1, v2)?;
    Ok(PerimeterGap {
        v1,
        v2,
        vtilde,
        p2,
        p3,
        mu: p3 - p2,
        swapped,
    })
}

/// `(∂μ/∂V₁, ∂μ/∂V₂)` for a `C¹` strictly log-convex density and
/// `V₁ ≤ V₂`.
pub fn mu_partials(
    vd: &VolumeDensity,
    v1: f64,
    v2: f64,
    opts: &EquilibriumOptions,
) -> Result<(f64, f64)> {
    check_volumes(v1, v2)?;
    if !(vd.is_c1() && vd.is_strict()) {
        return Err(Error::precondition(format!(
            "partials of mu need a C1 strictly log-convex density, got {vd}"
        )));
    }
    if v1 > v2 {
        return Err(Error::precondition(format!(
            "partials of mu need V1 <= V2, got {v1} > {v2}"
        )));
    }
    let vt = equilibrium_offset(vd, v1, v2, opts)?;
    let mid = vd.slope(0.5 * (v1 + v2), Side::Right)?;
    let d1 = vd.slope(0.5 * v1, Side::Right)? + mid + vd.slope(vt, Side::Right)?;
    let d2 = mid - vd.slope(vt + v1 + v2, Side::Right)?;
    Ok((d1, d2))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct FirstVariationReport {
    pub x: f64,
    /// Centered difference of `f` as the point moves at rate `1/f`.
    pub finite_difference: f64,
    /// `(log f)'(x)`.
    pub analytic: f64,
    pub difference: f64,
}

/// Compares the rate of change of `f` at a boundary point moved so as to
/// sweep volume at unit speed with `(log f)'`. The point moves about `h` in
/// position each way, so `x` must be at least that far from any kink.
pub fn first_variation_check(vd: &VolumeDensity, x: f64, h: f64) -> Result<FirstVariationReport> {
    if !(h > 0.0) {
        return Err(Error::precondition(format!(
            "step must be positive, got {h}"
        )));
    }
    let v = vd.volume(x)?;
    let dt = h * vd.f(v)?;
    for k in vd.kinks()? {
        if (k - v).abs() <= 2.0 * dt {
            return Err(Error::precondition(format!(
                "x = {x} is within the step of a kink"
            )));
        }
    }
    let finite_difference = (vd.f(v + dt)? - vd.f(v - dt)?) / (2.0 * dt);
    let analytic = vd.slope(v, Side::Right)?;
    Ok(FirstVariationReport {
        x,
        finite_difference,
        analytic,
        difference: finite_difference - analytic,
    })
}
