//! Bracketing root finders used by the coordinate change and the
//! equilibrium and tie solvers.

use crate::error::{Error, Result};

const MAX_BISECTIONS: usize = 400;

/// Midpoint that never overflows and stays inside `[lo, hi]`.
#[inline]
fn midpoint(lo: f64, hi: f64) -> f64 {
    lo + 0.5 * (hi - lo)
}

/// Bisection on a monotone predicate with `pred(lo) == false` and
/// `pred(hi) == true`. Returns the final bracket, which is two adjacent
/// floats unless `stop(lo, hi)` ends the search earlier.
pub fn bisect_predicate<P, S>(mut lo: f64, mut hi: f64, mut pred: P, stop: S) -> Result<(f64, f64)>
where
    P: FnMut(f64) -> Result<bool>,
    S: Fn(f64, f64) -> bool,
{
    for _ in 0..MAX_BISECTIONS {
        if stop(lo, hi) {
            break;
        }
        let mid = midpoint(lo, hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if pred(mid)? {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok((lo, hi))
}

/// Newton's method for an increasing `g` with known derivative, guarded by
/// the bracket `[lo, hi]` where `g(lo) <= 0 <= g(hi)`. Falls back to
/// bisection whenever a Newton step leaves the bracket.
pub fn safeguarded_newton<G>(mut g: G, mut lo: f64, mut hi: f64, x0: f64, tol: f64) -> Result<f64>
where
    G: FnMut(f64) -> Result<(f64, f64)>,
{
    let mut x = if x0 > lo && x0 < hi {
        x0
    } else {
        midpoint(lo, hi)
    };
    let mut best = (f64::INFINITY, x);
    for _ in 0..MAX_BISECTIONS {
        let (value, slope) = g(x)?;
        if value.abs() < best.0 {
            best = (value.abs(), x);
        }
        if value.abs() <= tol {
            return Ok(x);
        }
        if value < 0.0 {
            lo = x;
        } else {
            hi = x;
        }
        let newton = x - value / slope;
        let next = if slope > 0.0 && newton > lo && newton < hi {
            newton
        } else {
            midpoint(lo, hi)
        };
        if next == x {
            return Ok(best.1);
        }
        if midpoint(lo, hi) <= lo || midpoint(lo, hi) >= hi {
            // Bracket collapsed to adjacent floats.
            return Ok(best.1);
        }
        x = next;
    }
    Err(Error::NonConvergence {
        what: "safeguarded Newton",
        bracket: (lo, hi),
        residuals: (best.0, tol),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bisection_reaches_adjacent_floats() {
        let (lo, hi) = bisect_predicate(0.0, 2.0, |x| Ok(x * x >= 2.0), |_, _| false).unwrap();
        assert!(lo < hi);
        assert_eq!(lo.next_up(), hi);
        assert!((hi - 2f64.sqrt()).abs() <= 4.0 * f64::EPSILON);
    }

    #[test]
    fn newton_finds_cube_root() {
        let x = safeguarded_newton(
            |x| Ok((x * x * x - 10.0, 3.0 * x * x)),
            0.0,
            10.0,
            0.0,
            1e-14,
        )
        .unwrap();
        assert!((x - 10f64.cbrt()).abs() < 1e-14);
    }

    #[test]
    fn newton_survives_flat_start() {
        // Zero slope at the initial guess forces a bisection step.
        let x = safeguarded_newton(
            |x| Ok((x * x * x - 1.0, 3.0 * x * x)),
            -2.0,
            3.0,
            0.0,
            1e-13,
        )
        .unwrap();
        assert!((x - 1.0).abs() < 1e-12);
    }
}
