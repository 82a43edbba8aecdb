//! The tie function `λ(V₁)`: the volume `V₂` at which the double and
//! triple intervals have equal perimeter.

use rayon::prelude::*;
use serde::Serialize;

use crate::density::Family;
use crate::equilibrium::{mu, EquilibriumOptions, PerimeterGap};
use crate::error::{Error, Result};
use crate::roots::bisect_predicate;
use crate::volcoord::VolumeDensity;

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct TieOptions {
    /// The bracket for `V₂` is capped at `max(cap_min, cap_factor · V₁)`.
    pub cap_min: f64,
    pub cap_factor: f64,
    /// Scan density for sign changes along a ray, in samples per decade.
    pub ray_samples_per_decade: usize,
    pub eq: EquilibriumOptions,
}

impl Default for TieOptions {
    fn default() -> Self {
        TieOptions {
            cap_min: 1e6,
            cap_factor: 1e4,
            ray_samples_per_decade: 40,
            eq: EquilibriumOptions::default(),
        }
    }
}

impl TieOptions {
    pub fn cap(&self, v1: f64) -> f64 {
        self.cap_min.max(self.cap_factor * v1)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct TiePoint {
    pub v1: f64,
    pub lambda: f64,
    /// `μ(V₁, λ)`.
    pub mu_residual: f64,
    pub vtilde: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub enum TieOutcome {
    Tie(TiePoint),
    /// `μ` stayed positive up to the bracket cap.
    NoTie {
        cap: f64,
        mu_at_cap: f64,
    },
    Failed(String),
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TieEntry {
    pub v1: f64,
    pub outcome: TieOutcome,
}

impl TieEntry {
    fn from_result(v1: f64, r: Result<TiePoint>) -> Self {
        let outcome = match r {
            Ok(t) => TieOutcome::Tie(t),
            Err(Error::NoTie { cap, mu_at_cap, .. }) => TieOutcome::NoTie { cap, mu_at_cap },
            Err(e) => TieOutcome::Failed(e.to_string()),
        };
        TieEntry { v1, outcome }
    }

    pub fn tie(&self) -> Option<&TiePoint> {
        match &self.outcome {
            TieOutcome::Tie(t) => Some(t),
            _ => None,
        }
    }

    /// `λ`, or `+∞` when no tie was found below the cap.
    pub fn lambda(&self) -> f64 {
        match &self.outcome {
            TieOutcome::Tie(t) => t.lambda,
            TieOutcome::NoTie { .. } => f64::INFINITY,
            TieOutcome::Failed(_) => f64::NAN,
        }
    }
}

fn check_density(vd: &VolumeDensity) -> Result<()> {
    if !vd.strictly_convex_near_origin() {
        return Err(Error::precondition(format!(
            "the tie function needs a density strictly convex near the origin in volume coordinate, got {vd}"
        )));
    }
    Ok(())
}

fn check_v1(v1: f64) -> Result<()> {
    if !(v1 > 0.0 && v1.is_finite()) {
        return Err(Error::precondition(format!(
            "V1 must be positive and finite, got {v1}"
        )));
    }
    Ok(())
}

fn solve(vd: &VolumeDensity, v1: f64, hint: Option<f64>, opts: &TieOptions) -> Result<TiePoint> {
    let gap = |v2: f64| mu(vd, v1, v2, &opts.eq);
    let cap = opts.cap(v1);

    let mut lo = v1;
    if let Some(h) = hint.filter(|h| *h > v1 && *h < cap) {
        if gap(h)?.mu > 0.0 {
            lo = h;
        }
    }
    let at_lo = gap(lo)?;
    if at_lo.mu <= 0.0 {
        return Err(Error::NonConvergence {
            what: "tie bracket: mu is not positive at V2 = V1",
            bracket: (v1, v1),
            residuals: (at_lo.mu, at_lo.mu),
        });
    }
    let mut hi = 2.0 * lo;
    loop {
        if hi >= cap {
            let at_cap = gap(cap)?;
            if at_cap.mu > 0.0 {
                return Err(Error::NoTie {
                    v1,
                    cap,
                    mu_at_cap: at_cap.mu,
                });
            }
            hi = cap;
            break;
        }
        if gap(hi)?.mu <= 0.0 {
            break;
        }
        lo = hi;
        hi *= 2.0;
    }

    let (lo, hi) = bisect_predicate(
        lo,
        hi,
        |v2| Ok(gap(v2)?.mu <= 0.0),
        |a, b| b - a <= 4.0 * f64::EPSILON * b,
    )?;
    let (g_lo, g_hi) = (gap(lo)?, gap(hi)?);
    let best: PerimeterGap = if g_lo.mu.abs() <= g_hi.mu.abs() {
        g_lo
    } else {
        g_hi
    };
    if best.mu.abs() > best.tie_tolerance(&opts.eq) {
        return Err(Error::NonConvergence {
            what: "tie residual",
            bracket: (lo, hi),
            residuals: (g_lo.mu, g_hi.mu),
        });
    }
    Ok(TiePoint {
        v1,
        lambda: best.v2,
        mu_residual: best.mu,
        vtilde: best.vtilde,
    })
}

/// `λ(V₁)`, found by doubling `V₂` from `V₁` until `μ ≤ 0` and then
/// bisecting. Returns [`Error::NoTie`] when `μ` is still positive at the
/// cap.
pub fn lambda_of(vd: &VolumeDensity, v1: f64, opts: &TieOptions) -> Result<TiePoint> {
    check_density(vd)?;
    check_v1(v1)?;
    solve(vd, v1, None, opts)
}

fn check_grid(grid: &[f64]) -> Result<()> {
    for &v in grid {
        check_v1(v)?;
    }
    if grid.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::precondition("V1 grid must be strictly increasing"));
    }
    Ok(())
}

/// Sequential sweep. Each tie seeds the lower bracket of the next point.
pub fn sweep(vd: &VolumeDensity, grid: &[f64], opts: &TieOptions) -> Result<Vec<TieEntry>> {
    check_density(vd)?;
    check_grid(grid)?;
    let mut prev: Option<f64> = None;
    let mut out = Vec::with_capacity(grid.len());
    for &v1 in grid {
        let entry = TieEntry::from_result(v1, solve(vd, v1, prev, opts));
        prev = entry.tie().map(|t| t.lambda);
        out.push(entry);
    }
    Ok(out)
}

/// Parallel sweep of independent cold solves, in grid order.
pub fn sweep_parallel(
    vd: &VolumeDensity,
    grid: &[f64],
    opts: &TieOptions,
) -> Result<Vec<TieEntry>> {
    check_density(vd)?;
    check_grid(grid)?;
    Ok(grid
        .par_iter()
        .map(|&v1| TieEntry::from_result(v1, solve(vd, v1, None, opts)))
        .collect())
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum BoundFamily {
    /// `V₁ (log V₁)^{1/2−ε} < λ < V₁^{4+ε}`.
    Borell,
    /// `V₁ (log V₁)^{1−ε} < λ < V₁^{2+ε}`.
    DoubleExp,
}

impl BoundFamily {
    pub fn of(vd: &VolumeDensity) -> Result<Self> {
        match vd.base().map(|d| d.family()) {
            Some(Family::Borell) => Ok(BoundFamily::Borell),
            Some(Family::DoubleExp) => Ok(BoundFamily::DoubleExp),
            _ => Err(Error::precondition(format!(
                "growth bounds are defined for borell and double-exp, got {vd}"
            ))),
        }
    }

    /// `(log exponent, power exponent)` before applying `ε`.
    fn exponents(self) -> (f64, f64) {
        match self {
            BoundFamily::Borell => (0.5, 4.0),
            BoundFamily::DoubleExp => (1.0, 2.0),
        }
    }

    pub fn lower(self, v1: f64, epsilon: f64) -> f64 {
        v1 * v1.ln().powf(self.exponents().0 - epsilon)
    }

    pub fn upper(self, v1: f64, epsilon: f64) -> f64 {
        v1.powf(self.exponents().1 + epsilon)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BoundSample {
    pub v1: f64,
    /// `+∞` for no tie, NaN for a failed solve.
    pub lambda: f64,
    pub lower: f64,
    pub upper: f64,
    /// `log V₁ > 1`, where the bounds are meant to apply.
    pub in_domain: bool,
    pub lower_ok: bool,
    pub upper_ok: bool,
}

impl BoundSample {
    pub fn passed(&self) -> bool {
        self.lower_ok && self.upper_ok
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BoundReport {
    pub family: BoundFamily,
    pub epsilon: f64,
    pub samples: Vec<BoundSample>,
}

impl BoundReport {
    /// Every in-domain sample passed.
    pub fn all_passed(&self) -> bool {
        self.samples
            .iter()
            .filter(|s| s.in_domain)
            .all(BoundSample::passed)
    }
}

pub fn check_bounds(
    vd: &VolumeDensity,
    grid: &[f64],
    epsilon: f64,
    opts: &TieOptions,
) -> Result<BoundReport> {
    let family = BoundFamily::of(vd)?;
    if !(epsilon > 0.0 && epsilon.is_finite()) {
        return Err(Error::precondition(format!(
            "epsilon must be positive, got {epsilon}"
        )));
    }
    let entries = sweep_parallel(vd, grid, opts)?;
    let samples = entries
        .iter()
        .map(|e| {
            let lambda = e.lambda();
            let lower = family.lower(e.v1, epsilon);
            let upper = family.upper(e.v1, epsilon);
            BoundSample {
                v1: e.v1,
                lambda,
                lower,
                upper,
                in_domain: e.v1.ln() > 1.0,
                lower_ok: lambda > lower,
                upper_ok: lambda < upper,
            }
        })
        .collect();
    Ok(BoundReport {
        family,
        epsilon,
        samples,
    })
}

/// Values of `V₁` in `[lo, hi]` where `μ(V₁, r·V₁)` changes sign, by a
/// geometric scan and bisection in `log V₁`.
pub fn intersections_with_ray(
    vd: &VolumeDensity,
    r: f64,
    range: (f64, f64),
    opts: &TieOptions,
) -> Result<Vec<f64>> {
    let (lo, hi) = range;
    if !(r >= 1.0 && r.is_finite()) {
        return Err(Error::precondition(format!(
            "ray ratio must be at least 1, got {r}"
        )));
    }
    check_v1(lo)?;
    check_v1(hi)?;
    if lo >= hi {
        return Err(Error::precondition(format!("empty V1 range [{lo}, {hi}]")));
    }
    let (a, b) = (lo.ln(), hi.ln());
    let n = ((b - a) / std::f64::consts::LN_10 * opts.ray_samples_per_decade as f64)
        .ceil()
        .max(1.0) as usize;
    let knots: Vec<f64> = (0..=n).map(|i| a + (b - a) * i as f64 / n as f64).collect();
    let sign = |t: f64| -> Result<bool> {
        let v1 = t.exp();
        Ok(mu(vd, v1, r * v1, &opts.eq)?.mu > 0.0)
    };
    let signs: Vec<bool> = knots.par_iter().map(|&t| sign(t)).collect::<Result<_>>()?;

    let mut out = Vec::new();
    for i in 0..n {
        if signs[i] != signs[i + 1] {
            let first = signs[i];
            let (l, h) = bisect_predicate(
                knots[i],
                knots[i + 1],
                |t| Ok(sign(t)? != first),
                |l, h| h - l <= 1e-12,
            )?;
            out.push((0.5 * (l + h)).exp());
        }
    }
    Ok(out)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RatioProbe {
    /// `(V₁, λ(V₁)/V₁)`.
    pub samples: Vec<(f64, f64)>,
}

impl RatioProbe {
    pub fn last_exceeds_first(&self) -> bool {
        match (self.samples.first(), self.samples.last()) {
            (Some(a), Some(b)) => self.samples.len() > 1 && b.1 > a.1,
            _ => false,
        }
    }

    pub fn increasing(&self) -> bool {
        self.samples.windows(2).all(|w| w[1].1 > w[0].1)
    }
}

/// `λ(V₁)/V₁` along the grid. Any point without a tie aborts the probe.
pub fn ratio_divergence_probe(
    vd: &VolumeDensity,
    grid: &[f64],
    opts: &TieOptions,
) -> Result<RatioProbe> {
    check_density(vd)?;
    check_grid(grid)?;
    let mut samples = Vec::with_capacity(grid.len());
    for &v1 in grid {
        let t = lambda_of(vd, v1, opts)?;
        samples.push((v1, t.lambda / v1));
    }
    Ok(RatioProbe { samples })
}
