//! Adaptive Gauss–Kronrod (7, 15) quadrature with forced subdivision at
//! known kinks of the integrand.
//!
//! Integrands are fallible so that density overflow propagates as an
//! [`Error::Range`](crate::Error::Range) instead of producing `inf`.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use crate::error::{Error, Result};

const XGK: [f64; 8] = [
    0.991_455_371_120_812_639_206_854_697_526_329,
    0.949_107_912_342_758_524_526_189_684_047_851,
    0.864_864_423_359_769_072_789_712_788_640_926,
    0.741_531_185_599_394_439_863_864_773_280_788,
    0.586_087_235_467_691_130_294_144_845_693_013,
    0.405_845_151_377_397_166_906_606_412_076_961,
    0.207_784_955_007_898_467_600_689_403_773_245,
    0.0,
];

const WGK: [f64; 8] = [
    0.022_935_322_010_529_224_963_732_008_058_970,
    0.063_092_092_629_978_553_290_700_663_189_204,
    0.104_790_010_322_250_183_839_876_322_541_518,
    0.140_653_259_715_525_918_745_189_590_510_238,
    0.169_004_726_639_267_902_826_583_426_598_550,
    0.190_350_578_064_785_409_913_256_402_421_014,
    0.204_432_940_075_298_892_414_161_999_234_649,
    0.209_482_141_084_727_828_012_999_174_891_714,
];

const WG: [f64; 4] = [
    0.129_484_966_168_869_693_270_611_432_679_082,
    0.279_705_391_489_276_667_901_467_771_423_780,
    0.381_830_050_505_118_944_950_369_775_488_975,
    0.417_959_183_673_469_387_755_102_040_816_327,
];

/// Tolerances for [`Quadrature::integrate`].
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Quadrature {
    pub abs_tol: f64,
    pub rel_tol: f64,
    pub max_intervals: usize,
}

impl Default for Quadrature {
    fn default() -> Self {
        Quadrature {
            abs_tol: 1e-12,
            rel_tol: 1e-12,
            max_intervals: 2000,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Estimate {
    pub value: f64,
    pub error: f64,
    pub intervals: usize,
}

#[derive(Clone, Copy, Debug)]
struct Panel {
    a: f64,
    b: f64,
    value: f64,
    error: f64,
    resabs: f64,
}

impl PartialEq for Panel {
    fn eq(&self, other: &Self) -> bool {
        self.error == other.error
    }
}
impl Eq for Panel {}
impl PartialOrd for Panel {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Panel {
    fn cmp(&self, other: &Self) -> Ordering {
        self.error.total_cmp(&other.error)
    }
}

fn gk15<F>(f: &F, a: f64, b: f64) -> Result<Panel>
where
    F: Fn(f64) -> Result<f64>,
{
    let center = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let fc = f(center)?;
    let mut kronrod = fc * WGK[7];
    let mut gauss = fc * WG[3];
    let mut resabs = fc.abs() * WGK[7];
    for (j, (&x, &w)) in XGK[..7].iter().zip(&WGK[..7]).enumerate() {
        let dx = half * x;
        let f1 = f(center - dx)?;
        let f2 = f(center + dx)?;
        kronrod += w * (f1 + f2);
        resabs += w * (f1.abs() + f2.abs());
        if j % 2 == 1 {
            gauss += WG[j / 2] * (f1 + f2);
        }
    }
    Ok(Panel {
        a,
        b,
        value: kronrod * half,
        error: ((kronrod - gauss) * half).abs(),
        resabs: resabs * half.abs(),
    })
}

impl Quadrature {
    pub fn with_tol(tol: f64) -> Self {
        Quadrature {
            abs_tol: tol,
            rel_tol: tol,
            ..Default::default()
        }
    }

    /// Integrates `f` over `[a, b]`, splitting first at every point of
    /// `kinks` strictly inside the interval. `a > b` is allowed and flips
    /// the sign.
    pub fn integrate<F>(&self, f: F, a: f64, b: f64, kinks: &[f64]) -> Result<Estimate>
    where
        F: Fn(f64) -> Result<f64>,
    {
        if a == b {
            return Ok(Estimate {
                value: 0.0,
                error: 0.0,
                intervals: 0,
            });
        }
        if b < a {
            let est = self.integrate(f, b, a, kinks)?;
            return Ok(Estimate {
                value: -est.value,
                ..est
            });
        }

        let mut cuts = vec![a];
        let mut inner: Vec<f64> = kinks.iter().copied().filter(|&k| k > a && k < b).collect();
        inner.sort_by(f64::total_cmp);
        inner.dedup();
        cuts.extend(inner);
        cuts.push(b);

        let mut heap = BinaryHeap::new();
        for w in cuts.windows(2) {
            heap.push(gk15(&f, w[0], w[1])?);
        }

        loop {
            let (value, error, resabs) = heap.iter().fold((0.0, 0.0, 0.0), |acc, p| {
                (acc.0 + p.value, acc.1 + p.error, acc.2 + p.resabs)
            });
            // 50 ulp of the absolute integral is the best the rule can resolve.
            let target = self
                .abs_tol
                .max(self.rel_tol * value.abs())
                .max(50.0 * f64::EPSILON * resabs);
            if error <= target {
                return Ok(Estimate {
                    value,
                    error,
                    intervals: heap.len(),
                });
            }
            if heap.len() >= self.max_intervals {
                return Err(Error::NonConvergence {
                    what: "adaptive quadrature",
                    bracket: (a, b),
                    residuals: (error, target),
                });
            }
            let worst = heap.pop().expect("heap is nonempty");
            let mid = 0.5 * (worst.a + worst.b);
            if mid <= worst.a || mid >= worst.b {
                // Panel cannot be split further in floating point.
                return Ok(Estimate {
                    value,
                    error,
                    intervals: heap.len() + 1,
                });
            }
            heap.push(gk15(&f, worst.a, mid)?);
            heap.push(gk15(&f, mid, worst.b)?);
        }
    }
}
