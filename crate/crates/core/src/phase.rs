//! Sign of `μ` over a grid of volume pairs.

use std::io::Write;

use rayon::prelude::*;
use serde::Serialize;

use crate::equilibrium::{mu, Classification, EquilibriumOptions, PerimeterGap};
use crate::error::{Error, Result};
use crate::format::float;
use crate::volcoord::VolumeDensity;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PhaseCell {
    pub v1: f64,
    pub v2: f64,
    pub gap: Option<PerimeterGap>,
    pub class: Option<Classification>,
    pub error: Option<String>,
}

impl PhaseCell {
    pub fn class_str(&self) -> &'static str {
        self.class.map_or("error", |c| c.as_str())
    }
}

/// Cells for every `(V₁, V₂)` in the grid product with `V₁ ≤ V₂`, ordered
/// with `V₁` outer and `V₂` inner.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PhaseMap {
    pub v1_grid: Vec<f64>,
    pub v2_grid: Vec<f64>,
    pub cells: Vec<PhaseCell>,
}

pub const CSV_HEADER: &str = "v1,v2,vtilde,p2,p3,mu,class";

impl PhaseMap {
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        let io = |e| Error::Io {
            path: "<phase map>".into(),
            source: e,
        };
        writeln!(w, "{CSV_HEADER}").map_err(io)?;
        for c in &self.cells {
            let (vt, p2, p3, m) = c.gap.map_or((f64::NAN, f64::NAN, f64::NAN, f64::NAN), |g| {
                (g.vtilde, g.p2, g.p3, g.mu)
            });
            writeln!(
                w,
                "{},{},{},{},{},{},{}",
                float(c.v1),
                float(c.v2),
                float(vt),
                float(p2),
                float(p3),
                float(m),
                c.class_str()
            )
            .map_err(io)?;
        }
        Ok(())
    }

    pub fn cell(&self, v1: f64, v2: f64) -> Option<&PhaseCell> {
        self.cells.iter().find(|c| c.v1 == v1 && c.v2 == v2)
    }
}

/// `steps` evenly spaced points from `min` to `max`; a single point when
/// the two coincide.
pub fn linear_grid(min: f64, max: f64, steps: usize) -> Result<Vec<f64>> {
    if !(min.is_finite() && max.is_finite() && min <= max) {
        return Err(Error::precondition(format!("invalid range [{min}, {max}]")));
    }
    if steps == 0 {
        return Err(Error::precondition("a grid needs at least one step"));
    }
    if min == max || steps == 1 {
        return Ok(vec![min]);
    }
    Ok((0..steps)
        .map(|i| {
            if i + 1 == steps {
                max
            } else {
                min + (max - min) * (i as f64 / (steps - 1) as f64)
            }
        })
        .collect())
}

/// `n` geometrically spaced points from `min` to `max`.
pub fn geometric_grid(min: f64, max: f64, n: usize) -> Result<Vec<f64>> {
    if !(min > 0.0 && min <= max && max.is_finite()) {
        return Err(Error::precondition(format!(
            "invalid geometric range [{min}, {max}]"
        )));
    }
    Ok(linear_grid(min.ln(), max.ln(), n)?
        .into_iter()
        .enumerate()
        .map(|(i, t)| {
            if i == 0 {
                min
            } else if i + 1 == n {
                max
            } else {
                t.exp()
            }
        })
        .collect())
}

/// Evaluates `μ` on every cell with `V₁ ≤ V₂` in parallel. Failures are
/// recorded in the cell and do not stop the sweep.
pub fn phase_map(
    vd: &VolumeDensity,
    v1_grid: &[f64],
    v2_grid: &[f64],
    opts: &EquilibriumOptions,
) -> PhaseMap {
    let pairs: Vec<(f64, f64)> = v1_grid
        .iter()
        .flat_map(|&a| {
            v2_grid
                .iter()
                .filter(move |&&b| a <= b)
                .map(move |&b| (a, b))
        })
        .collect();
    let cells = pairs
        .par_iter()
        .map(|&(v1, v2)| match mu(vd, v1, v2, opts) {
            Ok(g) => PhaseCell {
                v1,
                v2,
                class: Some(g.classify(opts)),
                gap: Some(g),
                error: None,
            },
            Err(e) => PhaseCell {
                v1,
                v2,
                gap: None,
                class: None,
                error: Some(e.to_string()),
            },
        })
        .collect();
    PhaseMap {
        v1_grid: v1_grid.to_vec(),
        v2_grid: v2_grid.to_vec(),
        cells,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::density::LogDensity;

    #[test]
    fn grids() {
        assert_eq!(linear_grid(2.0, 2.0, 5).unwrap(), vec![2.0]);
        assert_eq!(linear_grid(0.0, 1.0, 3).unwrap(), vec![0.0, 0.5, 1.0]);
        assert!(linear_grid(1.0, 0.0, 3).is_err());
        let g = geometric_grid(1e-3, 1e2, 6).unwrap();
        assert_eq!((g[0], g[5]), (1e-3, 1e2));
        assert!((g[3] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn only_upper_triangle_in_order() {
        let vd = VolumeDensity::from(LogDensity::constant(1.0).unwrap());
        let g = [1.0, 2.0, 3.0];
        let m = phase_map(&vd, &g, &g, &EquilibriumOptions::default());
        let pairs: Vec<(f64, f64)> = m.cells.iter().map(|c| (c.v1, c.v2)).collect();
        assert_eq!(
            pairs,
            vec![
                (1.0, 1.0),
                (1.0, 2.0),
                (1.0, 3.0),
                (2.0, 2.0),
                (2.0, 3.0),
                (3.0, 3.0)
            ]
        );
        assert!(m
            .cells
            .iter()
            .all(|c| c.class == Some(Classification::Double)));
    }

    #[test]
    fn failures_are_in_band() {
        let vd = VolumeDensity::from(LogDensity::borell());
        let m = phase_map(&vd, &[0.0, 1.0], &[1.0], &EquilibriumOptions::default());
        assert_eq!(m.cells[0].class_str(), "error");
        assert_eq!(m.cells[1].class_str(), "double");
        let mut out = Vec::new();
        m.write_csv(&mut out).unwrap();
        let text = String::from_utf8(out).unwrap();
        assert!(text.starts_with(CSV_HEADER));
        assert!(text
            .lines()
            .nth(1)
            .unwrap()
            .ends_with("nan,nan,nan,nan,error"));
    }
}
