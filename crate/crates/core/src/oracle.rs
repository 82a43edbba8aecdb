//! Brute-force minimization over discretized double-bubble configurations.
//!
//! The search runs in volume coordinate, so every candidate encloses the
//! prescribed volumes exactly. Candidates are the double interval with
//! either labeling and the three-block configurations where one bubble is
//! split around the other, each placed at every anchor of a grid over
//! `W ∈ [−(V₁ + V₂), 0]`.

use std::cmp::Ordering;
use std::fmt;

use rayon::prelude::*;
use serde::Serialize;

use crate::density::Side;
use crate::error::{Error, Result};
use crate::volcoord::VolumeDensity;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize)]
pub enum Label {
    One,
    Two,
    Empty,
}

impl Label {
    fn as_str(&self) -> &'static str {
        match self {
            Label::One => "1",
            Label::Two => "2",
            Label::Empty => "0",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Block {
    pub label: Label,
    pub volume: f64,
}

impl Block {
    pub fn new(label: Label, volume: f64) -> Self {
        Block { label, volume }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum ShapeKind {
    Double,
    Triple,
    Other,
}

impl ShapeKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            ShapeKind::Double => "double",
            ShapeKind::Triple => "triple",
            ShapeKind::Other => "other",
        }
    }
}

/// Blocks laid out left to right from `anchor`, in volume coordinate.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Configuration {
    pub anchor: f64,
    pub blocks: Vec<Block>,
}

impl Configuration {
    /// Drops empty-volume blocks, merges neighbours with the same label and
    /// trims empty blocks at either end.
    pub fn new(anchor: f64, blocks: impl IntoIterator<Item = Block>) -> Self {
        let mut anchor = anchor;
        let mut out: Vec<Block> = Vec::new();
        for b in blocks {
            if b.volume <= 0.0 {
                continue;
            }
            match out.last_mut() {
                Some(last) if last.label == b.label => last.volume += b.volume,
                _ => out.push(b),
            }
        }
        while out.first().is_some_and(|b| b.label == Label::Empty) {
            anchor += out.remove(0).volume;
        }
        while out.last().is_some_and(|b| b.label == Label::Empty) {
            out.pop();
        }
        Configuration {
            anchor,
            blocks: out,
        }
    }

    pub fn boundary_volumes(&self) -> Vec<f64> {
        let mut v = self.anchor;
        let mut out = Vec::with_capacity(self.blocks.len() + 1);
        out.push(v);
        for b in &self.blocks {
            v += b.volume;
            out.push(v);
        }
        out
    }

    pub fn boundary_positions(&self, vd: &VolumeDensity) -> Result<Vec<f64>> {
        self.boundary_volumes()
            .into_iter()
            .map(|v| vd.position(v))
            .collect()
    }

    /// Weighted perimeter: `f` summed over the boundary points.
    pub fn perimeter(&self, vd: &VolumeDensity) -> Result<f64> {
        self.boundary_volumes().into_iter().map(|v| vd.f(v)).sum()
    }

    pub fn label_volume(&self, label: Label) -> f64 {
        self.blocks
            .iter()
            .filter(|b| b.label == label)
            .map(|b| b.volume)
            .sum()
    }

    pub fn shape(&self) -> ShapeKind {
        let labels: Vec<Label> = self.blocks.iter().map(|b| b.label).collect();
        match labels.as_slice() {
            [a, b] if a != b && !labels.contains(&Label::Empty) => ShapeKind::Double,
            [a, b, c] if a == c && a != b && !labels.contains(&Label::Empty) => ShapeKind::Triple,
            _ => ShapeKind::Other,
        }
    }

    /// Compact text form, e.g. `-1.5;1:1|2:4`.
    pub fn encode(&self) -> String {
        let blocks: Vec<String> = self
            .blocks
            .iter()
            .map(|b| format!("{}:{}", b.label.as_str(), b.volume))
            .collect();
        format!("{};{}", self.anchor, blocks.join("|"))
    }
}

impl fmt::Display for Configuration {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.encode())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct OracleGrid {
    /// Number of anchors over `[−(V₁ + V₂), 0]`, endpoints included.
    pub anchors: usize,
    /// Number of split fractions over `[0, 1]`, endpoints included. The
    /// endpoints reproduce double intervals and are skipped.
    pub splits: usize,
    /// Largest acceptable anchor step, in volume units.
    pub max_anchor_step: Option<f64>,
}

impl Default for OracleGrid {
    fn default() -> Self {
        OracleGrid {
            anchors: 2001,
            splits: 201,
            max_anchor_step: None,
        }
    }
}

impl OracleGrid {
    pub fn anchor_step(&self, total: f64) -> f64 {
        total / (self.anchors - 1) as f64
    }

    pub fn split_step(&self) -> f64 {
        1.0 / (self.splits - 1) as f64
    }

    fn anchor(&self, total: f64, k: usize) -> f64 {
        -total + total * (k as f64 / (self.anchors - 1) as f64)
    }

    fn split(&self, j: usize) -> f64 {
        j as f64 / (self.splits - 1) as f64
    }

    fn check(&self, total: f64) -> Result<()> {
        if self.anchors < 2 || self.splits < 3 {
            return Err(Error::precondition(format!(
                "oracle grid needs at least 2 anchors and 3 splits, got {} and {}",
                self.anchors, self.splits
            )));
        }
        if let Some(budget) = self.max_anchor_step {
            let step = self.anchor_step(total);
            if step > budget {
                return Err(Error::Resolution(format!(
                    "anchor step {step} exceeds the budget {budget}; use at least {} anchors",
                    (total / budget).ceil() as usize + 1
                )));
            }
        }
        Ok(())
    }
}

/// Which candidate family a configuration came from.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize)]
pub enum CandidateFamily {
    /// `[V₁ | V₂]`.
    DoubleOneTwo,
    /// `[V₂ | V₁]`.
    DoubleTwoOne,
    /// `[t·V₁ | V₂ | (1−t)·V₁]`.
    SplitOne,
    /// `[t·V₂ | V₁ | (1−t)·V₂]`.
    SplitTwo,
}

impl CandidateFamily {
    pub fn shape(self) -> ShapeKind {
        match self {
            CandidateFamily::DoubleOneTwo | CandidateFamily::DoubleTwoOne => ShapeKind::Double,
            CandidateFamily::SplitOne | CandidateFamily::SplitTwo => ShapeKind::Triple,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Candidate {
    pub family: CandidateFamily,
    pub anchor_index: usize,
    /// Index into the split grid; `None` for double intervals.
    pub split_index: Option<usize>,
    pub anchor: f64,
    pub split: Option<f64>,
    pub perimeter: f64,
}

impl Candidate {
    fn key(&self) -> (usize, usize, CandidateFamily) {
        (
            self.anchor_index,
            self.split_index.unwrap_or(0),
            self.family,
        )
    }

    /// Deterministic order: perimeter, then anchor, then split, then family.
    fn cmp(&self, other: &Self) -> Ordering {
        self.perimeter
            .total_cmp(&other.perimeter)
            .then_with(|| self.key().cmp(&other.key()))
    }

    fn min(a: Option<Self>, b: Option<Self>) -> Option<Self> {
        match (a, b) {
            (Some(a), Some(b)) => Some(if b.cmp(&a) == Ordering::Less { b } else { a }),
            (a, None) => a,
            (None, b) => b,
        }
    }

    pub fn configuration(&self, v1: f64, v2: f64) -> Configuration {
        let t = self.split.unwrap_or(0.0);
        let blocks = match self.family {
            CandidateFamily::DoubleOneTwo => {
                vec![Block::new(Label::One, v1), Block::new(Label::Two, v2)]
            }
            CandidateFamily::DoubleTwoOne => {
                vec![Block::new(Label::Two, v2), Block::new(Label::One, v1)]
            }
            CandidateFamily::SplitOne => vec![
                Block::new(Label::One, t * v1),
                Block::new(Label::Two, v2),
                Block::new(Label::One, (1.0 - t) * v1),
            ],
            CandidateFamily::SplitTwo => vec![
                Block::new(Label::Two, t * v2),
                Block::new(Label::One, v1),
                Block::new(Label::Two, (1.0 - t) * v2),
            ],
        };
        Configuration::new(self.anchor, blocks)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct OracleResult {
    pub v1: f64,
    pub v2: f64,
    pub best: Configuration,
    pub best_perimeter: f64,
    pub kind: ShapeKind,
    pub best_double: Candidate,
    pub best_triple: Candidate,
    pub anchor_step: f64,
    pub split_step: f64,
    /// Best perimeter of the other shape minus the overall best.
    pub runner_up_gap: f64,
    /// Largest `f` seen over the anchor window `[−(V₁ + V₂), V₁ + V₂]`.
    pub max_density: f64,
}

impl OracleResult {
    /// Bound on how far the discrete optimum's boundary points sit from a
    /// continuous optimum, in volume.
    pub fn boundary_slack(&self) -> f64 {
        self.anchor_step + self.split_step * self.v1.max(self.v2)
    }
}

fn check_volumes(v1: f64, v2: f64) -> Result<()> {
    for (name, v) in [("V1", v1), ("V2", v2)] {
        if !(v > 0.0 && v.is_finite()) {
            return Err(Error::precondition(format!(
                "{name} must be positive and finite, got {v}"
            )));
        }
    }
    Ok(())
}

/// Discrete minimum over contiguous double and triple candidates.
pub fn enumerate_contiguous(
    vd: &VolumeDensity,
    v1: f64,
    v2: f64,
    grid: &OracleGrid,
) -> Result<OracleResult> {
    check_volumes(v1, v2)?;
    let total = v1 + v2;
    grid.check(total)?;

    let per_anchor = |k: usize| -> Result<(Option<Candidate>, Option<Candidate>, f64)> {
        let w = grid.anchor(total, k);
        let f_left = vd.f(w)?;
        let f_right = vd.f(w + total)?;
        let ends = f_left + f_right;
        let double = |family, inner: f64| -> Result<Candidate> {
            Ok(Candidate {
                family,
                anchor_index: k,
                split_index: None,
                anchor: w,
                split: None,
                perimeter: ends + vd.f(w + inner)?,
            })
        };
        let best_double = Candidate::min(
            Some(double(CandidateFamily::DoubleOneTwo, v1)?),
            Some(double(CandidateFamily::DoubleTwoOne, v2)?),
        );
        let mut best_triple: Option<Candidate> = None;
        for j in 1..grid.splits - 1 {
            let t = grid.split(j);
            for (family, outer, inner) in [
                (CandidateFamily::SplitOne, v1, v2),
                (CandidateFamily::SplitTwo, v2, v1),
            ] {
                let a = w + t * outer;
                let c = Candidate {
                    family,
                    anchor_index: k,
                    split_index: Some(j),
                    anchor: w,
                    split: Some(t),
                    perimeter: ends + vd.f(a)? + vd.f(a + inner)?,
                };
                best_triple = Candidate::min(best_triple, Some(c));
            }
        }
        Ok((best_double, best_triple, f_left.max(f_right)))
    };

    let (best_double, best_triple, max_density) = (0..grid.anchors)
        .into_par_iter()
        .map(per_anchor)
        .try_reduce(
            || (None, None, 0.0),
            |a, b| {
                Ok((
                    Candidate::min(a.0, b.0),
                    Candidate::min(a.1, b.1),
                    a.2.max(b.2),
                ))
            },
        )?;
    let best_double = best_double.expect("at least one anchor");
    let best_triple = best_triple.expect("at least one split");

    let (best, other) = if best_triple.cmp(&best_double) == Ordering::Less {
        (best_triple, best_double)
    } else {
        (best_double, best_triple)
    };
    Ok(OracleResult {
        v1,
        v2,
        best: best.configuration(v1, v2),
        best_perimeter: best.perimeter,
        kind: best.family.shape(),
        best_double,
        best_triple,
        anchor_step: grid.anchor_step(total),
        split_step: grid.split_step(),
        runner_up_gap: other.perimeter - best.perimeter,
        max_density,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct GapCheck {
    pub gap: f64,
    /// Interior boundary of the best configuration where the gap went.
    pub boundary_index: usize,
    pub gapped_perimeter: f64,
    pub contiguous_perimeter: f64,
}

impl GapCheck {
    pub fn strictly_worse(&self) -> bool {
        self.gapped_perimeter > self.contiguous_perimeter
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct StructureReport {
    pub oracle: OracleResult,
    /// Label of the middle block of the best triple.
    pub triple_middle: Label,
    pub triple_split: f64,
    pub triple_symmetric: bool,
    pub smaller_in_middle: bool,
    /// Middle boundary of the best double interval.
    pub double_middle_volume: f64,
    pub double_middle_position: f64,
    pub gaps: Vec<GapCheck>,
}

impl StructureReport {
    pub fn gaps_strictly_worse(&self) -> bool {
        self.gaps.iter().all(GapCheck::strictly_worse)
    }
}

/// Structural checks on the oracle optimum: symmetry of the best triple,
/// the smaller bubble in its middle, and that opening an empty gap at any
/// interior boundary of the best configuration costs perimeter even after
/// re-optimizing the anchor.
pub fn verify_structure(
    vd: &VolumeDensity,
    v1: f64,
    v2: f64,
    grid: &OracleGrid,
    gaps: &[f64],
) -> Result<StructureReport> {
    let oracle = enumerate_contiguous(vd, v1, v2, grid)?;
    let triple = oracle.best_triple.configuration(v1, v2);
    let triple_middle = triple
        .blocks
        .get(1)
        .map(|b| b.label)
        .unwrap_or(Label::Empty);
    let triple_split = oracle.best_triple.split.unwrap_or(f64::NAN);
    let triple_symmetric = (triple_split - 0.5).abs() <= oracle.split_step * (1.0 + 1e-9);
    let smaller_in_middle = match v1.partial_cmp(&v2) {
        Some(Ordering::Less) => triple_middle == Label::One,
        Some(Ordering::Greater) => triple_middle == Label::Two,
        _ => true,
    };
    let double = oracle.best_double.configuration(v1, v2);
    let double_middle_volume = double.boundary_volumes()[1];
    let double_middle_position = vd.position(double_middle_volume)?;

    let mut checks = Vec::new();
    for &gap in gaps {
        if !(gap > 0.0 && gap.is_finite()) {
            return Err(Error::precondition(format!(
                "gap must be positive, got {gap}"
            )));
        }
        for i in 1..oracle.best.blocks.len() {
            let mut blocks = oracle.best.blocks.clone();
            blocks.insert(i, Block::new(Label::Empty, gap));
            let span: f64 = blocks.iter().map(|b| b.volume).sum();
            let gapped = (0..grid.anchors)
                .into_par_iter()
                .map(|k| {
                    let w = grid.anchor(span, k);
                    Configuration {
                        anchor: w,
                        blocks: blocks.clone(),
                    }
                    .perimeter(vd)
                })
                .try_reduce(|| f64::INFINITY, |a, b| Ok(a.min(b)))?;
            checks.push(GapCheck {
                gap,
                boundary_index: i,
                gapped_perimeter: gapped,
                contiguous_perimeter: oracle.best_perimeter,
            });
        }
    }

    Ok(StructureReport {
        oracle,
        triple_middle,
        triple_split,
        triple_symmetric,
        smaller_in_middle,
        double_middle_volume,
        double_middle_position,
        gaps: checks,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SubSum {
    /// First and last boundary index of the stretch.
    pub first: usize,
    pub last: usize,
    /// Left slopes taken at each boundary shifted down by the slack.
    pub left_sum: f64,
    /// Right slopes taken at each boundary shifted up by the slack.
    pub right_sum: f64,
}

impl SubSum {
    pub fn ok(&self) -> bool {
        let tol = 1e-12 * (1.0 + self.left_sum.abs().max(self.right_sum.abs()));
        self.left_sum <= tol && self.right_sum >= -tol
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SumReport {
    pub slack: f64,
    /// The full sum comes first; the rest are stretches flanked by the
    /// same region.
    pub sums: Vec<SubSum>,
}

impl SumReport {
    pub fn all_ok(&self) -> bool {
        self.sums.iter().all(SubSum::ok)
    }

    pub fn full(&self) -> &SubSum {
        &self.sums[0]
    }
}

/// Equilibrium sums for a configuration that sits within `slack` (in
/// volume) of a minimizer. For each stretch of boundary points flanked on
/// both sides by the same region, `0` must lie between the left-slope sum
/// and the right-slope sum. The slack widens the two sums monotonically.
pub fn equilibrium_sum_check(
    vd: &VolumeDensity,
    config: &Configuration,
    slack: f64,
) -> Result<SumReport> {
    if !(slack >= 0.0 && slack.is_finite()) {
        return Err(Error::precondition(format!(
            "slack must be nonnegative, got {slack}"
        )));
    }
    let points = config.boundary_volumes();
    let left: Vec<f64> = points
        .iter()
        .map(|&v| vd.slope(v - slack, Side::Left))
        .collect::<Result<_>>()?;
    let right: Vec<f64> = points
        .iter()
        .map(|&v| vd.slope(v + slack, Side::Right))
        .collect::<Result<_>>()?;

    // regions[i] is left of boundary i; regions[i + 1] is right of it.
    let mut regions = vec![Label::Empty];
    regions.extend(config.blocks.iter().map(|b| b.label));
    regions.push(Label::Empty);

    let n = points.len();
    let mut sums = vec![SubSum {
        first: 0,
        last: n - 1,
        left_sum: left.iter().sum(),
        right_sum: right.iter().sum(),
    }];
    for a in 0..n {
        for b in a..n {
            if (a, b) == (0, n - 1) || regions[a] != regions[b + 1] {
                continue;
            }
            sums.push(SubSum {
                first: a,
                last: b,
                left_sum: left[a..=b].iter().sum(),
                right_sum: right[a..=b].iter().sum(),
            });
        }
    }
    Ok(SumReport { slack, sums })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::density::LogDensity;

    fn small_grid() -> OracleGrid {
        OracleGrid {
            anchors: 401,
            splits: 41,
            max_anchor_step: None,
        }
    }

    #[test]
    fn normalization_merges_and_trims() {
        let c = Configuration::new(
            -1.0,
            [
                Block::new(Label::Empty, 0.5),
                Block::new(Label::One, 0.25),
                Block::new(Label::One, 0.75),
                Block::new(Label::Two, 0.0),
                Block::new(Label::Two, 2.0),
                Block::new(Label::Empty, 1.0),
            ],
        );
        assert_eq!(c.anchor, -0.5);
        assert_eq!(
            c.blocks,
            vec![Block::new(Label::One, 1.0), Block::new(Label::Two, 2.0)]
        );
        assert_eq!(c.shape(), ShapeKind::Double);
        assert_eq!(c.boundary_volumes(), vec![-0.5, 0.5, 2.5]);
    }

    #[test]
    fn constant_density_best_is_double_three() {
        let vd = VolumeDensity::from(LogDensity::constant(1.0).unwrap());
        let r = enumerate_contiguous(&vd, 1.0, 2.0, &small_grid()).unwrap();
        assert_eq!(r.kind, ShapeKind::Double);
        assert_eq!(r.best_perimeter, 3.0);
        assert_eq!(r.runner_up_gap, 1.0);
        assert_eq!(r.best.label_volume(Label::One), 1.0);
        assert_eq!(r.best.label_volume(Label::Two), 2.0);
    }

    #[test]
    fn resolution_budget_enforced() {
        let vd = VolumeDensity::from(LogDensity::borell());
        let grid = OracleGrid {
            max_anchor_step: Some(1e-6),
            ..small_grid()
        };
        assert!(matches!(
            enumerate_contiguous(&vd, 1.0, 1.0, &grid),
            Err(Error::Resolution(_))
        ));
    }

    #[test]
    fn triple_middle_sum_vanishes() {
        let vd = VolumeDensity::from(LogDensity::borell());
        let r = enumerate_contiguous(&vd, 0.1, 100.0, &small_grid()).unwrap();
        assert_eq!(r.kind, ShapeKind::Triple);
        let report = equilibrium_sum_check(&vd, &r.best, r.boundary_slack()).unwrap();
        assert!(report.all_ok(), "{report:?}");
        let middle = report
            .sums
            .iter()
            .find(|s| (s.first, s.last) == (1, 2))
            .unwrap();
        let exact = equilibrium_sum_check(&vd, &r.best, 0.0).unwrap();
        let exact_middle = exact
            .sums
            .iter()
            .find(|s| (s.first, s.last) == (1, 2))
            .unwrap();
        assert!(exact_middle.left_sum.abs() < 1e-12, "{middle:?}");
    }

    #[test]
    fn encode_round_trip_text() {
        let c = Configuration::new(
            -1.5,
            [Block::new(Label::One, 1.0), Block::new(Label::Two, 4.0)],
        );
        assert_eq!(c.encode(), "-1.5;1:1|2:4");
    }
}
