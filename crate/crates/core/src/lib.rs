//! Perimeter-minimizing double bubbles on the real line with symmetric
//! log-convex density.
//!
//! A double bubble on `ℝ` is either a *double interval* (two contiguous
//! intervals) or a *triple interval* (the smaller volume centered at the
//! origin, flanked by two halves of the larger one). This crate computes
//! both candidates in volume coordinate, their perimeter gap
//! `μ(V₁, V₂) = P₃ − P₂`, the tie curve `λ(V₁)` where they exchange
//! optimality, and a brute-force oracle over discretized configurations
//! that checks the analytic pipeline.
//!
//! ```
//! use dbubble::{mu, EquilibriumOptions, LogDensity, VolumeDensity};
//!
//! let vd = VolumeDensity::from(LogDensity::borell());
//! let gap = mu(&vd, 1.0, 1.0, &EquilibriumOptions::default()).unwrap();
//! assert_eq!(gap.vtilde, -1.0);
//! assert!(gap.mu > 0.0);
//! ```

pub mod density;
pub mod equilibrium;
pub mod error;
pub mod format;
pub mod oracle;
pub mod phase;
pub mod quadrature;
pub mod roots;
pub mod tiecurve;
pub mod volcoord;

pub use density::{
    DensitySpec, Family, LogDensity, Side, Smoothness, ValidationMode, Violation, ViolationKind,
};
pub use equilibrium::{
    double_interval, equilibrium_offset, first_variation_check, mu, mu_partials, perimeter_double,
    perimeter_triple, solve_equilibrium_offset, solve_equilibrium_set, triple_interval,
    Classification, DoubleInterval, EquilibriumOptions, EquilibriumSet, FirstVariationReport,
    PerimeterGap, TripleInterval,
};
pub use error::{Error, Result};
pub use oracle::{
    enumerate_contiguous, equilibrium_sum_check, verify_structure, Block, Configuration, Label,
    OracleGrid, OracleResult, ShapeKind, StructureReport, SumReport,
};
pub use phase::{phase_map, PhaseCell, PhaseMap};
pub use tiecurve::{
    check_bounds, intersections_with_ray, lambda_of, ratio_divergence_probe, sweep, sweep_parallel,
    BoundFamily, BoundReport, TieEntry, TieOptions, TieOutcome, TiePoint,
};
pub use volcoord::{position_of, volume_of, SampledTable, VolumeDensity, VolumeTableDensity};
