use dbubble::phase::geometric_grid;
use dbubble::tiecurve::BoundFamily;
use dbubble::{
    check_bounds, intersections_with_ray, lambda_of, mu, ratio_divergence_probe, sweep,
    sweep_parallel, EquilibriumOptions, Error, LogDensity, TieOptions, TieOutcome, VolumeDensity,
    VolumeTableDensity,
};

fn borell() -> VolumeDensity {
    VolumeDensity::from(LogDensity::borell())
}

#[test]
fn positive_limit_at_small_volume() {
    let o = TieOptions::default();
    let a = lambda_of(&borell(), 1e-3, &o).unwrap().lambda;
    let b = lambda_of(&borell(), 1e-2, &o).unwrap().lambda;
    assert!((a - b).abs() <= 0.02 * b, "{a} {b}");
    assert!(a > 3.0);
}

#[test]
fn borell_sweep_strictly_increasing() {
    let grid = geometric_grid(1e-3, 1e2, 11).unwrap();
    let curve = sweep(&borell(), &grid, &TieOptions::default()).unwrap();
    let lambdas: Vec<f64> = curve.iter().map(|e| e.tie().expect("tie").lambda).collect();
    assert!(lambdas.windows(2).all(|w| w[1] > w[0]), "{lambdas:?}");
    for e in &curve {
        let t = e.tie().unwrap();
        assert!(t.lambda > 2.0 * t.v1);
        let d = 1e-3 * t.lambda;
        let eq = EquilibriumOptions::default();
        assert!(mu(&borell(), t.v1, t.lambda - d, &eq).unwrap().mu > 0.0);
        assert!(mu(&borell(), t.v1, t.lambda + d, &eq).unwrap().mu < 0.0);
    }
}

#[test]
fn smoothed_exp_tie_curve_ends_before_core_volume() {
    // Once every boundary point is in the zone where f(V) is linear, μ no
    // longer depends on V₂. The curve therefore stops at the V₁ where that
    // plateau value crosses zero, at a finite λ approaching the core
    // volume minus V₁, and there is no tie beyond it.
    let vd = VolumeDensity::from(LogDensity::smoothed_exp(2.0).unwrap());
    let core = 2.0 * vd.volume(2.0).unwrap();
    let eq = EquilibriumOptions::default();
    let plateau = |v1: f64| mu(&vd, v1, 1e4, &eq).unwrap().mu;
    assert!((plateau(3.0) - mu(&vd, 3.0, 1e6, &eq).unwrap().mu).abs() < 1e-6);
    let (mut lo, mut hi) = (1.0, core);
    while hi - lo > 1e-12 {
        let m = 0.5 * (lo + hi);
        if plateau(m) < 0.0 {
            lo = m;
        } else {
            hi = m;
        }
    }
    assert!(lo > 3.2 && lo < 3.25, "{lo}");

    let grid = [1.0, 2.0, 3.0, lo - 1e-6, hi + 1e-6, 10.0, core, 40.0];
    let curve = sweep(&vd, &grid, &TieOptions::default()).unwrap();
    let ties: Vec<f64> = curve
        .iter()
        .filter_map(|e| e.tie().map(|t| t.lambda))
        .collect();
    assert_eq!(ties.len(), 4, "{curve:?}");
    assert!(ties.windows(2).all(|w| w[1] > w[0]), "{ties:?}");
    let end = core - lo;
    assert!(ties[3] < end && ties[3] > end - 0.05, "{ties:?} vs {end}");
    for e in curve.iter().filter(|e| e.v1 > lo) {
        assert!(matches!(e.outcome, TieOutcome::NoTie { .. }), "{e:?}");
    }
}

#[test]
fn bounded_slope_table_has_no_tie() {
    let vd = VolumeDensity::from(VolumeTableDensity::AbsPlusExpDecay);
    for v1 in [0.5, 1.0, 2.0] {
        match lambda_of(&vd, v1, &TieOptions::default()) {
            Err(Error::NoTie { cap, mu_at_cap, .. }) => {
                assert_eq!(cap, 1e6);
                assert!(mu_at_cap > 0.0);
            }
            other => panic!("{other:?}"),
        }
    }
    assert!(matches!(
        ratio_divergence_probe(&vd, &[1.0], &TieOptions::default()),
        Err(Error::NoTie { .. })
    ));
}

#[test]
fn parallel_sweep_preserves_order_and_values() {
    let grid = [0.05, 0.5, 2.0, 8.0];
    let o = TieOptions::default();
    let par = sweep_parallel(&borell(), &grid, &o).unwrap();
    for (e, &v1) in par.iter().zip(&grid) {
        assert_eq!(e.v1, v1);
        assert_eq!(e.lambda(), lambda_of(&borell(), v1, &o).unwrap().lambda);
    }
}

#[test]
fn growth_bounds_at_moderate_volumes() {
    let o = TieOptions::default();
    let r = check_bounds(&borell(), &[50.0], 0.5, &o).unwrap();
    let s = &r.samples[0];
    assert_eq!(r.family, BoundFamily::Borell);
    assert!((s.lower - 50.0).abs() < 1e-12);
    assert!(s.lambda > 100.0 && s.passed());

    let de = VolumeDensity::from(LogDensity::double_exp());
    let r = check_bounds(&de, &[20.0, 50.0], 0.5, &o).unwrap();
    assert_eq!(r.family, BoundFamily::DoubleExp);
    assert!(r.all_passed(), "{r:?}");

    let small = check_bounds(&borell(), &[1.5], 0.5, &o).unwrap();
    assert!(!small.samples[0].in_domain);
}

#[test]
fn ray_crossings() {
    let o = TieOptions::default();
    let ten = intersections_with_ray(&borell(), 10.0, (1e-3, 1e3), &o).unwrap();
    assert_eq!(ten.len(), 2, "{ten:?}");
    assert!(
        ten[0] > 0.1 && ten[0] < 1.0 && ten[1] > 1.0 && ten[1] < 10.0,
        "{ten:?}"
    );
    // The crossings are where the ray meets the tie curve.
    for &v1 in &ten {
        let t = lambda_of(&borell(), v1, &o).unwrap();
        assert!((t.lambda - 10.0 * v1).abs() <= 1e-8 * t.lambda);
    }
    assert!(intersections_with_ray(&borell(), 2.0, (1e-3, 1e3), &o)
        .unwrap()
        .is_empty());
}

#[test]
fn ratio_grows() {
    let p = ratio_divergence_probe(&borell(), &[1.0, 10.0, 100.0], &TieOptions::default()).unwrap();
    assert!(p.increasing() && p.last_exceeds_first(), "{p:?}");
}
