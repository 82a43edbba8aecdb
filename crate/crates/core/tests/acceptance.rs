//! Acceptance gate. Prints one `[PASS]` or `[FAIL]` line per criterion and
//! exits nonzero if any fails.

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::process::ExitCode;
use std::time::Instant;

use dbubble::equilibrium::residual;
use dbubble::phase::{geometric_grid, linear_grid};
use dbubble::{
    check_bounds, enumerate_contiguous, equilibrium_sum_check, first_variation_check,
    intersections_with_ray, lambda_of, mu, position_of, solve_equilibrium_offset, sweep,
    verify_structure, volume_of, EquilibriumOptions, Error, Label, LogDensity, OracleGrid,
    ShapeKind, Side, TieOptions, VolumeDensity, VolumeTableDensity,
};
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};

type Outcome = Result<String, String>;

macro_rules! ensure {
    ($cond:expr, $($fmt:tt)+) => {
        if !$cond {
            return Err(format!($($fmt)+));
        }
    };
}

fn eq() -> EquilibriumOptions {
    EquilibriumOptions::default()
}

fn err(e: Error) -> String {
    e.to_string()
}

fn ordered_pair(rng: &mut StdRng, lo: f64, hi: f64) -> (f64, f64) {
    let a = 10f64.powf(rng.gen_range(lo.log10()..hi.log10()));
    let b = 10f64.powf(rng.gen_range(lo.log10()..hi.log10()));
    if a < b {
        (a, b)
    } else {
        (b, a)
    }
}

fn constant_density_gap() -> Outcome {
    let mut rng = StdRng::seed_from_u64(1);
    for _ in 0..10 {
        let c = rng.gen_range(0.1..10.0);
        let (v1, v2) = ordered_pair(&mut rng, 0.01, 100.0);
        let vd = VolumeDensity::from(LogDensity::constant(c).map_err(err)?);
        let g = mu(&vd, v1, v2, &eq()).map_err(err)?;
        let f = vd.f(0.0).map_err(err)?;
        ensure!(
            (f - c).abs() <= 2.0 * f64::EPSILON * c,
            "f = {f} for c = {c}"
        );
        ensure!(
            g.p2 == 3.0 * f && g.p3 == 4.0 * f,
            "c={c}: P2={} P3={}",
            g.p2,
            g.p3
        );
        ensure!(
            (g.mu - c).abs() <= 4.0 * f64::EPSILON * c,
            "c={c}: mu={}",
            g.mu
        );
    }
    Ok("10 pairs, P2 = 3c, P3 = 4c, mu = c".into())
}

fn exp_abs_middle_at_origin() -> Outcome {
    let mut rng = StdRng::seed_from_u64(2);
    let vd = VolumeDensity::from(LogDensity::exp_abs());
    let mut worst = 0f64;
    for _ in 0..10 {
        let (v1, v2) = ordered_pair(&mut rng, 0.01, 100.0);
        let g = mu(&vd, v1, v2, &eq()).map_err(err)?;
        let x2 = vd.position(g.vtilde + v1).map_err(err)?;
        ensure!(x2.abs() <= 1e-8, "({v1}, {v2}): x2 = {x2}");
        let rel = (g.mu - (v1 + 1.0)).abs() / (v1 + 1.0);
        ensure!(rel <= 1e-10, "({v1}, {v2}): mu = {} vs {}", g.mu, v1 + 1.0);
        ensure!(
            (g.p2 - (v1 + v2 + 3.0)).abs() <= 1e-10 * g.p2,
            "P2 = {}",
            g.p2
        );
        worst = worst.max(rel);
    }
    Ok(format!("10 pairs, worst relative error in mu {worst:.1e}"))
}

fn equal_volumes() -> Outcome {
    let densities = [
        LogDensity::borell(),
        LogDensity::power(4.0).map_err(err)?,
        LogDensity::smoothed_exp(2.0).map_err(err)?,
        LogDensity::double_exp(),
    ];
    for d in densities {
        let vd = VolumeDensity::from(d);
        for v in [0.01, 0.1, 1.0, 10.0] {
            let g = mu(&vd, v, v, &eq()).map_err(err)?;
            ensure!(g.vtilde == -v, "{d} V={v}: vtilde = {}", g.vtilde);
            ensure!(g.mu > 0.0, "{d} V={v}: mu = {}", g.mu);
        }
    }
    Ok("4 densities x 4 volumes".into())
}

fn residual_and_bracket() -> Outcome {
    let mut rng = StdRng::seed_from_u64(4);
    let vd = VolumeDensity::from(LogDensity::borell());
    let mut worst = 0f64;
    let mut n = 0;
    while n < 200 {
        let (v1, v2) = ordered_pair(&mut rng, 1e-3, 1e3);
        if v1 == v2 {
            continue;
        }
        n += 1;
        let vt = solve_equilibrium_offset(&vd, v1, v2, &eq()).map_err(err)?;
        let r = residual(&vd, v1, v2, vt, Side::Right).map_err(err)?;
        ensure!(r.abs() <= 1e-10, "({v1}, {v2}): residual {r}");
        ensure!(
            vt > -0.5 * (v1 + v2) && vt < -v1,
            "({v1}, {v2}): vtilde {vt}"
        );
        worst = worst.max(r.abs());
    }
    Ok(format!("200 pairs, worst residual {worst:.1e}"))
}

fn mu_monotone() -> Outcome {
    let vd = VolumeDensity::from(LogDensity::borell());
    let grid = linear_grid(0.1, 10.0, 40).map_err(err)?;
    let n = grid.len();
    let mut table = vec![vec![f64::NAN; n]; n];
    for i in 0..n {
        for j in i..n {
            table[i][j] = mu(&vd, grid[i], grid[j], &eq()).map_err(err)?.mu;
        }
    }
    let (mut pairs, mut strict) = (0usize, 0usize);
    for j in 0..n {
        for i in 0..j {
            // Increasing V₁ at fixed V₂.
            let d = table[i + 1][j] - table[i][j];
            ensure!(
                d >= -1e-9,
                "V2={}: mu drops by {d} from V1={}",
                grid[j],
                grid[i]
            );
            pairs += 1;
            strict += (d > 0.0) as usize;
        }
    }
    for i in 0..n {
        for j in i..n - 1 {
            let d = table[i][j + 1] - table[i][j];
            ensure!(
                d <= 1e-9,
                "V1={}: mu rises by {d} from V2={}",
                grid[i],
                grid[j]
            );
            pairs += 1;
            strict += (d < 0.0) as usize;
        }
    }
    let frac = strict as f64 / pairs as f64;
    ensure!(frac >= 0.95, "only {frac:.3} of adjacent pairs strict");
    Ok(format!(
        "{pairs} adjacent pairs, {:.1}% strict",
        100.0 * frac
    ))
}

fn tie_existence() -> Outcome {
    let vd = VolumeDensity::from(LogDensity::borell());
    let grid = geometric_grid(1e-3, 1e2, 16).map_err(err)?;
    let curve = sweep(&vd, &grid, &TieOptions::default()).map_err(err)?;
    let mut lambdas = Vec::new();
    for e in &curve {
        let t = e
            .tie()
            .ok_or_else(|| format!("V1={}: {:?}", e.v1, e.outcome))?;
        ensure!(
            t.lambda > 2.0 * t.v1,
            "V1={}: lambda {} <= 2 V1",
            t.v1,
            t.lambda
        );
        lambdas.push(t.lambda);
    }
    ensure!(
        lambdas.windows(2).all(|w| w[1] > w[0]),
        "not increasing: {lambdas:?}"
    );
    let o = TieOptions::default();
    let a = lambda_of(&vd, 1e-3, &o).map_err(err)?.lambda;
    let b = lambda_of(&vd, 1e-2, &o).map_err(err)?.lambda;
    let rel = (a - b).abs() / b;
    ensure!(rel <= 0.02, "lambda(1e-3)={a}, lambda(1e-2)={b}");
    Ok(format!(
        "16 points, lambda from {:.4} to {:.2}, small-volume spread {:.2}%",
        lambdas[0],
        lambdas[lambdas.len() - 1],
        100.0 * rel
    ))
}

fn bounded_slope_no_tie() -> Outcome {
    let vd = VolumeDensity::from(VolumeTableDensity::AbsPlusExpDecay);
    let opts = TieOptions {
        cap_min: 1e6,
        ..TieOptions::default()
    };
    let mut worst = 0f64;
    for v1 in [0.5, 1.0, 2.0] {
        match lambda_of(&vd, v1, &opts) {
            Err(Error::NoTie { cap, .. }) => ensure!(cap == 1e6, "cap {cap}"),
            other => return Err(format!("V1={v1}: expected no tie, got {other:?}")),
        }
        let limit = 2.0 * v1 - v1.exp().ln_1p() + 2.0 * (-0.5 * v1).exp() - 1.0;
        let m = mu(&vd, v1, 1e4, &eq()).map_err(err)?.mu;
        ensure!(
            (m - limit).abs() <= 1e-3,
            "V1={v1}: mu {m} vs limit {limit}"
        );
        worst = worst.max((m - limit).abs());
    }
    Ok(format!("no tie below 1e6; limit error {worst:.1e}"))
}

fn two_intersections() -> Outcome {
    let vd = VolumeDensity::from(LogDensity::borell());
    let o = TieOptions::default();
    let ten = intersections_with_ray(&vd, 10.0, (1e-3, 1e3), &o).map_err(err)?;
    ensure!(ten.len() == 2, "ratio 10: {ten:?}");
    let two = intersections_with_ray(&vd, 2.0, (1e-3, 1e3), &o).map_err(err)?;
    ensure!(two.is_empty(), "ratio 2: {two:?}");
    Ok(format!(
        "ratio 10 crosses at V1 = {:.5}, {:.5}; ratio 2 never",
        ten[0], ten[1]
    ))
}

fn growth_bounds() -> Outcome {
    let o = TieOptions::default();
    let mut lines = Vec::new();
    for d in [LogDensity::borell(), LogDensity::double_exp()] {
        let vd = VolumeDensity::from(d);
        let r = check_bounds(&vd, &[20.0, 50.0, 100.0], 0.5, &o).map_err(err)?;
        for s in &r.samples {
            ensure!(
                s.passed(),
                "{d} V1={}: {} < {} < {} fails",
                s.v1,
                s.lower,
                s.lambda,
                s.upper
            );
        }
        let l: Vec<String> = r
            .samples
            .iter()
            .map(|s| format!("{:.2}", s.lambda))
            .collect();
        lines.push(format!("{d} lambda {}", l.join("/")));
    }
    Ok(lines.join("; "))
}

fn oracle_equivalence() -> Outcome {
    let start = Instant::now();
    let mut rng = StdRng::seed_from_u64(10);
    let vd = VolumeDensity::from(LogDensity::borell());
    let grid = OracleGrid::default();
    let (mut worst, mut typed) = (0f64, 0);
    for _ in 0..20 {
        let v1 = 10f64.powf(rng.gen_range(-2.0..0.7));
        let v2 = v1 * 10f64.powf(rng.gen_range(0.0..2.5));
        let g = mu(&vd, v1, v2, &eq()).map_err(err)?;
        let r = enumerate_contiguous(&vd, v1, v2, &grid).map_err(err)?;
        let band = 5.0 * r.anchor_step * r.max_density;
        let diff = (r.best_perimeter - g.p2.min(g.p3)).abs();
        ensure!(
            diff <= band,
            "({v1}, {v2}): oracle {} vs {} band {band}",
            r.best_perimeter,
            g.p2.min(g.p3)
        );
        worst = worst.max(diff / band);
        if g.mu.abs() > 2.0 * band {
            let expect = if g.mu > 0.0 {
                ShapeKind::Double
            } else {
                ShapeKind::Triple
            };
            ensure!(
                r.kind == expect,
                "({v1}, {v2}): oracle {:?}, mu {}",
                r.kind,
                g.mu
            );
            typed += 1;
        }
    }
    let secs = start.elapsed().as_secs_f64();
    ensure!(secs <= 120.0, "took {secs:.1} s");
    Ok(format!(
        "20 pairs, worst error {:.1e} of band, {typed} type checks, {secs:.1} s",
        worst
    ))
}

fn structure_checks() -> Outcome {
    let grid = OracleGrid::default();
    let borell = VolumeDensity::from(LogDensity::borell());

    let s = verify_structure(&borell, 0.1, 100.0, &grid, &[]).map_err(err)?;
    ensure!(
        s.oracle.kind == ShapeKind::Triple,
        "(0.1, 100) best is {:?}",
        s.oracle.kind
    );
    ensure!(
        s.triple_middle == Label::One && s.smaller_in_middle,
        "middle {:?}",
        s.triple_middle
    );
    ensure!(s.triple_symmetric, "split {}", s.triple_split);
    let sums =
        equilibrium_sum_check(&borell, &s.oracle.best, s.oracle.boundary_slack()).map_err(err)?;
    ensure!(sums.all_ok(), "triple sums {sums:?}");
    let exact = equilibrium_sum_check(&borell, &s.oracle.best, 0.0).map_err(err)?;
    let middle = exact
        .sums
        .iter()
        .find(|x| (x.first, x.last) == (1, 2))
        .ok_or("no middle sub-sum")?;
    ensure!(
        middle.left_sum.abs() <= 1e-12,
        "middle sub-sum {}",
        middle.left_sum
    );

    let s = verify_structure(&borell, 1.0, 1.0, &grid, &[0.5]).map_err(err)?;
    ensure!(s.gaps_strictly_worse(), "gaps {:?}", s.gaps);

    let r = enumerate_contiguous(&borell, 1.0, 4.0, &grid).map_err(err)?;
    let sums = equilibrium_sum_check(&borell, &r.best, r.boundary_slack()).map_err(err)?;
    ensure!(
        r.kind == ShapeKind::Double && sums.all_ok(),
        "(1, 4) sums {sums:?}"
    );

    let exp_abs = VolumeDensity::from(LogDensity::exp_abs());
    let s = verify_structure(&exp_abs, 1.0, 2.0, &grid, &[0.5]).map_err(err)?;
    ensure!(
        s.double_middle_volume.abs() <= s.oracle.anchor_step,
        "exp-abs middle boundary at volume {}",
        s.double_middle_volume
    );
    ensure!(s.gaps_strictly_worse(), "exp-abs gaps {:?}", s.gaps);
    let sums =
        equilibrium_sum_check(&exp_abs, &s.oracle.best, s.oracle.boundary_slack()).map_err(err)?;
    ensure!(sums.all_ok(), "exp-abs sums {sums:?}");
    Ok("symmetric triple, gaps worse, sums within slack".into())
}

fn smoothed_exp_regimes() -> Outcome {
    let a = 2.0;
    let d = LogDensity::smoothed_exp(a).map_err(err)?;
    let vd = VolumeDensity::from(d);
    let core = volume_of(&d, a).map_err(err)? - volume_of(&d, -a).map_err(err)?;
    for v1 in [core, 1.5 * core, 3.0 * core] {
        for k in 0..=12 {
            let v2 = v1 * 10f64.powf(k as f64 * 0.25);
            let m = mu(&vd, v1, v2, &eq()).map_err(err)?.mu;
            ensure!(m > 0.0, "V1={v1} V2={v2}: mu = {m}");
        }
    }
    let small = mu(&vd, 0.5, 1e3, &eq()).map_err(err)?.mu;
    ensure!(small < 0.0, "V1=0.5, V2=1e3: mu = {small}");
    let mut worst = 0f64;
    for v1 in [0.05, 0.5, 2.0, 10.0] {
        for v2 in [core, 50.0, 1e3] {
            let vt = mu(&vd, v1, v2, &eq()).map_err(err)?.vtilde;
            let x1 = vd.position(vt).map_err(err)?;
            let x2 = vd.position(vt + v1).map_err(err)?;
            let e = (x2 + a + x1).abs();
            ensure!(e <= 1e-8, "V1={v1} V2={v2}: x1={x1} x2={x2}");
            worst = worst.max(e);
        }
    }
    Ok(format!(
        "core volume {core:.6}, mu(0.5, 1e3) = {small:.4}, relation error {worst:.1e}"
    ))
}

fn round_trip_and_first_variation() -> Outcome {
    let mut rng = StdRng::seed_from_u64(13);
    let families = [
        LogDensity::constant(2.0).map_err(err)?,
        LogDensity::borell(),
        LogDensity::power(1.0).map_err(err)?,
        LogDensity::power(3.0).map_err(err)?,
        LogDensity::exp_abs(),
        LogDensity::double_exp(),
        LogDensity::smoothed_exp(2.0).map_err(err)?,
    ];
    let mut worst = 0f64;
    for d in &families {
        let vd = VolumeDensity::from(*d);
        for _ in 0..100 {
            let v = rng.gen_range(-100.0..100.0);
            let e = (volume_of(d, position_of(d, v).map_err(err)?).map_err(err)? - v).abs();
            ensure!(e <= 1e-10, "{d} V={v}: round trip error {e}");
            let e2 = (vd.volume(vd.position(v).map_err(err)?).map_err(err)? - v).abs();
            ensure!(e2 <= 1e-10, "{d} V={v}: cached round trip error {e2}");
            worst = worst.max(e).max(e2);
        }
    }
    let mut fv = 0f64;
    for (d, xs) in [
        (LogDensity::borell(), vec![-2.0, -0.3, 1.0, 2.5]),
        (LogDensity::constant(1.0).map_err(err)?, vec![0.7, -4.0]),
        (
            LogDensity::smoothed_exp(2.0).map_err(err)?,
            vec![-3.0, 0.5, 1.5, 3.0],
        ),
        (LogDensity::double_exp(), vec![-1.0, 0.5, 2.0]),
        (LogDensity::power(3.0).map_err(err)?, vec![0.4, 1.7]),
    ] {
        let vd = VolumeDensity::from(d);
        for x in xs {
            let r = first_variation_check(&vd, x, 1e-4).map_err(err)?;
            ensure!(
                r.difference.abs() <= 1e-6,
                "{d} x={x}: {} vs {}",
                r.finite_difference,
                r.analytic
            );
            fv = fv.max(r.difference.abs());
        }
    }
    Ok(format!(
        "worst round trip {worst:.1e}, worst first-variation gap {fv:.1e}"
    ))
}

fn bounding_ratio() -> Outcome {
    let d = LogDensity::borell();
    let ratio = |x: f64| -> Result<f64, String> {
        Ok(volume_of(&d, x).map_err(err)? * 2.0 * x / d.eval(x).map_err(err)?)
    };
    let (r5, r8) = (ratio(5.0)?, ratio(8.0)?);
    ensure!((0.95..=1.05).contains(&r5), "ratio at 5 = {r5}");
    ensure!(
        (r8 - 1.0).abs() < (r5 - 1.0).abs(),
        "ratio at 8 = {r8} not closer than {r5}"
    );
    Ok(format!("ratio {r5:.6} at x=5, {r8:.6} at x=8"))
}

fn main() -> ExitCode {
    let criteria: [(&str, fn() -> Outcome); 14] = [
        ("constant density gap equals c", constant_density_gap),
        (
            "exp-abs middle point at origin, mu = V1 + 1",
            exp_abs_middle_at_origin,
        ),
        ("equal volumes: vtilde = -V, mu > 0", equal_volumes),
        ("borell residual and offset bracket", residual_and_bracket),
        ("mu monotone on a 40x40 grid", mu_monotone),
        (
            "tie curve exists, increases, has a positive limit",
            tie_existence,
        ),
        ("bounded-slope table never ties", bounded_slope_no_tie),
        (
            "ray V2 = 10 V1 crosses twice, V2 = 2 V1 never",
            two_intersections,
        ),
        ("asymptotic growth bounds at moderate V1", growth_bounds),
        ("oracle agrees with analytic minimum", oracle_equivalence),
        ("oracle structure and equilibrium sums", structure_checks),
        ("smoothed exponential regimes", smoothed_exp_regimes),
        (
            "coordinate round trip and first variation",
            round_trip_and_first_variation,
        ),
        ("volume-to-perimeter ratio tends to one", bounding_ratio),
    ];
    std::panic::set_hook(Box::new(|_| {}));
    let mut failed = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let outcome = catch_unwind(AssertUnwindSafe(check)).unwrap_or_else(|p| {
            let msg = p
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            Err(format!("panicked: {msg}"))
        });
        let secs = start.elapsed().as_secs_f64();
        match outcome {
            Ok(detail) => println!("[PASS] {:>2} {name} ({secs:.1} s): {detail}", i + 1),
            Err(detail) => {
                failed += 1;
                println!("[FAIL] {:>2} {name} ({secs:.1} s): {detail}", i + 1);
            }
        }
    }
    println!(
        "{} of {} criteria passed",
        criteria.len() - failed,
        criteria.len()
    );
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
