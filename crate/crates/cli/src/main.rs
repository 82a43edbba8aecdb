//! `dbubble`: double and triple intervals, the perimeter gap, tie curves
//! and a brute-force oracle, emitted as key=value, JSON or CSV.

use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use dbubble::format::float;
use dbubble::phase::{geometric_grid, linear_grid};
use dbubble::{
    check_bounds, double_interval, enumerate_contiguous, equilibrium_sum_check,
    intersections_with_ray, mu, phase_map, sweep_parallel, triple_interval, verify_structure,
    DensitySpec, EquilibriumOptions, Error, OracleGrid, TieOptions, TieOutcome, VolumeDensity,
};
use serde::Serialize;

#[derive(Parser)]
#[command(
    name = "dbubble",
    version,
    about = "Perimeter-minimizing double bubbles on the line with log-convex density"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct Common {
    /// constant:<c>, borell, power:<p>, exp-abs, double-exp, smooth-exp:<a> or vol-table:<path>
    #[arg(long)]
    density: String,
    /// Equilibrium residual tolerance.
    #[arg(long, default_value_t = 1e-10)]
    tol_eq: f64,
    /// Relative tie tolerance on mu.
    #[arg(long, default_value_t = 1e-9)]
    tol_tie: f64,
    /// Output file; standard output when absent.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Worker threads; 0 uses every core.
    #[arg(long, default_value_t = 0)]
    jobs: usize,
}

#[derive(Subcommand)]
enum Command {
    /// Double and triple interval for one volume pair.
    #[command(allow_negative_numbers = true)]
    Point {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        v1: f64,
        #[arg(long)]
        v2: f64,
        #[arg(long)]
        json: bool,
    },
    /// Sign of mu over a grid, as CSV.
    PhaseMap {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        v1_min: f64,
        #[arg(long)]
        v1_max: f64,
        #[arg(long)]
        v2_min: f64,
        #[arg(long)]
        v2_max: f64,
        /// Grid points per axis.
        #[arg(long, default_value_t = 50)]
        steps: usize,
    },
    /// Tie volume lambda(V1) over a geometric grid, as CSV.
    TieCurve {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value_t = 1e-3)]
        v1_min: f64,
        #[arg(long, default_value_t = 1e2)]
        v1_max: f64,
        #[arg(long, default_value_t = 16)]
        points: usize,
        /// Upper limit of the V2 search is max(cap, 1e4 V1).
        #[arg(long, default_value_t = 1e6)]
        cap: f64,
    },
    /// Growth bounds on lambda, as CSV.
    Bounds {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_delimiter = ',', default_value = "20,50,100")]
        v1: Vec<f64>,
        #[arg(long, default_value_t = 0.5)]
        epsilon: f64,
    },
    /// Brute-force minimum over discretized configurations.
    #[command(allow_negative_numbers = true)]
    Oracle {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        v1: f64,
        #[arg(long)]
        v2: f64,
        #[arg(long, default_value_t = 2001)]
        anchors: usize,
        #[arg(long, default_value_t = 201)]
        splits: usize,
        /// Largest acceptable anchor step.
        #[arg(long)]
        max_step: Option<f64>,
        /// Gap volumes to insert for the structure check.
        #[arg(long, value_delimiter = ',')]
        gap: Vec<f64>,
    },
    /// Values of V1 where mu(V1, r V1) changes sign.
    Ray {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        ratio: f64,
        #[arg(long, default_value_t = 1e-3)]
        v1_min: f64,
        #[arg(long, default_value_t = 1e3)]
        v1_max: f64,
    },
}

enum Failure {
    Usage(String),
    Solver(Error),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Usage(_) => 2,
            Failure::Solver(e) if e.is_input_error() => 2,
            Failure::Solver(_) => 3,
        }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Solver(e)
    }
}

impl From<io::Error> for Failure {
    fn from(e: io::Error) -> Self {
        Failure::Usage(e.to_string())
    }
}

impl std::fmt::Display for Failure {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Failure::Usage(m) => f.write_str(m),
            Failure::Solver(e) => e.fmt(f),
        }
    }
}

type Outcome<T = ()> = Result<T, Failure>;

struct Setup {
    vd: VolumeDensity,
    eq: EquilibriumOptions,
    out: Box<dyn Write>,
}

impl Common {
    fn setup(&self) -> Outcome<Setup> {
        for (name, t) in [("--tol-eq", self.tol_eq), ("--tol-tie", self.tol_tie)] {
            if !(t > 0.0 && t.is_finite()) {
                return Err(Failure::Usage(format!("{name} must be positive, got {t}")));
            }
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(self.jobs)
            .build_global()
            .map_err(|e| Failure::Usage(e.to_string()))?;
        let spec: DensitySpec = self.density.parse()?;
        let vd = VolumeDensity::from_spec(&spec)?;
        let out: Box<dyn Write> = match &self.out {
            Some(p) => Box::new(BufWriter::new(File::create(p).map_err(|e| Error::Io {
                path: p.clone(),
                source: e,
            })?)),
            None => Box::new(BufWriter::new(io::stdout())),
        };
        Ok(Setup {
            vd,
            eq: EquilibriumOptions {
                tol_eq: self.tol_eq,
                tol_tie: self.tol_tie,
            },
            out,
        })
    }
}

#[derive(Serialize)]
struct PointRecord {
    density: String,
    v1: f64,
    v2: f64,
    swapped: bool,
    vtilde: f64,
    p2: f64,
    p3: f64,
    mu: f64,
    class: &'static str,
    double_volumes: [f64; 3],
    double_positions: [f64; 3],
    triple_volumes: [f64; 4],
    triple_positions: [f64; 4],
}

fn point(common: &Common, v1: f64, v2: f64, json: bool) -> Outcome {
    let mut s = common.setup()?;
    let g = mu(&s.vd, v1, v2, &s.eq)?;
    let d = double_interval(&s.vd, g.v1, g.v2, g.vtilde)?;
    let t = triple_interval(&s.vd, g.v1, g.v2)?;
    let (h1, h2) = (0.5 * g.v1, 0.5 * (g.v1 + g.v2));
    let rec = PointRecord {
        density: s.vd.to_string(),
        v1: g.v1,
        v2: g.v2,
        swapped: g.swapped,
        vtilde: g.vtilde,
        p2: g.p2,
        p3: g.p3,
        mu: g.mu,
        class: g.classify(&s.eq).as_str(),
        double_volumes: d.boundary_volumes,
        double_positions: d.endpoints,
        triple_volumes: [-h2, -h1, h1, h2],
        triple_positions: [-t.y2, -t.y1, t.y1, t.y2],
    };
    if json {
        serde_json::to_writer_pretty(&mut s.out, &rec)
            .map_err(|e| Failure::Usage(e.to_string()))?;
        writeln!(s.out)?;
    } else {
        let join = |xs: &[f64]| xs.iter().map(|&x| float(x)).collect::<Vec<_>>().join(",");
        writeln!(s.out, "density={}", rec.density)?;
        writeln!(s.out, "v1={}", float(rec.v1))?;
        writeln!(s.out, "v2={}", float(rec.v2))?;
        writeln!(s.out, "swapped={}", rec.swapped)?;
        writeln!(s.out, "vtilde={}", float(rec.vtilde))?;
        writeln!(s.out, "p2={}", float(rec.p2))?;
        writeln!(s.out, "p3={}", float(rec.p3))?;
        writeln!(s.out, "mu={}", float(rec.mu))?;
        writeln!(s.out, "class={}", rec.class)?;
        writeln!(s.out, "double_volumes={}", join(&rec.double_volumes))?;
        writeln!(s.out, "double_positions={}", join(&rec.double_positions))?;
        writeln!(s.out, "triple_volumes={}", join(&rec.triple_volumes))?;
        writeln!(s.out, "triple_positions={}", join(&rec.triple_positions))?;
    }
    s.out.flush()?;
    Ok(())
}

fn phase(common: &Common, v1: (f64, f64), v2: (f64, f64), steps: usize) -> Outcome {
    let mut s = common.setup()?;
    let g1 = linear_grid(v1.0, v1.1, steps)?;
    let g2 = linear_grid(v2.0, v2.1, steps)?;
    let map = phase_map(&s.vd, &g1, &g2, &s.eq);
    map.write_csv(&mut s.out)?;
    s.out.flush()?;
    Ok(())
}

fn tie_curve(common: &Common, lo: f64, hi: f64, points: usize, cap: f64) -> Outcome {
    let mut s = common.setup()?;
    let grid = geometric_grid(lo, hi, points)?;
    let opts = TieOptions {
        cap_min: cap,
        eq: s.eq,
        ..TieOptions::default()
    };
    // Cold solves only, so the output does not depend on --jobs.
    let curve = sweep_parallel(&s.vd, &grid, &opts)?;
    writeln!(s.out, "v1,lambda,mu_residual")?;
    for e in &curve {
        let residual = match &e.outcome {
            TieOutcome::Tie(t) => t.mu_residual,
            TieOutcome::NoTie { mu_at_cap, .. } => *mu_at_cap,
            TieOutcome::Failed(_) => f64::NAN,
        };
        writeln!(
            s.out,
            "{},{},{}",
            float(e.v1),
            float(e.lambda()),
            float(residual)
        )?;
    }
    s.out.flush()?;
    for e in &curve {
        if let TieOutcome::Failed(m) = &e.outcome {
            eprintln!("warning: V1 = {}: {m}", e.v1);
        }
    }
    Ok(())
}

fn bounds(common: &Common, v1: &[f64], epsilon: f64) -> Outcome {
    let mut s = common.setup()?;
    let opts = TieOptions {
        eq: s.eq,
        ..TieOptions::default()
    };
    let report = check_bounds(&s.vd, v1, epsilon, &opts)?;
    writeln!(
        s.out,
        "v1,lambda,lower,upper,in_domain,lower_ok,upper_ok,pass"
    )?;
    for x in &report.samples {
        writeln!(
            s.out,
            "{},{},{},{},{},{},{},{}",
            float(x.v1),
            float(x.lambda),
            float(x.lower),
            float(x.upper),
            x.in_domain,
            x.lower_ok,
            x.upper_ok,
            x.passed()
        )?;
    }
    s.out.flush()?;
    Ok(())
}

fn oracle(common: &Common, v1: f64, v2: f64, grid: OracleGrid, gaps: &[f64]) -> Outcome {
    let s = common.setup()?;
    let structure = if gaps.is_empty() {
        None
    } else {
        Some(verify_structure(&s.vd, v1, v2, &grid, gaps)?)
    };
    let r = match &structure {
        Some(st) => st.oracle.clone(),
        None => enumerate_contiguous(&s.vd, v1, v2, &grid)?,
    };
    let sums = equilibrium_sum_check(&s.vd, &r.best, r.boundary_slack())?;

    let stdout = io::stdout();
    let mut o = stdout.lock();
    writeln!(o, "type={}", r.kind.as_str())?;
    writeln!(o, "perimeter={}", float(r.best_perimeter))?;
    writeln!(o, "runner_up_gap={}", float(r.runner_up_gap))?;
    writeln!(o, "anchor_step={}", float(r.anchor_step))?;
    writeln!(o, "split_step={}", float(r.split_step))?;
    writeln!(o, "configuration={}", r.best.encode())?;
    writeln!(o, "equilibrium_sums_ok={}", sums.all_ok())?;
    if let Some(st) = &structure {
        writeln!(o, "triple_symmetric={}", st.triple_symmetric)?;
        writeln!(o, "smaller_in_middle={}", st.smaller_in_middle)?;
        writeln!(
            o,
            "double_middle_position={}",
            float(st.double_middle_position)
        )?;
        writeln!(o, "gaps_strictly_worse={}", st.gaps_strictly_worse())?;
    }
    o.flush()?;

    if let Some(path) = &common.out {
        let mut w = BufWriter::new(File::create(path).map_err(|e| Error::Io {
            path: path.clone(),
            source: e,
        })?);
        writeln!(
            w,
            "type,anchor,blocks,perimeter,runner_up_gap,anchor_step,split_step"
        )?;
        let blocks: Vec<String> = r
            .best
            .encode()
            .split_once(';')
            .map(|(_, b)| b.to_string())
            .into_iter()
            .collect();
        writeln!(
            w,
            "{},{},{},{},{},{},{}",
            r.kind.as_str(),
            float(r.best.anchor),
            blocks.join(""),
            float(r.best_perimeter),
            float(r.runner_up_gap),
            float(r.anchor_step),
            float(r.split_step)
        )?;
        w.flush()?;
    }
    Ok(())
}

fn ray(common: &Common, ratio: f64, lo: f64, hi: f64) -> Outcome {
    let mut s = common.setup()?;
    let opts = TieOptions {
        eq: s.eq,
        ..TieOptions::default()
    };
    let hits = intersections_with_ray(&s.vd, ratio, (lo, hi), &opts)?;
    writeln!(s.out, "v1,v2")?;
    for v in hits {
        writeln!(s.out, "{},{}", float(v), float(ratio * v))?;
    }
    s.out.flush()?;
    Ok(())
}

fn run(cli: Cli) -> Outcome {
    match &cli.command {
        Command::Point {
            common,
            v1,
            v2,
            json,
        } => point(common, *v1, *v2, *json),
        Command::PhaseMap {
            common,
            v1_min,
            v1_max,
            v2_min,
            v2_max,
            steps,
        } => phase(common, (*v1_min, *v1_max), (*v2_min, *v2_max), *steps),
        Command::TieCurve {
            common,
            v1_min,
            v1_max,
            points,
            cap,
        } => tie_curve(common, *v1_min, *v1_max, *points, *cap),
        Command::Bounds {
            common,
            v1,
            epsilon,
        } => bounds(common, v1, *epsilon),
        Command::Oracle {
            common,
            v1,
            v2,
            anchors,
            splits,
            max_step,
            gap,
        } => oracle(
            common,
            *v1,
            *v2,
            OracleGrid {
                anchors: *anchors,
                splits: *splits,
                max_anchor_step: *max_step,
            },
            gap,
        ),
        Command::Ray {
            common,
            ratio,
            v1_min,
            v1_max,
        } => ray(common, *ratio, *v1_min, *v1_max),
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {f}");
            ExitCode::from(f.code())
        }
    }
}
