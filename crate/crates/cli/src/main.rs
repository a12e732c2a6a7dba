use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use log::info;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use ratio_cert::bounds::{certified_ratio_mesh, certified_ratio_with, BracketOptions, SpectralBracket};
use ratio_cert::certificate::{certify_to_file, f17, replay_verify, VerifyMode};
use ratio_cert::continuity::ContinuityEstimate;
use ratio_cert::grid::export_ratio_grid;
use ratio_cert::mesher::refine_quadrilateral;
use ratio_cert::moduli::{ModuliPoint, RegionSpec};
use ratio_cert::perturbation::{
    fd_slope_measure, quad_first_order, quad_local_upper, tri_first_order, tri_local_upper, tri_slope_magnitude,
    Direction2, FdOptions, PerturbationReport, Shape, QUAD_SECOND_ORDER, QUAD_SLOPE_MAX, QUAD_SLOPE_MIN,
    TRI_SECOND_ORDER,
};
use ratio_cert::sweep::{SweepConfig, SweepOutcome};
use ratio_cert::Error;

const EXIT_USAGE: u8 = 1;
const EXIT_CERTIFICATION: u8 = 2;
const EXIT_STALL: u8 = 3;
const EXIT_IO: u8 = 4;

#[derive(Parser)]
#[command(name = "ratio-cert", version, about = "Certified bounds on the Dirichlet eigenvalue ratio of triangles")]
struct Cli {
    /// More log output (-v info, -vv debug).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone, Copy)]
struct Numerics {
    /// Uniform refinement levels of the mesh.
    #[arg(long, default_value_t = 6)]
    levels: u32,
    /// Padding added to every eigenvalue bound.
    #[arg(long, default_value_t = 1e-9)]
    eps: f64,
    /// Relative eigensolver residual tolerance.
    #[arg(long, default_value_t = 1e-10)]
    tol: f64,
}

impl Numerics {
    fn bracket(&self) -> BracketOptions {
        BracketOptions { levels: self.levels, eps: self.eps, tol: self.tol, inertia_check: true }
    }
}

#[derive(Args, Clone, Copy)]
struct Region {
    #[arg(long, default_value_t = 0.156)]
    q_min: f64,
    #[arg(long, default_value_t = 1.0)]
    q_max: f64,
    #[arg(long, default_value_t = 0.5)]
    p_min: f64,
    #[arg(long, default_value_t = 1.0)]
    p_max: f64,
    /// Radius of the disk around the equilateral apex left to the local analysis.
    #[arg(long, default_value_t = 0.0022)]
    excision_radius: f64,
}

impl Region {
    fn spec(&self) -> RegionSpec<f64> {
        RegionSpec {
            q_min: self.q_min,
            q_max: self.q_max,
            p_min: self.p_min,
            p_max: self.p_max,
            excision_radius: self.excision_radius,
            ..RegionSpec::default()
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum Continuity {
    Sandwich,
    Published,
}

#[derive(Clone, Copy, ValueEnum)]
enum Mode {
    Coverage,
    Full,
}

#[derive(Clone, Copy, ValueEnum)]
enum PointShape {
    Triangle,
    Square,
}

#[derive(Clone, Copy, ValueEnum)]
enum LocalShape {
    Triangle,
    Quad,
}

#[derive(Subcommand)]
enum Command {
    /// Sweep the region and write a certificate.
    Certify {
        #[command(flatten)]
        numerics: Numerics,
        #[command(flatten)]
        region: Region,
        /// Deepest refinement tried when a point fails at --levels.
        #[arg(long)]
        max_levels: Option<u32>,
        #[arg(long, default_value_t = 0.9)]
        safety: f64,
        #[arg(long, value_enum, default_value_t = Continuity::Sandwich)]
        continuity: Continuity,
        /// Steps below this abort the sweep.
        #[arg(long, default_value_t = 1e-6)]
        min_step: f64,
        /// Steps below this retry the point one level deeper, up to --max-levels.
        #[arg(long, default_value_t = 1e-4)]
        refine_below: f64,
        #[arg(long)]
        out: PathBuf,
        /// Continue an interrupted certificate at --out.
        #[arg(long)]
        resume: bool,
    },
    /// Audit a certificate.
    Verify {
        certificate: PathBuf,
        #[arg(long, value_enum, default_value_t = Mode::Coverage)]
        mode: Mode,
    },
    /// Certified bracket for one triangle apex or the unit square.
    Point {
        /// Apex abscissa, required for a triangle.
        #[arg(long)]
        p: Option<f64>,
        /// Apex height, required for a triangle.
        #[arg(long)]
        q: Option<f64>,
        #[arg(long, value_enum, default_value_t = PointShape::Triangle)]
        shape: PointShape,
        #[command(flatten)]
        numerics: Numerics,
    },
    /// First-order responses and local bounds at the equilateral triangle or the square.
    Local {
        #[arg(long, value_enum)]
        shape: LocalShape,
        /// Rows of the local-bound table.
        #[arg(long, default_value_t = 10)]
        steps: usize,
    },
    /// Measure ratio slopes by finite differences of certified brackets.
    PerturbCheck {
        #[arg(long, value_enum, default_value_t = LocalShape::Triangle)]
        shape: LocalShape,
        /// Random directions for the triangle.
        #[arg(long, default_value_t = 5)]
        directions: usize,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(long, default_value_t = 7)]
        levels: u32,
        #[arg(long, default_value_t = 1e-10)]
        tol: f64,
        /// Perturbation sizes, each in (0, 0.01].
        #[arg(long, value_delimiter = ',', default_value = "0.0025,0.005,0.0075,0.01")]
        samples: Vec<f64>,
        /// Allowed relative deviation from the closed form.
        #[arg(long, default_value_t = 0.05)]
        tolerance: f64,
    },
    /// Write p,q,xi_h on a regular grid as CSV.
    PlotGrid {
        #[command(flatten)]
        region: Region,
        #[command(flatten)]
        numerics: Numerics,
        #[arg(long, default_value_t = 20)]
        resolution: usize,
        #[arg(long)]
        out: PathBuf,
    },
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    match run(cli.command) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Io(_) | Error::Schema(_) => EXIT_IO,
        Error::InvalidArgument(_) => EXIT_USAGE,
        _ => EXIT_CERTIFICATION,
    }
}

fn fmt(v: f64) -> String {
    f17::format(v)
}

fn run(command: Command) -> Result<u8, Error> {
    match command {
        Command::Certify { numerics, region, max_levels, safety, continuity, min_step, refine_below, out, resume } => {
            let config = SweepConfig {
                region: region.spec(),
                levels: numerics.levels,
                max_levels: max_levels.unwrap_or(numerics.levels),
                eps: numerics.eps,
                safety,
                tol: numerics.tol,
                estimate: match continuity {
                    Continuity::Sandwich => ContinuityEstimate::Sandwich,
                    Continuity::Published => ContinuityEstimate::Published,
                },
                min_step,
                refine_below,
                ..SweepConfig::default()
            };
            let start = Instant::now();
            let summary = certify_to_file(&config, &out, resume)?;
            println!("certificate {}", out.display());
            println!("outcome {:?}", summary.outcome);
            println!("points {}", summary.points);
            println!("rows {}", summary.rows);
            println!("max_levels_used {}", summary.max_levels_used);
            if let Some(t) = summary.min_t_star {
                println!("min_t_star {}", fmt(t));
            }
            println!("seconds {:.1}", start.elapsed().as_secs_f64());
            Ok(match summary.outcome {
                SweepOutcome::Complete => 0,
                SweepOutcome::CertificationFailure => EXIT_CERTIFICATION,
                SweepOutcome::Stall => EXIT_STALL,
            })
        }
        Command::Verify { certificate, mode } => {
            let mode = match mode {
                Mode::Coverage => VerifyMode::Coverage,
                Mode::Full => VerifyMode::Full,
            };
            let verdict = replay_verify(&certificate, mode)?;
            println!("outcome {:?}", verdict.outcome);
            println!("records {}", verdict.records_checked);
            println!("rectangles {}", verdict.coverage.rectangles_checked);
            println!("covered {}", verdict.coverage.covered);
            if let Some(w) = verdict.coverage.gap_witness {
                println!("gap_witness {} {}", fmt(w.p), fmt(w.q));
            }
            for f in &verdict.failures {
                println!("failure i={} j={}: {}", f.i, f.j, f.reason);
            }
            println!("verdict {}", if verdict.passed() { "pass" } else { "fail" });
            Ok(if verdict.passed() {
                0
            } else if verdict.outcome == SweepOutcome::Stall {
                EXIT_STALL
            } else {
                EXIT_CERTIFICATION
            })
        }
        Command::Point { p, q, shape, numerics } => {
            let opts = numerics.bracket();
            let b = match shape {
                PointShape::Triangle => {
                    let (Some(p), Some(q)) = (p, q) else {
                        return Err(Error::InvalidArgument("a triangle needs --p and --q".into()));
                    };
                    let pt = ModuliPoint::new(p, q);
                    certified_ratio_with(pt.triangle(), &opts)?
                }
                PointShape::Square => {
                    let mesh = refine_quadrilateral([[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0]], opts.levels)?;
                    certified_ratio_mesh(&mesh, opts.levels, &opts)?
                }
            };
            print_bracket(&b);
            Ok(0)
        }
        Command::Local { shape, steps } => {
            match shape {
                LocalShape::Triangle => local_triangle(steps)?,
                LocalShape::Quad => local_quad(steps)?,
            }
            Ok(0)
        }
        Command::PerturbCheck { shape, directions, seed, levels, tol, samples, tolerance } => {
            let opts = FdOptions { levels, tol, relative_threshold: tolerance };
            perturb_check(shape, directions, seed, &samples, &opts, tolerance)
        }
        Command::PlotGrid { region, numerics, resolution, out } => {
            let start = Instant::now();
            let rows = export_ratio_grid(&region.spec(), resolution, &numerics.bracket(), &out)?;
            info!("grid written in {:.1}s", start.elapsed().as_secs_f64());
            println!("wrote {rows} rows to {}", out.display());
            Ok(0)
        }
    }
}

fn print_bracket(b: &SpectralBracket<f64>) {
    let rows = [
        ("lam1_low", b.lam1_low),
        ("lam1_h", b.lam1_h),
        ("lam1_h_floor", b.lam1_h_floor),
        ("lam1_up", b.lam1_up),
        ("lam2_h", b.lam2_h),
        ("lam2_low", b.lam2_low),
        ("rayleigh_sum", b.rayleigh_sum),
        ("lam2_up", b.lam2_up),
        ("xi_low", b.xi_low),
        ("xi_h", b.xi_h),
        ("h", b.h),
        ("eps", b.eps),
        ("orthonormality_defect", b.orthonormality_defect),
    ];
    for (name, v) in rows {
        println!("{name} {}", fmt(v));
    }
    println!("levels {}", b.levels);
    println!("dofs_cr {}", b.dofs_cr);
    println!("dofs_p1 {}", b.dofs_p1);
}

fn print_report(label: &str, r: &PerturbationReport<f64>) {
    println!(
        "{label} nu1 {} nu2 {} nu3 {} ratio_slope {} local_radius {}",
        fmt(r.nu1),
        fmt(r.nu2),
        fmt(r.nu3),
        fmt(r.ratio_slope),
        fmt(r.local_radius)
    );
}

fn diagonal(sign: f64) -> Direction2<f64> {
    let h = std::f64::consts::FRAC_1_SQRT_2;
    Direction2 { a: h, b: sign * h }
}

fn local_triangle(steps: usize) -> Result<(), Error> {
    println!("slope_magnitude {}", fmt(tri_slope_magnitude::<f64>()));
    println!("second_order {}", fmt(TRI_SECOND_ORDER));
    for (label, dir) in [
        ("dir(1,0)", Direction2 { a: 1.0, b: 0.0 }),
        ("dir(0,1)", Direction2 { a: 0.0, b: 1.0 }),
        ("dir(d,d)", diagonal(1.0)),
    ] {
        print_report(label, &tri_first_order(dir));
    }
    let radius = tri_slope_magnitude::<f64>() / TRI_SECOND_ORDER;
    println!("t,upper_bound");
    for k in 0..=steps {
        let t = 0.5 * k as f64 / steps.max(1) as f64;
        println!("{},{}", fmt(t), fmt(tri_local_upper(t)?));
    }
    println!("radius_below_7_3 {}", fmt(radius));
    Ok(())
}

fn local_quad(steps: usize) -> Result<(), Error> {
    println!("slope_min {}", fmt(QUAD_SLOPE_MIN));
    println!("slope_max {}", fmt(QUAD_SLOPE_MAX));
    println!("second_order {}", fmt(QUAD_SECOND_ORDER));
    for (label, dir) in [("dir(d,d)", diagonal(1.0)), ("dir(d,-d)", diagonal(-1.0))] {
        let r = quad_first_order(dir, dir);
        print_report(&format!("{label} t"), &r.t);
        print_report(&format!("{label} s"), &r.s);
    }
    println!("t,s,upper_bound");
    for k in 0..=steps {
        let t = 0.25 * k as f64 / steps.max(1) as f64;
        println!("{},{},{}", fmt(t), fmt(t), fmt(quad_local_upper(t, t)?));
    }
    println!("radius_below_5_2 {}", fmt(QUAD_SLOPE_MIN / QUAD_SECOND_ORDER));
    Ok(())
}

/// Label, shape, direction and optional second-corner direction.
type FdCase = (String, Shape, Direction2<f64>, Option<Direction2<f64>>);

fn perturb_check(
    shape: LocalShape,
    directions: usize,
    seed: u64,
    samples: &[f64],
    opts: &FdOptions,
    tolerance: f64,
) -> Result<u8, Error> {
    let mut cases: Vec<FdCase> = Vec::new();
    match shape {
        LocalShape::Triangle => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            for _ in 0..directions {
                let theta: f64 = rng.gen_range(0.0..std::f64::consts::TAU);
                let d = Direction2::from_angle(theta);
                cases.push((format!("triangle theta {}", fmt(theta)), Shape::Equilateral, d, None));
            }
        }
        LocalShape::Quad => {
            cases.push(("square t dir(d,d)".into(), Shape::Square, diagonal(1.0), None));
            cases.push(("square t dir(d,-d)".into(), Shape::Square, diagonal(-1.0), None));
            cases.push(("square s dir(d,d)".into(), Shape::Square, diagonal(1.0), Some(diagonal(1.0))));
        }
    }
    let mut all = true;
    for (label, shape, dir, dir_s) in cases {
        let start = Instant::now();
        let fd = fd_slope_measure(shape, dir, dir_s, samples, opts)?;
        let ok = fd.agrees(tolerance);
        all &= ok;
        println!(
            "{label}: slope {} uncertainty {} closed_form {} relative_error {} {} ({:.1}s)",
            fmt(fd.slope),
            fmt(fd.uncertainty),
            fmt(fd.closed_form),
            fmt((fd.slope - fd.closed_form).abs() / fd.closed_form.abs()),
            if ok {
                "ok"
            } else if fd.inconclusive {
                "inconclusive"
            } else {
                "mismatch"
            },
            start.elapsed().as_secs_f64()
        );
    }
    Ok(if all { 0 } else { EXIT_CERTIFICATION })
}
