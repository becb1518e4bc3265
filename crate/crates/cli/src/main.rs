//! `hullscope`: reproducible runs of the projective-hull experiments.
//!
//! Exit codes: 0 success, 2 invalid input or violated precondition,
//! 3 numerical failure.

mod output;
mod parse;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use serde_json::{json, Value};

use hullscope_core::bishop::{construct_bishop, decay_table, green_rate, DomainSpec, R0Policy};
use hullscope_core::curve::CurveC2;
use hullscope_core::extremal::{
    analyticity_probe, cylinder_envelope, hull_slice, stability_probe, ExtremalEngine, ExtremalOptions, SliceAxis,
    SliceSpec, StabilityOptions, ZGrid,
};
use hullscope_core::fiber::{
    fiber_scan_with, finiteness_experiment, sublevel_measure_with, t_set, FiberOptions, FinitenessOptions, SublevelSet,
    Window,
};
use hullscope_core::par::Exec;
use hullscope_core::polyalg::UnivariatePoly;
use hullscope_core::report::{self, json_complex, json_f64};
use hullscope_core::{Complex64, Error};

use output::{sha256_hex, Outputs, RunConfig};
use parse::{Coefficients, Degrees};

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error(transparent)]
    Core(#[from] Error),
    #[error("{0}")]
    Input(String),
    #[error("{0}")]
    Output(String),
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Core(e) if e.is_numerical() => 3,
            _ => 2,
        }
    }
}

#[derive(Parser, Debug)]
#[command(
    name = "hullscope",
    version,
    about = "Projective hulls of real-analytic curves in C^2"
)]
struct Cli {
    /// Directory for output files and their sidecars.
    #[arg(long, global = true, default_value = ".")]
    output_dir: PathBuf,
    /// Root seed for sampled experiments.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    /// Run grid and sample work on the calling thread only.
    #[arg(long, global = true)]
    sequential: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Best constants over a coordinate slice, with membership at level M.
    Slice(SliceArgs),
    /// Fiber of the hull over one z.
    Fiber(FiberArgs),
    /// Decay table of Bishop polynomials against the Green's-function rate.
    Bishop(BishopArgs),
    /// Monte Carlo area of a sublevel set in the unit disk.
    Measure(MeasureArgs),
    /// Degree-d extremal value at one point.
    Extremal(ExtremalArgs),
    /// Fiber cardinalities against limit-polynomial roots over sampled z.
    Finiteness(FinitenessArgs),
    /// Stability or analyticity evidence.
    Probe(ProbeArgs),
    /// Parse a curve file and report its invariants.
    Validate(ValidateArgs),
}

#[derive(Args, Debug, Serialize)]
struct LpArgs {
    /// Boundary samples per component (default: automatic).
    #[arg(long = "S")]
    samples: Option<usize>,
    /// Modulus directions in the polygonal relaxation.
    #[arg(long = "K-dir", default_value_t = 32)]
    directions: usize,
}

#[derive(Args, Debug, Serialize)]
struct SliceArgs {
    #[arg(long)]
    curve: PathBuf,
    #[arg(long = "M")]
    m: f64,
    #[arg(long = "grid", default_value_t = 128)]
    grid_n: usize,
    #[arg(long, default_value_t = 6)]
    d_max: usize,
    /// Coordinate held fixed.
    #[arg(long, value_enum, default_value_t = Fixed::W)]
    fixed: Fixed,
    /// Value of the fixed coordinate, `re,im`.
    #[arg(long, default_value = "0", value_parser = parse::complex)]
    at: Complex64,
    #[arg(long, default_value = "-2,2", value_parser = parse::interval, allow_hyphen_values = true)]
    re: (f64, f64),
    #[arg(long, default_value = "-2,2", value_parser = parse::interval, allow_hyphen_values = true)]
    im: (f64, f64),
    #[command(flatten)]
    lp: LpArgs,
}

#[derive(Debug, Clone, Copy, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
enum Fixed {
    W,
    Z,
}

#[derive(Args, Debug, Serialize)]
struct FiberArgs {
    #[arg(long)]
    curve: PathBuf,
    #[arg(long, value_parser = parse::complex, allow_hyphen_values = true)]
    z: Complex64,
    #[arg(long = "M")]
    m: f64,
    #[arg(long = "grid", default_value_t = 32)]
    grid_n: usize,
    #[arg(long, default_value_t = 6)]
    d_max: usize,
    #[arg(long, default_value_t = 6)]
    e_max: usize,
    /// Half-width of the square w window about 0 (default from the curve).
    #[arg(long)]
    window: Option<f64>,
    #[command(flatten)]
    lp: LpArgs,
}

#[derive(Args, Debug, Serialize)]
struct DomainArgs {
    /// Disk of this radius about 0 as the domain of the Green's function.
    #[arg(long, conflicts_with = "annulus")]
    radius: Option<f64>,
    /// Annulus `inner,outer` as the domain.
    #[arg(long, value_parser = parse::interval)]
    annulus: Option<(f64, f64)>,
    /// Base point (default: 0 for polynomial data, else (1 + rho)/2).
    #[arg(long, value_parser = parse::complex, allow_hyphen_values = true)]
    zeta0: Option<Complex64>,
    /// Fixed r0 (default: sqrt(r)).
    #[arg(long)]
    r0: Option<f64>,
}

impl DomainArgs {
    fn domain(&self, curve: &CurveC2) -> DomainSpec {
        match (self.radius, self.annulus) {
            (Some(r), _) => DomainSpec::disk(r),
            (None, Some((a, b))) => DomainSpec::Annulus { inner: a, outer: b },
            (None, None) => DomainSpec::default_for(curve),
        }
    }

    fn zeta0(&self, curve: &CurveC2) -> Complex64 {
        self.zeta0.unwrap_or_else(|| curve.default_base_point())
    }

    fn r0_policy(&self) -> R0Policy {
        self.r0.map_or(R0Policy::Sqrt, R0Policy::Fixed)
    }
}

#[derive(Args, Debug, Serialize)]
struct BishopArgs {
    #[arg(long)]
    curve: PathBuf,
    /// Degrees in z: `lo..hi`, `a,b,c` or one value.
    #[arg(long, value_parser = parse::degrees)]
    d: Degrees,
    /// Degrees in w, same syntax.
    #[arg(long, value_parser = parse::degrees)]
    e: Degrees,
    #[command(flatten)]
    domain: DomainArgs,
}

#[derive(Args, Debug, Serialize)]
struct MeasureArgs {
    /// Ascending coefficients `re,im;re,im;...` of the test polynomial.
    #[arg(long, value_parser = parse::coefficients, allow_hyphen_values = true, conflicts_with = "curve")]
    coeffs: Option<Coefficients>,
    /// Threshold alpha^k, k the polynomial degree.
    #[arg(long, conflicts_with = "threshold")]
    alpha: Option<f64>,
    #[arg(long)]
    threshold: Option<f64>,
    /// Measure the exceptional set T(d,e) of this curve's Bishop polynomial instead.
    #[arg(long)]
    curve: Option<PathBuf>,
    #[arg(long, default_value_t = 4)]
    d: usize,
    #[arg(long, default_value_t = 4)]
    e: usize,
    #[arg(long = "n", default_value_t = 100_000)]
    n_samples: usize,
    #[command(flatten)]
    domain: DomainArgs,
}

#[derive(Args, Debug, Serialize)]
struct ExtremalArgs {
    #[arg(long)]
    curve: PathBuf,
    #[arg(long, value_parser = parse::complex, allow_hyphen_values = true)]
    z: Complex64,
    #[arg(long, value_parser = parse::complex, allow_hyphen_values = true)]
    w: Complex64,
    #[arg(long)]
    d: usize,
    /// Also report the best constant over degrees 1..=d.
    #[arg(long)]
    best_constant: bool,
    #[command(flatten)]
    lp: LpArgs,
}

#[derive(Args, Debug, Serialize)]
struct FinitenessArgs {
    #[arg(long)]
    curve: PathBuf,
    #[arg(long = "M")]
    m: f64,
    #[arg(long)]
    e: usize,
    #[arg(long, default_value_t = 50)]
    n_z: usize,
    /// Degrees for the limit polynomial (default e+1, e+3, e+5).
    #[arg(long, value_parser = parse::degrees)]
    d_list: Option<Degrees>,
    #[arg(long = "grid", default_value_t = 24)]
    grid_n: usize,
    #[command(flatten)]
    domain: DomainArgs,
}

#[derive(Debug, Clone, Copy, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
enum ProbeKind {
    Stability,
    Analyticity,
}

#[derive(Args, Debug, Serialize)]
struct ProbeArgs {
    #[arg(long)]
    curve: PathBuf,
    #[arg(long, value_enum, default_value_t = ProbeKind::Stability)]
    kind: ProbeKind,
    #[arg(long, default_value_t = 10)]
    n_points: usize,
    #[arg(long, default_value_t = 4)]
    d_max: usize,
    /// Increasing scan radii for the stability probe.
    #[arg(long, value_delimiter = ',', default_values_t = [1.0, 4.0, 16.0])]
    radii: Vec<f64>,
    /// Level used to locate hull points.
    #[arg(long = "scan-M", default_value_t = 1e3)]
    scan_m: f64,
    /// Lower-left z of the analyticity grid.
    #[arg(long, default_value = "0.2,0.1", value_parser = parse::complex, allow_hyphen_values = true)]
    z0: Complex64,
    #[arg(long, default_value_t = 0.05)]
    spacing: f64,
    #[arg(long, default_value_t = 5)]
    nx: usize,
    #[arg(long, default_value_t = 5)]
    ny: usize,
    /// Level for the analyticity fibers.
    #[arg(long = "M", default_value_t = 3.0)]
    m: f64,
    #[arg(long = "grid", default_value_t = 24)]
    grid_n: usize,
    #[arg(long, default_value_t = 6)]
    caps: usize,
}

#[derive(Args, Debug, Serialize)]
struct ValidateArgs {
    /// Curve JSON file.
    path: PathBuf,
}

fn load_curve(path: &Path) -> Result<(CurveC2, String), CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Input(format!("cannot read curve file {}: {e}", path.display())))?;
    let curve = CurveC2::from_json_str(&text).map_err(|e| CliError::Input(format!("{}: {e}", path.display())))?;
    Ok((curve, sha256_hex(text.as_bytes())))
}

fn config<T: Serialize>(command: &'static str, seed: u64, curve_sha: Option<String>, args: &T) -> RunConfig {
    RunConfig {
        command,
        seed,
        curve_sha256: curve_sha,
        args: serde_json::to_value(args).expect("args serialize"),
    }
}

fn engine(curve: &CurveC2, lp: &LpArgs, exec: Exec) -> ExtremalEngine {
    ExtremalEngine::new(
        curve,
        ExtremalOptions {
            samples: lp.samples,
            directions: lp.directions,
            exec,
        },
    )
}

fn run(cli: Cli) -> Result<(), CliError> {
    let exec = if cli.sequential {
        Exec::Sequential
    } else {
        Exec::Parallel
    };
    let seed = cli.seed;
    let dir = cli.output_dir.as_path();
    match cli.command {
        Command::Slice(a) => {
            let (curve, sha) = load_curve(&a.curve)?;
            let mut out = Outputs::new(dir, config("slice", seed, Some(sha), &a))?;
            let spec = SliceSpec {
                fixed: match a.fixed {
                    Fixed::W => SliceAxis::W,
                    Fixed::Z => SliceAxis::Z,
                },
                fixed_value: a.at,
                re: a.re,
                im: a.im,
            };
            let slice = hull_slice(
                &engine(&curve, &a.lp, exec),
                a.m,
                spec,
                a.grid_n,
                a.d_max,
                &cylinder_envelope,
            )?;
            out.write("hull_slice.csv", &report::hull_slice_csv(&slice))?;
            eprintln!(
                "member area {:.6}, envelope violations {}",
                slice.member_area(),
                slice.envelope_violations.len()
            );
            finish(&out);
        }
        Command::Fiber(a) => {
            let (curve, sha) = load_curve(&a.curve)?;
            let mut out = Outputs::new(dir, config("fiber", seed, Some(sha), &a))?;
            let fiber = fiber_scan_with(
                &engine(&curve, &a.lp, exec),
                a.z,
                a.m,
                &FiberOptions {
                    window: a.window.map(|h| Window::centered(Complex64::new(0.0, 0.0), h)),
                    grid_n: a.grid_n,
                    caps: (a.d_max, a.e_max),
                    exec,
                },
            )?;
            out.write("fiber.csv", &report::fiber_csv(&fiber))?;
            eprintln!(
                "{} cluster(s), cluster_eps {:.3e}",
                fiber.cardinality(),
                fiber.cluster_eps
            );
            finish(&out);
        }
        Command::Bishop(a) => {
            let (curve, sha) = load_curve(&a.curve)?;
            let mut out = Outputs::new(dir, config("bishop", seed, Some(sha), &a))?;
            let zeta0 = a.domain.zeta0(&curve);
            let rate = green_rate(a.domain.domain(&curve), zeta0)?;
            let table = decay_table(&curve, zeta0, &a.d.0, &a.e.0, &rate, a.domain.r0_policy(), exec)?;
            out.write("decay.csv", &report::decay_csv(&table))?;
            eprintln!(
                "r = {:.6}, r0 = {:.6}, fitted C = {:.6}",
                rate.r, table.r0, table.fitted_c
            );
            finish(&out);
        }
        Command::Measure(a) => {
            let sha = match &a.curve {
                Some(p) => Some(load_curve(p)?.1),
                None => None,
            };
            let mut out = Outputs::new(dir, config("measure", seed, sha, &a))?;
            let set = match (&a.curve, &a.coeffs) {
                (Some(path), _) => {
                    let (curve, _) = load_curve(path)?;
                    let zeta0 = a.domain.zeta0(&curve);
                    let rate = green_rate(a.domain.domain(&curve), zeta0)?;
                    let r0 = a.domain.r0_policy().resolve(rate.r)?;
                    t_set(&construct_bishop(&curve, a.d, a.e, zeta0)?, r0)?
                }
                (None, Some(coeffs)) => {
                    let poly = UnivariatePoly::new(coeffs.0.clone());
                    match (a.alpha, a.threshold) {
                        (Some(alpha), _) => SublevelSet::with_alpha(poly, alpha)?,
                        (None, Some(t)) => {
                            let k = poly.degree().max(1);
                            SublevelSet::new(poly, t, k)?
                        }
                        (None, None) => return Err(CliError::Input("give --alpha or --threshold".into())),
                    }
                }
                (None, None) => return Err(CliError::Input("give --coeffs or --curve".into())),
            };
            let m = sublevel_measure_with(&set, a.n_samples, seed, exec)?;
            out.write_json(
                "measure.json",
                &json!({
                    "estimate": json_f64(m.estimate),
                    "std_error": json_f64(m.std_error),
                    "n_samples": m.n_samples,
                    "bound": json_f64(m.bound),
                    "seed": m.seed,
                    "threshold": json_f64(set.threshold),
                    "k": set.k,
                    "config_hash": out.config_hash(),
                }),
            )?;
            eprintln!("measure {:.6} ± {:.2e} (bound {:.4})", m.estimate, m.std_error, m.bound);
            finish(&out);
        }
        Command::Extremal(a) => {
            let (curve, sha) = load_curve(&a.curve)?;
            let mut out = Outputs::new(dir, config("extremal", seed, Some(sha), &a))?;
            let eng = engine(&curve, &a.lp, exec);
            let r = eng.extremal_value((a.z, a.w), a.d)?;
            let witness: Value = serde_json::from_str(&r.witness.to_json_string()).expect("witness json");
            let mut doc = json!({
                "value": json_f64(r.value),
                "status": r.status,
                "enclosure": [json_f64(r.enclosure.0), json_f64(r.enclosure.1)],
                "optimum": json_f64(r.optimum),
                "raw_value": json_f64(r.raw_value),
                "cut_rounds": r.cut_rounds,
                "kernel_residual": json_f64(r.kernel_residual),
                "degree": r.degree(),
                "lp_stats": r.lp_stats,
                "witness": witness,
                "config_hash": out.config_hash(),
            });
            if a.best_constant {
                let b = eng.best_constant((a.z, a.w), a.d)?;
                doc["best_constant"] = json_f64(b.value);
                doc["per_degree"] = b.per_degree.iter().map(|v| json_f64(*v)).collect();
            }
            out.write_json("extremal.json", &doc)?;
            eprintln!("value {} ({:?})", report::fmt_f64(r.value), r.status);
            finish(&out);
        }
        Command::Finiteness(a) => {
            let (curve, sha) = load_curve(&a.curve)?;
            let mut out = Outputs::new(dir, config("finiteness", seed, Some(sha), &a))?;
            let zeta0 = a.domain.zeta0(&curve);
            let rate = green_rate(a.domain.domain(&curve), zeta0)?;
            let r0 = a.domain.r0_policy().resolve(rate.r)?;
            let rep = finiteness_experiment(
                &curve,
                a.m,
                a.e,
                a.n_z,
                seed,
                &FinitenessOptions {
                    d_list: a.d_list.clone().map(|d| d.0),
                    r0,
                    zeta0,
                    grid_n: a.grid_n,
                    caps: None,
                    exec,
                },
            )?;
            out.write_json("finiteness.json", &report::finiteness_json(&rep))?;
            out.write("finiteness_summary.csv", &report::finiteness_summary_csv(&rep))?;
            eprintln!(
                "fraction ok {:.3}, exceptional {:.3}, bound {:.3}{}",
                rep.fraction_ok,
                rep.exceptional_fraction,
                rep.bound_fraction,
                if rep.vacuous { " (vacuous)" } else { "" }
            );
            finish(&out);
        }
        Command::Probe(a) => {
            let (curve, sha) = load_curve(&a.curve)?;
            let mut out = Outputs::new(dir, config("probe", seed, Some(sha), &a))?;
            let eng = ExtremalEngine::new(
                &curve,
                ExtremalOptions {
                    exec,
                    ..Default::default()
                },
            );
            match a.kind {
                ProbeKind::Stability => {
                    let rep = stability_probe(
                        &eng,
                        a.n_points,
                        a.d_max,
                        seed,
                        &StabilityOptions {
                            radii: a.radii.clone(),
                            scan_m: a.scan_m,
                            grid_n: a.grid_n.clamp(16, 24),
                            caps: (a.caps, a.caps),
                            exec,
                        },
                    )?;
                    out.write("stability.csv", &report::stability_csv(&rep))?;
                    out.write_json(
                        "stability.json",
                        &json!({
                            "verdict": rep.verdict,
                            "sup_estimate": json_f64(rep.sup_estimate),
                            "n_hull_points": rep.sample_points.len(),
                            "note": "numerical evidence, not proof",
                            "config_hash": out.config_hash(),
                        }),
                    )?;
                    eprintln!("{:?}, sup {}", rep.verdict, report::fmt_f64(rep.sup_estimate));
                }
                ProbeKind::Analyticity => {
                    let grid = ZGrid {
                        origin: a.z0,
                        spacing: a.spacing,
                        nx: a.nx,
                        ny: a.ny,
                    };
                    let fopts = FiberOptions {
                        window: None,
                        grid_n: a.grid_n,
                        caps: (a.caps, a.caps),
                        exec,
                    };
                    let fibers = grid
                        .points()
                        .into_iter()
                        .map(|z| fiber_scan_with(&eng, z, a.m, &fopts))
                        .collect::<Result<Vec<_>, _>>()?;
                    let rep = analyticity_probe(&fibers, grid)?;
                    let branches: Vec<Value> = rep
                        .branches
                        .iter()
                        .map(|b| {
                            json!({
                                "max_residual": json_f64(b.max_residual),
                                "noise_floor": json_f64(b.noise_floor),
                                "flagged": b.flagged,
                                "n_interior": b.n_interior,
                                "trace": b.values.iter()
                                    .map(|v| v.map_or(Value::Null, json_complex))
                                    .collect::<Vec<_>>(),
                            })
                        })
                        .collect();
                    out.write_json(
                        "analyticity.json",
                        &json!({
                            "branches": branches,
                            "failures": rep.failures,
                            "config_hash": out.config_hash(),
                        }),
                    )?;
                    for (k, b) in rep.branches.iter().enumerate() {
                        eprintln!(
                            "branch {k}: max |dw/dzbar| {:.3e} (flagged: {})",
                            b.max_residual, b.flagged
                        );
                    }
                }
            }
            finish(&out);
        }
        Command::Validate(a) => {
            let (curve, _) = load_curve(&a.path)?;
            println!("{}", validate_line(&curve));
        }
    }
    Ok(())
}

fn validate_line(curve: &CurveC2) -> String {
    let n = curve.n_components();
    let (df, dg) = curve.degree_bounds();
    let simple = curve.check_simple();
    format!(
        "{n} component{}, degrees ({df},{dg}), simple: {}",
        if n == 1 { "" } else { "s" },
        if simple.simple { "yes" } else { "no (warning)" }
    )
}

fn finish(out: &Outputs) {
    for p in out.written() {
        eprintln!("wrote {}", p.display());
    }
}

fn configure_threads() -> Result<(), CliError> {
    let Ok(raw) = std::env::var("HULLSCOPE_THREADS") else {
        return Ok(());
    };
    let n: usize = raw
        .trim()
        .parse()
        .map_err(|_| CliError::Input(format!("HULLSCOPE_THREADS must be a non-negative integer, got `{raw}`")))?;
    if n > 0 {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::Input(format!("cannot size thread pool: {e}")))?;
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match configure_threads().and_then(|_| run(cli)) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("hullscope: {err}");
            ExitCode::from(err.exit_code())
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use clap::CommandFactory;

    #[test]
    fn cli_definition_is_consistent() {
        Cli::command().debug_assert();
        for argv in [
            "hullscope measure --coeffs 0,0;1,0 --alpha 0.1",
            "hullscope bishop --curve c.json --d 3..10 --e 3",
            "hullscope finiteness --curve c.json --M 2 --e 3 --d-list 4,6",
            "hullscope probe --curve c.json --kind analyticity --radii 1,2",
            "hullscope slice --curve c.json --M 1.5 --re -1,1",
        ] {
            Cli::try_parse_from(argv.split(' ')).unwrap_or_else(|e| panic!("{argv}: {e}"));
        }
    }
}
