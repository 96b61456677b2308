//! Command-line front end.
//!
//! Exit codes: 0 success, 1 quantitative failure (verification failed,
//! solver did not converge), 2 usage, configuration or I/O error.

use crate::dynamics::Problem;
use crate::harness::{
    body_paths, run_family, solve_orbit, verify_table, FamilyOptions, FamilyStart, GoldenError,
    GoldenTable, SolverSettings,
};
use crate::integrator::{IntegratorConfig, Method};
use crate::shooting::{periodicity_check, residual, ReturnSpec, Unknowns};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};
use std::fmt::Write as _;
use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};
use thiserror::Error;

pub const EXIT_OK: i32 = 0;
pub const EXIT_FAILURE: i32 = 1;
pub const EXIT_USAGE: i32 = 2;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error(transparent)]
    Golden(#[from] GoldenError),
    #[error("invalid config file {path}: {message}")]
    Config { path: String, message: String },
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> CliError + '_ {
    move |source| CliError::Io {
        path: path.display().to_string(),
        source,
    }
}

/// An angle given on the command line with an explicit unit, e.g. `60deg`
/// or `1.047rad`. Stored in radians.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Angle(pub f64);

impl std::str::FromStr for Angle {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let s = s.trim();
        let (num, to_rad) = if let Some(n) = s.strip_suffix("deg") {
            (n, true)
        } else if let Some(n) = s.strip_suffix("rad") {
            (n, false)
        } else {
            return Err(format!("angle '{s}' needs a unit suffix: deg or rad"));
        };
        let v: f64 = num
            .trim()
            .parse()
            .map_err(|_| format!("'{num}' is not a number"))?;
        if !v.is_finite() {
            return Err(format!("angle '{s}' is not finite"));
        }
        Ok(Angle(if to_rad { v.to_radians() } else { v }))
    }
}

impl Serialize for Angle {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&format!("{}rad", self.0))
    }
}

impl<'de> Deserialize<'de> for Angle {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// Parses `start:step:end` in degrees (a trailing `deg` or `rad` applies
/// to all three numbers). Returns radians.
pub fn parse_grid(s: &str) -> Result<Vec<f64>, String> {
    let s = s.trim();
    let (body, to_rad) = if let Some(b) = s.strip_suffix("rad") {
        (b, false)
    } else {
        (s.strip_suffix("deg").unwrap_or(s), true)
    };
    let parts: Vec<f64> = body
        .split(':')
        .map(|p| p.trim().parse::<f64>().map_err(|_| format!("bad grid value '{p}'")))
        .collect::<Result<_, _>>()?;
    let [start, step, end] = parts[..] else {
        return Err(format!("grid '{s}' must be start:step:end"));
    };
    if !(step > 0.0) || !start.is_finite() || !end.is_finite() {
        return Err(format!("grid '{s}' needs a positive step and finite bounds"));
    }
    let n = ((end - start) / step + 1e-9).floor();
    if n < 0.0 {
        return Err(format!("grid '{s}' is empty"));
    }
    if n > 1e5 {
        return Err(format!("grid '{s}' has too many points"));
    }
    Ok((0..=n as usize)
        .map(|k| {
            let v = start + k as f64 * step;
            if to_rad {
                v.to_radians()
            } else {
                v
            }
        })
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TableName {
    N4,
    N6,
}

impl TableName {
    pub fn problem(self) -> Problem {
        match self {
            TableName::N4 => Problem::FourBody,
            TableName::N6 => Problem::SixBody,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OutputFormat {
    Csv,
    Json,
    Svg,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum MethodArg {
    Adaptive,
    Rk4,
}

fn parse_problem(s: &str) -> Result<Problem, String> {
    s.parse::<usize>()
        .ok()
        .and_then(Problem::from_body_count)
        .ok_or_else(|| format!("problem must be 4 or 6, got '{s}'"))
}

/// Settings that can come from a JSON config file; flags override them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub problem: Option<usize>,
    pub theta1: Option<Angle>,
    pub integrator: IntegratorConfig,
    pub solver: SolverSettings,
    pub output_dir: PathBuf,
    pub format: OutputFormat,
    pub seed: u64,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            problem: None,
            theta1: None,
            integrator: IntegratorConfig::default(),
            solver: SolverSettings::default(),
            output_dir: PathBuf::from("out"),
            format: OutputFormat::Json,
            seed: 0,
        }
    }
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = fs::read_to_string(path).map_err(io_err(path))?;
        let cfg: RunConfig = serde_json::from_str(&text).map_err(|e| CliError::Config {
            path: path.display().to_string(),
            message: e.to_string(),
        })?;
        cfg.integrator
            .validate()
            .map_err(|message| CliError::Config {
                path: path.display().to_string(),
                message,
            })?;
        Ok(cfg)
    }
}

#[derive(Debug, Parser)]
#[command(
    name = "nbody-returns",
    version,
    about = "Find and verify pseudo-periodic orbits of the symmetric 4- and 6-body problem"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Check the published tables: residuals, integrator cross-check,
    /// conservation drift and relabeled periodicity.
    Verify(VerifyArgs),
    /// Solve the return conditions for one target angle.
    Solve(SolveArgs),
    /// Export body trajectories as CSV, JSON or SVG.
    Trajectory(TrajectoryArgs),
    /// Continuation over a grid of target angles.
    Family(FamilyArgs),
}

#[derive(Debug, Clone, Args)]
pub struct CommonArgs {
    /// JSON config file; flags override its values.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub method: Option<MethodArg>,
    /// abs_tol = rel_tol for the adaptive integrator.
    #[arg(long)]
    pub tol: Option<f64>,
    /// Fixed RK4 step or adaptive initial step.
    #[arg(long)]
    pub step: Option<f64>,
}

#[derive(Debug, Clone, Args)]
pub struct SolverArgs {
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub samples: Option<usize>,
    #[arg(long)]
    pub max_iterations: Option<usize>,
    #[arg(long)]
    pub rho: Option<f64>,
    #[arg(long)]
    pub c: Option<f64>,
    #[arg(long = "e-g")]
    pub e_g: Option<f64>,
    #[arg(long)]
    pub d_min: Option<f64>,
    /// Initial box radii (6 numbers).
    #[arg(long, num_args = 1..=6, value_delimiter = ',', allow_negative_numbers = true)]
    pub d0: Option<Vec<f64>>,
    /// Record the per-iteration error and box radii.
    #[arg(long)]
    pub trace: bool,
}

#[derive(Debug, Clone, Args)]
pub struct VerifyArgs {
    #[arg(long, value_enum)]
    pub table: TableName,
    /// Read the table from this file instead of the built-in copy.
    #[arg(long)]
    pub golden: Option<PathBuf>,
    #[command(flatten)]
    pub common: CommonArgs,
}

#[derive(Debug, Clone, Args)]
pub struct SolveArgs {
    #[arg(long, value_parser = parse_problem)]
    pub problem: Option<Problem>,
    /// Target theta(T), e.g. `60deg` or `1.047rad`.
    #[arg(long)]
    pub theta1: Option<Angle>,
    /// Starting point x1,x2,x3,x4,m2,T.
    #[arg(long, num_args = 1..=6, value_delimiter = ',', allow_negative_numbers = true,
          conflicts_with = "warm_from_table")]
    pub z0: Option<Vec<f64>>,
    /// Start from the golden row closest to theta1.
    #[arg(long)]
    pub warm_from_table: bool,
    /// Scale every coordinate of the start by (1 + perturb).
    #[arg(long, default_value_t = 0.0)]
    pub perturb: f64,
    #[command(flatten)]
    pub solver: SolverArgs,
    #[command(flatten)]
    pub common: CommonArgs,
}

#[derive(Debug, Clone, Args)]
pub struct TrajectoryArgs {
    #[arg(long, value_parser = parse_problem)]
    pub problem: Option<Problem>,
    /// Golden row to integrate, e.g. `60deg`.
    #[arg(long)]
    pub row: Option<Angle>,
    /// Integrate an explicit point x1,x2,x3,x4,m2,T instead of a row.
    #[arg(long, num_args = 1..=6, value_delimiter = ',', allow_negative_numbers = true,
          conflicts_with_all = ["row", "solution"])]
    pub z0: Option<Vec<f64>>,
    /// Integrate the point stored in a `solve` output file.
    #[arg(long, conflicts_with = "row")]
    pub solution: Option<PathBuf>,
    #[arg(long, default_value_t = 1001)]
    pub samples: usize,
    /// Horizon in units of T.
    #[arg(long, default_value_t = 1.0)]
    pub multiples: f64,
    #[arg(long, value_enum)]
    pub format: Option<OutputFormat>,
    #[command(flatten)]
    pub common: CommonArgs,
}

#[derive(Debug, Clone, Args)]
pub struct FamilyArgs {
    #[arg(long, value_parser = parse_problem)]
    pub problem: Option<Problem>,
    /// `start:step:end` in degrees, e.g. `30:15:90`.
    #[arg(long)]
    pub grid: String,
    /// Start the first point from --z0 instead of the golden table.
    #[arg(long, requires = "z0")]
    pub cold: bool,
    #[arg(long, num_args = 1..=6, value_delimiter = ',', allow_negative_numbers = true)]
    pub z0: Option<Vec<f64>>,
    /// Walk the grid from the largest angle down.
    #[arg(long)]
    pub descending: bool,
    #[command(flatten)]
    pub solver: SolverArgs,
    #[command(flatten)]
    pub common: CommonArgs,
}

/// Provenance block written into every output file.
#[derive(Debug, Clone, Serialize)]
pub struct Provenance {
    pub tool: &'static str,
    pub version: &'static str,
    pub integrator: IntegratorConfig,
    pub solver: Option<SolverSettings>,
    pub seed: Option<u64>,
    pub golden_sha256: Option<String>,
}

fn provenance(
    integrator: &IntegratorConfig,
    solver: Option<&SolverSettings>,
    seed: Option<u64>,
    golden_sha256: Option<String>,
) -> Provenance {
    Provenance {
        tool: env!("CARGO_PKG_NAME"),
        version: env!("CARGO_PKG_VERSION"),
        integrator: *integrator,
        solver: solver.cloned(),
        seed,
        golden_sha256,
    }
}

fn base_config(common: &CommonArgs) -> Result<RunConfig, CliError> {
    let mut cfg = match &common.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    if let Some(out) = &common.out {
        cfg.output_dir = out.clone();
    }
    if let Some(m) = common.method {
        cfg.integrator.method = match m {
            MethodArg::Adaptive => Method::AdaptiveRk45,
            MethodArg::Rk4 => Method::FixedRk4,
        };
    }
    if let Some(tol) = common.tol {
        cfg.integrator.abs_tol = tol;
        cfg.integrator.rel_tol = tol;
    }
    if common.step.is_some() {
        cfg.integrator.step = common.step;
    }
    cfg.integrator.validate().map_err(CliError::Usage)?;
    Ok(cfg)
}

fn apply_solver_args(cfg: &mut RunConfig, args: &SolverArgs) -> Result<(), CliError> {
    let s = &mut cfg.solver;
    if let Some(v) = args.seed {
        cfg.seed = v;
    }
    if let Some(v) = args.samples {
        s.samples = v;
    }
    if let Some(v) = args.max_iterations {
        s.max_iterations = v;
    }
    if let Some(v) = args.rho {
        s.rho = v;
    }
    if let Some(v) = args.c {
        s.c = v;
    }
    if let Some(v) = args.e_g {
        s.e_g = v;
    }
    if let Some(v) = args.d_min {
        s.d_min = v;
    }
    if let Some(v) = &args.d0 {
        s.d0 = Some(v.clone());
    }
    if args.trace {
        s.trace = true;
    }
    // Validate against a dummy start to surface bad values as usage errors.
    s.params_for(&[1.0; 6], cfg.seed)
        .validate(6)
        .map_err(|e| CliError::Usage(e.to_string()))
}

fn resolve_problem(flag: Option<Problem>, cfg: &RunConfig) -> Result<Problem, CliError> {
    flag.or_else(|| cfg.problem.and_then(Problem::from_body_count))
        .ok_or_else(|| CliError::Usage("--problem 4|6 is required".into()))
}

fn unknowns_from(v: &[f64]) -> Result<Unknowns, CliError> {
    if v.len() != Unknowns::DIM {
        return Err(CliError::Usage(format!(
            "expected 6 numbers x1,x2,x3,x4,m2,T, got {}",
            v.len()
        )));
    }
    if v.iter().any(|x| !x.is_finite()) {
        return Err(CliError::Usage("starting point must be finite".into()));
    }
    Ok(Unknowns::from_slice(v))
}

/// Writes via a temporary file in the same directory, then renames.
pub fn write_atomic(path: &Path, contents: &[u8]) -> Result<(), CliError> {
    let dir = path.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
    fs::create_dir_all(dir).map_err(io_err(dir))?;
    let name = path
        .file_name()
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_else(|| "output".into());
    let tmp = dir.join(format!(".{name}.tmp"));
    {
        let mut f = fs::File::create(&tmp).map_err(io_err(&tmp))?;
        f.write_all(contents).map_err(io_err(&tmp))?;
        f.sync_all().map_err(io_err(&tmp))?;
    }
    fs::rename(&tmp, path).map_err(io_err(path))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), CliError> {
    let mut text = serde_json::to_string_pretty(value).expect("report serializes");
    text.push('\n');
    write_atomic(path, text.as_bytes())
}

fn angle_label(theta: f64) -> String {
    let deg = theta.to_degrees();
    if (deg - deg.round()).abs() < 1e-9 {
        format!("{}", deg.round() as i64)
    } else {
        format!("{deg:.6}")
    }
}

/// Runs a parsed command and returns the process exit code.
pub fn run(cli: Cli) -> i32 {
    let result = match cli.command {
        Command::Verify(a) => cmd_verify(&a),
        Command::Solve(a) => cmd_solve(&a),
        Command::Trajectory(a) => cmd_trajectory(&a),
        Command::Family(a) => cmd_family(&a),
    };
    match result {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            EXIT_USAGE
        }
    }
}

#[derive(Serialize)]
struct VerifyOutput<'a> {
    provenance: Provenance,
    report: &'a crate::harness::TableReport,
}

pub fn cmd_verify(args: &VerifyArgs) -> Result<i32, CliError> {
    let cfg = base_config(&args.common)?;
    let problem = args.table.problem();
    let table = match &args.golden {
        Some(path) => GoldenTable::load(problem, path)?,
        None => GoldenTable::builtin(problem),
    };
    let report = verify_table(&table, &cfg.integrator)?;

    println!(
        "{:>7} {:>11} {:>11} {:>10} {:>10} {:>11} {:>8}  status",
        "theta", "err", "err_rk4", "drift_L", "drift_E", "mismatch", "relabel"
    );
    for r in &report.rows {
        let (dl, de) = r
            .drift
            .map(|d| (d.angular_momentum, d.energy))
            .unwrap_or((f64::NAN, f64::NAN));
        println!(
            "{:>7} {:>11.3e} {:>11.3e} {:>10.2e} {:>10.2e} {:>11.3e} {:>8}  {}",
            r.theta_deg,
            r.err_adaptive,
            r.err_rk4,
            dl,
            de,
            r.periodicity_mismatch.unwrap_or(f64::NAN),
            r.permutation.as_deref().unwrap_or("-"),
            if r.passed() { "pass" } else { "FAIL" }
        );
    }

    let name = match args.table {
        TableName::N4 => "verify_n4.json",
        TableName::N6 => "verify_n6.json",
    };
    let path = cfg.output_dir.join(name);
    write_json(
        &path,
        &VerifyOutput {
            provenance: provenance(&cfg.integrator, None, None, Some(table.sha256.clone())),
            report: &report,
        },
    )?;
    println!("report written to {}", path.display());
    Ok(if report.all_pass { EXIT_OK } else { EXIT_FAILURE })
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SolutionFile {
    pub problem: usize,
    pub theta1: f64,
    pub theta_deg: f64,
    pub start: Unknowns,
    pub z_best: Unknowns,
    pub e_best: f64,
    pub converged: bool,
    pub residual: Option<[f64; 8]>,
    pub periodicity_mismatch: Option<f64>,
    pub permutation: Option<String>,
    pub iterations_used: usize,
    pub evals_used: usize,
    pub trace: Option<Vec<crate::solver::TraceEntry>>,
}

#[derive(Serialize)]
struct SolveOutput<'a> {
    provenance: Provenance,
    solution: &'a SolutionFile,
}

#[derive(Deserialize)]
struct SolveInput {
    solution: SolutionFile,
}

pub fn cmd_solve(args: &SolveArgs) -> Result<i32, CliError> {
    let mut cfg = base_config(&args.common)?;
    apply_solver_args(&mut cfg, &args.solver)?;
    let problem = resolve_problem(args.problem, &cfg)?;
    let theta1 = args
        .theta1
        .or(cfg.theta1)
        .ok_or_else(|| CliError::Usage("--theta1 is required (e.g. 60deg)".into()))?
        .0;
    let spec = ReturnSpec::new(problem, theta1);
    if let Some(w) = spec.range_warning() {
        eprintln!("warning: {w}");
    }
    let table = GoldenTable::builtin(problem);
    let base = match (&args.z0, args.warm_from_table) {
        (Some(v), _) => unknowns_from(v)?,
        (None, true) => table.nearest(theta1).expect("golden table is non-empty").z,
        (None, false) => {
            return Err(CliError::Usage(
                "give a starting point with --z0 or --warm-from-table".into(),
            ))
        }
    };
    let start = Unknowns::from_slice(
        &base
            .to_array()
            .iter()
            .map(|v| v * (1.0 + args.perturb))
            .collect::<Vec<_>>(),
    );

    let result = solve_orbit(&spec, &start, &cfg.solver, cfg.seed, &cfg.integrator);
    let z_best = Unknowns::from_slice(&result.z_best);
    let res = residual(&z_best, &spec, &cfg.integrator);
    let periodicity = periodicity_check(&z_best, &spec, &cfg.integrator).ok();
    let solution = SolutionFile {
        problem: problem.body_count(),
        theta1,
        theta_deg: theta1.to_degrees(),
        start,
        z_best,
        e_best: result.e_best,
        converged: result.converged,
        residual: res.evaluable.then_some(res.h),
        periodicity_mismatch: periodicity.as_ref().map(|p| p.max_mismatch),
        permutation: periodicity.map(|p| p.cycle_notation()),
        iterations_used: result.iterations_used,
        evals_used: result.evals_used,
        trace: result.trace,
    };

    println!(
        "n={} theta1={}deg converged={} e_best={:.3e} iterations={} evals={}",
        problem.body_count(),
        angle_label(theta1),
        solution.converged,
        solution.e_best,
        solution.iterations_used,
        solution.evals_used
    );
    println!("z_best = {:?}", z_best.to_array());

    let path = cfg.output_dir.join(format!(
        "solution_n{}_{}deg.json",
        problem.body_count(),
        angle_label(theta1)
    ));
    write_json(
        &path,
        &SolveOutput {
            provenance: provenance(
                &cfg.integrator,
                Some(&cfg.solver),
                Some(cfg.seed),
                args.warm_from_table.then(|| table.sha256.clone()),
            ),
            solution: &solution,
        },
    )?;
    println!("solution written to {}", path.display());
    Ok(if solution.converged { EXIT_OK } else { EXIT_FAILURE })
}

/// CSV with a header `t,x1,y1,...,xn,yn` and 17 significant digits.
pub fn trajectory_csv(times: &[f64], paths: &[Vec<[f64; 2]>]) -> String {
    let mut out = String::from("t");
    for i in 1..=paths.len() {
        let _ = write!(out, ",x{i},y{i}");
    }
    out.push('\n');
    for (k, t) in times.iter().enumerate() {
        let _ = write!(out, "{t:.16e}");
        for path in paths {
            let _ = write!(out, ",{:.16e},{:.16e}", path[k][0], path[k][1]);
        }
        out.push('\n');
    }
    out
}

const PALETTE: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b"];

/// Static SVG with one polyline per body.
pub fn trajectory_svg(paths: &[Vec<[f64; 2]>]) -> String {
    let extent = paths
        .iter()
        .flatten()
        .fold(1e-9_f64, |m, p| m.max(p[0].abs()).max(p[1].abs()))
        * 1.05;
    let size = 800.0;
    let scale = size / (2.0 * extent);
    let mut out = String::new();
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{size}" height="{size}" viewBox="0 0 {size} {size}">"#
    );
    let _ = writeln!(out, r#"<rect width="100%" height="100%" fill="white"/>"#);
    for (i, path) in paths.iter().enumerate() {
        let points: Vec<String> = path
            .iter()
            .map(|p| {
                format!(
                    "{:.3},{:.3}",
                    (p[0] + extent) * scale,
                    (extent - p[1]) * scale
                )
            })
            .collect();
        let _ = writeln!(
            out,
            r#"<polyline fill="none" stroke="{}" stroke-width="1.5" points="{}"><title>body {}</title></polyline>"#,
            PALETTE[i % PALETTE.len()],
            points.join(" "),
            i + 1
        );
        if let Some(p) = path.first() {
            let _ = writeln!(
                out,
                r#"<circle cx="{:.3}" cy="{:.3}" r="4" fill="{}"/>"#,
                (p[0] + extent) * scale,
                (extent - p[1]) * scale,
                PALETTE[i % PALETTE.len()]
            );
        }
    }
    out.push_str("</svg>\n");
    out
}

#[derive(Serialize)]
struct TrajectoryJson<'a> {
    provenance: Provenance,
    problem: usize,
    z: Unknowns,
    multiples: f64,
    times: &'a [f64],
    positions: &'a [Vec<[f64; 2]>],
}

pub fn cmd_trajectory(args: &TrajectoryArgs) -> Result<i32, CliError> {
    let cfg = base_config(&args.common)?;
    let problem = resolve_problem(args.problem, &cfg)?;
    if args.samples < 2 {
        return Err(CliError::Usage("--samples must be at least 2".into()));
    }
    if !(args.multiples > 0.0 && args.multiples.is_finite()) {
        return Err(CliError::Usage("--multiples must be positive".into()));
    }
    let table = GoldenTable::builtin(problem);
    let (z, label, golden) = if let Some(v) = &args.z0 {
        (unknowns_from(v)?, "custom".to_string(), None)
    } else if let Some(path) = &args.solution {
        let text = fs::read_to_string(path).map_err(io_err(path))?;
        let input: SolveInput = serde_json::from_str(&text).map_err(|e| CliError::Config {
            path: path.display().to_string(),
            message: e.to_string(),
        })?;
        let s = input.solution;
        (s.z_best, format!("{}deg_solved", angle_label(s.theta1)), None)
    } else {
        let row = args
            .row
            .or(cfg.theta1)
            .ok_or_else(|| CliError::Usage("--row, --z0 or --solution is required".into()))?;
        let deg = row.0.to_degrees();
        let golden_row = table.row(deg).ok_or_else(|| {
            CliError::Usage(format!(
                "no golden row at {deg} degrees for n = {}",
                problem.body_count()
            ))
        })?;
        (golden_row.z, format!("{}deg", angle_label(row.0)), Some(table.sha256.clone()))
    };
    if !z.is_admissible() {
        return Err(CliError::Usage("point has non-positive radius, mass or period".into()));
    }

    let horizon = args.multiples * z.period;
    let (times, paths) = match body_paths(problem, &z, horizon, args.samples, &cfg.integrator) {
        Ok(v) => v,
        Err(f) => {
            eprintln!("integration failed: {f}");
            return Ok(EXIT_FAILURE);
        }
    };
    let format = args.format.unwrap_or(cfg.format);
    let stem = format!("trajectory_n{}_{}", problem.body_count(), label);
    let (path, bytes) = match format {
        OutputFormat::Csv => (
            cfg.output_dir.join(format!("{stem}.csv")),
            trajectory_csv(&times, &paths).into_bytes(),
        ),
        OutputFormat::Svg => (
            cfg.output_dir.join(format!("{stem}.svg")),
            trajectory_svg(&paths).into_bytes(),
        ),
        OutputFormat::Json => {
            let doc = TrajectoryJson {
                provenance: provenance(&cfg.integrator, None, None, golden),
                problem: problem.body_count(),
                z,
                multiples: args.multiples,
                times: &times,
                positions: &paths,
            };
            let mut s = serde_json::to_string(&doc).expect("trajectory serializes");
            s.push('\n');
            (cfg.output_dir.join(format!("{stem}.json")), s.into_bytes())
        }
    };
    write_atomic(&path, &bytes)?;
    println!("{} samples over [0, {}T] written to {}", args.samples, args.multiples, path.display());
    Ok(EXIT_OK)
}

#[derive(Serialize)]
struct FamilySummary<'a> {
    provenance: Provenance,
    problem: usize,
    all_converged: bool,
    rows: Vec<FamilySummaryRow>,
    #[serde(skip_serializing_if = "Option::is_none")]
    detail: Option<&'a crate::harness::FamilyResult>,
}

#[derive(Serialize)]
struct FamilySummaryRow {
    theta_deg: f64,
    converged: bool,
    e_best: f64,
    z_best: [f64; 6],
    periodicity_mismatch: Option<f64>,
    seed: u64,
}

pub fn cmd_family(args: &FamilyArgs) -> Result<i32, CliError> {
    let mut cfg = base_config(&args.common)?;
    apply_solver_args(&mut cfg, &args.solver)?;
    let problem = resolve_problem(args.problem, &cfg)?;
    let grid = parse_grid(&args.grid).map_err(CliError::Usage)?;
    if grid.is_empty() {
        return Err(CliError::Usage("empty grid".into()));
    }
    for theta in &grid {
        if let Some(w) = ReturnSpec::new(problem, *theta).range_warning() {
            eprintln!("warning: {w}");
        }
    }
    let start = if args.cold {
        let v = args.z0.as_ref().expect("clap enforces --z0 with --cold");
        FamilyStart::Cold(unknowns_from(v)?)
    } else {
        FamilyStart::Golden
    };
    let opts = FamilyOptions {
        settings: cfg.solver.clone(),
        integrator: cfg.integrator,
        start,
        descending: args.descending,
        master_seed: cfg.seed,
    };
    let family = run_family(problem, &grid, &opts);
    let golden_sha = (!args.cold).then(|| GoldenTable::builtin(problem).sha256);

    for row in &family.rows {
        println!(
            "theta1={:>7}deg converged={} e_best={:.3e} iterations={}",
            angle_label(row.theta1),
            row.converged,
            row.e_best,
            row.iterations_used
        );
        let solution = SolutionFile {
            problem: problem.body_count(),
            theta1: row.theta1,
            theta_deg: row.theta_deg,
            start: row.start,
            z_best: row.z_best,
            e_best: row.e_best,
            converged: row.converged,
            residual: {
                let r = residual(&row.z_best, &ReturnSpec::new(problem, row.theta1), &cfg.integrator);
                r.evaluable.then_some(r.h)
            },
            periodicity_mismatch: row.periodicity_mismatch,
            permutation: row.permutation.clone(),
            iterations_used: row.iterations_used,
            evals_used: row.evals_used,
            trace: row.trace.clone(),
        };
        let path = cfg.output_dir.join(format!(
            "solution_n{}_{}deg.json",
            problem.body_count(),
            angle_label(row.theta1)
        ));
        write_json(
            &path,
            &SolveOutput {
                provenance: provenance(&cfg.integrator, Some(&cfg.solver), Some(row.seed), golden_sha.clone()),
                solution: &solution,
            },
        )?;
    }

    let summary = FamilySummary {
        provenance: provenance(&cfg.integrator, Some(&cfg.solver), Some(cfg.seed), golden_sha),
        problem: problem.body_count(),
        all_converged: family.all_converged(),
        rows: family
            .rows
            .iter()
            .map(|r| FamilySummaryRow {
                theta_deg: r.theta_deg,
                converged: r.converged,
                e_best: r.e_best,
                z_best: r.z_best.to_array(),
                periodicity_mismatch: r.periodicity_mismatch,
                seed: r.seed,
            })
            .collect(),
        detail: None,
    };
    let path = cfg
        .output_dir
        .join(format!("family_n{}_summary.json", problem.body_count()));
    write_json(&path, &summary)?;
    println!("summary written to {}", path.display());
    Ok(if family.all_converged() { EXIT_OK } else { EXIT_FAILURE })
}
