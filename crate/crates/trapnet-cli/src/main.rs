//! `trapnet` — command-line driver for rf trap-network intersection design.
//!
//! Every subcommand reads its inputs, computes, and writes its declared
//! output files atomically (temp file + rename), then prints a one-line
//! JSON status report to stdout. Domain failures print a JSON error report
//! instead and exit with code 1; argument grammar errors exit with code 2.
//! Passing `--dry-run` validates the inputs and lists the planned outputs
//! without computing or writing anything.

mod commands;
mod io;

use std::ffi::OsString;
use std::path::PathBuf;

use clap::error::ErrorKind;
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::json;

use crate::io::Triple;

/// Version stamped into every JSON document the tool writes.
pub const SCHEMA_VERSION: u32 = 1;

#[derive(Parser)]
#[command(
    name = "trapnet",
    version,
    about = "Design and analysis tools for zero-field intersections of rf trap networks"
)]
struct Cli {
    /// Validate inputs and list planned outputs without computing or writing.
    #[arg(long, global = true)]
    dry_run: bool,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve the field constraints of a straight two-guide crossing.
    #[command(name = "solve-x")]
    SolveX(SolveXArgs),
    /// Map the ponderomotive landscape of a crossing field.
    Analyze(AnalyzeArgs),
    /// Trace the zero-field curves of a multipole field.
    Trace(TraceArgs),
    /// Boundary-element electrode solvers.
    #[command(subcommand)]
    Bem(BemCommand),
    /// Integrate an ion trajectory in the oscillating field.
    Simulate(SimulateArgs),
    /// Regenerate a bundled reference artifact set.
    Reproduce(ReproduceArgs),
    /// Run the built-in design-rule check suites.
    Verify(VerifyArgs),
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::SolveX(_) => "solve-x",
            Command::Analyze(_) => "analyze",
            Command::Trace(_) => "trace",
            Command::Bem(BemCommand::Solve(_)) => "bem-solve",
            Command::Bem(BemCommand::Tune(_)) => "bem-tune",
            Command::Simulate(_) => "simulate",
            Command::Reproduce(_) => "reproduce",
            Command::Verify(_) => "verify",
        }
    }
}

#[derive(Args)]
pub struct SolveXArgs {
    /// Crossing half-angle between each guide and the x axis, in degrees.
    #[arg(long, allow_negative_numbers = true)]
    theta: f64,
    /// Highest multipole order kept in the ansatz (2–4).
    #[arg(long, default_value_t = 3)]
    order: usize,
    /// Strength multiplying the solved crossing field.
    #[arg(long, default_value_t = 1.0, allow_negative_numbers = true)]
    alpha: f64,
    /// Output path for the solved field (JSON).
    #[arg(long)]
    out: PathBuf,
    /// Solve report path (default: `--out` with a `.report.json` extension).
    #[arg(long)]
    report: Option<PathBuf>,
}

#[derive(Args)]
pub struct AnalyzeArgs {
    /// Crossing-field JSON, as written by `solve-x`.
    #[arg(long)]
    field: PathBuf,
    /// Override the homogeneous axial bias α_H (potential term α_H·z).
    #[arg(long = "alpha-h", allow_negative_numbers = true)]
    alpha_h: Option<f64>,
    /// Half-width of the analysis box, in units of d.
    #[arg(long = "box", default_value_t = 1.5)]
    half_width: f64,
    /// Grid resolution per axis for the pseudopotential sampling.
    #[arg(long, default_value_t = 101)]
    res: usize,
    /// Pseudopotential level to extract as a surface (omit to skip the mesh).
    #[arg(long)]
    iso: Option<f64>,
    /// Prefix for `_report.json`, `_zeros.csv`, `_grid.csv`, `_iso.obj`.
    #[arg(long = "out-prefix")]
    out_prefix: String,
}

#[derive(Args)]
pub struct TraceArgs {
    /// Field JSON whose zero curves to follow.
    #[arg(long)]
    field: PathBuf,
    /// Tracing box half-width, in units of d.
    #[arg(long = "box", default_value_t = 1.5)]
    half_width: f64,
    /// Arc-length step between polyline points.
    #[arg(long, default_value_t = 0.01)]
    step: f64,
    /// Starting guess "x,y,z"; repeatable. Omit for automatic seeding.
    #[arg(long = "seed", allow_hyphen_values = true)]
    seeds: Vec<Triple>,
    /// Output CSV of traced polyline points (branch,closed,x,y,z).
    #[arg(long)]
    out: PathBuf,
    /// Trace report path (default: `--out` with a `.report.json` extension).
    #[arg(long)]
    report: Option<PathBuf>,
}

#[derive(Subcommand)]
enum BemCommand {
    /// Solve an electrode mesh for surface charge and fit the center field.
    Solve(BemSolveArgs),
    /// Search an electrode family for the parameter nulling the axial term.
    Tune(BemTuneArgs),
}

#[derive(Args)]
pub struct BemSolveArgs {
    /// Electrode surface mesh (OBJ; faces grouped by `usemtl` name).
    #[arg(long)]
    mesh: PathBuf,
    /// JSON sidecar mapping material names to drive amplitudes.
    #[arg(long)]
    tags: PathBuf,
    /// Multipole expansion center "x,y,z".
    #[arg(long = "fit-center", default_value = "0,0,0", allow_hyphen_values = true)]
    fit_center: Triple,
    /// Sampling-sphere radius for the multipole fit.
    #[arg(long = "fit-radius", default_value_t = 0.2)]
    fit_radius: f64,
    /// Base sampling directions (each expanded to its 8 mirror images).
    #[arg(long = "fit-points", default_value_t = 120)]
    fit_points: usize,
    /// Output path for the fit report (JSON).
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
pub struct BemTuneArgs {
    /// Electrode family name (`reference` is built in).
    #[arg(long, default_value = "reference")]
    family: String,
    /// Lower end of the parameter search interval (default: family minimum).
    #[arg(long = "param-lo", allow_negative_numbers = true)]
    param_lo: Option<f64>,
    /// Upper end of the parameter search interval (default: family maximum).
    #[arg(long = "param-hi", allow_negative_numbers = true)]
    param_hi: Option<f64>,
    /// Convergence threshold: stop once |α_H| < tol·|α_X|.
    #[arg(long, default_value_t = 1e-3)]
    tol: f64,
    /// Panel-density multiplier override for the family meshes.
    #[arg(long)]
    density: Option<f64>,
    /// Output path for the tuning report (JSON).
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
pub struct SimulateArgs {
    /// Field JSON the ion moves in.
    #[arg(long)]
    field: PathBuf,
    /// Drive strength: the Mathieu q of a matching unit quadrupole guide.
    #[arg(long)]
    q: f64,
    /// Integration length in rf periods.
    #[arg(long)]
    periods: f64,
    /// Time step in rf periods (at most 1/50).
    #[arg(long, default_value_t = 0.005)]
    dt: f64,
    /// Initial position "x,y,z".
    #[arg(long, default_value = "0,0,0", allow_hyphen_values = true)]
    start: Triple,
    /// Initial velocity "vx,vy,vz", in d per rf period.
    #[arg(long, default_value = "0,0,0", allow_hyphen_values = true)]
    velocity: Triple,
    /// Output trajectory CSV (t,x,y,z,vx,vy,vz).
    #[arg(long)]
    out: PathBuf,
    /// Motion report path (default: `--out` with a `.report.json` extension).
    #[arg(long)]
    report: Option<PathBuf>,
}

#[derive(Args)]
pub struct ReproduceArgs {
    /// Artifact set to regenerate.
    #[arg(value_enum)]
    target: ReproduceTarget,
    /// Directory receiving the artifact files.
    #[arg(long = "out-dir", default_value = "reproduce")]
    out_dir: PathBuf,
}

#[derive(ValueEnum, Clone, Copy, Debug)]
pub enum ReproduceTarget {
    /// Ideal-crossing isosurface data at 30° and at the 45° degenerate angle.
    Fig1,
    /// Landscape comparison across axial bias signs (−c, 0, +c).
    Fig3,
    /// Reference electrode geometry mesh and drive tags.
    Fig4,
    /// Placeholder: the artifact collection defines no tabular targets.
    TableNone,
}

#[derive(Args)]
pub struct VerifyArgs {
    /// RNG seed for the randomized pair suite.
    #[arg(long, default_value_t = 7)]
    seed: u64,
    /// Number of random cotangential path pairs to check.
    #[arg(long, default_value_t = 20)]
    pairs: usize,
    /// Optional file for the full verification report.
    #[arg(long)]
    out: Option<PathBuf>,
}

/// What a successfully executed subcommand hands back to `run` for the
/// stdout status line: the files it wrote (or would write) and a small
/// command-specific summary object.
pub struct Outcome {
    pub outputs: Vec<PathBuf>,
    pub details: serde_json::Value,
}

fn main() {
    std::process::exit(run(std::env::args_os()));
}

/// Parse `argv`, execute one subcommand, and map the result to an exit
/// code: 0 on success, 1 on domain failure (with a JSON error report on
/// stdout), 2 on argument grammar errors.
fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(err) => {
            let code = match err.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 2,
            };
            let _ = err.print();
            return code;
        }
    };

    let name = cli.command.name();
    match dispatch(&cli) {
        Ok(outcome) => {
            let status = if cli.dry_run { "dry-run" } else { "ok" };
            let outputs: Vec<String> = outcome
                .outputs
                .iter()
                .map(|p| p.display().to_string())
                .collect();
            let line = json!({
                "schema_version": SCHEMA_VERSION,
                "command": name,
                "status": status,
                "outputs": outputs,
                "details": outcome.details,
            });
            println!("{line}");
            0
        }
        Err(err) => {
            let line = json!({
                "schema_version": SCHEMA_VERSION,
                "command": name,
                "status": "error",
                "message": format!("{err:#}"),
            });
            println!("{line}");
            eprintln!("error: {err:#}");
            1
        }
    }
}

fn dispatch(cli: &Cli) -> anyhow::Result<Outcome> {
    let dry = cli.dry_run;
    match &cli.command {
        Command::SolveX(args) => commands::solve_x::run(args, dry),
        Command::Analyze(args) => commands::analyze::run(args, dry),
        Command::Trace(args) => commands::trace::run(args, dry),
        Command::Bem(BemCommand::Solve(args)) => commands::bem::solve(args, dry),
        Command::Bem(BemCommand::Tune(args)) => commands::bem::tune(args, dry),
        Command::Simulate(args) => commands::simulate::run(args, dry),
        Command::Reproduce(args) => commands::reproduce::run(args, dry),
        Command::Verify(args) => commands::verify::run(args, dry),
    }
}
