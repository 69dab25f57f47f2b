//! Command-line front end: `solve`, `sweep` and `penalize`.
//!
//! [`run`] takes the argument list and output streams explicitly and returns
//! the process exit code, so the binary stays a one-liner and tests can drive
//! it in-process.

use std::ffi::OsString;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::PathBuf;
use std::time::Instant;

use clap::{Args, Parser, Subcommand};

use crate::error::Error;
use crate::lasserre::{build_relaxation, DEFAULT_RANK_TOL};
use crate::netmodel::{build_admittance, Network};
use crate::report::{input_digest, InputInfo, RunReport, Workflow, EXIT_USAGE};
use crate::sdpcore::sdpa::write_sdpa;
use crate::sweep::{run_sweep, write_csv, SweepSpec};

/// Exit code for output files that cannot be written.
pub const EXIT_IO: i32 = 74;

#[derive(Debug, Parser)]
#[command(name = "moment-opf", version, about = "Global solution of small AC OPF problems with moment relaxations")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Solve one relaxation order and report the bound and, when rank one, the dispatch.
    Solve(SolveArgs),
    /// Grid the outputs of the first two generators and classify each point.
    Sweep(SweepArgs),
    /// First-order solve with a reactive-power penalty.
    Penalize(PenalizeArgs),
}

#[derive(Debug, Args)]
struct OutputFormat {
    /// Emit the JSON report.
    #[arg(long, conflicts_with = "text")]
    json: bool,
    /// Emit a text summary (default).
    #[arg(long)]
    text: bool,
}

#[derive(Debug, Args)]
struct SolveArgs {
    file: PathBuf,
    #[arg(long, default_value_t = 2, value_parser = clap::value_parser!(u8).range(1..=3))]
    order: u8,
    /// Largest lambda2/lambda1 accepted as rank one.
    #[arg(long = "tol-rank", default_value_t = DEFAULT_RANK_TOL)]
    tol_rank: f64,
    /// Also write the conic problem in SDPA sparse format.
    #[arg(long, value_name = "PATH")]
    sdpa: Option<PathBuf>,
    #[command(flatten)]
    format: OutputFormat,
}

#[derive(Debug, Args)]
struct SweepArgs {
    file: PathBuf,
    /// MW range of the first generator, `lo:hi` (default: its limits).
    #[arg(long, value_parser = parse_range)]
    p1: Option<(f64, f64)>,
    /// MW range of the second generator, `lo:hi` (default: its limits).
    #[arg(long, value_parser = parse_range)]
    p2: Option<(f64, f64)>,
    #[arg(long, default_value_t = 0.5)]
    step: f64,
    /// Comma-separated relaxation orders.
    #[arg(long, value_delimiter = ',', default_values_t = [1u8, 2])]
    orders: Vec<u8>,
    /// CSV destination (default: stdout).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Worker threads (0: one per core).
    #[arg(long, env = "MOMENT_OPF_JOBS", default_value_t = 0)]
    jobs: usize,
}

#[derive(Debug, Args)]
struct PenalizeArgs {
    file: PathBuf,
    /// Penalty on total reactive generation, $/(MVAr hr).
    #[arg(long, allow_negative_numbers = true)]
    epsilon: f64,
    #[arg(long = "tol-rank", default_value_t = DEFAULT_RANK_TOL)]
    tol_rank: f64,
    #[command(flatten)]
    format: OutputFormat,
}

fn parse_range(s: &str) -> Result<(f64, f64), String> {
    let (a, b) = s.split_once(':').ok_or_else(|| format!("expected lo:hi, got {s:?}"))?;
    let lo: f64 = a.trim().parse().map_err(|e| format!("{a:?}: {e}"))?;
    let hi: f64 = b.trim().parse().map_err(|e| format!("{b:?}: {e}"))?;
    if !(lo <= hi) {
        return Err(format!("empty range {s}"));
    }
    Ok((lo, hi))
}

struct Loaded {
    net: Network,
    input: InputInfo,
}

fn load(path: &PathBuf) -> Result<Loaded, Error> {
    let bytes = std::fs::read(path)?;
    let text = String::from_utf8_lossy(&bytes);
    let net = Network::from_json(&text)?;
    Ok(Loaded { net, input: InputInfo { path: path.display().to_string(), sha256: input_digest(&bytes) } })
}

fn emit(report: &RunReport, json: bool, out: &mut dyn Write) -> std::io::Result<()> {
    if json {
        writeln!(out, "{}", report.to_json())
    } else {
        write!(out, "{}", report.to_text())
    }
}

/// Runs the command line `args` (program name first) and returns the exit code.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let args: Vec<OsString> = args.into_iter().map(Into::into).collect();
    let echo: Vec<String> = args.iter().map(|a| a.to_string_lossy().into_owned()).collect();
    let cli = match Cli::try_parse_from(&args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { 0 };
            let sink: &mut dyn Write = if e.use_stderr() { err } else { out };
            let _ = write!(sink, "{}", e.render());
            return code;
        }
    };
    let started = Instant::now();
    let outcome = match cli.command {
        Command::Solve(a) => solve(a, echo, started, out),
        Command::Sweep(a) => sweep(a, out, err),
        Command::Penalize(a) => penalize(a, echo, started, out),
    };
    match outcome {
        Ok(code) => code,
        Err(Failure::Usage(e)) => {
            let _ = writeln!(err, "error: {e}");
            EXIT_USAGE
        }
        Err(Failure::Io(e)) => {
            let _ = writeln!(err, "error: {e}");
            EXIT_IO
        }
    }
}

enum Failure {
    Usage(Error),
    Io(std::io::Error),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Usage(e)
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::Io(e)
    }
}

fn solve(a: SolveArgs, echo: Vec<String>, started: Instant, out: &mut dyn Write) -> Result<i32, Failure> {
    let Loaded { net, input } = load(&a.file)?;
    let order = a.order as usize;
    let wf = Workflow { rank_tol: a.tol_rank, ..Workflow::default() };
    if let Some(path) = &a.sdpa {
        let y = build_admittance(&net)?;
        let problem = build_relaxation(&net, &y, order, &wf.options)?;
        let mut w = BufWriter::new(File::create(path)?);
        write_sdpa(&problem.conic, &mut w)?;
        w.flush()?;
    }
    let result = wf.solve(&net, order)?;
    let report = RunReport::new(echo, input, result, None, started);
    emit(&report, a.format.json, out)?;
    Ok(report.exit_code)
}

fn penalize(a: PenalizeArgs, echo: Vec<String>, started: Instant, out: &mut dyn Write) -> Result<i32, Failure> {
    if !(a.epsilon >= 0.0) {
        return Err(Error::NegativePenalty(a.epsilon).into());
    }
    let Loaded { net, input } = load(&a.file)?;
    let wf = Workflow { rank_tol: a.tol_rank, ..Workflow::default() };
    let (result, penalty) = wf.penalize(&net, a.epsilon)?;
    let report = RunReport::new(echo, input, result, Some(penalty), started);
    emit(&report, a.format.json, out)?;
    Ok(report.exit_code)
}

fn sweep(a: SweepArgs, out: &mut dyn Write, err: &mut dyn Write) -> Result<i32, Failure> {
    let Loaded { net, .. } = load(&a.file)?;
    let defaults = SweepSpec::from_network(&net)?;
    let spec = SweepSpec {
        p1: a.p1.unwrap_or(defaults.p1),
        p2: a.p2.unwrap_or(defaults.p2),
        step: a.step,
        orders: a.orders.iter().map(|&o| o as usize).collect(),
        jobs: a.jobs,
    };
    let cells = run_sweep(&net, &spec, &Workflow::default().settings)?;
    match &a.out {
        Some(path) => write_csv(&cells, BufWriter::new(File::create(path)?)).map_err(io_or_usage)?,
        None => write_csv(&cells, &mut *out).map_err(io_or_usage)?,
    }
    let feasible = |o: usize| cells.iter().filter(|c| c.is_feasible(o)).count();
    let _ = writeln!(
        err,
        "{} cells; feasible: order 1 {}, order 2 {}",
        cells.len(),
        feasible(1),
        feasible(2)
    );
    Ok(0)
}

fn io_or_usage(e: Error) -> Failure {
    match e {
        Error::Io(io) => Failure::Io(io),
        Error::Csv(c) => Failure::Io(c.into()),
        other => Failure::Usage(other),
    }
}
