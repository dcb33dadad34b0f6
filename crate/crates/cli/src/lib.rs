//! Command-line front end for `geomq`.
//!
//! Every run produces a [`report::Report`] that echoes the merged
//! configuration. Exit status: 0 when every record passes, 1 when a record
//! fails, 2 for usage or configuration errors.

pub mod commands;
pub mod config;
pub mod report;
pub mod verify;

use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use clap::{Parser, Subcommand};
use geomq::geometry::registry::ChartSpec;
use geomq::solver::SolverKind;

use config::{Command, ConfigError, Format, RunConfig};
use report::{write_atomically, Report};

/// Runs `f` and returns its value with the elapsed wall-clock seconds.
pub fn timed<T>(f: impl FnOnce() -> T) -> (T, f64) {
    let start = Instant::now();
    let value = f();
    (value, start.elapsed().as_secs_f64())
}

fn parse_solver(s: &str) -> Result<SolverKind, String> {
    match s {
        "auto" => Ok(SolverKind::Auto),
        "dense" => Ok(SolverKind::Dense),
        "iterative" => Ok(SolverKind::Iterative),
        _ => Err(format!("unknown solver `{s}` (expected auto, dense or iterative)")),
    }
}

#[derive(Debug, Parser)]
#[command(name = "geomq", version, about = "Curvature potentials and thin-layer spectra")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Cmd,
    /// Chart spec, e.g. `ellipse:a=1,b=0.6`.
    #[arg(long, global = true)]
    pub chart: Option<ChartSpec>,
    /// Parameter point, comma separated.
    #[arg(long, global = true, value_delimiter = ',', allow_negative_numbers = true)]
    pub at: Option<Vec<f64>>,
    #[arg(long, global = true)]
    pub delta: Option<f64>,
    #[arg(long, global = true, value_delimiter = ',')]
    pub deltas: Option<Vec<f64>>,
    #[arg(long, global = true)]
    pub nev: Option<usize>,
    /// One or two sizes, e.g. `128,32`.
    #[arg(long, global = true, value_delimiter = ',')]
    pub grid: Option<Vec<usize>>,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// JSON file with the same keys as the echoed config.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    #[arg(long, global = true, value_enum)]
    pub format: Option<Format>,
    /// Sphere or shell radius.
    #[arg(long = "R", global = true)]
    pub radius: Option<f64>,
    #[arg(long = "lmax", global = true)]
    pub l_max: Option<usize>,
    /// Randomized suite, e.g. `random20`.
    #[arg(long, global = true)]
    pub suite: Option<String>,
    /// Diagonal forms for `verify detexp`.
    #[arg(long, global = true)]
    pub diagonal: bool,
    /// Record wall-clock seconds (off by default so reports are reproducible).
    #[arg(long, global = true)]
    pub timings: bool,
    #[arg(long, global = true, value_parser = parse_solver)]
    pub solver: Option<SolverKind>,
    #[arg(long, global = true)]
    pub tolerance: Option<f64>,
}

#[derive(Debug, Subcommand)]
pub enum Cmd {
    /// Second fundamental forms and principal curvatures at a point.
    Curvature,
    /// All potential paths at a point.
    Potential,
    /// A verification suite: detexp, divn, dualpath, prokhorov, series,
    /// stereographic or all.
    Verify {
        #[arg(value_name = "SUITE")]
        name: String,
    },
    /// surface, layer, shell, sweep or factorization.
    Spectrum { kind: String },
}

impl Cli {
    fn flags(&self) -> RunConfig {
        let (command, target) = match &self.command {
            Cmd::Curvature => (Command::Curvature, None),
            Cmd::Potential => (Command::Potential, None),
            Cmd::Verify { name } => (Command::Verify, Some(name.clone())),
            Cmd::Spectrum { kind } => (Command::Spectrum, Some(kind.clone())),
        };
        RunConfig {
            command: Some(command),
            target,
            chart: self.chart.clone(),
            at: self.at.clone(),
            delta: self.delta,
            deltas: self.deltas.clone(),
            nev: self.nev,
            grid: self.grid.clone(),
            seed: self.seed,
            radius: self.radius,
            l_max: self.l_max,
            suite: self.suite.clone(),
            diagonal: self.diagonal.then_some(true),
            solver: self.solver,
            fd: None,
            tolerance: self.tolerance,
            out: self.out.clone(),
            format: self.format,
            timings: self.timings.then_some(true),
        }
    }

    /// Config file first, then flags.
    pub fn resolve(&self) -> Result<RunConfig, ConfigError> {
        let base = match &self.config {
            Some(path) => RunConfig::from_file(path)?,
            None => RunConfig::default(),
        };
        let merged = base.overridden_by(self.flags());
        merged.validate()?;
        Ok(merged)
    }
}

/// Produces the records for a resolved config.
pub fn execute(config: &RunConfig) -> Result<Report, ConfigError> {
    let target = config.target.as_deref().unwrap_or("");
    let records = match config.command {
        Some(Command::Curvature) => commands::curvature(config)?,
        Some(Command::Potential) => commands::potential(config)?,
        Some(Command::Verify) => verify::run(target, config)?,
        Some(Command::Spectrum) => commands::spectrum(target, config)?,
        None => return Err(ConfigError("no command given".into())),
    };
    Ok(Report::new(config.clone(), records))
}

fn thread_pool() -> Result<(), ConfigError> {
    let Ok(v) = std::env::var("GEOMQ_THREADS") else {
        return Ok(());
    };
    let n: usize = v
        .parse()
        .ok()
        .filter(|n| *n > 0)
        .ok_or_else(|| ConfigError(format!("GEOMQ_THREADS must be a positive integer, got `{v}`")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| ConfigError(e.to_string()))
}

fn render(report: &Report, format: Format) -> Result<String, ConfigError> {
    match format {
        Format::Json => Ok(report.to_json()),
        Format::Csv => report.to_csv().map_err(|e| ConfigError(e.to_string())),
    }
}

/// Parses `args`, runs, writes the report and maps the outcome to an exit code.
pub fn main_with<I, T>(args: I) -> ExitCode
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    let outcome = thread_pool().and_then(|_| cli.resolve()).and_then(|config| {
        let report = execute(&config)?;
        let text = render(&report, config.format())?;
        match &config.out {
            Some(path) => write_atomically(path, &text).map_err(|e| ConfigError(format!("{}: {e}", path.display())))?,
            None => print!("{text}"),
        }
        Ok(report.pass)
    });
    match outcome {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
