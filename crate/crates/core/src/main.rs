use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use cglmp_lab::cglmp::{self, StateKind};
use cglmp_lab::noise_seq::{sequential_values, white_noise_mixture};
use cglmp_lab::report::{
    self, build_figure, build_table, CsvData, FigureId, JsonReport, OutputFormat, RunConfig, TableId,
};
use cglmp_lab::Error;

const EXIT_BAD_ARGS: u8 = 2;
const EXIT_DEVIATION: u8 = 3;
const EXIT_IO: u8 = 4;

#[derive(Parser)]
#[command(version, about = "CGLMP values under dual noise and sequential unsharp measurements")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Print I_d for one (d, state, p, lambda) point
    Value {
        #[arg(long)]
        d: usize,
        #[arg(long, default_value = "mes")]
        state: StateKind,
        #[arg(long, default_value_t = 1.0)]
        p: f64,
        #[arg(long, default_value_t = 1.0)]
        lambda: f64,
    },
    /// Reproduce a reference table and grade it
    Table {
        #[arg(long)]
        which: TableId,
        #[command(flatten)]
        run: RunArgs,
    },
    /// Emit figure data as CSV (1a, 1b: boundary curves; 1c: ANR vs d)
    Figure {
        #[arg(long)]
        which: FigureId,
        #[command(flatten)]
        run: RunArgs,
    },
    /// Per-round values for a chain of Bobs (JSON)
    Sequential {
        #[arg(long)]
        d: usize,
        #[arg(long, default_value = "mes")]
        state: StateKind,
        /// Comma-separated sharpness of Bob_1, Bob_2, ...
        #[arg(long, value_delimiter = ',', required = true)]
        lambda: Vec<f64>,
        #[arg(long, default_value_t = 1.0)]
        p: f64,
    },
    /// Two-round visibility threshold
    Qmin {
        #[command(flatten)]
        run: RunArgs,
    },
    /// Area of the nonlocal region
    Anr {
        #[command(flatten)]
        run: RunArgs,
    },
    /// Boundary curve in the (1-lambda, 1-p) plane
    Boundary {
        #[command(flatten)]
        run: RunArgs,
    },
}

#[derive(Args, Clone)]
struct RunArgs {
    /// Dimension or inclusive range, e.g. 5 or 3-10
    #[arg(long, value_parser = parse_range)]
    d: Option<(usize, usize)>,
    /// Restrict to one state family
    #[arg(long)]
    state: Option<StateKind>,
    /// Visibility samples per boundary curve
    #[arg(long)]
    grid: Option<usize>,
    /// Absolute quadrature tolerance
    #[arg(long)]
    tol: Option<f64>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum)]
    format: Option<OutputFormat>,
    /// Worker threads (default: all cores)
    #[arg(long)]
    jobs: Option<usize>,
    /// JSON file with RunConfig fields; flags take precedence
    #[arg(long)]
    config: Option<PathBuf>,
}

fn parse_range(s: &str) -> Result<(usize, usize), String> {
    let parse = |t: &str| t.trim().parse::<usize>().map_err(|e| format!("'{t}': {e}"));
    match s.split_once(['-', ':']) {
        Some((a, b)) => Ok((parse(a)?, parse(b)?)),
        None => {
            let d = parse(s)?;
            Ok((d, d))
        }
    }
}

enum Failure {
    BadArgs(String),
    Deviation(String),
    Io(String),
    Compute(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::OutOfRange { .. } | Error::DimensionMismatch { .. } | Error::NotPure | Error::NoViolation { .. } => {
                Failure::BadArgs(e.to_string())
            }
            other => Failure::Compute(other.to_string()),
        }
    }
}

impl From<io::Error> for Failure {
    fn from(e: io::Error) -> Self {
        Failure::Io(e.to_string())
    }
}

impl From<csv::Error> for Failure {
    fn from(e: csv::Error) -> Self {
        Failure::Io(e.to_string())
    }
}

impl From<serde_json::Error> for Failure {
    fn from(e: serde_json::Error) -> Self {
        Failure::Io(e.to_string())
    }
}

impl RunArgs {
    fn resolve(&self) -> Result<RunConfig, Failure> {
        let mut config = match &self.config {
            Some(path) => {
                let file = File::open(path).map_err(|e| Failure::Io(format!("{}: {e}", path.display())))?;
                serde_json::from_reader(file).map_err(|e| Failure::BadArgs(format!("{}: {e}", path.display())))?
            }
            None => RunConfig::default(),
        };
        if let Some((lo, hi)) = self.d {
            config.d_min = lo;
            config.d_max = hi;
        }
        if let Some(kind) = self.state {
            config.kinds = vec![kind];
        }
        if let Some(grid) = self.grid {
            config.grid = grid;
        }
        if let Some(tol) = self.tol {
            config.tol = tol;
        }
        if self.out.is_some() {
            config.out = self.out.clone();
        }
        if let Some(format) = self.format {
            config.format = format;
        }
        if self.jobs.is_some() {
            config.jobs = self.jobs;
        }
        config.validate()?;
        Ok(config)
    }
}

fn open_output(path: &Option<PathBuf>) -> Result<Box<dyn Write>, Failure> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(
            File::create(p).map_err(|e| Failure::Io(format!("{}: {e}", p.display())))?,
        )),
        None => Box::new(io::stdout().lock()),
    })
}

fn emit_json<R: Serialize>(
    command: &str,
    config: &RunConfig,
    rows: R,
    deviations: Vec<report::Deviation>,
    started: Instant,
) -> Result<(), Failure> {
    let doc = JsonReport {
        command,
        config,
        rows,
        deviations,
        wall_time_ms: started.elapsed().as_millis(),
    };
    let mut out = open_output(&config.out)?;
    serde_json::to_writer_pretty(&mut out, &doc)?;
    writeln!(out)?;
    out.flush()?;
    Ok(())
}

fn emit_data(command: &str, config: &RunConfig, data: &CsvData, started: Instant) -> Result<(), Failure> {
    match config.format {
        OutputFormat::Csv => {
            let mut out = open_output(&config.out)?;
            data.write_csv(&mut out)?;
            out.flush()?;
            Ok(())
        }
        OutputFormat::Json => emit_json(command, config, data.to_json_rows(), Vec::new(), started),
    }
}

#[derive(Serialize)]
struct RoundRecord {
    round: usize,
    lambda: f64,
    value: f64,
    violation: bool,
}

#[derive(Serialize)]
struct SequentialOutput {
    command: &'static str,
    d: usize,
    state: StateKind,
    p: f64,
    rounds: Vec<RoundRecord>,
}

fn run(cli: Cli) -> Result<(), Failure> {
    let started = Instant::now();
    match cli.command {
        Command::Value { d, state, p, lambda } => {
            let value = report::single_value(d, state, p, lambda)?;
            println!("{value:.6}");
        }
        Command::Sequential { d, state, lambda, p } => {
            if lambda.is_empty() || lambda.len() > 3 {
                return Err(Failure::BadArgs(format!("expected 1 to 3 sharpness values, got {}", lambda.len())));
            }
            if !(0.0..=1.0).contains(&p) {
                return Err(Error::OutOfRange { name: "p", value: p }.into());
            }
            let psi = cglmp::state(d, state)?;
            let rho = white_noise_mixture(&psi.density, d, p);
            let run = sequential_values(&rho, &lambda)?;
            let rounds = run
                .values
                .iter()
                .zip(&lambda)
                .enumerate()
                .map(|(m, (&value, &l))| RoundRecord {
                    round: m + 1,
                    lambda: l,
                    value,
                    violation: value > cglmp::LOCAL_BOUND,
                })
                .collect();
            let doc = SequentialOutput {
                command: "sequential",
                d,
                state,
                p,
                rounds,
            };
            println!("{}", serde_json::to_string_pretty(&doc)?);
        }
        Command::Table { which, run } => {
            let config = run.resolve()?;
            let table = build_table(which, &config)?;
            let deviations = table.deviations();
            match config.format {
                OutputFormat::Csv => {
                    let mut out = open_output(&config.out)?;
                    table.write_csv(&mut out)?;
                    out.flush()?;
                }
                OutputFormat::Json => emit_json("table", &config, &table, deviations.clone(), started)?,
            }
            if !deviations.is_empty() {
                let lines: Vec<String> = deviations
                    .iter()
                    .map(|d| {
                        format!(
                            "  d={} {} {}: computed {:.6}, reference {:.6}, |dev| {:.6} > {:.0e}",
                            d.d, d.kind, d.column, d.computed, d.reference, d.deviation, d.tolerance
                        )
                    })
                    .collect();
                return Err(Failure::Deviation(format!("cells outside tolerance:\n{}", lines.join("\n"))));
            }
        }
        Command::Figure { which, run } => {
            let config = run.resolve()?;
            let data = build_figure(which, &config)?;
            emit_data("figure", &config, &data, started)?;
        }
        Command::Qmin { run } => {
            let config = run.resolve()?;
            emit_data("qmin", &config, &report::q_min_data(&config)?, started)?;
        }
        Command::Anr { run } => {
            let config = run.resolve()?;
            emit_data("anr", &config, &report::anr_data(&config)?, started)?;
        }
        Command::Boundary { run } => {
            let config = run.resolve()?;
            let kinds = config.kinds.clone();
            emit_data("boundary", &config, &report::boundary_data(&config, &kinds)?, started)?;
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::BadArgs(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(EXIT_BAD_ARGS)
        }
        Err(Failure::Deviation(msg)) => {
            eprintln!("{msg}");
            ExitCode::from(EXIT_DEVIATION)
        }
        Err(Failure::Io(msg)) => {
            eprintln!("I/O error: {msg}");
            ExitCode::from(EXIT_IO)
        }
        Err(Failure::Compute(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::FAILURE
        }
    }
}
