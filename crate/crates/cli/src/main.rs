//! `smroot`: certified real-root isolation from the command line.
//!
//! Exit codes: 0 on a complete run, 2 when the box budget ran out, 1 on
//! bad input.

mod report;

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use smroot::funcsys::file::SystemFile;
use smroot::generate::{generate, Family};
use smroot::isolator::{invert_coordinates, isolate, CandidateStrategy, Config, IsolationResult, Method};
use smroot::{FuncSystem, NBox};
use thiserror::Error;

use report::{RunReport, Timings};

#[derive(Parser)]
#[command(name = "smroot", version, about = "Certified real-root isolation for square nonlinear systems")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Isolate the real roots of a system file.
    Isolate {
        file: PathBuf,
        #[command(flatten)]
        run: RunArgs,
        #[arg(long, value_enum, default_value_t = Format::Json)]
        format: Format,
        /// Certification method.
        #[arg(long, value_enum, default_value_t = MethodArg::Sm)]
        method: MethodArg,
    },
    /// Write a seeded random polynomial system, e.g. N3D9 or multiN2D6.
    Generate {
        family: String,
        #[arg(long, default_value_t = 10)]
        terms: usize,
        #[arg(long, default_value_t = 10)]
        coeff: i64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Half-width of the search box written to the file.
        #[arg(long, default_value_t = 1.0)]
        radius: f64,
        #[arg(long, short)]
        out: Option<PathBuf>,
    },
    /// Repeat isolation for several precisions and print CSV.
    Sweep {
        file: PathBuf,
        /// Comma-separated list, e.g. 1e-2,1e-4,1e-6.
        #[arg(long, value_delimiter = ',', required = true)]
        precisions: Vec<f64>,
        #[command(flatten)]
        run: RunArgs,
    },
    /// Run the S-M pipeline and the Miranda baseline side by side.
    CompareMk {
        file: PathBuf,
        #[command(flatten)]
        run: RunArgs,
    },
}

#[derive(Args, Clone)]
struct RunArgs {
    /// Search box as JSON, e.g. '[[-1,1],[-1,1]]'. Overrides the file.
    #[arg(long = "box", allow_hyphen_values = true)]
    bounds: Option<String>,
    /// Termination width. Overrides the file.
    #[arg(long)]
    precision: Option<f64>,
    #[arg(long)]
    epsilon_b: Option<f64>,
    #[arg(long)]
    rotation_scale: Option<f64>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 1)]
    workers: usize,
    #[arg(long)]
    max_boxes: Option<u64>,
    #[arg(long, value_enum, default_value_t = CandidatesArg::Plain)]
    candidates: CandidatesArg,
    #[arg(long)]
    no_postprocess: bool,
    /// Comma-separated variable names to replace by their reciprocals.
    #[arg(long, value_delimiter = ',')]
    invert_dims: Vec<String>,
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Json,
    Text,
}

#[derive(Clone, Copy, ValueEnum)]
enum CandidatesArg {
    Plain,
    Sleeve,
}

#[derive(Clone, Copy, ValueEnum)]
enum MethodArg {
    Sm,
    Miranda,
}

#[derive(Debug, Error)]
enum CliError {
    #[error("{path}: {source}")]
    Read { path: String, source: std::io::Error },
    #[error("{0}")]
    Input(String),
    #[error("cannot write output: {0}")]
    Write(#[from] std::io::Error),
}

fn input<E: std::fmt::Display>(e: E) -> CliError {
    CliError::Input(e.to_string())
}

struct Loaded {
    bytes: Vec<u8>,
    system: FuncSystem,
    bounds: NBox,
    precision: Option<f64>,
    epsilon_b: Option<f64>,
    warnings: Vec<String>,
}

fn load(path: &Path, run: &RunArgs) -> Result<Loaded, CliError> {
    let bytes = fs::read(path).map_err(|source| CliError::Read {
        path: path.display().to_string(),
        source,
    })?;
    let text = String::from_utf8(bytes.clone()).map_err(input)?;
    let file = SystemFile::from_json(&text).map_err(|e| CliError::Input(format!("{}: {e}", path.display())))?;
    let mut system = file.system().map_err(|e| CliError::Input(format!("{}: {e}", path.display())))?;
    let bounds = match &run.bounds {
        Some(b) => {
            let pairs: Vec<[f64; 2]> =
                serde_json::from_str(b).map_err(|e| CliError::Input(format!("--box: {e}")))?;
            SystemFile { bounds: pairs, ..file.clone() }.nbox().map_err(input)?
        }
        None => file.nbox().map_err(input)?,
    };
    let mut warnings = Vec::new();
    if !run.invert_dims.is_empty() {
        let mut flags = vec![false; system.names().len()];
        for name in &run.invert_dims {
            let i = system
                .names()
                .iter()
                .position(|n| n == name)
                .ok_or_else(|| CliError::Input(format!("--invert-dims: unknown variable '{name}'")))?;
            flags[i] = true;
        }
        let (inverted, w) = invert_coordinates(&system, &flags).map_err(input)?;
        system = inverted;
        warnings.extend(w);
        warnings.push(format!(
            "coordinates of {} are reciprocals of the original variables",
            run.invert_dims.join(", ")
        ));
    }
    Ok(Loaded {
        bytes,
        system,
        bounds,
        precision: file.precision,
        epsilon_b: file.epsilon_b,
        warnings,
    })
}

fn config(run: &RunArgs, loaded: &Loaded, method: Method) -> Config {
    let defaults = Config::default();
    Config {
        epsilon: run.precision.or(loaded.precision).unwrap_or(defaults.epsilon),
        epsilon_b: run.epsilon_b.or(loaded.epsilon_b),
        rotation_scale: run.rotation_scale,
        seed: run.seed,
        workers: run.workers,
        max_boxes: run.max_boxes.unwrap_or(defaults.max_boxes),
        candidates: match run.candidates {
            CandidatesArg::Plain => CandidateStrategy::Plain,
            CandidatesArg::Sleeve => CandidateStrategy::Sleeve,
        },
        postprocess: !run.no_postprocess,
        method,
        ..defaults
    }
}

fn run_once(loaded: &Loaded, cfg: &Config) -> Result<IsolationResult, CliError> {
    let mut r = isolate(&loaded.system, &loaded.bounds, cfg).map_err(input)?;
    r.warnings.extend(loaded.warnings.iter().cloned());
    Ok(r)
}

fn write_out(text: &str) -> Result<(), CliError> {
    let mut out = std::io::stdout().lock();
    out.write_all(text.as_bytes())?;
    if !text.ends_with('\n') {
        out.write_all(b"\n")?;
    }
    Ok(())
}

fn execute(cli: Cli) -> Result<bool, CliError> {
    match cli.command {
        Command::Isolate { file, run, format, method } => {
            let t = Instant::now();
            let loaded = load(&file, &run)?;
            let parse_ms = t.elapsed().as_secs_f64() * 1e3;
            let method = match method {
                MethodArg::Sm => Method::StrongMonotone,
                MethodArg::Miranda => Method::Miranda,
            };
            let cfg = config(&run, &loaded, method);
            let result = run_once(&loaded, &cfg)?;
            let complete = result.complete;
            let timings = Timings {
                parse_ms,
                isolate_ms: result.stats.wall_time_ms,
                postprocess_ms: result.stats.postprocess_time_ms,
            };
            let report = RunReport::new(&loaded.bytes, cfg, result, timings);
            match format {
                Format::Json => write_out(&serde_json::to_string_pretty(&report).expect("report serializes"))?,
                Format::Text => write_out(&report.text(loaded.system.names()))?,
            }
            Ok(complete)
        }
        Command::Generate {
            family,
            terms,
            coeff,
            seed,
            radius,
            out,
        } => {
            let family: Family = family.parse().map_err(input)?;
            if !(radius > 0.0 && radius.is_finite()) {
                return Err(CliError::Input(format!("--radius must be positive, got {radius}")));
            }
            let sys = generate(family, terms, coeff, seed).map_err(input)?;
            let text = SystemFile::from_system(&sys, &NBox::cube(family.vars, -radius, radius)).to_json();
            match out {
                Some(p) => fs::write(&p, text + "\n")?,
                None => write_out(&text)?,
            }
            Ok(true)
        }
        Command::Sweep { file, precisions, run } => {
            let loaded = load(&file, &run)?;
            let width = loaded.bounds.width();
            if let Some(bad) = precisions.iter().find(|&&e| !(e > 0.0 && e < width)) {
                return Err(CliError::Input(format!(
                    "precision {bad} must be positive and smaller than the box width {width}"
                )));
            }
            let mut csv = String::from("epsilon,certified,suspected,refined,refined_certified,boxes,time_ms,complete\n");
            let mut complete = true;
            for &eps in &precisions {
                let run = RunArgs {
                    precision: Some(eps),
                    ..run.clone()
                };
                let cfg = config(&run, &loaded, Method::StrongMonotone);
                let r = run_once(&loaded, &cfg)?;
                complete &= r.complete;
                csv.push_str(&format!(
                    "{eps:e},{},{},{},{},{},{:.3},{}\n",
                    r.certified.len(),
                    r.suspected.len(),
                    r.refined.len(),
                    r.refined.iter().filter(|p| p.certified).count(),
                    r.stats.boxes_processed,
                    r.stats.wall_time_ms + r.stats.postprocess_time_ms,
                    r.complete
                ));
            }
            write_out(&csv)?;
            Ok(complete)
        }
        Command::CompareMk { file, run } => {
            let loaded = load(&file, &run)?;
            let mut csv = String::from("method,certified,suspected,refined_certified,boxes,time_ms,complete\n");
            let mut complete = true;
            for (name, method) in [("sm", Method::StrongMonotone), ("miranda", Method::Miranda)] {
                let cfg = config(&run, &loaded, method);
                let r = run_once(&loaded, &cfg)?;
                complete &= r.complete;
                csv.push_str(&format!(
                    "{name},{},{},{},{},{:.3},{}\n",
                    r.certified.len(),
                    r.suspected.len(),
                    r.refined.iter().filter(|p| p.certified).count(),
                    r.stats.boxes_processed,
                    r.stats.wall_time_ms + r.stats.postprocess_time_ms,
                    r.complete
                ));
            }
            write_out(&csv)?;
            Ok(complete)
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    match execute(cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => {
            eprintln!("smroot: box budget exhausted; results are partial");
            ExitCode::from(2)
        }
        Err(e) => {
            eprintln!("smroot: {e}");
            ExitCode::from(1)
        }
    }
}
