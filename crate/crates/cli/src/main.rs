//! `adaptci` command-line front end.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use adaptci::harness::{self, ExperimentConfig, Format};
use adaptci::par::Execution;
use adaptci::Error;
use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Parser, Debug)]
#[command(name = "adaptci", version, about = "Adaptive confidence intervals for linear functionals")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Evaluate between-class moduli over the configured epsilon grid.
    Modulus(Common),
    /// Build the configured interval on observed data.
    Interval {
        #[command(flatten)]
        common: Common,
        /// Observation vector: a JSON array or whitespace/comma separated numbers.
        #[arg(long)]
        data: PathBuf,
    },
    /// Run the Monte Carlo experiment.
    Simulate(Common),
    /// Evaluate the analytic bounds attached to the configuration.
    Bounds(Common),
}

#[derive(Args, Debug)]
struct Common {
    /// Experiment configuration (JSON).
    #[arg(long)]
    config: PathBuf,
    /// Output file; standard output when absent.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Master seed, replacing the configured one.
    #[arg(long)]
    seed: Option<u64>,
    /// Number of replicates, replacing the configured one.
    #[arg(long)]
    reps: Option<usize>,
    /// Level alpha, replacing the configured one.
    #[arg(long)]
    alpha: Option<f64>,
    /// Output format.
    #[arg(long, value_enum, default_value_t = OutFormat::Csv)]
    format: OutFormat,
    /// Worker threads (1 runs sequentially); defaults to ADAPTCI_THREADS,
    /// then to the number of cores.
    #[arg(long, env = "ADAPTCI_THREADS")]
    threads: Option<usize>,
}

#[derive(ValueEnum, Clone, Copy, Debug)]
enum OutFormat {
    Csv,
    Json,
}

impl From<OutFormat> for Format {
    fn from(f: OutFormat) -> Format {
        match f {
            OutFormat::Csv => Format::Csv,
            OutFormat::Json => Format::Json,
        }
    }
}

fn load(common: &Common) -> Result<(ExperimentConfig, Vec<String>), Error> {
    let mut cfg = ExperimentConfig::load(&common.config)?;
    let mut overrides = Vec::new();
    if let Some(s) = common.seed {
        cfg.seed = s;
        overrides.push(format!("seed={s}"));
    }
    if let Some(r) = common.reps {
        cfg.replicates = r;
        overrides.push(format!("replicates={r}"));
    }
    if let Some(a) = common.alpha {
        cfg.alpha = a;
        overrides.push(format!("alpha={a}"));
    }
    cfg.validate_shape()?;
    Ok((cfg, overrides))
}

fn execution(threads: Option<usize>) -> Result<Execution, Error> {
    match threads {
        Some(0) => Err(Error::Config("threads: must be at least 1".into())),
        Some(1) => Ok(Execution::Sequential),
        Some(_n) => {
            #[cfg(feature = "parallel")]
            rayon::ThreadPoolBuilder::new()
                .num_threads(_n)
                .build_global()
                .map_err(|e| Error::Config(format!("threads: {e}")))?;
            Ok(Execution::Parallel)
        }
        None => Ok(Execution::Parallel),
    }
}

fn write_out(out: Option<&Path>, text: &str) -> Result<(), Error> {
    match out {
        Some(p) => std::fs::write(p, text).map_err(Error::from),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn read_data(path: &Path) -> Result<Vec<f64>, Error> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::Config(format!("data: cannot read {}: {e}", path.display())))?;
    let trimmed = text.trim();
    if trimmed.starts_with('[') {
        return serde_json::from_str(trimmed).map_err(|e| Error::Config(format!("data: {e}")));
    }
    trimmed
        .split(|c: char| c.is_whitespace() || c == ',')
        .filter(|s| !s.is_empty())
        .map(|s| s.parse::<f64>().map_err(|e| Error::Config(format!("data: bad number {s:?}: {e}"))))
        .collect()
}

fn run(cli: Cli) -> Result<(), Error> {
    match cli.command {
        Command::Modulus(c) => {
            let (cfg, _) = load(&c)?;
            let exec = execution(c.threads)?;
            let rows = harness::modulus_table(&cfg, exec)?;
            let text = match c.format {
                OutFormat::Csv => harness::modulus_to_csv(&rows),
                OutFormat::Json => to_json(&rows)?,
            };
            write_out(c.out.as_deref(), &text)
        }
        Command::Interval { common: c, data } => {
            let (cfg, _) = load(&c)?;
            let exec = execution(c.threads)?;
            let y = read_data(&data)?;
            if y.len() != cfg.model.d {
                return Err(Error::Config(format!("data: {} values, expected d = {}", y.len(), cfg.model.d)));
            }
            let prepared = harness::prepare(&cfg, exec)?;
            let ci = prepared.interval(&y, cfg.alpha)?;
            let text = match c.format {
                OutFormat::Csv => format!(
                    "construction,lo,hi,length,empty\n{},{},{},{},{}\n",
                    ci.provenance.construction,
                    harness::fmt12(ci.lo),
                    harness::fmt12(ci.hi),
                    harness::fmt12(ci.length()),
                    ci.empty
                ),
                OutFormat::Json => to_json(&ci)?,
            };
            write_out(c.out.as_deref(), &text)
        }
        Command::Simulate(c) => {
            let (cfg, overrides) = load(&c)?;
            let exec = execution(c.threads)?;
            let mut report = harness::run_experiment(&cfg, exec)?;
            report.overrides = overrides;
            match c.out {
                Some(p) => harness::emit_report(&report, c.format.into(), &p),
                None => {
                    let text = match c.format {
                        OutFormat::Csv => harness::report_to_csv(&report),
                        OutFormat::Json => harness::report_to_json(&report)?,
                    };
                    write_out(None, &text)
                }
            }
        }
        Command::Bounds(c) => {
            let (cfg, _) = load(&c)?;
            let exec = execution(c.threads)?;
            let b = harness::evaluate_bounds(&cfg, exec)?;
            let text = match c.format {
                OutFormat::Csv => harness::bounds_to_csv(&b),
                OutFormat::Json => to_json(&b)?,
            };
            write_out(c.out.as_deref(), &text)
        }
    }
}

fn to_json<T: serde::Serialize>(v: &T) -> Result<String, Error> {
    let mut s = serde_json::to_string_pretty(v).map_err(|e| Error::Input(format!("serialization failed: {e}")))?;
    s.push('\n');
    Ok(s)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("adaptci: {e}");
            match e {
                Error::Config(_) => ExitCode::from(3),
                _ => ExitCode::from(1),
            }
        }
    }
}
