mod config;
mod output;
mod run;

use clap::Parser;
use config::{Command, Format, InputSpec, Overrides};
use run::Failure;
use std::path::PathBuf;
use std::process::ExitCode;

/// Operational entropies, protocol bounds and the invariant suite.
///
/// Exit status: 0 on success, 1 when a bound or invariant fails, 2 on a
/// configuration error. `VNA_ENTROPY_THREADS` caps the worker pool.
#[derive(Parser)]
#[command(name = "vna-entropy", version)]
struct Cli {
    #[command(subcommand)]
    command: Option<Command>,
    /// Experiment config JSON; flags given here override it.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Seeds generators and sampled hash families.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Report path; stdout when absent.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[arg(long, value_enum, global = true)]
    format: Option<Format>,
    /// Reduced case counts for selftest.
    #[arg(long, global = true)]
    quick: bool,
    /// Leave the timestamp out of the report.
    #[arg(long, global = true)]
    no_timestamp: bool,
    #[command(flatten)]
    input: InputSpec,
}

fn init_threads() -> Result<(), String> {
    let Ok(v) = std::env::var("VNA_ENTROPY_THREADS") else { return Ok(()) };
    let n: usize = v.trim().parse().map_err(|_| format!("VNA_ENTROPY_THREADS={v} is not a count"))?;
    rayon::ThreadPoolBuilder::new().num_threads(n).build_global().map_err(|e| e.to_string())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Err(e) = init_threads() {
        eprintln!("error: {e}");
        return ExitCode::from(2);
    }
    let overrides = Overrides {
        command: cli.command,
        input: cli.input,
        seed: cli.seed,
        out: cli.out,
        format: cli.format,
        quick: cli.quick,
    };
    let cfg = match config::resolve(cli.config.as_deref(), overrides) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    };

    let (code, passed, body, table) = match run::run(&cfg) {
        Ok(o) => {
            if let Some(m) = &o.violated {
                eprintln!("violation: {m}");
            }
            (if o.violated.is_some() { 1 } else { 0 }, o.violated.is_none(), o.result, o.table)
        }
        Err(f) => {
            let code = match &f {
                Failure::Config(m) => {
                    eprintln!("error: {m}");
                    2
                }
                Failure::Violation { message, .. } => {
                    eprintln!("violation: {message}");
                    1
                }
            };
            (code, false, run::failure_body(&f), None)
        }
    };

    let report = output::report(&cfg, passed, body, !cli.no_timestamp);
    let format = cfg.output.format.unwrap_or(Format::Json);
    let written = match (&cfg.output.path, &table) {
        (Some(p), _) => {
            std::fs::File::create(p).and_then(|f| output::write(&report, format, std::io::BufWriter::new(f)))
        }
        // selftest shows its table on the terminal; the full report needs --out
        (None, Some(t)) => {
            print!("{t}");
            Ok(())
        }
        (None, None) => output::write(&report, format, std::io::stdout().lock()),
    };
    if let Some(t) = table.filter(|_| cfg.output.path.is_some()) {
        print!("{t}");
    }
    if let Err(e) = written {
        eprintln!("error: writing report: {e}");
        return ExitCode::from(2);
    }
    ExitCode::from(code)
}
