//! Command-line front end: four subcommands (`divergence`, `train`,
//! `fed`, `sweep`), each reading a TOML config and writing one CSV.
//!
//! * `--config <path>` — experiment configuration (required).
//! * `--out <path>` — output CSV; stdout when omitted.
//! * `--seeds <list>` — comma-separated override of `[run].seeds`.
//! * `--no-timestamp` — omit the `# generated <secs>` header line, making
//!   reruns byte-identical.
//!
//! `NOISEBOUND_WORKERS` caps the worker pool. Exit code 0 iff every run
//! completed; otherwise a single JSON error record goes to stderr and the
//! exit code is 1.

pub mod commands;
pub mod config;

use std::io::Write;
use std::path::PathBuf;

use clap::Parser;

use crate::error::{Error, Result};
use commands::Table;
use config::{ExperimentKind, RootConfig};

#[derive(Debug, Parser)]
#[command(
    name = "noisebound",
    version,
    about = "Noisy iterative training, gradient statistics, and generalization bounds"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, clap::Subcommand)]
enum Command {
    /// Tabulate closed-form channel divergences against a quadrature oracle
    Divergence(CommonArgs),
    /// Train with a noisy iterative algorithm; log losses and bounds per epoch
    Train(CommonArgs),
    /// Simulate federated averaging; report per-client bounds and gaps
    Fed(CommonArgs),
    /// Rerun training across one swept axis; summarize final epochs
    Sweep(CommonArgs),
}

impl Command {
    fn kind(&self) -> ExperimentKind {
        match self {
            Command::Divergence(_) => ExperimentKind::Divergence,
            Command::Train(_) => ExperimentKind::Train,
            Command::Fed(_) => ExperimentKind::Fed,
            Command::Sweep(_) => ExperimentKind::Sweep,
        }
    }

    fn args(&self) -> &CommonArgs {
        match self {
            Command::Divergence(a) | Command::Train(a) | Command::Fed(a) | Command::Sweep(a) => a,
        }
    }
}

#[derive(Debug, clap::Args)]
struct CommonArgs {
    /// Path to the TOML experiment configuration
    #[arg(long)]
    config: PathBuf,
    /// Output CSV path (stdout when omitted)
    #[arg(long)]
    out: Option<PathBuf>,
    /// Comma-separated seed list overriding [run].seeds
    #[arg(long, value_delimiter = ',')]
    seeds: Option<Vec<u64>>,
    /// Omit the generated-at header line
    #[arg(long)]
    no_timestamp: bool,
}

/// Environment variable naming the worker-pool size.
pub const WORKERS_ENV: &str = "NOISEBOUND_WORKERS";

fn init_workers() -> Result<()> {
    match std::env::var(WORKERS_ENV) {
        Ok(raw) => {
            let workers: usize = raw.parse().ok().filter(|&w| w >= 1).ok_or_else(|| {
                Error::Config(format!(
                    "{WORKERS_ENV} must be a positive integer, got {raw:?}"
                ))
            })?;
            // A second initialization (tests, repeated calls) is fine: the
            // existing pool simply stays in effect.
            let _ = rayon::ThreadPoolBuilder::new()
                .num_threads(workers)
                .build_global();
            Ok(())
        }
        Err(std::env::VarError::NotPresent) => Ok(()),
        Err(e) => Err(Error::Config(format!("{WORKERS_ENV}: {e}"))),
    }
}

/// Render a table as CSV (UTF-8, LF). `generated_at` becomes a leading
/// `# generated <secs>` comment when present.
pub fn write_csv(table: &Table, generated_at: Option<u64>, out: &mut dyn Write) -> Result<()> {
    let io_err = |source: std::io::Error| Error::Io {
        path: "<csv output>".to_string(),
        source,
    };
    if let Some(secs) = generated_at {
        writeln!(out, "# generated {secs}").map_err(io_err)?;
    }
    writeln!(out, "{}", table.columns.join(",")).map_err(io_err)?;
    for row in &table.rows {
        let rendered: Vec<String> = row.iter().map(commands::Cell::render).collect();
        writeln!(out, "{}", rendered.join(",")).map_err(io_err)?;
    }
    Ok(())
}

fn execute(command: &Command) -> Result<()> {
    init_workers()?;
    let args = command.args();
    let text = std::fs::read_to_string(&args.config).map_err(|source| Error::Io {
        path: args.config.display().to_string(),
        source,
    })?;
    let config = RootConfig::parse(&text)?;
    let seeds = args.seeds.as_deref();

    let table = match command.kind() {
        ExperimentKind::Divergence => commands::cmd_divergence(&config)?,
        ExperimentKind::Train => commands::cmd_train(&config, seeds)?,
        ExperimentKind::Fed => commands::cmd_fed(&config, seeds)?,
        ExperimentKind::Sweep => commands::cmd_sweep(&config, seeds)?,
    };

    let generated_at = if args.no_timestamp {
        None
    } else {
        Some(
            std::time::SystemTime::now()
                .duration_since(std::time::UNIX_EPOCH)
                .map(|d| d.as_secs())
                .unwrap_or(0),
        )
    };

    match &args.out {
        Some(path) => {
            let mut file = std::fs::File::create(path).map_err(|source| Error::Io {
                path: path.display().to_string(),
                source,
            })?;
            write_csv(&table, generated_at, &mut file)
        }
        None => {
            let stdout = std::io::stdout();
            write_csv(&table, generated_at, &mut stdout.lock())
        }
    }
}

/// Parse the process arguments, run the selected command, and return the
/// process exit code. Failures print one JSON record to stderr.
pub fn run() -> i32 {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if e.use_stderr() => {
            eprintln!(
                "{}",
                Error::Config(format!("argument parse: {e}")).to_json_line()
            );
            return 2;
        }
        Err(e) => {
            // --help / --version
            print!("{e}");
            return 0;
        }
    };
    match execute(&cli.command) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("{}", e.to_json_line());
            1
        }
    }
}
