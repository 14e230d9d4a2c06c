//! `pwl-canard`: command-line access to the canard-core library.
//!
//! Each subcommand prints a compact JSON summary on stdout and, with `--out`,
//! writes CSV/JSON files into that directory. Exit codes: 0 success,
//! 2 invalid input (flags, config, parameters), 3 numerical failure.

mod commands;
pub mod scenario;

use std::ffi::OsString;
use std::io::Write;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use thiserror::Error;

use scenario::Knobs;

/// Environment variable capping the number of worker threads.
pub const THREADS_ENV: &str = "PWL_CANARD_THREADS";

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config: {0}")]
    Config(String),
    #[error(transparent)]
    Core(#[from] canard_core::Error),
    #[error("{0}")]
    Numerical(String),
    #[error("i/o: {0}")]
    Io(#[from] std::io::Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) | CliError::Io(_) => 2,
            CliError::Core(e) if e.is_validation() => 2,
            CliError::Core(_) | CliError::Numerical(_) => 3,
        }
    }
}

#[derive(Parser, Debug)]
#[command(name = "pwl-canard", version, about = "Canards and mixed-mode oscillations in piecewise-linear slow-fast systems")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Args, Debug)]
pub struct Common {
    /// JSON scenario (one object); flags override its keys.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Directory receiving CSV/JSON output files.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[command(flatten)]
    pub knobs: Knobs,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Folded-singularity type and winding bound of (p1, p2, p3).
    #[command(allow_negative_numbers = true)]
    Classify(Common),
    /// Integrate one trajectory; CSV `t,x,y,z,zone`.
    #[command(allow_negative_numbers = true)]
    Simulate(Common),
    /// All maximal canards of the minimal system.
    #[command(allow_negative_numbers = true)]
    Canards(Common),
    /// The explicit canard of index k for its selected half-width.
    #[command(allow_negative_numbers = true)]
    Selected(Common),
    /// Singular (eps = 0) phase portrait.
    #[command(allow_negative_numbers = true)]
    Singular(Common),
    /// Attracting cycle of a planar system.
    #[command(name = "planar-cycle", allow_negative_numbers = true)]
    PlanarCycle(Common),
    /// Cycle amplitude over a range of a (canard explosion).
    #[command(name = "planar-scan", allow_negative_numbers = true)]
    PlanarScan(Common),
    /// SAO/LAO pattern of a drifted planar system.
    #[command(name = "transient-mmo", allow_negative_numbers = true)]
    TransientMmo(Common),
    /// Periodic MMO of the global-return system.
    #[command(allow_negative_numbers = true)]
    Mmo(Common),
    /// Fan of trajectories over initial z values.
    #[command(allow_negative_numbers = true)]
    Sweep(Common),
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::Classify(_) => "classify",
            Command::Simulate(_) => "simulate",
            Command::Canards(_) => "canards",
            Command::Selected(_) => "selected",
            Command::Singular(_) => "singular",
            Command::PlanarCycle(_) => "planar-cycle",
            Command::PlanarScan(_) => "planar-scan",
            Command::TransientMmo(_) => "transient-mmo",
            Command::Mmo(_) => "mmo",
            Command::Sweep(_) => "sweep",
        }
    }

    fn common(&self) -> &Common {
        match self {
            Command::Classify(c)
            | Command::Simulate(c)
            | Command::Canards(c)
            | Command::Selected(c)
            | Command::Singular(c)
            | Command::PlanarCycle(c)
            | Command::PlanarScan(c)
            | Command::TransientMmo(c)
            | Command::Mmo(c)
            | Command::Sweep(c) => c,
        }
    }
}

fn thread_pool() -> Result<rayon::ThreadPool, CliError> {
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Ok(v) = std::env::var(THREADS_ENV) {
        let n: usize = v
            .trim()
            .parse()
            .ok()
            .filter(|&n| n > 0)
            .ok_or_else(|| CliError::Config(format!("{THREADS_ENV} must be a positive integer, got {v:?}")))?;
        builder = builder.num_threads(n);
    }
    builder.build().map_err(|e| CliError::Config(format!("thread pool: {e}")))
}

/// Parse `args` (program name first), run, and return the exit code.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let text = e.render().to_string();
            return if e.use_stderr() {
                let _ = write!(err, "{text}");
                2
            } else {
                let _ = write!(out, "{text}");
                0
            };
        }
    };
    // stdout is buffered so the command itself can run on the pool
    let result = thread_pool().and_then(|pool| {
        let mut buf = Vec::new();
        let r = pool.install(|| execute(&cli.command, &mut buf));
        out.write_all(&buf)?;
        r
    });
    match result {
        Ok(()) => 0,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            e.exit_code()
        }
    }
}

fn execute(command: &Command, out: &mut dyn Write) -> Result<(), CliError> {
    let common = command.common();
    let knobs = scenario::merge(common.config.as_ref(), &common.knobs, command.name())?;
    let dir = common.out.as_deref();
    if let Some(d) = dir {
        std::fs::create_dir_all(d)?;
    }
    match command {
        Command::Classify(_) => commands::classify(&knobs, out),
        Command::Simulate(_) => commands::simulate(&knobs, dir, out),
        Command::Canards(_) => commands::canards(&knobs, dir, out),
        Command::Selected(_) => commands::selected(&knobs, dir, out),
        Command::Singular(_) => commands::singular(&knobs, dir, out),
        Command::PlanarCycle(_) => commands::planar_cycle(&knobs, dir, out),
        Command::PlanarScan(_) => commands::planar_scan(&knobs, dir, out),
        Command::TransientMmo(_) => commands::transient_mmo(&knobs, dir, out),
        Command::Mmo(_) => commands::mmo(&knobs, dir, out),
        Command::Sweep(_) => commands::sweep(&knobs, dir, out),
    }
}
