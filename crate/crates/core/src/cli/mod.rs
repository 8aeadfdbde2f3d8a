//! Command-line front end.
//!
//! Every command reads a JSON [`ExperimentConfig`]; `--w`, `--grid-step`,
//! `--window` and `--out` override the file. Exit codes: 0 success, 2 bad
//! configuration, 3 failed mathematical precondition (divergent moment,
//! unbracketable norm), 4 evaluation or I/O failure.

pub mod commands;
pub mod config;

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

pub use config::ExperimentConfig;

use crate::error::Error;

pub const EXIT_OK: i32 = 0;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_MATH: i32 = 3;
pub const EXIT_RUNTIME: i32 = 4;

/// Environment variable capping the worker-thread count.
pub const THREADS_ENV: &str = "DURRMEYER_THREADS";

#[derive(Debug, Parser)]
#[command(name = "durrmeyer", version, about = "Durrmeyer sampling series: kernel checks, reconstructions and convergence studies")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Partition-of-unity and Fourier residuals plus the moment table.
    ///
    /// Writes kernel_check.csv (section, quantity, value, certified_error, status)
    /// and kernel_check.json.
    KernelCheck(Common),
    /// Sampled reconstructions, one CSV per w.
    ///
    /// Writes reconstruct_w<w>.csv (x, f, s_w_f) and reconstruct.json.
    Reconstruct {
        #[command(flatten)]
        common: Common,
        /// Evaluate at this single point instead of the grid.
        #[arg(long, allow_hyphen_values = true)]
        at: Option<f64>,
    },
    /// Sup and modular errors, empirical orders and error-bound margins.
    ///
    /// Writes converge.csv (w, sup_error, numerical_budget, eoc, quantitative_bound,
    /// bound_margin, one modular column per Orlicz entry) and converge.json.
    Converge(Common),
    /// Modular inequality sides and Luxemburg norms per Orlicz entry and w.
    ///
    /// Writes orlicz.csv (eta, lambda, w, lhs, rhs, holds, luxemburg_f,
    /// luxemburg_s_w_f, status) and orlicz.json.
    Orlicz(Common),
}

#[derive(Debug, Args)]
pub struct Common {
    /// JSON experiment configuration.
    #[arg(long, short)]
    pub config: PathBuf,
    /// Scales, comma separated (overrides w_list).
    #[arg(long, value_delimiter = ',')]
    pub w: Option<Vec<f64>>,
    #[arg(long)]
    pub grid_step: Option<f64>,
    /// Evaluation window as lo,hi.
    #[arg(long, value_delimiter = ',', num_args = 1, allow_hyphen_values = true)]
    pub window: Option<Vec<f64>>,
    /// Output directory.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

impl Common {
    /// Reads the config file and applies the flag overrides.
    pub fn load(&self) -> Result<ExperimentConfig, Error> {
        let text = std::fs::read_to_string(&self.config)
            .map_err(|e| Error::InvalidParameter(format!("cannot read {}: {e}", self.config.display())))?;
        let mut cfg = ExperimentConfig::from_json(&text)?;
        if let Some(w) = &self.w {
            cfg.w_list = w.clone();
        }
        if let Some(step) = self.grid_step {
            cfg.grid_step = step;
        }
        if let Some(win) = &self.window {
            match win.as_slice() {
                [lo, hi] => cfg.window = [*lo, *hi],
                _ => return Err(Error::InvalidParameter("--window takes exactly two values: lo,hi".into())),
            }
        }
        if let Some(out) = &self.out {
            cfg.output.dir = out.clone();
        }
        Ok(cfg)
    }
}

pub fn exit_code(e: &Error) -> i32 {
    if e.is_config() {
        EXIT_CONFIG
    } else if e.is_math_precondition() {
        EXIT_MATH
    } else {
        EXIT_RUNTIME
    }
}

fn configure_threads() -> Result<(), Error> {
    let Ok(value) = std::env::var(THREADS_ENV) else {
        return Ok(());
    };
    let n: usize = value
        .trim()
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| Error::InvalidParameter(format!("{THREADS_ENV} must be a positive integer, got '{value}'")))?;
    // a second initialization (e.g. in tests) keeps the existing pool
    let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    Ok(())
}

fn execute(command: &Command) -> Result<Vec<PathBuf>, Error> {
    configure_threads()?;
    match command {
        Command::KernelCheck(c) => commands::kernel_check(&c.load()?),
        Command::Reconstruct { common, at } => commands::reconstruct(&common.load()?, *at),
        Command::Converge(c) => commands::converge(&c.load()?),
        Command::Orlicz(c) => commands::orlicz(&c.load()?),
    }
}

/// Parses `args`, runs the command and returns the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_CONFIG } else { EXIT_OK };
        }
    };
    match execute(&cli.command) {
        Ok(files) => {
            for f in files {
                println!("{}", f.display());
            }
            EXIT_OK
        }
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}
