//! Command-line front end: configuration, commands and output files.

mod commands;
mod config;
mod output;

use std::path::PathBuf;

use clap::Parser;

pub use commands::execute;
pub use config::{
    parse_config, Command, GridSpec, Overrides, RunConfig, DEFAULT_OUT_DIR, DEFAULT_SAMPLE_TIMES,
    OUT_DIR_ENV,
};
pub use output::{read_kernel, KernelFile, Outputs, FLAG_COMPLEX, MAGIC};

use crate::unravel::Method;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("numerical error: {0}")]
    Numerical(crate::Error),
    #[error("i/o error: {0}")]
    Io(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Numerical(_) => 3,
            CliError::Io(_) => 4,
        }
    }
}

impl From<crate::Error> for CliError {
    fn from(e: crate::Error) -> Self {
        match e {
            crate::Error::UnsupportedNormalization(m) => CliError::Config(m),
            other => CliError::Numerical(other),
        }
    }
}

/// Stochastic unravellings of the free-particle decoherence master equation.
#[derive(Debug, Parser)]
#[command(name = "unravel", version)]
pub struct Args {
    #[arg(value_enum)]
    pub command: Command,
    /// TOML configuration file.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub method: Option<Method>,
    #[arg(long)]
    pub trajectories: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub dt: Option<f64>,
    #[arg(long = "t-final")]
    pub t_final: Option<f64>,
    /// `N:XMIN:XMAX`.
    #[arg(long, allow_hyphen_values = true)]
    pub grid: Option<GridSpec>,
    /// Output directory.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Worker threads, 0 for all cores.
    #[arg(long)]
    pub workers: Option<usize>,
    /// Times for `analytic` and `wigner`, comma separated.
    #[arg(long = "t", value_delimiter = ',', allow_hyphen_values = true)]
    pub times: Option<Vec<f64>>,
}

impl Args {
    pub fn resolve(&self) -> Result<RunConfig, CliError> {
        let text = match &self.config {
            Some(p) => std::fs::read_to_string(p)
                .map_err(|e| CliError::Io(format!("{}: {e}", p.display())))?,
            None => String::new(),
        };
        let o = Overrides {
            method: self.method,
            trajectories: self.trajectories,
            seed: self.seed,
            dt: self.dt,
            t_final: self.t_final,
            grid: self.grid,
            out: self.out.clone(),
            workers: self.workers,
            times: self.times.clone(),
        };
        parse_config(&text, self.command, &o)
    }
}

/// Parses `argv`, runs the command and returns the process exit code.
pub fn main_with<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let args = match Args::try_parse_from(argv) {
        Ok(a) => a,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    match args.resolve().and_then(|cfg| execute(&cfg)) {
        Ok(_) => 0,
        Err(e) => {
            eprintln!("unravel: {e}");
            e.exit_code()
        }
    }
}
