use std::path::PathBuf;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::CliError;
use crate::ensemble::{EnsembleConfig, DEFAULT_PARITY_BREAK};
use crate::state::{PhysicalParams, SpatialGrid};
use crate::unravel::{Method, StepConfig};

/// Environment variable holding the default output directory.
pub const OUT_DIR_ENV: &str = "UNRAVEL_OUT_DIR";
/// Used when neither `--out`, the config file nor [`OUT_DIR_ENV`] say.
pub const DEFAULT_OUT_DIR: &str = "unravel-out";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Command {
    Analytic,
    Simulate,
    Compare,
    Wigner,
    Spreads,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Analytic => "analytic",
            Command::Simulate => "simulate",
            Command::Compare => "compare",
            Command::Wigner => "wigner",
            Command::Spreads => "spreads",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GridSpec {
    pub n_points: usize,
    pub x_min: f64,
    pub x_max: f64,
}

impl std::str::FromStr for GridSpec {
    type Err = String;

    /// `N:XMIN:XMAX`.
    fn from_str(s: &str) -> Result<Self, String> {
        let parts: Vec<&str> = s.split(':').collect();
        if parts.len() != 3 {
            return Err(format!("expected N:XMIN:XMAX, got {s:?}"));
        }
        let n = parts[0].parse().map_err(|e| format!("bad point count {:?}: {e}", parts[0]))?;
        let a = parts[1].parse().map_err(|e| format!("bad x_min {:?}: {e}", parts[1]))?;
        let b = parts[2].parse().map_err(|e| format!("bad x_max {:?}: {e}", parts[2]))?;
        Ok(GridSpec { n_points: n, x_min: a, x_max: b })
    }
}

/// Command-line values that take precedence over the file.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Overrides {
    pub method: Option<Method>,
    pub trajectories: Option<usize>,
    pub seed: Option<u64>,
    pub dt: Option<f64>,
    pub t_final: Option<f64>,
    pub grid: Option<GridSpec>,
    pub out: Option<PathBuf>,
    pub workers: Option<usize>,
    pub times: Option<Vec<f64>>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct FileConfig {
    physical: Option<PhysicalSection>,
    grid: Option<GridSection>,
    run: Option<RunSection>,
    output: Option<OutputSection>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct PhysicalSection {
    hbar: Option<f64>,
    mass: Option<f64>,
    diffusion_d: Option<f64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct GridSection {
    n_points: Option<usize>,
    x_min: Option<f64>,
    x_max: Option<f64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RunSection {
    method: Option<Method>,
    n_trajectories: Option<usize>,
    batch_sizes: Option<Vec<usize>>,
    dt: Option<f64>,
    t_final: Option<f64>,
    sample_times: Option<Vec<f64>>,
    seed: Option<u64>,
    workers: Option<usize>,
    parity_break: Option<f64>,
    times: Option<Vec<f64>>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct OutputSection {
    dir: Option<PathBuf>,
    kernels: Option<bool>,
}

/// Fully resolved and validated run description.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub command: Command,
    pub params: PhysicalParams,
    pub grid: GridSpec,
    pub ensemble: EnsembleConfig,
    /// Times for `analytic` and `wigner`.
    pub times: Vec<f64>,
    pub out_dir: PathBuf,
    /// Whether `simulate` writes the ρ_MC and ρ̃ kernels.
    pub write_kernels: bool,
}

pub const DEFAULT_SAMPLE_TIMES: [f64; 7] = [0.0, 0.5, 1.0, 2.0, 3.0, 4.0, 5.0];

fn default_batches(n: usize) -> Vec<usize> {
    if n >= 3 && n.is_multiple_of(3) {
        vec![n / 3, 2 * n / 3, n]
    } else {
        vec![n]
    }
}

/// Parses a TOML document, applies `overrides` and validates the result.
/// An empty document yields the defaults.
pub fn parse_config(
    text: &str,
    command: Command,
    overrides: &Overrides,
) -> Result<RunConfig, CliError> {
    let file: FileConfig =
        toml::from_str(text).map_err(|e| CliError::Config(format!("config file: {e}")))?;
    let phys = file.physical.unwrap_or_default();
    let params = PhysicalParams {
        hbar: phys.hbar.unwrap_or(1.0),
        mass: phys.mass.unwrap_or(1.0),
        diffusion_d: phys.diffusion_d.unwrap_or(1.0),
    };
    let g = file.grid.unwrap_or_default();
    let grid = overrides.grid.unwrap_or(GridSpec {
        n_points: g.n_points.unwrap_or(1024),
        x_min: g.x_min.unwrap_or(-32.0),
        x_max: g.x_max.unwrap_or(32.0),
    });
    let run = file.run.unwrap_or_default();
    let out = file.output.unwrap_or_default();
    let n = overrides.trajectories.or(run.n_trajectories).unwrap_or(15_000);
    let t_final = overrides.t_final.or(run.t_final).unwrap_or(5.0);
    let sample_times = match run.sample_times {
        Some(s) => s,
        None => DEFAULT_SAMPLE_TIMES.iter().copied().filter(|&t| t <= t_final).collect(),
    };
    let batch_sizes = match (run.batch_sizes, overrides.trajectories) {
        (Some(b), None) => b,
        _ => default_batches(n),
    };
    let step = StepConfig {
        dt: overrides.dt.or(run.dt).unwrap_or(1e-3),
        t_final,
        sample_times,
        seed: overrides.seed.or(run.seed).unwrap_or(1),
    };
    let ensemble = EnsembleConfig {
        n_trajectories: n,
        method: overrides.method.or(run.method).unwrap_or(Method::Orthojump),
        step,
        batch_sizes,
        workers: overrides.workers.or(run.workers).unwrap_or(0),
        parity_break: run.parity_break.unwrap_or(DEFAULT_PARITY_BREAK),
    };
    let times = match overrides.times.clone().or(run.times) {
        Some(t) => t,
        None if command == Command::Wigner => vec![t_final],
        None => ensemble.step.sample_times.clone(),
    };
    let out_dir = overrides
        .out
        .clone()
        .or(out.dir)
        .or_else(|| std::env::var_os(OUT_DIR_ENV).map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from(DEFAULT_OUT_DIR));
    let cfg = RunConfig {
        command,
        params,
        grid,
        ensemble,
        times,
        out_dir,
        write_kernels: out.kernels.unwrap_or(true),
    };
    cfg.validate()?;
    Ok(cfg)
}

impl RunConfig {
    pub fn spatial_grid(&self) -> Result<Arc<SpatialGrid>, CliError> {
        let g = &self.grid;
        SpatialGrid::new(g.n_points, g.x_min, g.x_max, self.params.hbar)
            .map_err(|e| CliError::Config(e.to_string()))
    }

    pub fn validate(&self) -> Result<(), CliError> {
        let bad = |e: crate::Error| CliError::Config(e.to_string());
        self.params.validate().map_err(bad)?;
        if self.params.diffusion_d <= 0.0 {
            return Err(CliError::Config(format!(
                "diffusion_d must be positive, got {}",
                self.params.diffusion_d
            )));
        }
        self.spatial_grid()?;
        self.ensemble.validate().map_err(bad)?;
        for &t in &self.times {
            if !(t.is_finite() && t >= 0.0) {
                return Err(CliError::Config(format!("time {t} must be non-negative")));
            }
            if matches!(self.command, Command::Wigner) && !self.ensemble.step.sample_times.contains(&t)
            {
                return Err(CliError::Config(format!(
                    "wigner time {t} is not one of the sample times {:?}",
                    self.ensemble.step.sample_times
                )));
            }
        }
        Ok(())
    }

    /// The resolved configuration as TOML, for file headers.
    pub fn to_toml(&self) -> String {
        #[derive(Serialize)]
        struct Physical {
            hbar: f64,
            mass: f64,
            diffusion_d: f64,
        }
        #[derive(Serialize)]
        struct Run<'a> {
            command: &'a str,
            method: Method,
            n_trajectories: usize,
            batch_sizes: &'a [usize],
            dt: f64,
            t_final: f64,
            sample_times: &'a [f64],
            seed: u64,
            parity_break: f64,
            times: &'a [f64],
        }
        #[derive(Serialize)]
        struct Doc<'a> {
            physical: Physical,
            grid: GridSpec,
            run: Run<'a>,
        }
        let e = &self.ensemble;
        let doc = Doc {
            physical: Physical {
                hbar: self.params.hbar,
                mass: self.params.mass,
                diffusion_d: self.params.diffusion_d,
            },
            grid: self.grid,
            run: Run {
                command: self.command.name(),
                method: e.method,
                n_trajectories: e.n_trajectories,
                batch_sizes: &e.batch_sizes,
                dt: e.step.dt,
                t_final: e.step.t_final,
                sample_times: &e.step.sample_times,
                seed: e.step.seed,
                parity_break: e.parity_break,
                times: &self.times,
            },
        };
        toml::to_string(&doc).expect("plain data serializes")
    }
}
