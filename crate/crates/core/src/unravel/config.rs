use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::state::Wavefunction;

/// Largest admissible time step.
pub const MAX_DT: f64 = 1e-2;

/// The two unravellings of the master equation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Diffusive,
    Orthojump,
}

impl Method {
    pub fn name(self) -> &'static str {
        match self {
            Method::Diffusive => "diffusive",
            Method::Orthojump => "orthojump",
        }
    }
}

impl std::str::FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "diffusive" => Ok(Method::Diffusive),
            "orthojump" => Ok(Method::Orthojump),
            other => Err(Error::InvalidArgument(format!(
                "unknown method {other:?} (expected diffusive or orthojump)"
            ))),
        }
    }
}

impl std::fmt::Display for Method {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// Time stepping and sampling of one trajectory.
#[derive(Debug, Clone, PartialEq)]
pub struct StepConfig {
    pub dt: f64,
    pub t_final: f64,
    /// Sorted times in `[0, t_final]`, each an integer multiple of `dt`.
    pub sample_times: Vec<f64>,
    pub seed: u64,
}

impl StepConfig {
    pub fn new(dt: f64, t_final: f64, sample_times: Vec<f64>, seed: u64) -> Result<Self> {
        let cfg = Self { dt, t_final, sample_times, seed };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.dt > 0.0 && self.dt <= MAX_DT) {
            return Err(Error::InvalidArgument(format!(
                "dt must lie in (0, {MAX_DT}], got {}",
                self.dt
            )));
        }
        if !(self.t_final.is_finite() && self.t_final >= 0.0) {
            return Err(Error::InvalidArgument(format!("bad t_final {}", self.t_final)));
        }
        self.step_index(self.t_final).map_err(|_| {
            Error::InvalidArgument(format!(
                "t_final {} is not a multiple of dt {}",
                self.t_final, self.dt
            ))
        })?;
        let mut prev = f64::NEG_INFINITY;
        for &t in &self.sample_times {
            if !(0.0..=self.t_final).contains(&t) {
                return Err(Error::InvalidArgument(format!(
                    "sample time {t} outside [0, {}]",
                    self.t_final
                )));
            }
            if t <= prev {
                return Err(Error::InvalidArgument("sample times must be increasing".into()));
            }
            prev = t;
            self.step_index(t)?;
        }
        Ok(())
    }

    /// Number of steps to reach `t` exactly.
    pub fn step_index(&self, t: f64) -> Result<usize> {
        let k = (t / self.dt).round();
        if (k * self.dt - t).abs() > 1e-12 * t.abs().max(1.0) {
            return Err(Error::InvalidArgument(format!(
                "time {t} is not a multiple of dt {}",
                self.dt
            )));
        }
        Ok(k as usize)
    }

    pub fn n_steps(&self) -> usize {
        (self.t_final / self.dt).round() as usize
    }

    pub(crate) fn sample_steps(&self) -> Vec<usize> {
        self.sample_times.iter().map(|&t| (t / self.dt).round() as usize).collect()
    }
}

/// What one trajectory produced.
#[derive(Debug, Clone)]
pub struct TrajectoryRecord {
    pub method: Method,
    pub dt: f64,
    pub times: Vec<f64>,
    /// Normalized states at `times`.
    pub snapshots: Vec<Wavefunction>,
    /// `⟨x̂⟩`, `⟨p̂⟩` and `σ²` of the normalized state at every step
    /// `t = k·dt`, `k = 0..=n_steps`.
    pub mean_x_series: Vec<f64>,
    pub mean_p_series: Vec<f64>,
    pub var_x_series: Vec<f64>,
    /// Orthojump only; empty for the diffusive method.
    pub jump_times: Vec<f64>,
}

impl TrajectoryRecord {
    pub fn n_jumps(&self) -> usize {
        self.jump_times.len()
    }

    pub(crate) fn with_capacity(method: Method, dt: f64, steps: usize, samples: usize) -> Self {
        Self {
            method,
            dt,
            times: Vec::with_capacity(samples),
            snapshots: Vec::with_capacity(samples),
            mean_x_series: Vec::with_capacity(steps + 1),
            mean_p_series: Vec::with_capacity(steps + 1),
            var_x_series: Vec::with_capacity(steps + 1),
            jump_times: Vec::new(),
        }
    }
}
