//! Trajectory engines for the diffusive and orthojump unravellings.

mod config;
mod diffusive;
mod jump;
mod propagator;

pub use config::{Method, StepConfig, TrajectoryRecord, MAX_DT};
pub use diffusive::{diffusive_increment, run_diffusive_trajectory, step_diffusive};
pub use jump::{apply_jump, run_jump_trajectory, step_deterministic};

use crate::error::Result;
use crate::state::{PhysicalParams, Wavefunction};

/// Runs trajectory `index` of the family keyed by `cfg.seed`.
pub fn run_trajectory(
    method: Method,
    psi0: &Wavefunction,
    cfg: &StepConfig,
    params: &PhysicalParams,
    index: u64,
) -> Result<TrajectoryRecord> {
    match method {
        Method::Diffusive => diffusive::run_diffusive_indexed(psi0, cfg, params, index),
        Method::Orthojump => jump::run_jump_indexed(psi0, cfg, params, index),
    }
}
