//! Diffusive unravelling:
//! `dΨ = [-(i/ħ)Ĥ - λ(x̂-⟨x̂⟩)²]Ψ dt + √(2λ)(x̂-⟨x̂⟩)Ψ dW`,
//! integrated by Strang splitting with an exponential Itô kick and explicit
//! renormalization.

use super::config::{Method, StepConfig, TrajectoryRecord};
use super::propagator::{check_step, Propagator};
use crate::error::{Error, Result};
use crate::rng::TrajectoryRng;
use crate::state::{PhysicalParams, Wavefunction};

fn require_normalized(psi: &Wavefunction) -> Result<()> {
    if !psi.is_normalized() {
        return Err(Error::InvalidArgument(format!(
            "expected a normalized state, squared norm is {}",
            psi.squared_norm()
        )));
    }
    Ok(())
}

/// One step without the final renormalization. The squared norm is a
/// martingale: `E‖ψ'‖² = 1` over Gaussian `dw`.
pub fn diffusive_increment(
    psi: &Wavefunction,
    dt: f64,
    dw: f64,
    params: &PhysicalParams,
) -> Result<Wavefunction> {
    require_normalized(psi)?;
    let mut prop = Propagator::new(psi.grid(), params, dt);
    prop.load(psi.amplitudes());
    let (ps, ms) = prop.diffusive_step(dw);
    check_step(&ps, &ms)?;
    Ok(prop.to_wavefunction())
}

/// One step for a caller-supplied Wiener increment `dw`
/// (distributed as `√dt·N(0,1)`), renormalized.
pub fn step_diffusive(
    psi: &Wavefunction,
    dt: f64,
    dw: f64,
    params: &PhysicalParams,
) -> Result<Wavefunction> {
    let next = diffusive_increment(psi, dt, dw, params)?;
    crate::state::normalize(&next)
}

/// Runs trajectory 0 of the stream family keyed by `cfg.seed`.
pub fn run_diffusive_trajectory(
    psi0: &Wavefunction,
    cfg: &StepConfig,
    params: &PhysicalParams,
) -> Result<TrajectoryRecord> {
    run_diffusive_indexed(psi0, cfg, params, 0)
}

pub(crate) fn run_diffusive_indexed(
    psi0: &Wavefunction,
    cfg: &StepConfig,
    params: &PhysicalParams,
    index: u64,
) -> Result<TrajectoryRecord> {
    require_normalized(psi0)?;
    cfg.validate()?;
    let n_steps = cfg.n_steps();
    let samples = cfg.sample_steps();
    let mut rec = TrajectoryRecord::with_capacity(Method::Diffusive, cfg.dt, n_steps, samples.len());
    let mut rng = TrajectoryRng::new(cfg.seed, index);
    let mut prop = Propagator::new(psi0.grid(), params, cfg.dt);
    prop.load(psi0.amplitudes());

    let m0 = crate::state::moments(psi0, crate::state::NormPolicy::RequireNormalized)?;
    rec.mean_x_series.push(m0.mean_x);
    rec.mean_p_series.push(m0.mean_p);
    rec.var_x_series.push(m0.var_x);
    let mut next_sample = 0;
    if samples.first() == Some(&0) {
        rec.times.push(0.0);
        rec.snapshots.push(psi0.clone());
        next_sample = 1;
    }

    let sqrt_dt = cfg.dt.sqrt();
    for step in 1..=n_steps {
        let dw = sqrt_dt * rng.standard_normal();
        let (ps, ms) = prop.diffusive_step(dw);
        check_step(&ps, &ms)?;
        prop.scale(1.0 / ps.squared_norm.sqrt());
        rec.mean_x_series.push(ps.mean_x);
        rec.mean_p_series.push(ms.mean_p);
        rec.var_x_series.push(ps.var_x);
        if next_sample < samples.len() && samples[next_sample] == step {
            rec.times.push(cfg.sample_times[next_sample]);
            rec.snapshots.push(prop.to_wavefunction());
            next_sample += 1;
        }
    }
    Ok(rec)
}
