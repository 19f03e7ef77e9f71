//! Orthojump unravelling as a piecewise-deterministic process.
//!
//! Between jumps the unnormalized state follows
//! `dΦ/dt = -(i/ħ)ĤΦ - λ(x̂-⟨x̂⟩)²Φ`, whose squared norm decays at rate
//! `2λσ²`. A jump fires once the squared norm drops below a uniform
//! threshold; it maps `Φ → (x̂-⟨x̂⟩)Φ` and restarts at unit norm.

use super::config::{Method, StepConfig, TrajectoryRecord};
use super::propagator::{check_step, Propagator};
use crate::error::{Error, Result};
use crate::rng::TrajectoryRng;
use crate::state::{
    moments, normalize, NormPolicy, PhysicalParams, Wavefunction, MIN_SQUARED_NORM,
};

/// One Strang step of the deterministic flow: half kinetic, full decay
/// `exp(-λ(x-⟨x̂⟩)²dt)` with `⟨x̂⟩` of the normalized state, half kinetic.
pub fn step_deterministic(
    phi: &Wavefunction,
    dt: f64,
    params: &PhysicalParams,
) -> Result<Wavefunction> {
    let n2 = phi.squared_norm();
    if !(n2 > MIN_SQUARED_NORM) {
        return Err(Error::DegenerateState(format!("squared norm {n2:e}")));
    }
    if n2 > 1.0 + crate::state::NORM_TOLERANCE {
        return Err(Error::InvalidArgument(format!(
            "deterministic flow expects squared norm <= 1, got {n2}"
        )));
    }
    let mut prop = Propagator::new(phi.grid(), params, dt);
    prop.load(phi.amplitudes());
    let (ps, ms) = prop.deterministic_step();
    check_step(&ps, &ms)?;
    Ok(prop.to_wavefunction())
}

/// `Φ → (x̂-⟨x̂⟩)Φ`, renormalized. The result is orthogonal to `Φ`.
pub fn apply_jump(phi: &Wavefunction) -> Result<Wavefunction> {
    let m = moments(phi, NormPolicy::Renormalize)?;
    let c = phi.grid().midpoint();
    let a = m.mean_x - c;
    let amps = phi
        .amplitudes()
        .iter()
        .zip(phi.grid().positions())
        .map(|(z, &x)| z * ((x - c) - a))
        .collect();
    let out = Wavefunction::from_amplitudes(phi.grid().clone(), amps)?;
    normalize(&out)
}

/// Runs trajectory 0 of the stream family keyed by `cfg.seed`.
pub fn run_jump_trajectory(
    psi0: &Wavefunction,
    cfg: &StepConfig,
    params: &PhysicalParams,
) -> Result<TrajectoryRecord> {
    run_jump_indexed(psi0, cfg, params, 0)
}

pub(crate) fn run_jump_indexed(
    psi0: &Wavefunction,
    cfg: &StepConfig,
    params: &PhysicalParams,
    index: u64,
) -> Result<TrajectoryRecord> {
    if !psi0.is_normalized() {
        return Err(Error::InvalidArgument(format!(
            "expected a normalized state, squared norm is {}",
            psi0.squared_norm()
        )));
    }
    cfg.validate()?;
    let n_steps = cfg.n_steps();
    let samples = cfg.sample_steps();
    let mut rec = TrajectoryRecord::with_capacity(Method::Orthojump, cfg.dt, n_steps, samples.len());
    let mut rng = TrajectoryRng::new(cfg.seed, index);
    let mut prop = Propagator::new(psi0.grid(), params, cfg.dt);
    prop.load(psi0.amplitudes());

    let m0 = moments(psi0, NormPolicy::RequireNormalized)?;
    rec.mean_x_series.push(m0.mean_x);
    rec.mean_p_series.push(m0.mean_p);
    rec.var_x_series.push(m0.var_x);
    let mut next_sample = 0;
    if samples.first() == Some(&0) {
        rec.times.push(0.0);
        rec.snapshots.push(psi0.clone());
        next_sample = 1;
    }

    let mut threshold = rng.uniform();
    for step in 1..=n_steps {
        let (mut ps, mut ms) = prop.deterministic_step();
        check_step(&ps, &ms)?;
        if ps.squared_norm <= threshold {
            prop.apply_jump(ps.mean_x);
            let after = prop.position_stats();
            if !(after.squared_norm > MIN_SQUARED_NORM) {
                return Err(Error::DegenerateState("jump annihilated the state".into()));
            }
            prop.scale(1.0 / after.squared_norm.sqrt());
            ps = prop.position_stats();
            ms = prop.momentum_stats();
            check_step(&ps, &ms)?;
            rec.jump_times.push(step as f64 * cfg.dt);
            threshold = rng.uniform();
        }
        rec.mean_x_series.push(ps.mean_x);
        rec.mean_p_series.push(ms.mean_p);
        rec.var_x_series.push(ps.var_x);
        if next_sample < samples.len() && samples[next_sample] == step {
            let mut snap = prop.to_wavefunction();
            if !snap.is_normalized() {
                snap = normalize(&snap)?;
            }
            rec.times.push(cfg.sample_times[next_sample]);
            rec.snapshots.push(snap);
            next_sample += 1;
        }
    }
    Ok(rec)
}
