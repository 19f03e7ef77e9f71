//! Monte-Carlo driver and estimators: ρ_MC, the centre-of-mass ρ̃,
//! spreads, Hilbert–Schmidt distances and centre-of-mass diffusion.

mod accumulate;

use std::time::Instant;

use num_complex::Complex64;
use rayon::prelude::*;

use crate::analytic::analytic_rho;
use crate::density::DensityMatrix;
use crate::error::{Error, Result};
use crate::state::{
    com_frame, moments, normalize, NormPolicy, PhysicalParams, Wavefunction,
};
use crate::unravel::{run_trajectory, Method, StepConfig, TrajectoryRecord};

use accumulate::KernelSum;

/// Trajectory failures are tolerated while they stay strictly below this
/// fraction of the ensemble.
pub const MAX_FAILURE_FRACTION: f64 = 1e-3;

/// Default relative size of the odd perturbation that breaks the parity of
/// symmetric initial states (see [`EnsembleConfig::parity_break`]).
pub const DEFAULT_PARITY_BREAK: f64 = 1e-10;

/// Start of the window used for centre-of-mass increment statistics.
pub const STATIONARY_FROM: f64 = 3.0;

/// Smallest number of increments [`com_increment_stats`] accepts.
pub const MIN_INCREMENTS: usize = 10_000;

#[derive(Debug, Clone, PartialEq)]
pub struct EnsembleConfig {
    pub n_trajectories: usize,
    pub method: Method,
    pub step: StepConfig,
    /// Increasing cumulative checkpoints; the last equals `n_trajectories`.
    pub batch_sizes: Vec<usize>,
    /// Worker threads; 0 uses the global rayon pool.
    pub workers: usize,
    /// Trajectory `n` starts from `ψ0·(1 ± ε(x-⟨x⟩)/σ)`, renormalized, with
    /// the sign alternating in `n`. The orthojump flow and jump map both
    /// preserve parity, so an exactly symmetric start never localizes and
    /// whether it does otherwise is left to rounding. Zero disables.
    pub parity_break: f64,
}

impl EnsembleConfig {
    pub fn new(n_trajectories: usize, method: Method, step: StepConfig) -> Self {
        Self {
            n_trajectories,
            method,
            step,
            batch_sizes: vec![n_trajectories],
            workers: 0,
            parity_break: DEFAULT_PARITY_BREAK,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_trajectories == 0 {
            return Err(Error::InvalidArgument("n_trajectories must be positive".into()));
        }
        if self.batch_sizes.is_empty()
            || self.batch_sizes.windows(2).any(|w| w[0] >= w[1])
            || self.batch_sizes[0] == 0
            || *self.batch_sizes.last().unwrap() != self.n_trajectories
        {
            return Err(Error::InvalidArgument(format!(
                "batch sizes {:?} must increase and end at n_trajectories={}",
                self.batch_sizes, self.n_trajectories
            )));
        }
        if !(self.parity_break.is_finite() && self.parity_break >= 0.0 && self.parity_break < 1e-2)
        {
            return Err(Error::InvalidArgument(format!(
                "parity_break must lie in [0, 1e-2), got {}",
                self.parity_break
            )));
        }
        self.step.validate()
    }
}

/// Estimates at one sample time.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleEstimate {
    pub t: f64,
    /// `Δx̃`, `Δp̃` of ρ̃.
    pub spread_x: f64,
    pub spread_p: f64,
    pub purity_mc: f64,
    pub purity_com: f64,
    pub trace_mc: f64,
    /// Normalized distance of ρ_MC from the closed form, when one exists
    /// for the parameters and grid.
    pub distance: Option<f64>,
}

/// Estimates over the first `batch_size` trajectory indices.
#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub batch_size: usize,
    /// Trajectories that contributed (failures excluded).
    pub n_used: usize,
    pub samples: Vec<SampleEstimate>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrajectorySummary {
    pub index: u64,
    pub n_jumps: usize,
    pub final_mean_x: f64,
    pub final_mean_p: f64,
    pub final_var_x: f64,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Diagnostics {
    /// `jump_histogram[k]` counts trajectories with `k` jumps.
    pub jump_histogram: Vec<usize>,
    pub failures: Vec<(u64, String)>,
    pub wall_time_s: f64,
}

#[derive(Debug, Clone)]
pub struct EnsembleResult {
    pub times: Vec<f64>,
    pub rho_mc: Vec<DensityMatrix>,
    pub rho_com: Vec<DensityMatrix>,
    /// Estimates on the full ensemble (same as the last checkpoint).
    pub samples: Vec<SampleEstimate>,
    pub checkpoints: Vec<Checkpoint>,
    pub trajectories: Vec<TrajectorySummary>,
    pub diagnostics: Diagnostics,
}

struct TrajectoryOutput {
    summary: TrajectorySummary,
    states: Vec<Vec<Complex64>>,
    com_states: Vec<Vec<Complex64>>,
}

/// The two parity-broken starting states `ψ0·(1 ± ε(x-⟨x⟩)/σ)`.
pub fn parity_broken_starts(psi0: &Wavefunction, eps: f64) -> Result<[Wavefunction; 2]> {
    if eps == 0.0 {
        return Ok([psi0.clone(), psi0.clone()]);
    }
    let m = moments(psi0, NormPolicy::RequireNormalized)?;
    let sigma = m.var_x.sqrt();
    let tilt = |sign: f64| -> Result<Wavefunction> {
        let amps = psi0
            .amplitudes()
            .iter()
            .zip(psi0.grid().positions())
            .map(|(z, &x)| z * (1.0 + sign * eps * (x - m.mean_x) / sigma))
            .collect();
        normalize(&Wavefunction::from_amplitudes(psi0.grid().clone(), amps)?)
    };
    Ok([tilt(1.0)?, tilt(-1.0)?])
}

fn run_one(
    starts: &[Wavefunction; 2],
    cfg: &EnsembleConfig,
    params: &PhysicalParams,
    index: u64,
) -> Result<TrajectoryOutput> {
    let psi0 = &starts[(index % 2) as usize];
    let rec = run_trajectory(cfg.method, psi0, &cfg.step, params, index)?;
    let mut com_states = Vec::with_capacity(rec.snapshots.len());
    for s in &rec.snapshots {
        com_states.push(com_frame(s)?.into_amplitudes());
    }
    let last = rec.mean_x_series.len() - 1;
    let summary = TrajectorySummary {
        index,
        n_jumps: rec.n_jumps(),
        final_mean_x: rec.mean_x_series[last],
        final_mean_p: rec.mean_p_series[last],
        final_var_x: rec.var_x_series[last],
    };
    let states = rec.snapshots.into_iter().map(Wavefunction::into_amplitudes).collect();
    Ok(TrajectoryOutput { summary, states, com_states })
}

/// Runs `cfg.n_trajectories` trajectories and accumulates ρ_MC and ρ̃ at
/// every sample time.
///
/// Trajectories run concurrently in blocks; outputs are folded into the
/// sums in index order, so results do not depend on the worker count.
pub fn run_ensemble(
    psi0: &Wavefunction,
    cfg: &EnsembleConfig,
    params: &PhysicalParams,
) -> Result<EnsembleResult> {
    cfg.validate()?;
    params.validate()?;
    if !psi0.is_normalized() {
        return Err(Error::InvalidArgument(format!(
            "expected a normalized state, squared norm is {}",
            psi0.squared_norm()
        )));
    }
    let pool = if cfg.workers > 0 {
        Some(
            rayon::ThreadPoolBuilder::new()
                .num_threads(cfg.workers)
                .build()
                .map_err(|e| Error::InvalidArgument(format!("thread pool: {e}")))?,
        )
    } else {
        None
    };
    let start = Instant::now();
    let grid = psi0.grid().clone();
    let times = cfg.step.sample_times.clone();
    let starts = parity_broken_starts(psi0, cfg.parity_break)?;
    let references: Vec<Option<DensityMatrix>> = times
        .iter()
        .map(|&t| {
            if params.is_unit() && grid.hbar() == 1.0 {
                analytic_rho(&grid, t).ok()
            } else {
                None
            }
        })
        .collect();

    let mut sums: Vec<KernelSum> = times.iter().map(|_| KernelSum::new(grid.clone())).collect();
    let mut com_sums = sums.clone();
    let mut diagnostics = Diagnostics::default();
    let mut trajectories = Vec::with_capacity(cfg.n_trajectories);
    let mut checkpoints = Vec::with_capacity(cfg.batch_sizes.len());
    let max_failures = (MAX_FAILURE_FRACTION * cfg.n_trajectories as f64).ceil() as usize;
    let chunk = 8 * pool.as_ref().map_or(rayon::current_num_threads(), |p| p.current_num_threads());

    let mut next = 0usize;
    let mut final_kernels = (Vec::new(), Vec::new());
    for &batch in &cfg.batch_sizes {
        while next < batch {
            let end = (next + chunk).min(batch);
            let work = || {
                (next..end)
                    .into_par_iter()
                    .map(|i| run_one(&starts, cfg, params, i as u64))
                    .collect::<Vec<_>>()
            };
            let outputs = match &pool {
                Some(p) => p.install(work),
                None => work(),
            };
            let mut ok = Vec::with_capacity(outputs.len());
            for (i, out) in (next..end).zip(outputs) {
                match out {
                    Ok(o) => ok.push(o),
                    Err(e) => {
                        diagnostics.failures.push((i as u64, e.to_string()));
                        if diagnostics.failures.len() >= max_failures {
                            return Err(annotate(e, i, diagnostics.failures.len(), cfg));
                        }
                    }
                }
            }
            for (k, (sum, com)) in sums.iter_mut().zip(com_sums.iter_mut()).enumerate() {
                let states: Vec<&[Complex64]> = ok.iter().map(|o| o.states[k].as_slice()).collect();
                sum.add(&states);
                let states: Vec<&[Complex64]> =
                    ok.iter().map(|o| o.com_states[k].as_slice()).collect();
                com.add(&states);
            }
            for o in ok {
                let h = &mut diagnostics.jump_histogram;
                if h.len() <= o.summary.n_jumps {
                    h.resize(o.summary.n_jumps + 1, 0);
                }
                h[o.summary.n_jumps] += 1;
                trajectories.push(o.summary);
            }
            next = end;
        }
        let mut samples = Vec::with_capacity(times.len());
        let mut mc = Vec::with_capacity(times.len());
        let mut cm = Vec::with_capacity(times.len());
        for (k, &t) in times.iter().enumerate() {
            let (Some(rho), Some(rho_t)) = (sums[k].mean(), com_sums[k].mean()) else {
                return Err(Error::InsufficientStatistics(format!(
                    "no successful trajectory among the first {batch}"
                )));
            };
            let (spread_x, spread_p) = spreads(&rho_t)?;
            let distance = match &references[k] {
                Some(r) => Some(hs_distance(&rho, r)?),
                None => None,
            };
            samples.push(SampleEstimate {
                t,
                spread_x,
                spread_p,
                purity_mc: rho.purity(),
                purity_com: rho_t.purity(),
                trace_mc: rho.trace(),
                distance,
            });
            mc.push(rho);
            cm.push(rho_t);
        }
        checkpoints.push(Checkpoint { batch_size: batch, n_used: sums[0].count(), samples });
        final_kernels = (mc, cm);
    }
    diagnostics.wall_time_s = start.elapsed().as_secs_f64();
    let samples = checkpoints.last().map(|c| c.samples.clone()).unwrap_or_default();
    Ok(EnsembleResult {
        times,
        rho_mc: final_kernels.0,
        rho_com: final_kernels.1,
        samples,
        checkpoints,
        trajectories,
        diagnostics,
    })
}

fn annotate(e: Error, index: usize, failures: usize, cfg: &EnsembleConfig) -> Error {
    let ctx = format!(
        "{failures} of {} trajectories failed (limit below {:.1}%), last at index {index}",
        cfg.n_trajectories,
        100.0 * MAX_FAILURE_FRACTION
    );
    match e {
        Error::DomainTooSmall(m) => Error::DomainTooSmall(format!("{ctx}: {m}")),
        Error::DegenerateState(m) => Error::DegenerateState(format!("{ctx}: {m}")),
        Error::InvalidArgument(m) => Error::InvalidArgument(format!("{ctx}: {m}")),
        other => other,
    }
}

fn common_grid(states: &[Wavefunction]) -> Result<()> {
    let Some(first) = states.first() else {
        return Err(Error::InvalidArgument("empty list of states".into()));
    };
    for s in states {
        if !s.grid().same_lattice(first.grid()) {
            return Err(Error::InvalidArgument("states live on different grids".into()));
        }
        if !s.is_normalized() {
            return Err(Error::InvalidArgument(format!(
                "state with squared norm {} in density estimate",
                s.squared_norm()
            )));
        }
    }
    Ok(())
}

/// `(1/N) Σ_n |ψ_n⟩⟨ψ_n|`.
pub fn density_from_states(states: &[Wavefunction]) -> Result<DensityMatrix> {
    common_grid(states)?;
    let mut sum = KernelSum::new(states[0].grid().clone());
    let refs: Vec<&[Complex64]> = states.iter().map(|s| s.amplitudes()).collect();
    sum.add(&refs);
    Ok(sum.mean().expect("non-empty"))
}

/// Centre-of-mass density matrix: [`density_from_states`] of the
/// centre-of-mass frames.
pub fn com_density(states: &[Wavefunction]) -> Result<DensityMatrix> {
    common_grid(states)?;
    let com: Vec<Wavefunction> = states.iter().map(com_frame).collect::<Result<_>>()?;
    density_from_states(&com)
}

/// `(√Tr(x̂²ρ), √Tr(p̂²ρ))`.
pub fn spreads(rho: &DensityMatrix) -> Result<(f64, f64)> {
    rho.check_normalized()?;
    Ok((rho.second_moment_x().sqrt(), rho.second_moment_p().sqrt()))
}

/// `√Tr(a-b)² / √Tr b²`.
pub fn hs_distance(a: &DensityMatrix, b: &DensityMatrix) -> Result<f64> {
    if !a.grid().same_lattice(b.grid()) {
        return Err(Error::InvalidArgument("distance across different grids".into()));
    }
    let (mut num, mut den) = (0.0, 0.0);
    for (x, y) in a.kernel().iter().zip(b.kernel()) {
        num += (x - y).norm_sqr();
        den += y.norm_sqr();
    }
    if den == 0.0 {
        return Err(Error::DegenerateState("reference matrix is zero".into()));
    }
    Ok((num / den).sqrt())
}

/// Per-`dt` variances of the centre-of-mass increments.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DiffusionStats {
    /// `Var[d⟨p̂⟩]/dt`.
    pub var_dp: f64,
    /// `Var[d⟨x̂⟩ - ⟨p̂⟩dt/m]/dt`.
    pub var_dx: f64,
    /// Cross-covariance of the two increments, per `dt`.
    pub cov: f64,
    pub n_increments: usize,
}

/// Increment statistics over steps starting after [`STATIONARY_FROM`].
pub fn com_increment_stats(
    records: &[TrajectoryRecord],
    dt: f64,
    mass: f64,
) -> Result<DiffusionStats> {
    let (mut n, mut sp, mut sx, mut spp, mut sxx, mut sxp) = (0usize, 0.0, 0.0, 0.0, 0.0, 0.0);
    for rec in records {
        if (rec.dt - dt).abs() > 1e-15 * dt {
            return Err(Error::InvalidArgument(format!(
                "record step {} differs from dt {dt}",
                rec.dt
            )));
        }
        let first = (STATIONARY_FROM / dt).round() as usize + 1;
        let mx = &rec.mean_x_series;
        let mp = &rec.mean_p_series;
        for k in first..mx.len().saturating_sub(1) {
            let dp = mp[k + 1] - mp[k];
            let dx = mx[k + 1] - mx[k] - mp[k] * dt / mass;
            n += 1;
            sp += dp;
            sx += dx;
            spp += dp * dp;
            sxx += dx * dx;
            sxp += dx * dp;
        }
    }
    if n < MIN_INCREMENTS {
        return Err(Error::InsufficientStatistics(format!(
            "{n} increments after t={STATIONARY_FROM}, need {MIN_INCREMENTS}"
        )));
    }
    let nf = n as f64;
    let (mp, mx) = (sp / nf, sx / nf);
    let scale = nf / (nf - 1.0) / dt;
    Ok(DiffusionStats {
        var_dp: (spp / nf - mp * mp) * scale,
        var_dx: (sxx / nf - mx * mx) * scale,
        cov: (sxp / nf - mx * mp) * scale,
        n_increments: n,
    })
}
