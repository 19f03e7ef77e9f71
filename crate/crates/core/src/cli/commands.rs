use std::path::PathBuf;
use std::sync::Arc;

use super::config::{Command, RunConfig};
use super::output::{num, Outputs};
use super::CliError;
use crate::analytic::{analytic_rho, big_sigma2, sigma_inf2};
use crate::density::DensityMatrix;
use crate::ensemble::{run_ensemble, spreads, EnsembleResult};
use crate::state::{gaussian_packet, SpatialGrid, Wavefunction};
use crate::transforms::{wigner, WignerGrid};

/// Runs the configured command and returns the files it wrote.
pub fn execute(cfg: &RunConfig) -> Result<Vec<PathBuf>, CliError> {
    let grid = cfg.spatial_grid()?;
    let mut out = Outputs::new(&cfg.out_dir, &cfg.to_toml())?;
    match cfg.command {
        Command::Analytic => analytic(cfg, &grid, &mut out)?,
        Command::Simulate => {
            let r = ensemble(cfg, &grid)?;
            simulate(cfg, &r, &mut out)?;
        }
        Command::Compare => {
            let r = ensemble(cfg, &grid)?;
            compare(&r, &mut out)?;
        }
        Command::Spreads => {
            let r = ensemble(cfg, &grid)?;
            spreads_table(&r, &mut out)?;
        }
        Command::Wigner => wigner_maps(cfg, &grid, &mut out)?,
    }
    out.commit()
}

fn time_tag(t: f64) -> String {
    format!("t{t}")
}

fn initial_state(cfg: &RunConfig, grid: &Arc<SpatialGrid>) -> Result<Wavefunction, CliError> {
    Ok(gaussian_packet(grid, 0.0, 0.0, sigma_inf2(&cfg.params), -1.0)?)
}

fn ensemble(cfg: &RunConfig, grid: &Arc<SpatialGrid>) -> Result<EnsembleResult, CliError> {
    let psi0 = initial_state(cfg, grid)?;
    let r = run_ensemble(&psi0, &cfg.ensemble, &cfg.params)?;
    eprintln!(
        "{} trajectories, {} failed, {:.1} s",
        cfg.ensemble.n_trajectories,
        r.diagnostics.failures.len(),
        r.diagnostics.wall_time_s
    );
    Ok(r)
}

fn write_rho(out: &mut Outputs, name: &str, rho: &DensityMatrix) -> Result<(), CliError> {
    let n = rho.len();
    out.complex_kernel(name, n, n, rho.kernel())
}

fn analytic(cfg: &RunConfig, grid: &Arc<SpatialGrid>, out: &mut Outputs) -> Result<(), CliError> {
    let mut rows = Vec::with_capacity(cfg.times.len());
    for &t in &cfg.times {
        let s2 = big_sigma2(t, &cfg.params)?;
        let rho = analytic_rho(grid, t)?;
        let (dx, dp) = spreads(&rho)?;
        println!("t={t} Sigma^2={s2} trace={} purity={}", rho.trace(), rho.purity());
        rows.push(vec![
            num(t),
            num(s2),
            num(rho.trace()),
            num(rho.purity()),
            num(dx),
            num(dp),
        ]);
        if cfg.write_kernels {
            write_rho(out, &format!("rho_analytic_{}.bin", time_tag(t)), &rho)?;
        }
    }
    out.table("analytic.csv", &["t", "sigma2", "trace", "purity", "spread_x", "spread_p"], &rows)
}

fn opt(v: Option<f64>) -> String {
    v.map_or_else(String::new, num)
}

fn simulate(cfg: &RunConfig, r: &EnsembleResult, out: &mut Outputs) -> Result<(), CliError> {
    let mut rows = Vec::new();
    for c in &r.checkpoints {
        for s in &c.samples {
            rows.push(vec![
                c.batch_size.to_string(),
                c.n_used.to_string(),
                num(s.t),
                num(s.spread_x),
                num(s.spread_p),
                num(s.purity_mc),
                num(s.purity_com),
                num(s.trace_mc),
                opt(s.distance),
            ]);
        }
    }
    out.table(
        "ensemble.csv",
        &[
            "batch_size",
            "n_used",
            "t",
            "spread_x",
            "spread_p",
            "purity_mc",
            "purity_com",
            "trace_mc",
            "distance",
        ],
        &rows,
    )?;
    let rows: Vec<Vec<String>> = r
        .trajectories
        .iter()
        .map(|s| {
            vec![
                s.index.to_string(),
                s.n_jumps.to_string(),
                num(s.final_mean_x),
                num(s.final_mean_p),
                num(s.final_var_x),
            ]
        })
        .collect();
    out.table(
        "trajectories.csv",
        &["index", "n_jumps", "final_mean_x", "final_mean_p", "final_var_x"],
        &rows,
    )?;
    let rows: Vec<Vec<String>> = r
        .diagnostics
        .jump_histogram
        .iter()
        .enumerate()
        .map(|(k, c)| vec![k.to_string(), c.to_string()])
        .collect();
    out.table("jumps.csv", &["n_jumps", "count"], &rows)?;
    let rows: Vec<Vec<String>> = r
        .diagnostics
        .failures
        .iter()
        .map(|(i, m)| vec![i.to_string(), format!("\"{}\"", m.replace('"', "'"))])
        .collect();
    out.table("failures.csv", &["index", "message"], &rows)?;
    if cfg.write_kernels {
        for (k, &t) in r.times.iter().enumerate() {
            write_rho(out, &format!("rho_mc_{}.bin", time_tag(t)), &r.rho_mc[k])?;
            write_rho(out, &format!("rho_com_{}.bin", time_tag(t)), &r.rho_com[k])?;
        }
    }
    if let Some(s) = r.samples.last() {
        println!("t={} spread_x={} spread_p={}", s.t, s.spread_x, s.spread_p);
    }
    Ok(())
}

fn compare(r: &EnsembleResult, out: &mut Outputs) -> Result<(), CliError> {
    let mut rows = Vec::new();
    for c in &r.checkpoints {
        for s in &c.samples {
            let Some(d) = s.distance else {
                return Err(CliError::Config(
                    "no closed-form reference for these parameters".into(),
                ));
            };
            rows.push(vec![num(s.t), c.batch_size.to_string(), num(d)]);
        }
    }
    if let Some(c) = r.checkpoints.last() {
        for s in &c.samples {
            println!("N={} t={} distance={}", c.batch_size, s.t, opt(s.distance));
        }
    }
    out.table("distance.csv", &["t", "batch_size", "distance"], &rows)
}

fn spreads_table(r: &EnsembleResult, out: &mut Outputs) -> Result<(), CliError> {
    let mut rows = Vec::new();
    for c in &r.checkpoints {
        for s in &c.samples {
            rows.push(vec![c.batch_size.to_string(), num(s.t), num(s.spread_x), num(s.spread_p)]);
        }
    }
    if let Some(s) = r.samples.last() {
        println!("t={} spread_x={} spread_p={}", s.t, s.spread_x, s.spread_p);
    }
    out.table("spreads.csv", &["batch_size", "t", "spread_x", "spread_p"], &rows)
}

fn wigner_row(source: &str, t: f64, w: &WignerGrid) -> Vec<String> {
    let var_x = w.expectation(|x, _| x * x) / w.normalization;
    let var_p = w.expectation(|_, p| p * p) / w.normalization;
    vec![
        source.to_string(),
        num(t),
        num(w.normalization),
        num(w.imag_residue),
        num(var_x),
        num(var_p),
        num(w.p[0]),
        num(w.dp()),
    ]
}

fn write_wigner(out: &mut Outputs, name: &str, w: &WignerGrid) -> Result<(), CliError> {
    out.real_kernel(name, w.x.len(), w.n_p(), &w.values)
}

/// Wigner maps of ρ_MC and, for unit parameters, of the closed form.
fn wigner_maps(cfg: &RunConfig, grid: &Arc<SpatialGrid>, out: &mut Outputs) -> Result<(), CliError> {
    let r = ensemble(cfg, grid)?;
    let mut rows = Vec::new();
    for &t in &cfg.times {
        let k = r.times.iter().position(|&s| s == t).expect("validated sample time");
        let tag = time_tag(t);
        let w = wigner(&r.rho_mc[k])?;
        rows.push(wigner_row("mc", t, &w));
        write_wigner(out, &format!("wigner_mc_{tag}.bin"), &w)?;
        if cfg.params.is_unit() {
            let wa = wigner(&analytic_rho(grid, t)?)?;
            rows.push(wigner_row("analytic", t, &wa));
            write_wigner(out, &format!("wigner_analytic_{tag}.bin"), &wa)?;
        }
    }
    out.table(
        "wigner.csv",
        &["source", "t", "normalization", "imag_residue", "var_x", "var_p", "p_min", "dp"],
        &rows,
    )
}
