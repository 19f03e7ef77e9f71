//! Closed-form references for the unit normalization `ħ = m = D = 1`.
//!
//! The exact solution is written for the stationary packet
//! `exp(-(1-i)x²/(4σ∞²))` as initial state:
//!
//! ```text
//! ρ(x,y,t) = exp{ -(x+y)²/(8Σ²) - A(t)(x-y)²/(8Σ²) + i B(t)(x²-y²)/(4Σ²) } / (√(2π) Σ)
//! Σ²(t)    = 1/√2 + t + t²/√2 + t³/3
//! A(t)     = 1 + 2√2 t + 2t² + (2√2/3) t³ + t⁴/3
//! B(t)     = 1 + √2 t + t²
//! ```

use std::f64::consts::{PI, SQRT_2};
use std::sync::Arc;

use num_complex::Complex64;
use statrs::function::erf::erfc;

use crate::density::DensityMatrix;
use crate::error::{Error, Result};
use crate::state::{PhysicalParams, SpatialGrid};

/// Largest probability mass of the exact diagonal allowed to fall outside
/// the grid.
pub const MAX_TRUNCATED_MASS: f64 = 1e-4;

/// Stationary squared width `σ∞² = √(ħ³/(2Dm))`.
pub fn sigma_inf2(params: &PhysicalParams) -> f64 {
    (params.hbar.powi(3) / (2.0 * params.diffusion_d * params.mass)).sqrt()
}

fn require_unit(params: &PhysicalParams) -> Result<()> {
    if !params.is_unit() {
        return Err(Error::UnsupportedNormalization(format!(
            "closed form is tabulated for hbar=m=D=1 only, got {params:?}; \
             rescale to natural units first"
        )));
    }
    Ok(())
}

fn require_time(t: f64) -> Result<()> {
    if !(t.is_finite() && t >= 0.0) {
        return Err(Error::InvalidArgument(format!("time must be non-negative, got {t}")));
    }
    Ok(())
}

/// `Σ²(t)`, the position variance of the exact solution.
pub fn big_sigma2(t: f64, params: &PhysicalParams) -> Result<f64> {
    require_unit(params)?;
    require_time(t)?;
    Ok(big_sigma2_unit(t))
}

fn big_sigma2_unit(t: f64) -> f64 {
    std::f64::consts::FRAC_1_SQRT_2 + t + t * t / SQRT_2 + t * t * t / 3.0
}

/// Exact density-matrix kernel at time `t` (unit normalization).
///
/// The grid must hold all but [`MAX_TRUNCATED_MASS`] of the diagonal
/// Gaussian.
pub fn analytic_rho(grid: &Arc<SpatialGrid>, t: f64) -> Result<DensityMatrix> {
    require_time(t)?;
    if grid.hbar() != 1.0 {
        return Err(Error::UnsupportedNormalization(format!(
            "closed form needs hbar=1, grid has {}",
            grid.hbar()
        )));
    }
    let s2 = big_sigma2_unit(t);
    let s = s2.sqrt();
    let outside = gaussian_tail(grid.x_min() / s) + gaussian_tail(-grid.x_max() / s);
    if outside > MAX_TRUNCATED_MASS {
        return Err(Error::DomainTooSmall(format!(
            "grid ({}, {}) truncates {outside:.2e} of the exact diagonal at t={t}",
            grid.x_min(),
            grid.x_max()
        )));
    }
    let t2 = t * t;
    let a = 1.0 + 2.0 * SQRT_2 * t + 2.0 * t2 + (2.0 * SQRT_2 / 3.0) * t2 * t + t2 * t2 / 3.0;
    let b = 1.0 + SQRT_2 * t + t2;
    let norm = 1.0 / ((2.0 * PI).sqrt() * s);
    let x = grid.positions();
    let n = x.len();
    let mut kernel = Vec::with_capacity(n * n);
    for &xi in x {
        for &yj in x {
            let sum = xi + yj;
            let diff = xi - yj;
            let re = -(sum * sum + a * diff * diff) / (8.0 * s2);
            let im = b * (xi * xi - yj * yj) / (4.0 * s2);
            kernel.push(Complex64::from_polar(norm * re.exp(), im));
        }
    }
    DensityMatrix::from_kernel(grid.clone(), kernel)
}

/// `P(Z < z)` for a standard normal `Z`.
fn gaussian_tail(z: f64) -> f64 {
    0.5 * erfc(-z / SQRT_2)
}

/// Right-hand side `-(i/ħ)[Ĥ,ρ] - λ[x̂,[x̂,ρ]]` of the master equation, with
/// the kinetic commutator applied spectrally.
pub fn me_rhs(rho: &DensityMatrix, params: &PhysicalParams) -> Vec<Complex64> {
    let grid = rho.grid();
    let n = grid.len();
    let hbar = grid.hbar();
    let lambda = params.decoherence();
    let kin: Vec<f64> = grid.momenta().iter().map(|p| p * p / (2.0 * params.mass)).collect();
    let mut scratch = vec![Complex64::new(0.0, 0.0); grid.scratch_len()];

    // Hρ: transform each column along i. Work on the transpose so the
    // transforms run over contiguous rows.
    let mut t = transpose(rho.kernel(), n);
    for row in t.chunks_mut(n) {
        grid.fft_with_scratch(row, &mut scratch);
        row.iter_mut().zip(&kin).for_each(|(z, e)| *z *= e);
        grid.ifft_unscaled_with_scratch(row, &mut scratch);
        row.iter_mut().for_each(|z| *z /= n as f64);
    }
    let h_rho = transpose(&t, n);
    // ρH = (Hρ)† for Hermitian ρ; computing it directly keeps the residual
    // honest for slightly non-Hermitian inputs.
    let mut rho_h = rho.kernel().to_vec();
    for row in rho_h.chunks_mut(n) {
        row.iter_mut().for_each(|z| *z = z.conj());
        grid.fft_with_scratch(row, &mut scratch);
        row.iter_mut().zip(&kin).for_each(|(z, e)| *z *= e);
        grid.ifft_unscaled_with_scratch(row, &mut scratch);
        row.iter_mut().for_each(|z| *z = z.conj() / n as f64);
    }
    let x = grid.positions();
    let mut out = Vec::with_capacity(n * n);
    let mi = Complex64::new(0.0, -1.0 / hbar);
    for i in 0..n {
        for j in 0..n {
            let k = i * n + j;
            let d = x[i] - x[j];
            out.push(mi * (h_rho[k] - rho_h[k]) - lambda * d * d * rho.kernel()[k]);
        }
    }
    out
}

fn transpose(a: &[Complex64], n: usize) -> Vec<Complex64> {
    let mut out = vec![Complex64::new(0.0, 0.0); n * n];
    for i in 0..n {
        for j in 0..n {
            out[j * n + i] = a[i * n + j];
        }
    }
    out
}

/// Relative residual `‖(ρ(t+h) - ρ(t-h))/(2h) - RHS(ρ(t))‖ / ‖RHS(ρ(t))‖`
/// of the closed form against the master equation (Frobenius norms).
pub fn me_residual(
    t: f64,
    dt_probe: f64,
    grid: &Arc<SpatialGrid>,
    params: &PhysicalParams,
) -> Result<f64> {
    require_unit(params)?;
    if !(dt_probe > 0.0 && t > dt_probe) {
        return Err(Error::InvalidArgument(format!(
            "need t > dt_probe > 0, got t={t} dt_probe={dt_probe}"
        )));
    }
    let plus = analytic_rho(grid, t + dt_probe)?;
    let minus = analytic_rho(grid, t - dt_probe)?;
    let mid = analytic_rho(grid, t)?;
    let rhs = me_rhs(&mid, params);
    let (mut num, mut den) = (0.0, 0.0);
    for ((p, m), r) in plus.kernel().iter().zip(minus.kernel()).zip(&rhs) {
        let fd = (p - m) / (2.0 * dt_probe);
        num += (fd - r).norm_sqr();
        den += r.norm_sqr();
    }
    Ok((num / den).sqrt())
}

/// Centre-of-mass spreads `((Δx̃)², (Δp̃)²) = (σ∞², ħ²/(2σ∞²))` of the
/// stationary packet.
pub fn diffusive_targets(params: &PhysicalParams) -> (f64, f64) {
    let s2 = sigma_inf2(params);
    (s2, params.hbar * params.hbar / (2.0 * s2))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::state::make_grid;
    use std::f64::consts::FRAC_1_SQRT_2;

    #[test]
    fn sigma_values() {
        let unit = PhysicalParams::unit();
        assert!((sigma_inf2(&unit) - 0.5f64.sqrt()).abs() < 1e-15);
        let h4 = PhysicalParams::new(4.0, 1.0, 1.0).unwrap();
        assert!((sigma_inf2(&h4) - 32f64.sqrt()).abs() < 1e-12);
        let d4 = PhysicalParams::new(1.0, 1.0, 4.0).unwrap();
        assert!((sigma_inf2(&d4) - 0.35355339).abs() < 1e-8);
    }

    #[test]
    fn big_sigma_values() {
        let p = PhysicalParams::unit();
        assert!((big_sigma2(0.0, &p).unwrap() - FRAC_1_SQRT_2).abs() < 1e-8);
        assert!((big_sigma2(1.0, &p).unwrap() - 2.74754).abs() < 1e-5);
        assert!((big_sigma2(5.0, &p).unwrap() - 65.05145).abs() < 1e-5);
        let other = PhysicalParams::new(1.0, 2.0, 1.0).unwrap();
        assert!(matches!(big_sigma2(1.0, &other), Err(Error::UnsupportedNormalization(_))));
    }

    #[test]
    fn diffusive_target_values() {
        let (x2, p2) = diffusive_targets(&PhysicalParams::unit());
        assert!((x2 - FRAC_1_SQRT_2).abs() < 1e-14 && (p2 - FRAC_1_SQRT_2).abs() < 1e-14);
        let (x2, p2) = diffusive_targets(&PhysicalParams::new(1.0, 1.0, 4.0).unwrap());
        assert!((x2 - 0.35355).abs() < 1e-5 && (p2 - SQRT_2).abs() < 1e-14);
        assert!((x2 * p2 - 0.5).abs() < 1e-14);
    }

    #[test]
    fn truncation_rule() {
        let g = make_grid(256, -8.0, 8.0).unwrap();
        assert!(analytic_rho(&g, 0.0).is_ok());
        assert!(matches!(analytic_rho(&g, 5.0), Err(Error::DomainTooSmall(_))));
        let g = make_grid(1024, -32.0, 32.0).unwrap();
        assert!(analytic_rho(&g, 5.0).is_ok());
    }
}
