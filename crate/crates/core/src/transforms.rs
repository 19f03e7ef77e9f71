//! Wigner transform of density matrices and the Fokker–Planck check.

use std::f64::consts::PI;
use std::sync::Arc;

use num_complex::Complex64;

use crate::analytic::{analytic_rho, sigma_inf2};
use crate::density::DensityMatrix;
use crate::error::{Error, Result};
use crate::state::{gaussian_packet, PhysicalParams, SpatialGrid, Wavefunction};

/// Real `W(x_i, p_l)` on the grid positions and the half-extent momentum
/// lattice `p_l = l·πħ/(N·dx)`, `l = -N/2..N/2`.
#[derive(Debug, Clone, PartialEq)]
pub struct WignerGrid {
    pub x: Vec<f64>,
    /// Ascending.
    pub p: Vec<f64>,
    /// Row-major, `values[i * p.len() + l]`.
    pub values: Vec<f64>,
    /// `∫∫W dx dp`.
    pub normalization: f64,
    /// Largest imaginary part left by the transform.
    pub imag_residue: f64,
}

impl WignerGrid {
    pub fn dx(&self) -> f64 {
        self.x[1] - self.x[0]
    }

    pub fn dp(&self) -> f64 {
        self.p[1] - self.p[0]
    }

    pub fn n_p(&self) -> usize {
        self.p.len()
    }

    pub fn get(&self, i: usize, l: usize) -> f64 {
        self.values[i * self.p.len() + l]
    }

    /// `∫W dp` at each `x_i`.
    pub fn marginal_x(&self) -> Vec<f64> {
        let dp = self.dp();
        self.values.chunks(self.n_p()).map(|r| r.iter().sum::<f64>() * dp).collect()
    }

    /// `∫W dx` at each `p_l`.
    pub fn marginal_p(&self) -> Vec<f64> {
        let dx = self.dx();
        let np = self.n_p();
        let mut out = vec![0.0; np];
        for row in self.values.chunks(np) {
            out.iter_mut().zip(row).for_each(|(o, w)| *o += w * dx);
        }
        out
    }

    /// `∫∫ f(x,p) W dx dp`.
    pub fn expectation(&self, f: impl Fn(f64, f64) -> f64) -> f64 {
        let mut s = 0.0;
        for (i, &x) in self.x.iter().enumerate() {
            for (l, &p) in self.p.iter().enumerate() {
                s += f(x, p) * self.get(i, l);
            }
        }
        s * self.dx() * self.dp()
    }
}

/// `W(x,p) = (1/πħ) ∫ ⟨x+y|ρ|x-y⟩ e^{-2ipy/ħ} dy`, one transform along the
/// offset index for every centre `x_i`. Offsets reaching past the grid
/// edges contribute nothing.
pub fn wigner(rho: &DensityMatrix) -> Result<WignerGrid> {
    rho.check_hermitian()?;
    let grid = rho.grid();
    let n = grid.len();
    let dx = grid.dx();
    let hbar = grid.hbar();
    let dp = PI * hbar / (n as f64 * dx);
    let half = n / 2;
    let p: Vec<f64> = (0..n).map(|l| (l as f64 - half as f64) * dp).collect();
    let mut values = vec![0.0; n * n];
    let mut buf = vec![Complex64::new(0.0, 0.0); n];
    let mut scratch = vec![Complex64::new(0.0, 0.0); grid.scratch_len()];
    let mut imag: f64 = 0.0;
    let scale = dx / (PI * hbar);
    for i in 0..n {
        // buf[m mod n] = ρ(x_{i+m}, x_{i-m}) for offsets that stay on the
        // grid; the factor (-1)^m moves the zero of p to the middle
        for (m, slot) in buf.iter_mut().enumerate() {
            let s = if m < half { m as isize } else { m as isize - n as isize };
            let (a, b) = (i as isize + s, i as isize - s);
            *slot = if a >= 0 && b >= 0 && (a as usize) < n && (b as usize) < n {
                let sign = if m % 2 == 0 { 1.0 } else { -1.0 };
                rho.get(a as usize, b as usize) * sign
            } else {
                Complex64::new(0.0, 0.0)
            };
        }
        grid.fft_with_scratch(&mut buf, &mut scratch);
        let row = &mut values[i * n..(i + 1) * n];
        for (l, z) in buf.iter().enumerate() {
            // out index l of the shifted transform is p_l with l - n/2
            row[l] = z.re * scale;
            imag = imag.max((z.im * scale).abs());
        }
    }
    let normalization = values.iter().sum::<f64>() * dx * dp;
    Ok(WignerGrid { x: grid.positions().to_vec(), p, values, normalization, imag_residue: imag })
}

/// Spectral derivative of order 1 or 2 along a periodic axis with `len`
/// samples spaced by `h`, applied to every line of a row-major array.
fn spectral_derivative(
    values: &[f64],
    rows: usize,
    cols: usize,
    along_rows: bool,
    h: f64,
    order: u32,
    grid: &SpatialGrid,
) -> Vec<f64> {
    let len = if along_rows { cols } else { rows };
    let lines = if along_rows { rows } else { cols };
    let k: Vec<f64> = (0..len)
        .map(|j| {
            let j = if j < len / 2 { j as f64 } else { j as f64 - len as f64 };
            2.0 * PI * j / (len as f64 * h)
        })
        .collect();
    let mut out = vec![0.0; values.len()];
    let mut buf = vec![Complex64::new(0.0, 0.0); len];
    let mut scratch = vec![Complex64::new(0.0, 0.0); grid.scratch_len()];
    let idx = |line: usize, j: usize| if along_rows { line * cols + j } else { j * cols + line };
    for line in 0..lines {
        for (j, b) in buf.iter_mut().enumerate() {
            *b = Complex64::new(values[idx(line, j)], 0.0);
        }
        grid.fft_with_scratch(&mut buf, &mut scratch);
        for (j, b) in buf.iter_mut().enumerate() {
            // drop the unpaired Nyquist mode for odd orders
            let f = if order % 2 == 1 && j == len / 2 {
                Complex64::new(0.0, 0.0)
            } else {
                Complex64::new(0.0, k[j]).powu(order)
            };
            *b *= f;
        }
        grid.ifft_unscaled_with_scratch(&mut buf, &mut scratch);
        for (j, b) in buf.iter().enumerate() {
            out[idx(line, j)] = b.re / len as f64;
        }
    }
    out
}

/// Exact free evolution of a state by its spectral phase.
fn free_evolve(psi: &Wavefunction, t: f64, mass: f64) -> Wavefunction {
    let grid = psi.grid();
    let hbar = grid.hbar();
    let mut buf = psi.spectrum();
    for (z, &p) in buf.iter_mut().zip(grid.momenta()) {
        *z *= Complex64::from_polar(1.0, -p * p * t / (2.0 * mass * hbar));
    }
    grid.ifft(&mut buf);
    Wavefunction::from_amplitudes(grid.clone(), buf).expect("length preserved")
}

/// Relative residual of `∂_t W = -(p/m)∂_x W + ħ²λ ∂_p² W` for the exact
/// solution, with a central difference in time and spectral phase-space
/// derivatives.
///
/// Unit parameters use the closed-form `ρ(t)`; `D = 0` uses the free
/// evolution of the same initial packet.
pub fn fp_residual(
    t: f64,
    dt_probe: f64,
    params: &PhysicalParams,
    grid: &Arc<SpatialGrid>,
) -> Result<f64> {
    fp_residual_with(t, dt_probe, params, grid, params.momentum_diffusion() / 2.0)
}

/// [`fp_residual`] with an explicit coefficient in front of `∂_p² W`.
pub fn fp_residual_with(
    t: f64,
    dt_probe: f64,
    params: &PhysicalParams,
    grid: &Arc<SpatialGrid>,
    diffusion: f64,
) -> Result<f64> {
    if !(dt_probe > 0.0 && t > dt_probe) {
        return Err(Error::InvalidArgument(format!(
            "need t > dt_probe > 0, got t={t} dt_probe={dt_probe}"
        )));
    }
    let rho_at: Box<dyn Fn(f64) -> Result<DensityMatrix>> = if params.is_unit() {
        Box::new(|s| analytic_rho(grid, s))
    } else if params.diffusion_d == 0.0 {
        let s2 = sigma_inf2(&PhysicalParams::unit());
        let psi0 = gaussian_packet(grid, 0.0, 0.0, s2, -1.0)?;
        let mass = params.mass;
        Box::new(move |s| {
            let psi = free_evolve(&psi0, s, mass);
            psi.check_support()?;
            Ok(DensityMatrix::pure(&psi))
        })
    } else {
        return Err(Error::UnsupportedNormalization(
            "reference solution needs hbar=m=D=1 or D=0".into(),
        ));
    };
    let wp = wigner(&rho_at(t + dt_probe)?)?;
    let wm = wigner(&rho_at(t - dt_probe)?)?;
    let w = wigner(&rho_at(t)?)?;
    let n = w.x.len();
    let np = w.n_p();
    let dwdx = spectral_derivative(&w.values, n, np, false, w.dx(), 1, grid);
    let d2wdp2 = spectral_derivative(&w.values, n, np, true, w.dp(), 2, grid);
    let (mut num, mut den) = (0.0, 0.0);
    for i in 0..n {
        for l in 0..np {
            let k = i * np + l;
            let rhs = -w.p[l] / params.mass * dwdx[k] + diffusion * d2wdp2[k];
            let lhs = (wp.values[k] - wm.values[k]) / (2.0 * dt_probe);
            num += (lhs - rhs).powi(2);
            den += rhs * rhs;
        }
    }
    Ok((num / den).sqrt())
}
