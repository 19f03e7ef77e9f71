//! Position-representation density matrices `⟨x_i|ρ|x_j⟩`.

use std::sync::Arc;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::state::{SpatialGrid, Wavefunction};

/// Largest tolerated `max|ρ - ρ†|`.
pub const HERMITIAN_TOLERANCE: f64 = 1e-10;
/// Largest tolerated `|Tr ρ - 1|` for inputs that must be normalized.
pub const TRACE_TOLERANCE: f64 = 1e-6;

/// Dense `N×N` kernel, row-major, on a shared grid.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityMatrix {
    grid: Arc<SpatialGrid>,
    kernel: Vec<Complex64>,
}

impl DensityMatrix {
    pub fn from_kernel(grid: Arc<SpatialGrid>, kernel: Vec<Complex64>) -> Result<Self> {
        let n = grid.len();
        if kernel.len() != n * n {
            return Err(Error::InvalidArgument(format!(
                "kernel has {} entries, grid needs {}",
                kernel.len(),
                n * n
            )));
        }
        Ok(Self { grid, kernel })
    }

    /// `|ψ⟩⟨ψ|`.
    pub fn pure(psi: &Wavefunction) -> Self {
        let a = psi.amplitudes();
        let n = a.len();
        let mut kernel = Vec::with_capacity(n * n);
        for zi in a {
            kernel.extend(a.iter().map(|zj| zi * zj.conj()));
        }
        Self { grid: psi.grid().clone(), kernel }
    }

    pub fn grid(&self) -> &Arc<SpatialGrid> {
        &self.grid
    }

    pub fn len(&self) -> usize {
        self.grid.len()
    }

    pub fn is_empty(&self) -> bool {
        self.kernel.is_empty()
    }

    pub fn kernel(&self) -> &[Complex64] {
        &self.kernel
    }

    pub fn get(&self, i: usize, j: usize) -> Complex64 {
        self.kernel[i * self.len() + j]
    }

    pub fn row(&self, i: usize) -> &[Complex64] {
        let n = self.len();
        &self.kernel[i * n..(i + 1) * n]
    }

    pub fn diagonal(&self) -> Vec<Complex64> {
        (0..self.len()).map(|i| self.get(i, i)).collect()
    }

    /// `dx·Σ ρ_ii`.
    pub fn trace(&self) -> f64 {
        self.grid.dx() * (0..self.len()).map(|i| self.get(i, i).re).sum::<f64>()
    }

    /// `Tr ρ² = dx²·Σ|ρ_ij|²` (assumes Hermiticity).
    pub fn purity(&self) -> f64 {
        let dx = self.grid.dx();
        dx * dx * self.kernel.iter().map(|z| z.norm_sqr()).sum::<f64>()
    }

    /// `max |ρ_ij - conj(ρ_ji)|`.
    pub fn hermiticity_error(&self) -> f64 {
        let n = self.len();
        let mut worst = 0.0f64;
        for i in 0..n {
            for j in i..n {
                worst = worst.max((self.get(i, j) - self.get(j, i).conj()).norm());
            }
        }
        worst
    }

    pub fn check_hermitian(&self) -> Result<()> {
        let e = self.hermiticity_error();
        if e > HERMITIAN_TOLERANCE {
            return Err(Error::NonHermitian(e));
        }
        Ok(())
    }

    pub fn check_normalized(&self) -> Result<()> {
        let tr = self.trace();
        if !((tr - 1.0).abs() <= TRACE_TOLERANCE) {
            return Err(Error::NotNormalized(tr));
        }
        Ok(())
    }

    /// Momentum-representation diagonal `⟨p_k|ρ|p_k⟩` as probabilities in
    /// FFT order, from a two-dimensional transform of the kernel.
    pub fn momentum_distribution(&self) -> Vec<f64> {
        let n = self.len();
        let mut work = self.kernel.clone();
        // rows: Σ_j ρ_ij e^{+ik·j}, via conjugated forward transforms
        let mut scratch = vec![Complex64::new(0.0, 0.0); self.grid.scratch_len()];
        for row in work.chunks_mut(n) {
            row.iter_mut().for_each(|z| *z = z.conj());
            self.grid.fft_with_scratch(row, &mut scratch);
            row.iter_mut().for_each(|z| *z = z.conj());
        }
        let mut col = vec![Complex64::new(0.0, 0.0); n];
        let mut out = vec![0.0; n];
        for k in 0..n {
            for i in 0..n {
                col[i] = work[i * n + k];
            }
            self.grid.fft_with_scratch(&mut col, &mut scratch);
            out[k] = col[k].re;
        }
        let total: f64 = out.iter().sum();
        out.iter_mut().for_each(|w| *w /= total);
        out
    }

    /// `Tr(x̂²ρ)/Tr ρ` about the coordinate origin.
    pub fn second_moment_x(&self) -> f64 {
        let x = self.grid.positions();
        let (mut s0, mut s2) = (0.0, 0.0);
        for (i, &xi) in x.iter().enumerate() {
            let w = self.get(i, i).re;
            s0 += w;
            s2 += w * xi * xi;
        }
        s2 / s0
    }

    /// `Tr(p̂²ρ)/Tr ρ`.
    pub fn second_moment_p(&self) -> f64 {
        self.momentum_distribution()
            .iter()
            .zip(self.grid.momenta())
            .map(|(w, p)| w * p * p)
            .sum()
    }

    pub fn mean_x(&self) -> f64 {
        let x = self.grid.positions();
        let (mut s0, mut s1) = (0.0, 0.0);
        for (i, &xi) in x.iter().enumerate() {
            let w = self.get(i, i).re;
            s0 += w;
            s1 += w * xi;
        }
        s1 / s0
    }

    pub fn mean_p(&self) -> f64 {
        self.momentum_distribution().iter().zip(self.grid.momenta()).map(|(w, p)| w * p).sum()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::state::{gaussian_packet, make_grid, moments, NormPolicy};

    #[test]
    fn pure_state_invariants() {
        let g = make_grid(256, -16.0, 16.0).unwrap();
        let psi = gaussian_packet(&g, 1.0, -0.5, 0.8, 0.7).unwrap();
        let rho = DensityMatrix::pure(&psi);
        assert!((rho.trace() - 1.0).abs() < 1e-12);
        assert!((rho.purity() - 1.0).abs() < 1e-12);
        assert!(rho.hermiticity_error() < 1e-15);
        let m = moments(&psi, NormPolicy::RequireNormalized).unwrap();
        assert!((rho.mean_p() - m.mean_p).abs() < 1e-10);
        assert!((rho.second_moment_p() - (m.var_p + m.mean_p * m.mean_p)).abs() < 1e-10);
        assert!((rho.second_moment_x() - (m.var_x + m.mean_x * m.mean_x)).abs() < 1e-10);
    }

    #[test]
    fn wrong_shape_is_rejected() {
        let g = make_grid(8, -4.0, 4.0).unwrap();
        assert!(DensityMatrix::from_kernel(g, vec![Complex64::new(0.0, 0.0); 63]).is_err());
    }
}
