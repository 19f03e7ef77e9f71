use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use crate::error::{Error, Result};

/// Smallest supported lattice.
pub const MIN_POINTS: usize = 8;

/// Probability mass tolerated in the outer edge bands of either lattice
/// before a state counts as leaking off the grid.
pub const LEAK_TOLERANCE: f64 = 1e-6;

/// Uniform periodic coordinate lattice together with its spectral dual.
///
/// Position `x_j = x_min + j·dx` for `j in 0..n`; momentum `p_k = 2πħk/(n·dx)`
/// with `k` in FFT order over the symmetric alias range `-n/2..n/2`.
pub struct SpatialGrid {
    n: usize,
    x_min: f64,
    x_max: f64,
    dx: f64,
    hbar: f64,
    x: Vec<f64>,
    p: Vec<f64>,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
}

impl SpatialGrid {
    pub fn new(n_points: usize, x_min: f64, x_max: f64, hbar: f64) -> Result<Arc<Self>> {
        if n_points < MIN_POINTS || !n_points.is_power_of_two() {
            return Err(Error::InvalidArgument(format!(
                "n_points must be a power of two >= {MIN_POINTS}, got {n_points}"
            )));
        }
        if !(x_min.is_finite() && x_max.is_finite()) || x_max <= x_min {
            return Err(Error::InvalidArgument(format!(
                "degenerate extent ({x_min}, {x_max})"
            )));
        }
        if !(hbar.is_finite() && hbar > 0.0) {
            return Err(Error::InvalidArgument(format!("hbar must be positive, got {hbar}")));
        }
        let dx = (x_max - x_min) / n_points as f64;
        let x = (0..n_points).map(|j| x_min + j as f64 * dx).collect();
        let dp = 2.0 * PI * hbar / (n_points as f64 * dx);
        let half = (n_points / 2) as i64;
        let p = (0..n_points as i64)
            .map(|k| {
                let k = if k >= half { k - n_points as i64 } else { k };
                k as f64 * dp
            })
            .collect();
        let mut planner = FftPlanner::new();
        let forward = planner.plan_fft_forward(n_points);
        let inverse = planner.plan_fft_inverse(n_points);
        Ok(Arc::new(Self { n: n_points, x_min, x_max, dx, hbar, x, p, forward, inverse }))
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn x_min(&self) -> f64 {
        self.x_min
    }

    pub fn x_max(&self) -> f64 {
        self.x_max
    }

    pub fn dx(&self) -> f64 {
        self.dx
    }

    pub fn hbar(&self) -> f64 {
        self.hbar
    }

    pub fn extent(&self) -> f64 {
        self.x_max - self.x_min
    }

    /// Midpoint of the lattice, `x_{n/2}`.
    pub fn midpoint(&self) -> f64 {
        self.x[self.n / 2]
    }

    /// Momentum lattice spacing `2πħ/(n·dx)`.
    pub fn dp(&self) -> f64 {
        2.0 * PI * self.hbar / (self.n as f64 * self.dx)
    }

    /// Largest representable momentum magnitude, `πħ/dx`.
    pub fn p_max(&self) -> f64 {
        PI * self.hbar / self.dx
    }

    pub fn positions(&self) -> &[f64] {
        &self.x
    }

    /// Momentum lattice in FFT order.
    pub fn momenta(&self) -> &[f64] {
        &self.p
    }

    /// Width (in cells) of the edge band used for leakage checks.
    pub fn edge_band(&self) -> usize {
        (self.n / 128).max(1)
    }

    /// Unnormalized forward DFT in place.
    pub fn fft(&self, buf: &mut [Complex64]) {
        self.forward.process(buf);
    }

    /// Inverse DFT in place, including the `1/n` factor.
    pub fn ifft(&self, buf: &mut [Complex64]) {
        self.inverse.process(buf);
        let scale = 1.0 / self.n as f64;
        buf.iter_mut().for_each(|z| *z *= scale);
    }

    pub(crate) fn fft_with_scratch(&self, buf: &mut [Complex64], scratch: &mut [Complex64]) {
        self.forward.process_with_scratch(buf, scratch);
    }

    pub(crate) fn ifft_unscaled_with_scratch(
        &self,
        buf: &mut [Complex64],
        scratch: &mut [Complex64],
    ) {
        self.inverse.process_with_scratch(buf, scratch);
    }

    pub(crate) fn scratch_len(&self) -> usize {
        self.forward
            .get_inplace_scratch_len()
            .max(self.inverse.get_inplace_scratch_len())
    }

    /// Probability mass of `weights` (summing to `total`) found in the edge
    /// bands at either end of a lattice stored in natural order.
    pub(crate) fn edge_mass_position(&self, weights: impl Fn(usize) -> f64) -> f64 {
        let band = self.edge_band();
        (0..band).chain(self.n - band..self.n).map(weights).sum()
    }

    /// Same as [`Self::edge_mass_position`] for a spectrum in FFT order,
    /// where the edges of the momentum lattice sit around index `n/2`.
    pub(crate) fn edge_mass_momentum(&self, weights: impl Fn(usize) -> f64) -> f64 {
        let band = self.edge_band();
        let mid = self.n / 2;
        (mid - band..mid + band).map(weights).sum()
    }

    /// Same parameters; plans are not compared.
    pub fn same_lattice(&self, other: &SpatialGrid) -> bool {
        self.n == other.n
            && self.x_min == other.x_min
            && self.x_max == other.x_max
            && self.hbar == other.hbar
    }
}

impl fmt::Debug for SpatialGrid {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("SpatialGrid")
            .field("n", &self.n)
            .field("x_min", &self.x_min)
            .field("x_max", &self.x_max)
            .field("hbar", &self.hbar)
            .finish()
    }
}

impl PartialEq for SpatialGrid {
    fn eq(&self, other: &Self) -> bool {
        self.same_lattice(other)
    }
}

/// Builds a grid with `ħ = 1`.
pub fn make_grid(n_points: usize, x_min: f64, x_max: f64) -> Result<Arc<SpatialGrid>> {
    SpatialGrid::new(n_points, x_min, x_max, 1.0)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn eight_point_grid() {
        let g = make_grid(8, -4.0, 4.0).unwrap();
        assert_eq!(g.dx(), 1.0);
        assert!((g.dp() - 2.0 * PI / 8.0).abs() < 1e-15);
        assert_eq!(g.positions()[0], -4.0);
        assert_eq!(g.positions()[7], 3.0);
        assert_eq!(g.momenta()[4], -4.0 * g.dp());
        assert_eq!(g.momenta()[3], 3.0 * g.dp());
    }

    #[test]
    fn default_grid_momentum_range() {
        let g = make_grid(1024, -32.0, 32.0).unwrap();
        assert_eq!(g.dx(), 0.0625);
        assert!((g.p_max() - 50.265_482_457_436_69).abs() < 1e-10);
        let pmax = g.momenta().iter().fold(0.0f64, |m, p| m.max(p.abs()));
        assert!((pmax - g.p_max()).abs() < 1e-12);
    }

    #[test]
    fn rejects_bad_sizes() {
        assert!(matches!(make_grid(6, -1.0, 1.0), Err(Error::InvalidArgument(_))));
        assert!(matches!(make_grid(4, -1.0, 1.0), Err(Error::InvalidArgument(_))));
        assert!(matches!(make_grid(16, 1.0, 1.0), Err(Error::InvalidArgument(_))));
        assert!(matches!(make_grid(16, 2.0, -1.0), Err(Error::InvalidArgument(_))));
    }

    #[test]
    fn fft_round_trip() {
        let g = make_grid(64, -8.0, 8.0).unwrap();
        let orig: Vec<Complex64> =
            (0..64).map(|j| Complex64::new((j as f64).sin(), (j as f64 * 0.3).cos())).collect();
        let mut buf = orig.clone();
        g.fft(&mut buf);
        g.ifft(&mut buf);
        for (a, b) in orig.iter().zip(&buf) {
            assert!((a - b).norm() < 1e-13);
        }
    }
}
