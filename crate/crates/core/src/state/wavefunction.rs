use std::sync::Arc;

use num_complex::Complex64;

use super::grid::{SpatialGrid, LEAK_TOLERANCE};
use crate::error::{Error, Result};

/// Tolerance on `‖ψ‖² - 1` for a state to count as normalized.
pub const NORM_TOLERANCE: f64 = 1e-10;

/// Smallest squared norm that can still be renormalized.
pub const MIN_SQUARED_NORM: f64 = 1e-30;

/// Complex amplitudes on a [`SpatialGrid`], normalized or not.
#[derive(Debug, Clone)]
pub struct Wavefunction {
    grid: Arc<SpatialGrid>,
    amps: Vec<Complex64>,
    squared_norm: f64,
}

/// First and second moments of a state.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Moments {
    pub mean_x: f64,
    pub mean_p: f64,
    pub var_x: f64,
    pub var_p: f64,
}

/// Whether [`moments`] may silently renormalize its input.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum NormPolicy {
    #[default]
    RequireNormalized,
    Renormalize,
}

pub(crate) fn squared_norm_of(amps: &[Complex64], dx: f64) -> f64 {
    dx * amps.iter().map(|z| z.norm_sqr()).sum::<f64>()
}

impl Wavefunction {
    pub fn from_amplitudes(grid: Arc<SpatialGrid>, amps: Vec<Complex64>) -> Result<Self> {
        if amps.len() != grid.len() {
            return Err(Error::InvalidArgument(format!(
                "{} amplitudes for a {}-point grid",
                amps.len(),
                grid.len()
            )));
        }
        if amps.iter().any(|z| !(z.re.is_finite() && z.im.is_finite())) {
            return Err(Error::InvalidArgument("non-finite amplitude".into()));
        }
        let squared_norm = squared_norm_of(&amps, grid.dx());
        Ok(Self { grid, amps, squared_norm })
    }

    /// Builds from amplitudes known to be finite and of the right length.
    pub(crate) fn from_parts(grid: Arc<SpatialGrid>, amps: Vec<Complex64>) -> Self {
        debug_assert_eq!(amps.len(), grid.len());
        let squared_norm = squared_norm_of(&amps, grid.dx());
        Self { grid, amps, squared_norm }
    }

    pub fn zeros(grid: Arc<SpatialGrid>) -> Self {
        let amps = vec![Complex64::new(0.0, 0.0); grid.len()];
        Self { grid, amps, squared_norm: 0.0 }
    }

    pub fn grid(&self) -> &Arc<SpatialGrid> {
        &self.grid
    }

    pub fn amplitudes(&self) -> &[Complex64] {
        &self.amps
    }

    pub fn into_amplitudes(self) -> Vec<Complex64> {
        self.amps
    }

    pub fn squared_norm(&self) -> f64 {
        self.squared_norm
    }

    pub fn is_normalized(&self) -> bool {
        (self.squared_norm - 1.0).abs() <= NORM_TOLERANCE
    }

    /// Returns `c·ψ`.
    pub fn scaled(&self, c: Complex64) -> Self {
        let amps = self.amps.iter().map(|z| z * c).collect();
        Self::from_parts(self.grid.clone(), amps)
    }

    /// Amplitudes in momentum space (unnormalized DFT, FFT order).
    pub fn spectrum(&self) -> Vec<Complex64> {
        let mut buf = self.amps.clone();
        self.grid.fft(&mut buf);
        buf
    }

    /// Probability mass in the edge bands of either lattice, as a fraction
    /// of the total.
    pub fn edge_leakage(&self) -> (f64, f64) {
        leakage(&self.grid, &self.amps, &self.spectrum())
    }

    /// Fails with `DomainTooSmall` when the state reaches the edge bands of
    /// the position or momentum lattice.
    pub fn check_support(&self) -> Result<()> {
        let (lx, lp) = self.edge_leakage();
        check_leakage(lx, lp)
    }
}

pub(crate) fn leakage(grid: &SpatialGrid, amps: &[Complex64], spec: &[Complex64]) -> (f64, f64) {
    let tx: f64 = amps.iter().map(|z| z.norm_sqr()).sum();
    let tp: f64 = spec.iter().map(|z| z.norm_sqr()).sum();
    if tx == 0.0 {
        return (0.0, 0.0);
    }
    let lx = grid.edge_mass_position(|j| amps[j].norm_sqr()) / tx;
    let lp = grid.edge_mass_momentum(|k| spec[k].norm_sqr()) / tp;
    (lx, lp)
}

pub(crate) fn check_leakage(lx: f64, lp: f64) -> Result<()> {
    if lx > LEAK_TOLERANCE {
        return Err(Error::DomainTooSmall(format!(
            "position-space edge mass {lx:.3e} exceeds {LEAK_TOLERANCE:e}"
        )));
    }
    if lp > LEAK_TOLERANCE {
        return Err(Error::DomainTooSmall(format!(
            "momentum-space edge mass {lp:.3e} exceeds {LEAK_TOLERANCE:e}"
        )));
    }
    Ok(())
}

/// Closed-form complex Gaussian
/// `exp(-(1 + i·chirp)(x - center_x)²/(4·sigma2) + i·center_p·x/ħ)`, normalized
/// on the lattice.
///
/// `chirp > 0` focuses the packet, `chirp < 0` makes it spread.
pub fn gaussian_packet(
    grid: &Arc<SpatialGrid>,
    center_x: f64,
    center_p: f64,
    sigma2: f64,
    chirp: f64,
) -> Result<Wavefunction> {
    if !(sigma2.is_finite() && sigma2 > 0.0) {
        return Err(Error::InvalidArgument(format!("sigma2 must be positive, got {sigma2}")));
    }
    let sigma = sigma2.sqrt();
    if center_x - 6.0 * sigma < grid.x_min() || center_x + 6.0 * sigma > grid.x_max() {
        return Err(Error::DomainTooSmall(format!(
            "packet at {center_x} with width {sigma:.4} needs 6-sigma margins inside ({}, {})",
            grid.x_min(),
            grid.x_max()
        )));
    }
    let hbar = grid.hbar();
    let sigma_p = hbar * ((1.0 + chirp * chirp) / (4.0 * sigma2)).sqrt();
    if center_p.abs() + 6.0 * sigma_p > grid.p_max() {
        return Err(Error::DomainTooSmall(format!(
            "momentum support {center_p} ± 6·{sigma_p:.4} exceeds p_max {:.4}",
            grid.p_max()
        )));
    }
    let width = Complex64::new(1.0, chirp) / (4.0 * sigma2);
    let amps: Vec<Complex64> = grid
        .positions()
        .iter()
        .map(|&x| {
            let d = x - center_x;
            (-width * d * d + Complex64::new(0.0, center_p * x / hbar)).exp()
        })
        .collect();
    let psi = Wavefunction::from_parts(grid.clone(), amps);
    normalize(&psi)
}

/// `ψ/‖ψ‖`.
pub fn normalize(psi: &Wavefunction) -> Result<Wavefunction> {
    if !(psi.squared_norm > MIN_SQUARED_NORM) {
        return Err(Error::DegenerateState(format!(
            "cannot normalize a state of squared norm {:e}",
            psi.squared_norm
        )));
    }
    let s = 1.0 / psi.squared_norm.sqrt();
    let amps = psi.amps.iter().map(|z| z * s).collect();
    Ok(Wavefunction::from_parts(psi.grid.clone(), amps))
}

/// `dx·Σ conj(ψ_j)·φ_j`.
pub fn inner(psi: &Wavefunction, phi: &Wavefunction) -> Result<Complex64> {
    if !psi.grid.same_lattice(&phi.grid) {
        return Err(Error::InvalidArgument("inner product across different grids".into()));
    }
    let s: Complex64 = psi.amps.iter().zip(&phi.amps).map(|(a, b)| a.conj() * b).sum();
    Ok(s * psi.grid.dx())
}

/// Position moments from real-space quadrature of `|ψ|²` (weights need not
/// be normalized).
pub(crate) fn position_moments(grid: &SpatialGrid, amps: &[Complex64]) -> (f64, f64, f64) {
    let x = grid.positions();
    let c = grid.midpoint();
    let (mut s0, mut s1, mut s2) = (0.0, 0.0, 0.0);
    for (z, &xj) in amps.iter().zip(x) {
        let w = z.norm_sqr();
        let d = xj - c;
        s0 += w;
        s1 += w * d;
        s2 += w * d * d;
    }
    let m = s1 / s0;
    (s0, c + m, (s2 / s0 - m * m).max(0.0))
}

/// Momentum moments from an FFT-order spectrum.
pub(crate) fn momentum_moments(grid: &SpatialGrid, spec: &[Complex64]) -> (f64, f64) {
    let (mut s0, mut s1, mut s2) = (0.0, 0.0, 0.0);
    for (z, &p) in spec.iter().zip(grid.momenta()) {
        let w = z.norm_sqr();
        s0 += w;
        s1 += w * p;
        s2 += w * p * p;
    }
    let m = s1 / s0;
    (m, (s2 / s0 - m * m).max(0.0))
}

/// Means and variances of `x̂` and `p̂`, by quadrature on the position and
/// momentum lattices respectively.
pub fn moments(psi: &Wavefunction, policy: NormPolicy) -> Result<Moments> {
    if !(psi.squared_norm > MIN_SQUARED_NORM) {
        return Err(Error::DegenerateState("moments of a zero state".into()));
    }
    if policy == NormPolicy::RequireNormalized && !psi.is_normalized() {
        return Err(Error::InvalidArgument(format!(
            "moments requested on an unnormalized state (squared norm {})",
            psi.squared_norm
        )));
    }
    let (_, mean_x, var_x) = position_moments(&psi.grid, &psi.amps);
    let (mean_p, var_p) = momentum_moments(&psi.grid, &psi.spectrum());
    Ok(Moments { mean_x, mean_p, var_x, var_p })
}

/// Centre-of-mass transform: removes `⟨p̂⟩` with a position-space phase,
/// then `⟨x̂⟩` with a momentum-space phase, then fixes the global phase so
/// the amplitude at the grid midpoint is real and non-negative.
pub fn com_frame(psi: &Wavefunction) -> Result<Wavefunction> {
    let m = moments(psi, NormPolicy::RequireNormalized)?;
    let grid = &psi.grid;
    let mut buf = vec![Complex64::new(0.0, 0.0); grid.len()];
    let mut scratch = vec![Complex64::new(0.0, 0.0); grid.scratch_len()];
    com_frame_into(grid, &psi.amps, m.mean_x, m.mean_p, &mut buf, &mut scratch);
    let out = Wavefunction::from_parts(grid.clone(), buf);
    out.check_support()?;
    Ok(out)
}

/// Writes the centre-of-mass frame of `amps` (with the given means) into
/// `out`. `out` must have the grid's length.
pub(crate) fn com_frame_into(
    grid: &SpatialGrid,
    amps: &[Complex64],
    mean_x: f64,
    mean_p: f64,
    out: &mut [Complex64],
    scratch: &mut [Complex64],
) {
    let hbar = grid.hbar();
    let c = grid.midpoint();
    for ((o, z), &x) in out.iter_mut().zip(amps).zip(grid.positions()) {
        *o = z * Complex64::from_polar(1.0, -mean_p * (x - c) / hbar);
    }
    grid.fft_with_scratch(out, scratch);
    for (o, &p) in out.iter_mut().zip(grid.momenta()) {
        *o *= Complex64::from_polar(1.0, p * mean_x / hbar);
    }
    grid.ifft_unscaled_with_scratch(out, scratch);
    let mid = out[grid.len() / 2];
    let r = mid.norm();
    let phase = if r > 0.0 { mid.conj() / r } else { Complex64::new(1.0, 0.0) };
    let scale = phase / grid.len() as f64;
    out.iter_mut().for_each(|z| *z *= scale);
}
