//! In-place split-step machinery shared by both unravellings.

use std::sync::Arc;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::state::{check_leakage, PhysicalParams, SpatialGrid, Wavefunction, MIN_SQUARED_NORM};

#[derive(Debug, Clone, Copy)]
pub(crate) struct PositionStats {
    /// `dx·Σ|ψ|²`.
    pub squared_norm: f64,
    pub mean_x: f64,
    pub var_x: f64,
    /// Fraction of the mass in the edge bands.
    pub edge: f64,
}

#[derive(Debug, Clone, Copy)]
pub(crate) struct MomentumStats {
    pub mean_p: f64,
    pub edge: f64,
}

/// Working buffer plus precomputed phase and decay tables for one grid,
/// parameter set and time step.
pub(crate) struct Propagator {
    grid: Arc<SpatialGrid>,
    dt: f64,
    lambda: f64,
    /// `exp(-i p² dt/(4mħ))/n`: half a kinetic step with the inverse DFT
    /// normalization folded in.
    half_kick: Vec<Complex64>,
    /// `x - x_mid`.
    centred: Vec<f64>,
    /// `exp(-λ dt (x - x_mid)²)`.
    gauss: Vec<f64>,
    psi: Vec<Complex64>,
    scratch: Vec<Complex64>,
}

impl Propagator {
    pub fn new(grid: &Arc<SpatialGrid>, params: &PhysicalParams, dt: f64) -> Self {
        let n = grid.len();
        let hbar = grid.hbar();
        let inv_n = 1.0 / n as f64;
        let half_kick = grid
            .momenta()
            .iter()
            .map(|&p| Complex64::from_polar(inv_n, -p * p * dt / (4.0 * params.mass * hbar)))
            .collect();
        let c = grid.midpoint();
        let centred: Vec<f64> = grid.positions().iter().map(|&x| x - c).collect();
        let lambda = params.decoherence();
        let gauss = centred.iter().map(|&d| (-lambda * dt * d * d).exp()).collect();
        Self {
            grid: grid.clone(),
            dt,
            lambda,
            half_kick,
            centred,
            gauss,
            psi: vec![Complex64::new(0.0, 0.0); n],
            scratch: vec![Complex64::new(0.0, 0.0); grid.scratch_len()],
        }
    }

    pub fn load(&mut self, amps: &[Complex64]) {
        self.psi.copy_from_slice(amps);
    }

    #[cfg(test)]
    pub fn amplitudes(&self) -> &[Complex64] {
        &self.psi
    }

    pub fn to_wavefunction(&self) -> Wavefunction {
        Wavefunction::from_parts(self.grid.clone(), self.psi.clone())
    }

    pub fn scale(&mut self, s: f64) {
        self.psi.iter_mut().for_each(|z| *z *= s);
    }

    /// Half a kinetic step, done spectrally. Returns the momentum statistics
    /// of the state (which the kinetic phase leaves unchanged).
    pub fn half_kinetic(&mut self) -> MomentumStats {
        self.grid.fft_with_scratch(&mut self.psi, &mut self.scratch);
        let (mut s0, mut s1) = (0.0, 0.0);
        for ((z, k), &p) in self.psi.iter_mut().zip(&self.half_kick).zip(self.grid.momenta()) {
            let w = z.norm_sqr();
            s0 += w;
            s1 += w * p;
            *z *= k;
        }
        let n = self.grid.len();
        let band = self.grid.edge_band();
        // the kinetic phase has modulus 1/n
        let edge_raw: f64 =
            self.psi[n / 2 - band..n / 2 + band].iter().map(|z| z.norm_sqr()).sum();
        let edge = edge_raw * (n * n) as f64 / s0;
        self.grid.ifft_unscaled_with_scratch(&mut self.psi, &mut self.scratch);
        let mean_p = s1 / s0;
        MomentumStats { mean_p, edge }
    }

    /// Momentum statistics without evolving the state.
    pub fn momentum_stats(&mut self) -> MomentumStats {
        let mut spec = self.psi.clone();
        self.grid.fft_with_scratch(&mut spec, &mut self.scratch);
        let (mean_p, _) = crate::state::momentum_moments(&self.grid, &spec);
        let total: f64 = spec.iter().map(|z| z.norm_sqr()).sum();
        let edge = self.grid.edge_mass_momentum(|k| spec[k].norm_sqr()) / total;
        MomentumStats { mean_p, edge }
    }

    pub fn position_stats(&self) -> PositionStats {
        let (mut s0, mut s1, mut s2) = (0.0, 0.0, 0.0);
        for (z, &d) in self.psi.iter().zip(&self.centred) {
            let w = z.norm_sqr();
            s0 += w;
            s1 += w * d;
            s2 += w * d * d;
        }
        let n = self.psi.len();
        let band = self.grid.edge_band();
        let edge: f64 = self.psi[..band]
            .iter()
            .chain(&self.psi[n - band..])
            .map(|z| z.norm_sqr())
            .sum();
        let m = s1 / s0;
        PositionStats {
            squared_norm: s0 * self.grid.dx(),
            mean_x: self.grid.midpoint() + m,
            var_x: (s2 / s0 - m * m).max(0.0),
            edge: if s0 > 0.0 { edge / s0 } else { 0.0 },
        }
    }

    /// Multiplies by `exp(-λ dt (x - mean_x)²)`.
    pub fn apply_decay(&mut self, mean_x: f64) {
        let a = mean_x - self.grid.midpoint();
        if self.lambda == 0.0 {
            return;
        }
        // (d - a)² = d² - 2ad + a²; the cross term is a geometric sequence
        // in the lattice index, advanced outwards from the midpoint.
        let ld = self.lambda * self.dt;
        let common = (-ld * a * a).exp();
        let ratio = (2.0 * ld * a * self.grid.dx()).exp();
        let n = self.psi.len();
        let mid = n / 2;
        let mut w = common;
        for j in mid..n {
            self.psi[j] *= self.gauss[j] * w;
            w *= ratio;
        }
        let inv = 1.0 / ratio;
        let mut w = common * inv;
        for j in (0..mid).rev() {
            self.psi[j] *= self.gauss[j] * w;
            w *= inv;
        }
    }

    /// Exact Itô solution of the non-kinetic part of the diffusive equation
    /// with `⟨x⟩` frozen over the step:
    /// `ψ ← exp(-2λ(x-⟨x⟩)²dt + √(2λ)(x-⟨x⟩)dW)ψ`. The linear factor
    /// `1 - λe²dt + √(2λ)e·dW` agrees to first order but amplifies
    /// roundoff tails once `λe²dt` approaches 1.
    pub fn apply_diffusive_kick(&mut self, mean_x: f64, dw: f64) {
        let a = mean_x - self.grid.midpoint();
        let ld = 2.0 * self.lambda * self.dt;
        let amp = (2.0 * self.lambda).sqrt() * dw;
        for (z, &d) in self.psi.iter_mut().zip(&self.centred) {
            let e = d - a;
            *z *= (amp * e - ld * e * e).exp();
        }
    }

    /// `ψ ← (x - mean_x)ψ`.
    pub fn apply_jump(&mut self, mean_x: f64) {
        let a = mean_x - self.grid.midpoint();
        for (z, &d) in self.psi.iter_mut().zip(&self.centred) {
            *z *= d - a;
        }
    }

    /// One Strang step of the deterministic (norm-decaying) flow. Returns the
    /// statistics of the state at the end of the step.
    pub fn deterministic_step(&mut self) -> (PositionStats, MomentumStats) {
        self.half_kinetic();
        let mid = self.position_stats();
        self.apply_decay(mid.mean_x);
        let ms = self.half_kinetic();
        (self.position_stats(), ms)
    }

    /// One split step of the diffusive equation, before
    /// renormalization.
    pub fn diffusive_step(&mut self, dw: f64) -> (PositionStats, MomentumStats) {
        self.half_kinetic();
        let mid = self.position_stats();
        self.apply_diffusive_kick(mid.mean_x, dw);
        let ms = self.half_kinetic();
        (self.position_stats(), ms)
    }
}

pub(crate) fn check_step(ps: &PositionStats, ms: &MomentumStats) -> Result<()> {
    if !(ps.squared_norm > MIN_SQUARED_NORM) || !ps.squared_norm.is_finite() {
        return Err(Error::DegenerateState(format!(
            "squared norm {:e} after step",
            ps.squared_norm
        )));
    }
    check_leakage(ps.edge, ms.edge)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::state::{gaussian_packet, make_grid};

    #[test]
    fn decay_factor_matches_direct_exponential() {
        let g = make_grid(1024, -32.0, 32.0).unwrap();
        let params = PhysicalParams::unit();
        let psi = gaussian_packet(&g, 3.3, 0.0, 2.0, 0.0).unwrap();
        let mut prop = Propagator::new(&g, &params, 1e-3);
        prop.load(psi.amplitudes());
        let a = 3.3 + 0.01;
        prop.apply_decay(a);
        let lambda = params.decoherence();
        for ((z, z0), &x) in prop.amplitudes().iter().zip(psi.amplitudes()).zip(g.positions()) {
            let want = z0 * (-lambda * 1e-3 * (x - a) * (x - a)).exp();
            assert!((z - want).norm() <= 1e-13 * z0.norm().max(1e-300) + 1e-300);
        }
    }

    #[test]
    fn half_kinetic_pair_is_free_evolution() {
        // two half steps of a free packet equal the closed-form spreading
        let g = make_grid(1024, -32.0, 32.0).unwrap();
        let params = PhysicalParams::closed(1.0, 1.0).unwrap();
        let s2 = 0.5;
        let psi = gaussian_packet(&g, 0.0, 0.0, s2, 0.0).unwrap();
        let dt = 1e-2;
        let mut prop = Propagator::new(&g, &params, dt);
        prop.load(psi.amplitudes());
        for _ in 0..100 {
            prop.deterministic_step();
        }
        let ps = prop.position_stats();
        let t: f64 = 1.0;
        let want = s2 + (t / (2.0 * s2.sqrt())).powi(2);
        assert!((ps.var_x - want).abs() < 1e-10, "{} vs {want}", ps.var_x);
        assert!((ps.squared_norm - 1.0).abs() < 1e-12);
    }
}
