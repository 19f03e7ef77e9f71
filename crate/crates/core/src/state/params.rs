use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Physical constants of the free particle and its environment.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PhysicalParams {
    pub hbar: f64,
    pub mass: f64,
    /// Momentum-diffusion coefficient `D` (momentum²/time).
    pub diffusion_d: f64,
}

impl Default for PhysicalParams {
    fn default() -> Self {
        Self::unit()
    }
}

impl PhysicalParams {
    pub fn new(hbar: f64, mass: f64, diffusion_d: f64) -> Result<Self> {
        let p = Self { hbar, mass, diffusion_d };
        p.validate()?;
        Ok(p)
    }

    /// `ħ = m = D = 1`.
    pub fn unit() -> Self {
        Self { hbar: 1.0, mass: 1.0, diffusion_d: 1.0 }
    }

    /// Like [`Self::new`] but allows `D = 0`, the closed-system limit used
    /// by reference checks.
    pub fn closed(hbar: f64, mass: f64) -> Result<Self> {
        let p = Self { hbar, mass, diffusion_d: 0.0 };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        let ok = |v: f64| v.is_finite() && v > 0.0;
        if !ok(self.hbar) || !ok(self.mass) {
            return Err(Error::InvalidArgument(format!(
                "hbar and mass must be positive, got hbar={} mass={}",
                self.hbar, self.mass
            )));
        }
        if !(self.diffusion_d.is_finite() && self.diffusion_d >= 0.0) {
            return Err(Error::InvalidArgument(format!(
                "diffusion_d must be non-negative, got {}",
                self.diffusion_d
            )));
        }
        Ok(())
    }

    pub fn is_unit(&self) -> bool {
        *self == Self::unit()
    }

    /// Coefficient `λ` of the decoherence term `-λ[x̂,[x̂,ρ]]`, in
    /// 1/(length²·time).
    ///
    /// `λ = D/(2ħ²)`: this is the normalization under which the closed-form
    /// solution in [`crate::analytic`] and the stationary width
    /// `σ∞² = √(ħ³/(2Dm))` hold. Every equation of motion in the crate is
    /// written in terms of this one number.
    pub fn decoherence(&self) -> f64 {
        self.diffusion_d / (2.0 * self.hbar * self.hbar)
    }

    /// Momentum diffusion rate `d⟨p̂²⟩/dt = 2ħ²λ`.
    pub fn momentum_diffusion(&self) -> f64 {
        2.0 * self.hbar * self.hbar * self.decoherence()
    }
}
