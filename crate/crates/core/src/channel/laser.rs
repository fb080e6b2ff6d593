use std::f64::consts::{PI, TAU};

use crate::error::{Error, Result};

/// Receive power at which the simulated signal has unit amplitude scale.
pub const REFERENCE_SIGNAL_POWER_DBM: f64 = -27.0;

/// Source laser and lumped receiver noise.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LaserConfig {
    /// Lorentzian linewidth `Δν`.
    pub linewidth_hz: f64,
    pub wavelength_m: f64,
    /// Standard deviation of the complex receiver noise per sample and per
    /// polarization, `E|η|² = σ²`, relative to unit signal amplitude. Lumps
    /// RIN, shot and thermal noise.
    pub noise_sigma: f64,
    /// Signal power at the coherent mixer input.
    pub signal_power_dbm: f64,
}

impl Default for LaserConfig {
    fn default() -> Self {
        Self {
            linewidth_hz: 600.0,
            wavelength_m: 1549.1e-9,
            noise_sigma: 0.0,
            signal_power_dbm: REFERENCE_SIGNAL_POWER_DBM,
        }
    }
}

impl LaserConfig {
    /// Zero linewidth and zero receiver noise.
    pub fn noiseless() -> Self {
        Self {
            linewidth_hz: 0.0,
            noise_sigma: 0.0,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.linewidth_hz >= 0.0 && self.linewidth_hz.is_finite()) {
            return Err(Error::invalid("laser linewidth must be >= 0"));
        }
        if !(self.noise_sigma >= 0.0 && self.noise_sigma.is_finite()) {
            return Err(Error::invalid("receiver noise sigma must be >= 0"));
        }
        if !(self.wavelength_m > 0.0 && self.wavelength_m.is_finite()) {
            return Err(Error::invalid("wavelength must be positive"));
        }
        if !self.signal_power_dbm.is_finite() {
            return Err(Error::invalid("signal power must be finite"));
        }
        Ok(())
    }

    /// Received field scale, `√P_S` relative to the reference power.
    pub fn amplitude_scale(&self) -> f64 {
        10f64.powf((self.signal_power_dbm - REFERENCE_SIGNAL_POWER_DBM) / 20.0)
    }

    /// Variance of one Wiener phase increment at sample rate `f_s`.
    pub fn phase_step_variance(&self, f_s: f64) -> f64 {
        TAU * self.linewidth_hz / f_s
    }

    /// `l_c = c_f / (π·Δν)`.
    pub fn coherence_length_m(&self, fiber_speed_m_per_s: f64) -> f64 {
        fiber_speed_m_per_s / (PI * self.linewidth_hz)
    }

    pub fn coherence_time_s(&self) -> f64 {
        1.0 / (PI * self.linewidth_hz)
    }
}
