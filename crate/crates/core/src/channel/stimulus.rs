//! Piezo stimuli and their conversion to one-way optical phase.

use std::f64::consts::TAU;

use crate::error::{Error, Result};

/// Fiber elongation per volt for 1.5 m of fiber wound on the actuator.
pub const PIEZO_EXTENSION_NM_PER_VOLT: f64 = 25.0;
/// Fiber elongation producing one radian of phase.
pub const EXTENSION_NM_PER_RADIAN: f64 = 75.0;

/// One-way phase shift produced by an instantaneous drive voltage.
pub fn voltage_to_phase(volts: f64) -> f64 {
    volts * PIEZO_EXTENSION_NM_PER_VOLT / EXTENSION_NM_PER_RADIAN
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum StimulusKind {
    None,
    Sine { frequency_hz: f64 },
    /// Linear sweep from `f_start_hz` to `f_end_hz` over the waveform duration.
    Chirp { f_start_hz: f64, f_end_hz: f64 },
}

/// A drive voltage applied to one actuator. The waveform is active on
/// `[start_s, start_s + duration_s)` and zero elsewhere.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StimulusWaveform {
    pub kind: StimulusKind,
    pub amplitude_vpp: f64,
    pub start_s: f64,
    pub duration_s: f64,
}

impl StimulusWaveform {
    pub fn sine(amplitude_vpp: f64, frequency_hz: f64, duration_s: f64) -> Self {
        Self {
            kind: StimulusKind::Sine { frequency_hz },
            amplitude_vpp,
            start_s: 0.0,
            duration_s,
        }
    }

    pub fn chirp(amplitude_vpp: f64, f_start_hz: f64, f_end_hz: f64, duration_s: f64) -> Self {
        Self {
            kind: StimulusKind::Chirp {
                f_start_hz,
                f_end_hz,
            },
            amplitude_vpp,
            start_s: 0.0,
            duration_s,
        }
    }

    pub fn none() -> Self {
        Self {
            kind: StimulusKind::None,
            amplitude_vpp: 0.0,
            start_s: 0.0,
            duration_s: 0.0,
        }
    }

    /// Checks amplitude and frequencies. `f_max_hz` bounds the frequencies when
    /// given (the analysis bandwidth the stimulus is meant for).
    pub fn validate(&self, f_max_hz: Option<f64>) -> Result<()> {
        if !(self.amplitude_vpp >= 0.0 && self.amplitude_vpp.is_finite()) {
            return Err(Error::invalid(format!(
                "stimulus amplitude must be >= 0, got {} Vpp",
                self.amplitude_vpp
            )));
        }
        if !(self.duration_s >= 0.0 && self.start_s.is_finite() && self.duration_s.is_finite()) {
            return Err(Error::invalid("stimulus start/duration must be finite, duration >= 0"));
        }
        let freqs: &[f64] = match &self.kind {
            StimulusKind::None => &[],
            StimulusKind::Sine { frequency_hz } => std::slice::from_ref(frequency_hz),
            StimulusKind::Chirp {
                f_start_hz,
                f_end_hz,
            } => &[*f_start_hz, *f_end_hz],
        };
        for &f in freqs {
            let upper = f_max_hz.unwrap_or(f64::INFINITY);
            if !(f > 0.0 && f < upper) {
                return Err(Error::invalid(format!(
                    "stimulus frequency {f} Hz outside (0, {upper}) Hz"
                )));
            }
        }
        Ok(())
    }

    /// Instantaneous drive voltage.
    #[inline]
    pub fn voltage(&self, t: f64) -> f64 {
        let tau = t - self.start_s;
        if !(0.0..self.duration_s).contains(&tau) {
            return 0.0;
        }
        let amp = 0.5 * self.amplitude_vpp;
        match self.kind {
            StimulusKind::None => 0.0,
            StimulusKind::Sine { frequency_hz } => amp * (TAU * frequency_hz * tau).sin(),
            StimulusKind::Chirp {
                f_start_hz,
                f_end_hz,
            } => {
                let rate = (f_end_hz - f_start_hz) / self.duration_s;
                amp * (TAU * (f_start_hz * tau + 0.5 * rate * tau * tau)).sin()
            }
        }
    }
}

/// One-way phase in radians applied by `waveform` at time `t`.
#[inline]
pub fn stimulus_phase(waveform: &StimulusWaveform, t: f64) -> f64 {
    voltage_to_phase(waveform.voltage(t))
}

/// A waveform bound to the fiber segment that ends at FBG `segment`
/// (0-based).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StimulusBinding {
    pub segment: usize,
    pub waveform: StimulusWaveform,
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn calibration() {
        assert!((voltage_to_phase(3.0) - 1.0).abs() < 1e-15);
        assert_eq!(voltage_to_phase(0.0), 0.0);
    }

    #[test]
    fn sine_peak_to_peak() {
        let w = StimulusWaveform::sine(10.0, 500.0, 1.0);
        // quarter and three-quarter periods hit the extremes exactly
        let hi = stimulus_phase(&w, 0.25 / 500.0);
        let lo = stimulus_phase(&w, 0.75 / 500.0);
        assert!((hi - lo - 10.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn outside_window_is_zero() {
        let w = StimulusWaveform::sine(10.0, 500.0, 0.01);
        assert_eq!(stimulus_phase(&w, -1e-3), 0.0);
        assert_eq!(stimulus_phase(&w, 0.02), 0.0);
        assert_eq!(stimulus_phase(&StimulusWaveform::none(), 0.3), 0.0);
    }

    #[test]
    fn chirp_instantaneous_frequency() {
        let w = StimulusWaveform::chirp(2.0, 20.0, 18_000.0, 1.0);
        // near t = 0.5 s the sweep is at ~9010 Hz; count zero crossings over 10 ms
        let fs = 1e6;
        let mut crossings = 0;
        let mut prev = w.voltage(0.495);
        for i in 1..10_000 {
            let v = w.voltage(0.495 + i as f64 / fs);
            if prev.signum() != v.signum() {
                crossings += 1;
            }
            prev = v;
        }
        let f_est = crossings as f64 / 2.0 / 0.01;
        assert!((f_est - 9010.0).abs() < 200.0, "{f_est}");
    }

    #[test]
    fn validation() {
        assert!(StimulusWaveform::sine(1.0, 500.0, 1.0).validate(Some(1e3)).is_ok());
        assert!(StimulusWaveform::sine(-1.0, 500.0, 1.0).validate(None).is_err());
        assert!(StimulusWaveform::sine(1.0, 2e3, 1.0).validate(Some(1e3)).is_err());
        assert!(StimulusWaveform::chirp(1.0, 0.0, 10.0, 1.0).validate(None).is_err());
    }
}
