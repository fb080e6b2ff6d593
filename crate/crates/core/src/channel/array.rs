//! FBG sensor-array geometry and its dual-pass impulse response.

use std::f64::consts::TAU;

use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::jones::JonesMatrix;
use super::laser::LaserConfig;
use super::stimulus::{stimulus_phase, StimulusBinding};
use crate::error::{Error, Result};

pub const SPEED_OF_LIGHT_M_PER_S: f64 = 299_792_458.0;

/// Group index for which light travels at exactly 2·10⁸ m/s, so 10 m of
/// FBG spacing is a 100 ns round trip.
pub const DEFAULT_GROUP_INDEX: f64 = SPEED_OF_LIGHT_M_PER_S / 2.0e8;

/// Tap delays must be a multiple of this many symbols per FBG spacing so that
/// PDM-QPSK estimates are exact.
pub const SYMBOLS_PER_SEGMENT_MULTIPLE: usize = 4;

#[derive(Debug, Clone, PartialEq)]
pub struct SensorArrayConfig {
    pub n_fbg: usize,
    pub spacing_m: f64,
    pub reflectivity: f64,
    /// Per-FBG power reflectivities overriding `reflectivity`.
    pub reflectivity_profile: Option<Vec<f64>>,
    pub group_index: f64,
    pub lead_fiber_m: f64,
    pub loss_db_per_km: f64,
    /// Jones matrix of each segment; segment `k` is the span ending at FBG `k`
    /// (segment 0 includes the lead fiber).
    pub segment_jones: Vec<JonesMatrix>,
    pub stimuli: Vec<StimulusBinding>,
}

impl Default for SensorArrayConfig {
    fn default() -> Self {
        Self {
            n_fbg: 10,
            spacing_m: 10.0,
            reflectivity: 1e-3,
            reflectivity_profile: None,
            group_index: DEFAULT_GROUP_INDEX,
            lead_fiber_m: 0.0,
            loss_db_per_km: 0.2,
            segment_jones: vec![JonesMatrix::IDENTITY; 10],
            stimuli: Vec::new(),
        }
    }
}

impl SensorArrayConfig {
    /// Default geometry with `n_fbg` gratings and identity segments.
    pub fn with_fbg_count(n_fbg: usize) -> Self {
        Self {
            n_fbg,
            segment_jones: vec![JonesMatrix::IDENTITY; n_fbg],
            ..Self::default()
        }
    }

    /// Replaces every segment matrix with a Haar-random unitary drawn from `seed`.
    pub fn with_random_polarization(mut self, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        self.segment_jones = (0..self.n_fbg)
            .map(|_| JonesMatrix::random_unitary(&mut rng))
            .collect();
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_fbg == 0 {
            return Err(Error::invalid("sensor array needs at least one FBG"));
        }
        let positive = |name: &str, v: f64| {
            if v.is_finite() && v > 0.0 {
                Ok(())
            } else {
                Err(Error::invalid(format!("{name} must be positive, got {v}")))
            }
        };
        positive("FBG spacing", self.spacing_m)?;
        positive("group index", self.group_index)?;
        if !(self.lead_fiber_m >= 0.0 && self.lead_fiber_m.is_finite()) {
            return Err(Error::invalid("lead fiber length must be >= 0"));
        }
        if !(self.loss_db_per_km >= 0.0 && self.loss_db_per_km.is_finite()) {
            return Err(Error::invalid("fiber loss must be >= 0 dB/km"));
        }
        for (k, r) in self.reflectivities().into_iter().enumerate() {
            if !(r > 0.0 && r <= 1.0) {
                return Err(Error::invalid(format!(
                    "FBG {k} reflectivity must be in (0, 1], got {r}"
                )));
            }
        }
        if let Some(p) = &self.reflectivity_profile {
            if p.len() != self.n_fbg {
                return Err(Error::invalid(format!(
                    "reflectivity profile has {} entries for {} FBGs",
                    p.len(),
                    self.n_fbg
                )));
            }
        }
        if self.segment_jones.len() != self.n_fbg {
            return Err(Error::invalid(format!(
                "{} segment matrices for {} FBGs",
                self.segment_jones.len(),
                self.n_fbg
            )));
        }
        if let Some(k) = self.segment_jones.iter().position(|m| !m.is_unitary(1e-9)) {
            return Err(Error::invalid(format!("segment {k} Jones matrix is not unitary")));
        }
        for s in &self.stimuli {
            if s.segment >= self.n_fbg {
                return Err(Error::invalid(format!(
                    "stimulus segment {} out of range for {} FBGs",
                    s.segment, self.n_fbg
                )));
            }
            s.waveform.validate(None)?;
        }
        Ok(())
    }

    pub fn reflectivities(&self) -> Vec<f64> {
        match &self.reflectivity_profile {
            Some(p) => p.clone(),
            None => vec![self.reflectivity; self.n_fbg],
        }
    }

    /// Group velocity `c_f = c / n_g`.
    pub fn fiber_speed_m_per_s(&self) -> f64 {
        SPEED_OF_LIGHT_M_PER_S / self.group_index
    }

    /// Round-trip delay between consecutive FBGs, `τ_s = 2·n_g·d_s / c`.
    pub fn segment_round_trip_s(&self) -> f64 {
        2.0 * self.spacing_m / self.fiber_speed_m_per_s()
    }

    /// Symbol rates must be integer multiples of this.
    pub fn rate_granularity_hz(&self) -> f64 {
        SYMBOLS_PER_SEGMENT_MULTIPLE as f64 / self.segment_round_trip_s()
    }

    /// Symbols per inter-FBG round trip, `K = F_S·τ_s`. Fails unless `K` is a
    /// positive integer multiple of 4.
    pub fn symbols_per_segment(&self, f_s: f64) -> Result<usize> {
        let k = f_s * self.segment_round_trip_s();
        let k_round = k.round();
        let aligned = (k - k_round).abs() <= 1e-6 * k_round.max(1.0)
            && k_round >= SYMBOLS_PER_SEGMENT_MULTIPLE as f64
            && (k_round as usize).is_multiple_of(SYMBOLS_PER_SEGMENT_MULTIPLE);
        if aligned {
            return Ok(k_round as usize);
        }
        let g = self.rate_granularity_hz();
        let below = (f_s / g).floor().max(1.0) * g;
        let above = ((f_s / g).floor() + 1.0) * g;
        Err(Error::Configuration(format!(
            "symbol rate must be a multiple of {} for {} m FBG spacing; got {}, nearest valid rates are {} and {}",
            format_rate(g),
            self.spacing_m,
            format_rate(f_s),
            format_rate(below),
            format_rate(above),
        )))
    }

    /// Round-trip delay of the lead fiber, rounded to whole symbols.
    pub fn lead_delay_symbols(&self, f_s: f64) -> usize {
        (2.0 * self.lead_fiber_m / self.fiber_speed_m_per_s() * f_s).round() as usize
    }

    /// Round-trip delay of every FBG reflection, in symbols.
    pub fn tap_delays(&self, f_s: f64) -> Result<Vec<usize>> {
        let k = self.symbols_per_segment(f_s)?;
        let lead = self.lead_delay_symbols(f_s);
        Ok((1..=self.n_fbg).map(|i| lead + i * k).collect())
    }
}

/// Formats a rate in the most readable unit, e.g. `40 MHz`.
pub fn format_rate(hz: f64) -> String {
    let (v, unit) = if hz >= 1e9 {
        (hz / 1e9, "GHz")
    } else if hz >= 1e6 {
        (hz / 1e6, "MHz")
    } else if hz >= 1e3 {
        (hz / 1e3, "kHz")
    } else {
        (hz, "Hz")
    };
    let s = format!("{v:.6}");
    let s = s.trim_end_matches('0').trim_end_matches('.');
    format!("{s} {unit}")
}

/// One reflection: delay in symbols and its dual-pass Jones matrix.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tap {
    pub delay: usize,
    pub matrix: JonesMatrix,
}

/// Dual-pass impulse response of the array at time `t`.
///
/// Tap `k` sits at `lead + (k+1)·K` symbols and equals
/// `√r_k · a_k · M_kᵀ·M_k · exp(i·φ_k(t))`, where `M_k` is the ordered product
/// of the segment matrices up to `k`, `a_k` the round-trip amplitude loss, and
/// `φ_k` the round-trip propagation phase plus twice the one-way stimulus phase
/// of every segment up to `k`.
pub fn build_impulse_response(
    cfg: &SensorArrayConfig,
    laser: &LaserConfig,
    f_s: f64,
    t: f64,
) -> Result<Vec<Tap>> {
    Ok(ChannelModel::from_array(cfg, laser, f_s)?.taps_at(t))
}

#[derive(Debug, Clone)]
struct ModelTap {
    delay: usize,
    base: JonesMatrix,
    /// Indices into `ChannelModel::stimuli` whose phase this tap accumulates.
    stimuli: Vec<usize>,
}

/// Impulse response with its time dependence: static tap matrices plus the
/// stimuli that modulate them.
#[derive(Debug, Clone)]
pub struct ChannelModel {
    taps: Vec<ModelTap>,
    stimuli: Vec<StimulusBinding>,
}

impl ChannelModel {
    pub fn from_array(cfg: &SensorArrayConfig, laser: &LaserConfig, f_s: f64) -> Result<Self> {
        cfg.validate()?;
        let delays = cfg.tap_delays(f_s)?;
        let reflect = cfg.reflectivities();
        let mut forward = JonesMatrix::IDENTITY;
        let taps = (0..cfg.n_fbg)
            .map(|k| {
                forward = cfg.segment_jones[k] * forward;
                let one_way_m = cfg.lead_fiber_m + (k + 1) as f64 * cfg.spacing_m;
                let loss_db = 2.0 * cfg.loss_db_per_km * one_way_m / 1e3;
                let amplitude = reflect[k].sqrt() * 10f64.powf(-loss_db / 20.0);
                let cycles = 2.0 * cfg.group_index * one_way_m / laser.wavelength_m;
                let phase = TAU * cycles.fract();
                let base = (forward.transpose() * forward)
                    .scale(Complex64::from_polar(amplitude, phase));
                let stimuli = cfg
                    .stimuli
                    .iter()
                    .enumerate()
                    .filter(|(_, s)| s.segment <= k)
                    .map(|(i, _)| i)
                    .collect();
                ModelTap {
                    delay: delays[k],
                    base,
                    stimuli,
                }
            })
            .collect();
        Ok(Self {
            taps,
            stimuli: cfg.stimuli.clone(),
        })
    }

    /// A time-invariant channel with arbitrary taps.
    pub fn from_static_taps(taps: &[Tap]) -> Self {
        Self {
            taps: taps
                .iter()
                .map(|t| ModelTap {
                    delay: t.delay,
                    base: t.matrix,
                    stimuli: Vec::new(),
                })
                .collect(),
            stimuli: Vec::new(),
        }
    }

    pub fn tap_count(&self) -> usize {
        self.taps.len()
    }

    pub fn delays(&self) -> Vec<usize> {
        self.taps.iter().map(|t| t.delay).collect()
    }

    pub fn max_delay(&self) -> usize {
        self.taps.iter().map(|t| t.delay).max().unwrap_or(0)
    }

    pub fn is_static(&self) -> bool {
        self.stimuli.is_empty()
    }

    pub(crate) fn stimuli(&self) -> &[StimulusBinding] {
        &self.stimuli
    }

    pub(crate) fn tap_parts(&self) -> impl Iterator<Item = (usize, JonesMatrix, &[usize])> + '_ {
        self.taps
            .iter()
            .map(|t| (t.delay, t.base, t.stimuli.as_slice()))
    }

    /// Dual-pass stimulus phase `2·Σ β_s(t)` seen by tap `k`.
    pub fn stimulus_phase_at(&self, k: usize, t: f64) -> f64 {
        2.0 * self.taps[k]
            .stimuli
            .iter()
            .map(|&i| stimulus_phase(&self.stimuli[i].waveform, t))
            .sum::<f64>()
    }

    /// Ground-truth taps at time `t`.
    pub fn taps_at(&self, t: f64) -> Vec<Tap> {
        (0..self.taps.len())
            .map(|k| {
                let psi = self.stimulus_phase_at(k, t);
                Tap {
                    delay: self.taps[k].delay,
                    matrix: self.taps[k].base.scale(Complex64::from_polar(1.0, psi)),
                }
            })
            .collect()
    }
}
