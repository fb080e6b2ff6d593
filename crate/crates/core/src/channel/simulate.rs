//! Sample-by-sample propagation of a periodic probe through the array.

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use super::array::{ChannelModel, SensorArrayConfig};
use super::capture::IQCapture;
use super::jones::JonesMatrix;
use super::laser::LaserConfig;
use super::stimulus::{stimulus_phase, StimulusWaveform};
use crate::error::{Error, Result};
use crate::modulation::ProbeFrame;

const PHASE_NOISE_STREAM: u64 = 1;
const RECEIVER_NOISE_STREAM: u64 = 2;

struct SimTap {
    delay: usize,
    base: JonesMatrix,
    stimuli: Vec<usize>,
    /// Frame index of the symbol this tap delivers at the next sample.
    symbol: usize,
}

/// Streaming channel simulator. Produces the received field for consecutive
/// sample indices starting at 0; the probe is assumed to have been running
/// forever, so the first samples already see every tap.
///
/// Received field at sample `n`:
/// `Σ_k H_k(n)·e_t(n - d_k)·exp(i[φ0(n - d_k) - φ0(n)]) + η(n)`
/// where `φ0` is the laser's Wiener phase (the local oscillator shares the
/// source) and `η` circular white Gaussian receiver noise.
pub struct Simulator<'a> {
    frame: &'a ProbeFrame,
    taps: Vec<SimTap>,
    stimuli: Vec<StimulusWaveform>,
    beta: Vec<f64>,
    f_s: f64,
    amplitude: f64,
    noise_component_std: f64,
    phase_step_std: f64,
    phase_rng: ChaCha8Rng,
    noise_rng: ChaCha8Rng,
    /// Ring of laser phases `φ0(n - D) ..= φ0(n - 1)`; `head` holds the newest.
    history: Vec<f64>,
    head: usize,
    next: u64,
}

impl<'a> Simulator<'a> {
    pub fn new(
        frame: &'a ProbeFrame,
        model: &ChannelModel,
        laser: &LaserConfig,
        seed: u64,
    ) -> Result<Self> {
        laser.validate()?;
        let f_s = frame.symbol_rate_hz();
        let n = frame.period();
        let taps = model
            .tap_parts()
            .map(|(delay, base, stimuli)| SimTap {
                delay,
                base,
                stimuli: stimuli.to_vec(),
                symbol: (n - delay % n) % n,
            })
            .collect();
        let stimuli: Vec<_> = model.stimuli().iter().map(|s| s.waveform).collect();

        let mut phase_rng = ChaCha8Rng::seed_from_u64(seed);
        phase_rng.set_stream(PHASE_NOISE_STREAM);
        let mut noise_rng = ChaCha8Rng::seed_from_u64(seed);
        noise_rng.set_stream(RECEIVER_NOISE_STREAM);

        let phase_step_std = laser.phase_step_variance(f_s).sqrt();
        let depth = model.max_delay() + 1;
        let mut history = vec![0.0; depth];
        if phase_step_std > 0.0 {
            for i in 1..depth {
                let step: f64 = phase_rng.sample(StandardNormal);
                history[i] = history[i - 1] + phase_step_std * step;
            }
        }

        Ok(Self {
            frame,
            beta: vec![0.0; stimuli.len()],
            taps,
            stimuli,
            f_s,
            amplitude: laser.amplitude_scale(),
            noise_component_std: laser.noise_sigma / 2f64.sqrt(),
            phase_step_std,
            phase_rng,
            noise_rng,
            history,
            head: depth - 1,
            next: 0,
        })
    }

    /// Index of the next sample `fill` will produce.
    pub fn position(&self) -> u64 {
        self.next
    }

    /// Fills both buffers (equal lengths) with the next samples.
    pub fn fill(&mut self, out_x: &mut [Complex64], out_y: &mut [Complex64]) {
        assert_eq!(out_x.len(), out_y.len());
        let e_tx = self.frame.e_tx();
        let e_ty = self.frame.e_ty();
        let period = e_tx.len();
        let depth = self.history.len();
        let laser_noise = self.phase_step_std > 0.0;

        for (ox, oy) in out_x.iter_mut().zip(out_y.iter_mut()) {
            let n = self.next;
            if laser_noise {
                let step: f64 = self.phase_rng.sample(StandardNormal);
                let prev = self.history[self.head];
                self.head = (self.head + 1) % depth;
                self.history[self.head] = prev + self.phase_step_std * step;
            }
            let phi_now = self.history[self.head];

            if !self.stimuli.is_empty() {
                let t = n as f64 / self.f_s;
                for (b, w) in self.beta.iter_mut().zip(&self.stimuli) {
                    *b = stimulus_phase(w, t);
                }
            }

            let mut acc_x = Complex64::default();
            let mut acc_y = Complex64::default();
            for tap in self.taps.iter_mut() {
                let (ex, ey) = (e_tx[tap.symbol], e_ty[tap.symbol]);
                tap.symbol += 1;
                if tap.symbol == period {
                    tap.symbol = 0;
                }
                if ex.norm_sqr() == 0.0 && ey.norm_sqr() == 0.0 {
                    continue;
                }
                let (mut vx, mut vy) = tap.base.apply(ex, ey);
                let mut angle = 2.0 * tap.stimuli.iter().map(|&i| self.beta[i]).sum::<f64>();
                if laser_noise {
                    angle += self.history[(self.head + depth - tap.delay) % depth] - phi_now;
                }
                if angle != 0.0 {
                    let rot = Complex64::cis(angle);
                    vx *= rot;
                    vy *= rot;
                }
                acc_x += vx;
                acc_y += vy;
            }
            acc_x *= self.amplitude;
            acc_y *= self.amplitude;

            if self.noise_component_std > 0.0 {
                let s = self.noise_component_std;
                let r: [f64; 4] = std::array::from_fn(|_| self.noise_rng.sample(StandardNormal));
                acc_x += Complex64::new(s * r[0], s * r[1]);
                acc_y += Complex64::new(s * r[2], s * r[3]);
            }
            *ox = acc_x;
            *oy = acc_y;
            self.next += 1;
        }
    }
}

fn capture_len(frame: &ProbeFrame, duration_s: f64) -> Result<usize> {
    let len = (duration_s * frame.symbol_rate_hz()).round();
    if !(len.is_finite() && len >= frame.period() as f64) {
        return Err(Error::invalid(format!(
            "capture duration {duration_s} s is shorter than one frame ({} s)",
            frame.duration_s()
        )));
    }
    Ok(len as usize)
}

/// Simulates `duration_s` of received field for the configured sensor array.
pub fn propagate(
    frame: &ProbeFrame,
    cfg: &SensorArrayConfig,
    laser: &LaserConfig,
    duration_s: f64,
    seed: u64,
) -> Result<IQCapture> {
    let model = ChannelModel::from_array(cfg, laser, frame.symbol_rate_hz())?;
    propagate_model(frame, &model, laser, duration_s, seed)
}

/// As [`propagate`], for an arbitrary channel model.
pub fn propagate_model(
    frame: &ProbeFrame,
    model: &ChannelModel,
    laser: &LaserConfig,
    duration_s: f64,
    seed: u64,
) -> Result<IQCapture> {
    let len = capture_len(frame, duration_s)?;
    let mut sim = Simulator::new(frame, model, laser, seed)?;
    let mut e_rx = vec![Complex64::default(); len];
    let mut e_ry = vec![Complex64::default(); len];
    sim.fill(&mut e_rx, &mut e_ry);
    IQCapture::new(e_rx, e_ry, frame.symbol_rate_hz(), seed)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::array::Tap;
    use crate::codes::generate_golay_set;
    use crate::modulation::build_pdm_qpsk_frame;

    #[test]
    fn rejects_short_duration() {
        let frame = build_pdm_qpsk_frame(&generate_golay_set(256).unwrap(), 160e6).unwrap();
        let cfg = SensorArrayConfig::default();
        let err = propagate(&frame, &cfg, &LaserConfig::noiseless(), 1e-6, 0);
        assert!(matches!(err, Err(Error::InvalidArgument(_))));
    }

    #[test]
    fn rejects_misaligned_rate() {
        let frame = build_pdm_qpsk_frame(&generate_golay_set(256).unwrap(), 150e6).unwrap();
        let cfg = SensorArrayConfig::default();
        let err = propagate(&frame, &cfg, &LaserConfig::noiseless(), 1e-4, 0);
        assert!(matches!(err, Err(Error::Configuration(_))));
    }

    #[test]
    fn empty_channel_is_noise_only() {
        let frame = build_pdm_qpsk_frame(&generate_golay_set(64).unwrap(), 160e6).unwrap();
        let model = ChannelModel::from_static_taps(&[]);
        let quiet = propagate_model(&frame, &model, &LaserConfig::noiseless(), 1e-6, 1).unwrap();
        assert!(quiet.e_rx().iter().chain(quiet.e_ry()).all(|c| c.norm() == 0.0));

        let laser = LaserConfig {
            noise_sigma: 0.5,
            ..LaserConfig::noiseless()
        };
        let noisy = propagate_model(&frame, &model, &laser, 1e-3, 1).unwrap();
        let p: f64 = noisy.e_rx().iter().map(|c| c.norm_sqr()).sum::<f64>() / noisy.len() as f64;
        assert!((p - 0.25).abs() < 0.01, "{p}");
    }

    #[test]
    fn blockwise_fill_matches_one_shot() {
        let frame = build_pdm_qpsk_frame(&generate_golay_set(64).unwrap(), 160e6).unwrap();
        let model = ChannelModel::from_static_taps(&[Tap {
            delay: 7,
            matrix: JonesMatrix::IDENTITY,
        }]);
        let laser = LaserConfig {
            noise_sigma: 0.1,
            linewidth_hz: 1e5,
            ..LaserConfig::default()
        };
        let whole = propagate_model(&frame, &model, &laser, 1000.0 / 160e6, 9).unwrap();
        let mut sim = Simulator::new(&frame, &model, &laser, 9).unwrap();
        let mut x = vec![Complex64::default(); 1000];
        let mut y = vec![Complex64::default(); 1000];
        let (x1, x2) = x.split_at_mut(333);
        let (y1, y2) = y.split_at_mut(333);
        sim.fill(x1, y1);
        sim.fill(x2, y2);
        assert_eq!(whole.e_rx(), &x[..]);
        assert_eq!(whole.e_ry(), &y[..]);
    }
}
