use num_complex::Complex64;
use rayon::prelude::*;

use crate::channel::{IQCapture, JonesMatrix};
use crate::codes::{correlate, CorrelationMode};
use crate::error::{Error, Result};
use crate::modulation::{zero_correlation_zone, ProbeFrame, Scheme};

/// Jones estimates for every configured FBG over one code period.
#[derive(Debug, Clone, PartialEq)]
pub struct JonesEstimateFrame {
    /// `(delay in symbols, h′)`, in increasing delay order.
    pub taps: Vec<(usize, JonesMatrix)>,
    pub frame_index: usize,
    /// Start of the frame's correlation window.
    pub timestamp: f64,
}

impl JonesEstimateFrame {
    pub fn matrices(&self) -> impl Iterator<Item = &JonesMatrix> {
        self.taps.iter().map(|(_, h)| h)
    }
}

/// Checks that `delays` can be estimated without bias from `frame`.
///
/// Delays must be strictly increasing and span less than one frame period.
/// PDM-QPSK additionally needs every pairwise delay difference to be a
/// multiple of 4 symbols; PDM-BPSK needs the spread to stay inside the
/// zero-correlation zone.
pub fn check_delays(frame: &ProbeFrame, delays: &[usize]) -> Result<()> {
    if delays.is_empty() {
        return Err(Error::invalid("no tap delays given"));
    }
    if delays.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::invalid("tap delays must be strictly increasing"));
    }
    let spread = delays[delays.len() - 1] - delays[0];
    if spread >= frame.period() {
        return Err(Error::invalid(format!(
            "tap delays span {spread} symbols, more than the {}-symbol frame",
            frame.period()
        )));
    }
    match frame.scheme() {
        Scheme::PdmQpsk => {
            if let Some(&bad) = delays.iter().find(|&&d| !(d - delays[0]).is_multiple_of(4)) {
                return Err(Error::Precondition(format!(
                    "PDM-QPSK needs tap delays congruent mod 4 symbols (symbol period = \
                     a quarter of the dual-pass segment delay); delay {bad} is {} mod 4, \
                     first tap {} is {} mod 4",
                    bad % 4,
                    delays[0],
                    delays[0] % 4
                )));
            }
        }
        Scheme::PdmBpsk => {
            let zcz = zero_correlation_zone(frame)?;
            if spread >= zcz {
                return Err(Error::Precondition(format!(
                    "PDM-BPSK impulse response spans {spread} symbols, outside the \
                     {zcz}-symbol zero-correlation zone"
                )));
            }
        }
    }
    Ok(())
}

fn frame_count(capture: &IQCapture, frame: &ProbeFrame, min: usize) -> Result<usize> {
    let n = capture.len() / frame.period();
    if n < min {
        return Err(Error::invalid(format!(
            "capture holds {} samples, need at least {min} frame periods of {}",
            capture.len(),
            frame.period()
        )));
    }
    Ok(n)
}

/// `Σ_n r(n)·conj(t(n - d))` over one period, indices mod `N`.
#[inline]
fn sampled_correlation(r: &[Complex64], t: &[Complex64], u: &[Complex64], d: usize) -> [Complex64; 2] {
    let n = r.len();
    let d = d % n;
    let mut acc_t = Complex64::default();
    let mut acc_u = Complex64::default();
    // n - d wraps for n < d
    for (i, &ri) in r[..d].iter().enumerate() {
        let j = i + n - d;
        acc_t += ri * t[j].conj();
        acc_u += ri * u[j].conj();
    }
    for (i, &ri) in r[d..].iter().enumerate() {
        acc_t += ri * t[i].conj();
        acc_u += ri * u[i].conj();
    }
    [acc_t, acc_u]
}

fn estimate_frame(
    capture: &IQCapture,
    frame: &ProbeFrame,
    delays: &[usize],
    f: usize,
) -> JonesEstimateFrame {
    let n = frame.period();
    let range = f * n..(f + 1) * n;
    estimate_window(&capture.e_rx()[range.clone()], &capture.e_ry()[range], frame, delays, f)
}

/// Estimate from one frame-long window of received samples that starts at
/// frame boundary `frame_index`.
pub fn estimate_window(
    e_rx: &[Complex64],
    e_ry: &[Complex64],
    frame: &ProbeFrame,
    delays: &[usize],
    frame_index: usize,
) -> JonesEstimateFrame {
    assert_eq!(e_rx.len(), frame.period());
    assert_eq!(e_ry.len(), frame.period());
    let scale = 1.0 / frame.code_energy();
    let taps = delays
        .iter()
        .map(|&d| {
            let [xx, xy] = sampled_correlation(e_rx, frame.e_tx(), frame.e_ty(), d);
            let [yx, yy] = sampled_correlation(e_ry, frame.e_tx(), frame.e_ty(), d);
            (d, JonesMatrix::new(xx, xy, yx, yy).scale_re(scale))
        })
        .collect();
    JonesEstimateFrame {
        taps,
        frame_index,
        timestamp: frame_index as f64 * frame.duration_s(),
    }
}

/// One Jones estimate per whole frame period in `capture`, sampled at
/// `fbg_delays`. Rejects delay sets for which the estimator is biased; see
/// [`check_delays`].
pub fn estimate_jones(
    capture: &IQCapture,
    frame: &ProbeFrame,
    fbg_delays: &[usize],
) -> Result<Vec<JonesEstimateFrame>> {
    check_delays(frame, fbg_delays)?;
    estimate_jones_unchecked(capture, frame, fbg_delays)
}

/// As [`estimate_jones`] without the scheme-specific alignment check, for
/// measuring the leakage a misaligned array suffers.
pub fn estimate_jones_unchecked(
    capture: &IQCapture,
    frame: &ProbeFrame,
    fbg_delays: &[usize],
) -> Result<Vec<JonesEstimateFrame>> {
    if fbg_delays.is_empty() {
        return Err(Error::invalid("no tap delays given"));
    }
    let frames = frame_count(capture, frame, 2)?;
    Ok((0..frames)
        .into_par_iter()
        .map(|f| estimate_frame(capture, frame, fbg_delays, f))
        .collect())
}

/// Coherent mean over consecutive groups of `m` frames. A trailing partial
/// group is dropped.
pub fn average_estimates(estimates: &[JonesEstimateFrame], m: usize) -> Result<Vec<JonesEstimateFrame>> {
    if m == 0 {
        return Err(Error::invalid("averaging length must be at least 1"));
    }
    estimates
        .chunks_exact(m)
        .enumerate()
        .map(|(g, chunk)| {
            let first = &chunk[0];
            if chunk.iter().any(|e| e.taps.len() != first.taps.len()) {
                return Err(Error::invalid("inconsistent tap counts across frames"));
            }
            let taps = (0..first.taps.len())
                .map(|k| {
                    let sum = chunk
                        .iter()
                        .fold(JonesMatrix::ZERO, |acc, e| acc + e.taps[k].1);
                    (first.taps[k].0, sum.scale_re(1.0 / m as f64))
                })
                .collect();
            Ok(JonesEstimateFrame {
                taps,
                frame_index: g,
                timestamp: first.timestamp,
            })
        })
        .collect()
}

/// Normalized periodic correlation of one frame window at every lag.
#[derive(Debug, Clone)]
pub struct CorrelationProfile {
    pub h_xx: Vec<Complex64>,
    pub h_xy: Vec<Complex64>,
    pub h_yx: Vec<Complex64>,
    pub h_yy: Vec<Complex64>,
}

impl CorrelationProfile {
    /// `h′` at lag `d`.
    pub fn at(&self, d: usize) -> JonesMatrix {
        let i = d % self.h_xx.len();
        JonesMatrix::new(self.h_xx[i], self.h_xy[i], self.h_yx[i], self.h_yy[i])
    }

    /// `Σ|h′|²` over the four entries, per lag.
    pub fn intensity(&self) -> Vec<f64> {
        (0..self.h_xx.len()).map(|d| self.at(d).frobenius_sq()).collect()
    }
}

pub fn correlation_profile(capture: &IQCapture, frame: &ProbeFrame, frame_index: usize) -> Result<CorrelationProfile> {
    let frames = frame_count(capture, frame, 1)?;
    if frame_index >= frames {
        return Err(Error::invalid(format!(
            "frame {frame_index} out of range, capture holds {frames}"
        )));
    }
    let n = frame.period();
    let range = frame_index * n..(frame_index + 1) * n;
    let rx = &capture.e_rx()[range.clone()];
    let ry = &capture.e_ry()[range];
    let scale = 1.0 / frame.code_energy();
    let corr = |r: &[Complex64], t: &[Complex64]| -> Result<Vec<Complex64>> {
        Ok(correlate(r, t, CorrelationMode::Periodic)?
            .into_values()
            .into_iter()
            .map(|c| c * scale)
            .collect())
    };
    Ok(CorrelationProfile {
        h_xx: corr(rx, frame.e_tx())?,
        h_xy: corr(rx, frame.e_ty())?,
        h_yx: corr(ry, frame.e_tx())?,
        h_yy: corr(ry, frame.e_ty())?,
    })
}

/// Lags of the first frame whose correlation intensity is a local maximum
/// within `threshold_db` of the strongest lag. Useful for locating FBGs when
/// the array geometry is unknown.
///
/// PDM-QPSK leaks into lags off the 4-symbol grid of each tap, so for QPSK
/// only lags congruent to the strongest one mod 4 are candidates.
pub fn detect_peaks(capture: &IQCapture, frame: &ProbeFrame, threshold_db: f64) -> Result<Vec<usize>> {
    let intensity = correlation_profile(capture, frame, 0)?.intensity();
    let (argmax, max) = intensity
        .iter()
        .copied()
        .enumerate()
        .fold((0, 0.0), |best, (d, v)| if v > best.1 { (d, v) } else { best });
    if max <= 0.0 {
        return Ok(Vec::new());
    }
    let step = match frame.scheme() {
        Scheme::PdmQpsk => 4,
        Scheme::PdmBpsk => 1,
    };
    let floor = max * 10f64.powf(-threshold_db / 10.0);
    let n = intensity.len();
    Ok((argmax % step..n)
        .step_by(step)
        .filter(|&d| {
            let v = intensity[d];
            v >= floor && v >= intensity[(d + n - step) % n] && v > intensity[(d + step) % n]
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::{propagate, propagate_model, ChannelModel, LaserConfig, SensorArrayConfig, Tap};
    use crate::codes::generate_golay_set;
    use crate::modulation::{build_pdm_bpsk_frame, build_pdm_qpsk_frame};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn random_taps(delays: &[usize], seed: u64) -> Vec<Tap> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        delays
            .iter()
            .map(|&delay| Tap {
                delay,
                matrix: JonesMatrix::random_unitary(&mut rng),
            })
            .collect()
    }

    fn max_error(est: &[JonesEstimateFrame], taps: &[Tap]) -> f64 {
        est.iter()
            .flat_map(|e| e.taps.iter().zip(taps).map(|((_, h), t)| h.max_abs_diff(&t.matrix)))
            .fold(0.0, f64::max)
    }

    #[test]
    fn qpsk_aligned_is_exact() {
        let frame = build_pdm_qpsk_frame(&generate_golay_set(256).unwrap(), 160e6).unwrap();
        let delays: Vec<usize> = (1..=10).map(|k| 16 * k + 4).collect();
        let taps = random_taps(&delays, 3);
        let model = ChannelModel::from_static_taps(&taps);
        let cap = propagate_model(&frame, &model, &LaserConfig::noiseless(), 3.0 * frame.duration_s(), 0).unwrap();
        let est = estimate_jones(&cap, &frame, &delays).unwrap();
        assert_eq!(est.len(), 3);
        assert!(max_error(&est, &taps) < 1e-10);
    }

    #[test]
    fn bpsk_inside_zone_is_exact() {
        let frame = build_pdm_bpsk_frame(&generate_golay_set(64).unwrap(), 16, 160e6).unwrap();
        // zone is 48 symbols; odd spacing on purpose
        let delays = [5, 11, 23, 30, 52];
        let taps = random_taps(&delays, 4);
        let model = ChannelModel::from_static_taps(&taps);
        let cap = propagate_model(&frame, &model, &LaserConfig::noiseless(), 2.0 * frame.duration_s(), 0).unwrap();
        let est = estimate_jones(&cap, &frame, &delays).unwrap();
        assert!(max_error(&est, &taps) < 1e-10);
    }

    #[test]
    fn preconditions() {
        let qpsk = build_pdm_qpsk_frame(&generate_golay_set(64).unwrap(), 160e6).unwrap();
        assert!(check_delays(&qpsk, &[3, 7, 11]).is_ok());
        assert!(matches!(check_delays(&qpsk, &[4, 9]), Err(Error::Precondition(_))));
        assert!(check_delays(&qpsk, &[4, 4]).is_err());
        assert!(check_delays(&qpsk, &[0, 64]).is_err());
        let bpsk = build_pdm_bpsk_frame(&generate_golay_set(64).unwrap(), 0, 160e6).unwrap();
        assert!(check_delays(&bpsk, &[10, 41]).is_ok());
        assert!(matches!(check_delays(&bpsk, &[10, 42]), Err(Error::Precondition(_))));
    }

    #[test]
    fn short_capture_rejected() {
        let frame = build_pdm_qpsk_frame(&generate_golay_set(64).unwrap(), 160e6).unwrap();
        let cap = IQCapture::new(vec![Complex64::default(); 100], vec![Complex64::default(); 100], 160e6, 0).unwrap();
        assert!(matches!(estimate_jones(&cap, &frame, &[0]), Err(Error::InvalidArgument(_))));
    }

    #[test]
    fn profile_matches_sampled_estimate() {
        let frame = build_pdm_qpsk_frame(&generate_golay_set(128).unwrap(), 160e6).unwrap();
        let delays = [9, 13, 17];
        let taps = random_taps(&[9, 14, 17], 8);
        let laser = LaserConfig {
            noise_sigma: 0.3,
            linewidth_hz: 1e4,
            ..LaserConfig::default()
        };
        let cap = propagate_model(&frame, &ChannelModel::from_static_taps(&taps), &laser, 2.0 * frame.duration_s(), 5).unwrap();
        let est = estimate_jones_unchecked(&cap, &frame, &delays).unwrap();
        let prof = correlation_profile(&cap, &frame, 1).unwrap();
        for (d, h) in &est[1].taps {
            assert!(prof.at(*d).max_abs_diff(h) < 1e-12);
        }
    }

    #[test]
    fn peaks_of_ten_fbg_array() {
        let frame = build_pdm_qpsk_frame(&generate_golay_set(512).unwrap(), 160e6).unwrap();
        let cfg = SensorArrayConfig::default().with_random_polarization(2);
        let cap = propagate(&frame, &cfg, &LaserConfig::noiseless(), frame.duration_s(), 0).unwrap();
        let peaks = detect_peaks(&cap, &frame, 20.0).unwrap();
        assert_eq!(peaks, cfg.tap_delays(160e6).unwrap());
        assert!(peaks.windows(2).all(|w| w[1] - w[0] == 16));
    }

    #[test]
    fn peaks_with_unequal_reflectivity() {
        let frame = build_pdm_qpsk_frame(&generate_golay_set(256).unwrap(), 160e6).unwrap();
        let cfg = SensorArrayConfig {
            reflectivity_profile: Some(vec![1e-3, 1e-4]),
            ..SensorArrayConfig::with_fbg_count(2)
        };
        let cap = propagate(&frame, &cfg, &LaserConfig::noiseless(), frame.duration_s(), 0).unwrap();
        assert_eq!(detect_peaks(&cap, &frame, 25.0).unwrap().len(), 2);
    }

    #[test]
    fn zero_capture_has_no_peaks() {
        let frame = build_pdm_qpsk_frame(&generate_golay_set(64).unwrap(), 160e6).unwrap();
        let cap = IQCapture::new(vec![Complex64::default(); 64], vec![Complex64::default(); 64], 160e6, 0).unwrap();
        assert!(detect_peaks(&cap, &frame, 20.0).unwrap().is_empty());
    }

    #[test]
    fn averaging() {
        let mk = |i: usize, v: f64| JonesEstimateFrame {
            taps: vec![(4, JonesMatrix::IDENTITY.scale_re(v))],
            frame_index: i,
            timestamp: i as f64,
        };
        let est: Vec<_> = (0..5).map(|i| mk(i, i as f64)).collect();
        let avg = average_estimates(&est, 2).unwrap();
        assert_eq!(avg.len(), 2);
        assert_eq!(avg[1].taps[0].1.xx, Complex64::new(2.5, 0.0));
        assert_eq!(avg[1].timestamp, 2.0);
        assert!(average_estimates(&est, 0).is_err());
    }
}
