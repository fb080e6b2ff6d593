//! Sensing metrics computed from phase maps.

use std::f64::consts::{LN_2, TAU};
use std::io::Write;

use rustfft::FftPlanner;
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::receiver::PhaseMap;

/// Fewest frames a spectrum is computed from.
pub const MIN_PSD_FRAMES: usize = 64;
/// A tone must stand this far above the median spectral floor.
pub const TONE_DOMINANCE_DB: f64 = 10.0;
/// Points below this SNR are left out of the dynamic-range fit.
pub const MIN_FIT_SNR_DB: f64 = 10.0;
/// Largest fit residual for a point to count as linear.
pub const LINEARITY_TOLERANCE_DB: f64 = 0.5;

fn check_row(map: &PhaseMap, fbg: usize) -> Result<()> {
    if fbg >= map.n_fbg() {
        return Err(Error::invalid(format!(
            "FBG index {fbg} outside 0..{}",
            map.n_fbg()
        )));
    }
    Ok(())
}

fn mean(x: &[f64]) -> f64 {
    x.iter().sum::<f64>() / x.len() as f64
}

/// Sample (n - 1) standard deviation.
pub fn sample_std(x: &[f64]) -> f64 {
    if x.len() < 2 {
        return 0.0;
    }
    let m = mean(x);
    (x.iter().map(|v| (v - m).powi(2)).sum::<f64>() / (x.len() - 1) as f64).sqrt()
}

#[derive(Debug, Clone, PartialEq)]
pub struct StdReport {
    pub per_fbg: Vec<f64>,
    /// Mean over every row but the reference.
    pub mean: f64,
    pub frames: usize,
}

/// Per-row standard deviation over the first `window_s` of the map.
pub fn phase_std(map: &PhaseMap, window_s: f64) -> Result<StdReport> {
    let duration = map.duration_s();
    if !(window_s > 0.0) || window_s > duration * (1.0 + 1e-9) {
        return Err(Error::invalid(format!(
            "std window {window_s} s must be positive and within the {duration} s map"
        )));
    }
    let frames = ((window_s / map.frame_period_s).round() as usize).min(map.n_frames());
    if frames < 2 {
        return Err(Error::invalid("std window covers fewer than 2 frames"));
    }
    let per_fbg: Vec<f64> = map.phases.iter().map(|r| sample_std(&r[..frames])).collect();
    let others: Vec<f64> = per_fbg
        .iter()
        .enumerate()
        .filter(|&(k, _)| k != map.reference_index)
        .map(|(_, &s)| s)
        .collect();
    let mean = if others.is_empty() { 0.0 } else { mean(&others) };
    Ok(StdReport { per_fbg, mean, frames })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Window {
    #[default]
    Rectangular,
    Hann,
}

/// One-sided power spectral density, rad²/Hz.
#[derive(Debug, Clone, PartialEq)]
pub struct Psd {
    pub frequencies_hz: Vec<f64>,
    pub power: Vec<f64>,
    /// Bin spacing `B = 1/duration`.
    pub resolution_hz: f64,
}

impl Psd {
    pub fn bin_of(&self, f_hz: f64) -> usize {
        ((f_hz / self.resolution_hz).round() as usize).min(self.power.len() - 1)
    }

    /// Largest non-DC bin.
    pub fn peak_bin(&self) -> usize {
        (1..self.power.len())
            .max_by(|&a, &b| self.power[a].total_cmp(&self.power[b]))
            .unwrap_or(0)
    }

    /// `Σ P·B`.
    pub fn total_power(&self) -> f64 {
        self.power.iter().sum::<f64>() * self.resolution_hz
    }

    /// Power in bins `k - half ..= k + half`, times `B`.
    pub fn band_power(&self, k: usize, half: usize) -> f64 {
        let lo = k.saturating_sub(half);
        let hi = (k + half).min(self.power.len() - 1);
        self.power[lo..=hi].iter().sum::<f64>() * self.resolution_hz
    }

    /// Median over non-DC bins outside `tone_bin ± guard`.
    pub fn median_floor(&self, tone_bin: Option<usize>, guard: usize) -> f64 {
        let mut v: Vec<f64> = (1..self.power.len())
            .filter(|&k| tone_bin.is_none_or(|t| k.abs_diff(t) > guard))
            .map(|k| self.power[k])
            .collect();
        if v.is_empty() {
            return 0.0;
        }
        v.sort_by(f64::total_cmp);
        let m = v.len();
        if m % 2 == 1 {
            v[m / 2]
        } else {
            0.5 * (v[m / 2 - 1] + v[m / 2])
        }
    }

    /// CSV: `frequency_hz,psd_rad2_per_hz,asd_rad_per_sqrt_hz`.
    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "frequency_hz,psd_rad2_per_hz,asd_rad_per_sqrt_hz")?;
        for (f, p) in self.frequencies_hz.iter().zip(&self.power) {
            writeln!(w, "{f},{p},{}", p.sqrt())?;
        }
        Ok(())
    }
}

/// Periodogram of one mean-removed row.
pub fn psd(map: &PhaseMap, fbg: usize) -> Result<Psd> {
    psd_windowed(map, fbg, Window::Rectangular)
}

pub fn psd_windowed(map: &PhaseMap, fbg: usize, window: Window) -> Result<Psd> {
    check_row(map, fbg)?;
    periodogram(map.row(fbg), 1.0 / map.frame_period_s, window)
}

/// One-sided periodogram of `x` sampled at `fs`. With the rectangular
/// window, `Σ P·B` equals the population variance of `x`.
pub fn periodogram(x: &[f64], fs: f64, window: Window) -> Result<Psd> {
    let m = x.len();
    if m < MIN_PSD_FRAMES {
        return Err(Error::invalid(format!(
            "spectrum needs at least {MIN_PSD_FRAMES} frames, got {m}"
        )));
    }
    let w: Vec<f64> = match window {
        Window::Rectangular => vec![1.0; m],
        Window::Hann => (0..m)
            .map(|n| 0.5 - 0.5 * (TAU * n as f64 / m as f64).cos())
            .collect(),
    };
    let w_power: f64 = w.iter().map(|v| v * v).sum();
    let mu = mean(x);
    let mut buf: Vec<Complex64> = x
        .iter()
        .zip(&w)
        .map(|(v, wi)| Complex64::new((v - mu) * wi, 0.0))
        .collect();
    FftPlanner::new().plan_fft_forward(m).process(&mut buf);

    let bins = m / 2 + 1;
    let norm = 1.0 / (w_power * fs);
    let power = (0..bins)
        .map(|k| {
            let p = buf[k].norm_sqr() * norm;
            // DC and (even m) Nyquist have no mirror image
            if k == 0 || (m.is_multiple_of(2) && k == m / 2) {
                p
            } else {
                2.0 * p
            }
        })
        .collect();
    let resolution_hz = fs / m as f64;
    Ok(Psd {
        frequencies_hz: (0..bins).map(|k| k as f64 * resolution_hz).collect(),
        power,
        resolution_hz,
    })
}

fn tone_bin_checked(spec: &Psd, tone_hz: f64) -> Result<usize> {
    let f_max = spec.frequencies_hz[spec.power.len() - 1];
    if !(tone_hz > 0.0 && tone_hz <= f_max) {
        return Err(Error::invalid(format!(
            "tone {tone_hz} Hz outside the (0, {f_max}] Hz spectrum"
        )));
    }
    let k = spec.bin_of(tone_hz);
    let peak = spec.power[k.saturating_sub(1).max(1)..=(k + 1).min(spec.power.len() - 1)]
        .iter()
        .copied()
        .fold(0.0, f64::max);
    let floor = spec.median_floor(Some(k), 2);
    let peak_db = 10.0 * (peak / floor).log10();
    if !(peak_db >= TONE_DOMINANCE_DB) {
        return Err(Error::ToneNotFound { tone_hz, peak_db });
    }
    Ok(k)
}

/// Noise floor in rad/√Hz next to a dominant tone: `√(N_B/F_max)` with
/// `N_B` the noise power over the full band, estimated from the median
/// off-tone bin. The median of an exponentially distributed periodogram bin
/// is `ln 2` times its mean; that bias is removed. A Hann window keeps the
/// tone's leakage out of the floor.
pub fn sensitivity(map: &PhaseMap, fbg: usize, tone_hz: f64) -> Result<f64> {
    let spec = psd_windowed(map, fbg, Window::Hann)?;
    let k = tone_bin_checked(&spec, tone_hz)?;
    let density = spec.median_floor(Some(k), 2) / LN_2;
    let f_max = map.max_mechanical_frequency_hz();
    let n_b = density * f_max;
    Ok((n_b / f_max).sqrt())
}

#[derive(Debug, Clone, PartialEq)]
pub struct CrosstalkReport {
    /// Tone power at the worst unexcited row over that at the excited row.
    pub rejection_db: f64,
    pub worst_row: usize,
    /// Tone power per row after spatial differencing, rad².
    pub tone_power: Vec<f64>,
}

/// Tone-band power (tone bin ± 1) of each spatially differenced row, and the
/// ratio of the strongest unexcited row to the excited one. The reference
/// row is not counted.
pub fn crosstalk(map: &PhaseMap, excited_fbg: usize, tone_hz: f64) -> Result<CrosstalkReport> {
    check_row(map, excited_fbg)?;
    if excited_fbg == map.reference_index {
        return Err(Error::invalid("the excited row cannot be the phase reference"));
    }
    let diff = map.spatial_difference();
    let excited = psd(&diff, excited_fbg)?;
    let k = tone_bin_checked(&excited, tone_hz)?;
    let tone_power: Vec<f64> = (0..diff.n_fbg())
        .map(|r| {
            if r == excited_fbg {
                Ok(excited.band_power(k, 1))
            } else {
                Ok(psd(&diff, r)?.band_power(k, 1))
            }
        })
        .collect::<Result<_>>()?;
    let (worst_row, worst) = tone_power
        .iter()
        .enumerate()
        .filter(|&(r, _)| r != excited_fbg && r != map.reference_index)
        .fold((excited_fbg, 0.0), |best, (r, &p)| if p > best.1 { (r, p) } else { best });
    Ok(CrosstalkReport {
        rejection_db: 10.0 * (worst / tone_power[excited_fbg]).log10(),
        worst_row,
        tone_power,
    })
}

/// Crosstalk rejection in dB; more negative is better.
pub fn crosstalk_rejection(map: &PhaseMap, excited_fbg: usize, tone_hz: f64) -> Result<f64> {
    Ok(crosstalk(map, excited_fbg, tone_hz)?.rejection_db)
}

/// Least-squares `offset + A·cos(ωt + φ)` at a known frequency.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ToneFit {
    pub amplitude: f64,
    pub phase: f64,
    pub offset: f64,
    /// RMS of what the fit leaves behind.
    pub residual_rms: f64,
}

impl ToneFit {
    pub fn peak_to_peak(&self) -> f64 {
        2.0 * self.amplitude
    }

    /// Tone power `A²/2` over residual power, dB.
    pub fn snr_db(&self) -> f64 {
        10.0 * (0.5 * self.amplitude.powi(2) / self.residual_rms.powi(2)).log10()
    }
}

pub fn fit_tone(x: &[f64], frame_period_s: f64, tone_hz: f64) -> Result<ToneFit> {
    if x.len() < 4 {
        return Err(Error::invalid("tone fit needs at least 4 samples"));
    }
    // normal equations for [1, cos, sin]
    let w = TAU * tone_hz * frame_period_s;
    let mut ata = [[0.0f64; 3]; 3];
    let mut atb = [0.0f64; 3];
    for (n, &v) in x.iter().enumerate() {
        let (s, c) = (w * n as f64).sin_cos();
        let basis = [1.0, c, s];
        for i in 0..3 {
            atb[i] += basis[i] * v;
            for j in 0..3 {
                ata[i][j] += basis[i] * basis[j];
            }
        }
    }
    let coef = solve3(ata, atb).ok_or_else(|| Error::Degenerate("tone fit is singular".into()))?;
    let ss: f64 = x
        .iter()
        .enumerate()
        .map(|(n, &v)| {
            let (s, c) = (w * n as f64).sin_cos();
            (v - coef[0] - coef[1] * c - coef[2] * s).powi(2)
        })
        .sum();
    Ok(ToneFit {
        amplitude: coef[1].hypot(coef[2]),
        phase: (-coef[2]).atan2(coef[1]),
        offset: coef[0],
        residual_rms: (ss / x.len() as f64).sqrt(),
    })
}

#[allow(clippy::needless_range_loop)]
fn solve3(mut a: [[f64; 3]; 3], mut b: [f64; 3]) -> Option<[f64; 3]> {
    for col in 0..3 {
        let piv = (col..3).max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))?;
        if a[piv][col].abs() < 1e-12 * a[0][0].abs().max(1.0) {
            return None;
        }
        a.swap(col, piv);
        b.swap(col, piv);
        for r in col + 1..3 {
            let f = a[r][col] / a[col][col];
            for c in col..3 {
                a[r][c] -= f * a[col][c];
            }
            b[r] -= f * b[col];
        }
    }
    let mut x = [0.0; 3];
    for r in (0..3).rev() {
        let s: f64 = (r + 1..3).map(|c| a[r][c] * x[c]).sum();
        x[r] = (b[r] - s) / a[r][r];
    }
    Some(x)
}

#[derive(Debug, Clone, PartialEq)]
pub struct DynamicRangePoint {
    pub drive_vpp: f64,
    pub phase_pp: f64,
    pub snr_db: f64,
    /// Whether the point passed the SNR cut and entered the fit.
    pub used: bool,
    /// Deviation from the fitted line, dB. Zero when unused.
    pub residual_db: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DynamicRangeReport {
    /// Slope of `log(phase_pp)` against `log(drive)`.
    pub slope: f64,
    /// `20·log10(phase_pp)` at 1 Vpp.
    pub intercept_db: f64,
    pub r_squared: f64,
    /// Drive span, dB, of the longest run of fitted points within
    /// `LINEARITY_TOLERANCE_DB` of the line.
    pub range_db: f64,
    pub points: Vec<DynamicRangePoint>,
}

/// Log-log linearity of recovered peak-to-peak phase against drive
/// amplitude. `maps[i]` was recorded with drive `amplitudes_vpp[i]`; `fbg`
/// names the row carrying the tone.
pub fn dynamic_range(
    maps: &[PhaseMap],
    amplitudes_vpp: &[f64],
    fbg: usize,
    tone_hz: f64,
) -> Result<DynamicRangeReport> {
    if maps.len() != amplitudes_vpp.len() {
        return Err(Error::invalid("one amplitude per map is required"));
    }
    if maps.len() < 5 {
        return Err(Error::invalid(format!(
            "dynamic range needs at least 5 amplitude points, got {}",
            maps.len()
        )));
    }
    if amplitudes_vpp.iter().any(|&a| !(a > 0.0)) {
        return Err(Error::invalid("drive amplitudes must be positive"));
    }
    let mut points = maps
        .iter()
        .zip(amplitudes_vpp)
        .map(|(map, &v)| {
            check_row(map, fbg)?;
            let fit = fit_tone(map.row(fbg), map.frame_period_s, tone_hz)?;
            let snr_db = fit.snr_db();
            Ok(DynamicRangePoint {
                drive_vpp: v,
                phase_pp: fit.peak_to_peak(),
                snr_db,
                used: snr_db >= MIN_FIT_SNR_DB,
                residual_db: 0.0,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    points.sort_by(|a, b| a.drive_vpp.total_cmp(&b.drive_vpp));

    let xy: Vec<(f64, f64)> = points
        .iter()
        .filter(|p| p.used)
        .map(|p| (20.0 * p.drive_vpp.log10(), 20.0 * p.phase_pp.log10()))
        .collect();
    let n = xy.len() as f64;
    let mx = xy.iter().map(|p| p.0).sum::<f64>() / n;
    let my = xy.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = xy.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = xy.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let syy: f64 = xy.iter().map(|p| (p.1 - my).powi(2)).sum();
    if xy.len() < 2 || !(sxx > 1e-12) {
        return Err(Error::Degenerate(format!(
            "{} usable points with distinct drive levels; cannot fit a line",
            xy.len()
        )));
    }
    let slope = sxy / sxx;
    let intercept_db = my - slope * mx;
    let ss_res: f64 = xy.iter().map(|p| (p.1 - intercept_db - slope * p.0).powi(2)).sum();
    let r_squared = if syy > 0.0 { 1.0 - ss_res / syy } else { 1.0 };

    let mut best = 0.0f64;
    let mut run_start: Option<f64> = None;
    for p in points.iter_mut() {
        if !p.used {
            run_start = None;
            continue;
        }
        let x = 20.0 * p.drive_vpp.log10();
        p.residual_db = 20.0 * p.phase_pp.log10() - intercept_db - slope * x;
        if p.residual_db.abs() < LINEARITY_TOLERANCE_DB {
            let start = *run_start.get_or_insert(x);
            best = best.max(x - start);
        } else {
            run_start = None;
        }
    }
    Ok(DynamicRangeReport {
        slope,
        intercept_db,
        r_squared,
        range_db: best,
        points,
    })
}

/// Summary metrics of one run.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct MetricReport {
    pub per_fbg_std: Vec<f64>,
    pub mean_std: f64,
    pub f_max_hz: f64,
    pub frames: usize,
    pub unwrap_flags: usize,
    /// Peak-to-peak phase of the first sine stimulus on its own segment.
    pub tone_pp_rad: Option<f64>,
    pub crosstalk_db: Option<f64>,
    pub sensitivity: Option<f64>,
    pub psd: Option<Psd>,
}

impl MetricReport {
    /// `key = value` lines.
    pub fn write_text<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "frames = {}", self.frames)?;
        writeln!(w, "f_max_hz = {}", self.f_max_hz)?;
        writeln!(w, "mean_std_rad = {}", self.mean_std)?;
        for (k, s) in self.per_fbg_std.iter().enumerate() {
            writeln!(w, "std_rad.fbg_{k} = {s}")?;
        }
        writeln!(w, "unwrap_flags = {}", self.unwrap_flags)?;
        if let Some(pp) = self.tone_pp_rad {
            writeln!(w, "tone_pp_rad = {pp}")?;
        }
        if let Some(c) = self.crosstalk_db {
            writeln!(w, "crosstalk_db = {c}")?;
        }
        if let Some(s) = self.sensitivity {
            writeln!(w, "sensitivity_rad_per_sqrt_hz = {s}")?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, Normal};

    fn white(n: usize, sigma: f64, seed: u64) -> Vec<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let d = Normal::new(0.0, sigma).unwrap();
        (0..n).map(|_| d.sample(&mut rng)).collect()
    }

    fn tone(n: usize, t: f64, f: f64, amp: f64) -> Vec<f64> {
        (0..n).map(|i| amp * (TAU * f * i as f64 * t).sin()).collect()
    }

    fn map_of(row: Vec<f64>, t: f64) -> PhaseMap {
        let n = row.len();
        PhaseMap::from_rows(vec![vec![0.0; n], row], t).unwrap()
    }

    #[test]
    fn std_examples() {
        let t = 20.48e-6;
        let m = map_of(vec![1.5; 100], t);
        assert_eq!(phase_std(&m, m.duration_s()).unwrap().mean, 0.0);

        let m = map_of(white(5000, 0.01, 1), t);
        let s = phase_std(&m, m.duration_s()).unwrap();
        assert!((s.mean - 0.01).abs() < 0.0005, "{}", s.mean);
        assert_eq!(s.per_fbg[0], 0.0);

        // whole number of 500 Hz cycles
        let t = 1e-5;
        let m = map_of(tone(4000, t, 500.0, 0.7), t);
        let s = phase_std(&m, m.duration_s()).unwrap();
        assert!((s.mean - 0.7 / 2f64.sqrt()).abs() < 0.007);
        assert!(phase_std(&m, 1.0).is_err());
    }

    #[test]
    fn psd_tone_and_resolution() {
        let t = 1e-5;
        // 8 ms window
        let n = 800;
        let m = map_of(tone(n, t, 1000.0, 1.0), t);
        let p = psd(&m, 1).unwrap();
        assert!((p.resolution_hz - 1.0 / (n as f64 * t)).abs() < 1e-9);
        assert!((p.resolution_hz - 125.0).abs() < 1e-9);
        assert!((p.frequencies_hz[p.peak_bin()] - 1000.0).abs() <= p.resolution_hz / 2.0);
        assert!(psd(&map_of(vec![0.0; 10], t), 1).is_err());
        assert!((map_of(vec![0.0; 2], 20.48e-6).max_mechanical_frequency_hz() - 24_414.062_5).abs() < 1e-9);
    }

    #[test]
    fn white_noise_density() {
        let t = 1e-5;
        let m = map_of(white(8192, 0.02, 3), t);
        let p = psd(&m, 1).unwrap();
        let expect = 0.02f64.powi(2) / m.max_mechanical_frequency_hz();
        let avg = p.power[1..].iter().sum::<f64>() / (p.power.len() - 1) as f64;
        assert!((avg / expect - 1.0).abs() < 0.05);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]
        #[test]
        fn parseval(row in prop::collection::vec(-10.0f64..10.0, 64..300)) {
            let p = periodogram(&row, 1e4, Window::Rectangular).unwrap();
            let mu = mean(&row);
            let var = row.iter().map(|v| (v - mu).powi(2)).sum::<f64>() / row.len() as f64;
            prop_assert!((p.total_power() - var).abs() <= 1e-6 * var.max(1e-300));
        }

        #[test]
        fn std_ignores_offset(row in prop::collection::vec(-1.0f64..1.0, 2..100), c in -50.0f64..50.0) {
            let shifted: Vec<f64> = row.iter().map(|v| v + c).collect();
            prop_assert!((sample_std(&row) - sample_std(&shifted)).abs() < 1e-9);
        }

        #[test]
        fn psd_shift_invariant(row in prop::collection::vec(-1.0f64..1.0, 64..128), s in 0usize..64) {
            let mut rot = row.clone();
            rot.rotate_left(s % row.len());
            let a = periodogram(&row, 1.0, Window::Rectangular).unwrap();
            let b = periodogram(&rot, 1.0, Window::Rectangular).unwrap();
            for (x, y) in a.power.iter().zip(&b.power) {
                prop_assert!((x - y).abs() < 1e-9 * (1.0 + x.abs()));
            }
        }
    }

    #[test]
    fn sensitivity_recovers_injected_density() {
        let t = 20.48e-6;
        let n = 16384;
        let f_max: f64 = 0.5 / t;
        for d in [1e-5, 1e-4, 1e-3] {
            // density d over F_max: per-sample variance d²·F_max
            let noise = white(n, d * f_max.sqrt(), 11);
            let row: Vec<f64> = tone(n, t, 1000.0, std::f64::consts::PI)
                .iter()
                .zip(&noise)
                .map(|(a, b)| a + b)
                .collect();
            let s = sensitivity(&map_of(row, t), 1, 1000.0).unwrap();
            assert!((s / d - 1.0).abs() < 0.2, "{s} vs {d}");
        }
    }

    #[test]
    fn sensitivity_needs_a_tone() {
        let t = 1e-5;
        let m = map_of(white(1024, 0.1, 5), t);
        assert!(matches!(sensitivity(&m, 1, 1000.0), Err(Error::ToneNotFound { .. })));
    }

    #[test]
    fn noiseless_tone_floor_is_leakage_only() {
        let t = 20.48e-6;
        let m = map_of(tone(2048, t, 1000.0, 1.0), t);
        assert!(sensitivity(&m, 1, 1000.0).unwrap() < 1e-6);
    }

    #[test]
    fn sensitivity_independent_of_tone_amplitude() {
        let t = 20.48e-6;
        let noise = white(8192, 1e-2, 21);
        let s: Vec<f64> = [0.5, 1.0, 3.0]
            .iter()
            .map(|&a| {
                let row = tone(8192, t, 2000.0, a).iter().zip(&noise).map(|(x, y)| x + y).collect();
                sensitivity(&map_of(row, t), 1, 2000.0).unwrap()
            })
            .collect();
        assert!(s.iter().all(|v| (v / s[0] - 1.0).abs() < 0.05), "{s:?}");
    }

    #[test]
    fn crosstalk_localizes_segment() {
        let t = 1e-4;
        let n = 2000;
        let sig = tone(n, t, 500.0, 1.0);
        // cumulative rows: segment 2 excited, rows 2.. carry the tone
        let rows: Vec<Vec<f64>> = (0..5)
            .map(|k| if k >= 2 { sig.clone() } else { vec![0.0; n] })
            .collect();
        let m = PhaseMap::from_rows(rows, t).unwrap();
        let r = crosstalk(&m, 2, 500.0).unwrap();
        assert!(r.rejection_db < -60.0);
        assert!(crosstalk(&m, 3, 500.0).is_err());
    }

    #[test]
    fn tone_fit_recovers_amplitude() {
        let t = 1e-4;
        let x: Vec<f64> = (0..999)
            .map(|n| 0.3 + 1.7 * (TAU * 123.0 * n as f64 * t + 0.4).cos())
            .collect();
        let fit = fit_tone(&x, t, 123.0).unwrap();
        assert!((fit.amplitude - 1.7).abs() < 1e-9);
        assert!((fit.phase - 0.4).abs() < 1e-9);
        assert!((fit.offset - 0.3).abs() < 1e-9);
    }

    fn sweep_maps(amps: &[f64], noise: f64) -> Vec<PhaseMap> {
        let t = 20.48e-6;
        amps.iter()
            .enumerate()
            .map(|(i, &v)| {
                let nz = white(2000, noise, i as u64);
                let row = tone(2000, t, 1000.0, v / 3.0).iter().zip(&nz).map(|(a, b)| a + b).collect();
                map_of(row, t)
            })
            .collect()
    }

    #[test]
    fn dynamic_range_noiseless() {
        let amps = [0.1, 0.2, 0.5, 1.0, 2.0, 5.0, 10.0, 20.0];
        let r = dynamic_range(&sweep_maps(&amps, 0.0), &amps, 1, 1000.0).unwrap();
        assert!((r.slope - 1.0).abs() < 0.01);
        assert!(r.range_db >= 23.0);
        assert!(r.r_squared > 0.9999);
    }

    #[test]
    fn dynamic_range_floor_shrinks_range() {
        let amps = [0.1, 0.2, 0.5, 1.0, 2.0, 5.0, 10.0, 20.0];
        let clean = dynamic_range(&sweep_maps(&amps, 0.0), &amps, 1, 1000.0).unwrap();
        let noisy = dynamic_range(&sweep_maps(&amps, 0.01), &amps, 1, 1000.0).unwrap();
        // 0.1 Vpp gives 33 mrad amplitude: SNR about 7 dB over 10 mrad
        assert!(!noisy.points[0].used);
        assert!(noisy.range_db < clean.range_db);
    }

    #[test]
    fn dynamic_range_degenerate() {
        let amps = [1.0; 5];
        assert!(matches!(
            dynamic_range(&sweep_maps(&amps, 0.0), &amps, 1, 1000.0),
            Err(Error::Degenerate(_))
        ));
        assert!(dynamic_range(&sweep_maps(&amps[..4], 0.0), &amps[..4], 1, 1000.0).is_err());
    }

    #[test]
    fn report_text() {
        let r = MetricReport {
            per_fbg_std: vec![0.0, 0.01],
            mean_std: 0.01,
            f_max_hz: 100.0,
            frames: 10,
            ..Default::default()
        };
        let mut out = Vec::new();
        r.write_text(&mut out).unwrap();
        let s = String::from_utf8(out).unwrap();
        assert!(s.contains("mean_std_rad = 0.01\n"));
        assert!(s.contains("std_rad.fbg_1 = 0.01\n"));
        assert!(!s.contains("crosstalk"));
    }
}
